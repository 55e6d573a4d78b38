#pragma once

#include <cmath>
#include <vector>

#include "stlf/core/error.hpp"
#include "stlf/core/log.hpp"
#include "stlf/core/matrix.hpp"
#include "stlf/data/panel.hpp"
#include "stlf/data/splits.hpp"

namespace stlf::data {

/// Per-node standardization fitted on training rows only.
class Scaler {
public:
	static constexpr double kStdFloor = 1e-8;

	Scaler() = default;
	Scaler(std::vector<double> mean, std::vector<double> stddev) : mean_(std::move(mean)), std_(std::move(stddev)) {}

	static Scaler fit(const Matrix& values, const Timeline& tl, TimeRange train) {
		const std::size_t lo = tl.lower_index(train.start), hi = tl.lower_index(train.end);
		if (hi <= lo) throw DataError("fit_scaler: empty training partition");
		const double count = static_cast<double>(hi - lo);
		std::vector<double> mean(values.rows()), sd(values.rows());
		for (std::size_t i = 0; i < values.rows(); ++i) {
			double s = 0.0;
			for (std::size_t t = lo; t < hi; ++t) s += values(i, t);
			const double m = s / count;
			double ss = 0.0;
			for (std::size_t t = lo; t < hi; ++t) ss += (values(i, t) - m) * (values(i, t) - m);
			double v = std::sqrt(ss / count);
			if (v < kStdFloor) {
				log::warn("fit_scaler: node " + std::to_string(i) + " has zero variance on training rows; stddev floored");
				v = kStdFloor;
			}
			mean[i] = m;
			sd[i] = v;
		}
		return Scaler(std::move(mean), std::move(sd));
	}

	static Scaler fit(const LoadPanel& panel, const SplitSpec& spec) {
		return fit(panel.values(), panel.timeline(), spec.train());
	}

	const std::vector<double>& mean() const { return mean_; }
	const std::vector<double>& stddev() const { return std_; }
	std::size_t n_nodes() const { return mean_.size(); }

	double transform(std::size_t node, double x) const { return (x - mean_[node]) / std_[node]; }
	double inverse(std::size_t node, double z) const { return z * std_[node] + mean_[node]; }

	/// Rows are nodes.
	Matrix transform(const Matrix& m) const {
		check(m.rows());
		Matrix out(m.rows(), m.cols());
		for (std::size_t i = 0; i < m.rows(); ++i)
			for (std::size_t t = 0; t < m.cols(); ++t) out(i, t) = transform(i, m(i, t));
		return out;
	}
	Matrix inverse(const Matrix& m) const {
		check(m.rows());
		Matrix out(m.rows(), m.cols());
		for (std::size_t i = 0; i < m.rows(); ++i)
			for (std::size_t t = 0; t < m.cols(); ++t) out(i, t) = inverse(i, m(i, t));
		return out;
	}
	Tensor3 transform(const Tensor3& x) const { return map(x, [this](std::size_t n, double v) { return transform(n, v); }); }
	Tensor3 inverse(const Tensor3& x) const { return map(x, [this](std::size_t n, double v) { return inverse(n, v); }); }

	SeriesPanel transform(const LoadPanel& panel) const {
		return {transform(panel.values()), panel.node_ids(), panel.timeline()};
	}

private:
	void check(std::size_t n) const {
		if (n != mean_.size())
			throw ShapeError("scaler fitted on " + std::to_string(mean_.size()) + " nodes, applied to " + std::to_string(n));
	}
	template <typename F>
	Tensor3 map(const Tensor3& x, F f) const {
		check(x.nodes);
		Tensor3 out(x.batch, x.nodes, x.length);
		for (std::size_t b = 0; b < x.batch; ++b)
			for (std::size_t n = 0; n < x.nodes; ++n)
				for (std::size_t l = 0; l < x.length; ++l) out(b, n, l) = f(n, x(b, n, l));
		return out;
	}

	std::vector<double> mean_;
	std::vector<double> std_;
};

inline Scaler fit_scaler(const LoadPanel& panel, const SplitSpec& spec) { return Scaler::fit(panel, spec); }

} // namespace stlf::data
