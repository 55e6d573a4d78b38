#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "stlf/core/error.hpp"
#include "stlf/core/matrix.hpp"
#include "stlf/core/time.hpp"
#include "stlf/data/window.hpp"

namespace stlf::eval {

struct Metrics {
	double mae = 0.0;
	double mape = 0.0; // percent
	double rmse = 0.0;
};

namespace detail {
inline void check_shapes(const Matrix& truth, const Matrix& pred, const char* what) {
	if (truth.rows() != pred.rows() || truth.cols() != pred.cols())
		throw ShapeError(std::string(what) + ": truth " + truth.shape_str() + " vs prediction " + pred.shape_str());
	if (truth.size() == 0) throw DataError(std::string(what) + ": empty input");
}
} // namespace detail

/// (1/NT) sum |x - x_hat|
inline double mae(const Matrix& truth, const Matrix& pred) {
	detail::check_shapes(truth, pred, "mae");
	double s = 0.0;
	for (std::size_t i = 0; i < truth.size(); ++i) s += std::abs(truth[i] - pred[i]);
	return s / static_cast<double>(truth.size());
}

/// (1/NT) sum |x - x_hat| / |x| * 100
inline double mape(const Matrix& truth, const Matrix& pred) {
	detail::check_shapes(truth, pred, "mape");
	std::vector<std::string> zeros;
	std::size_t n_zero = 0;
	for (std::size_t i = 0; i < truth.rows(); ++i)
		for (std::size_t t = 0; t < truth.cols(); ++t)
			if (truth(i, t) == 0.0 && ++n_zero <= 20) zeros.push_back("(" + std::to_string(i) + "," + std::to_string(t) + ")");
	if (n_zero) {
		std::string msg = "mape: " + std::to_string(n_zero) + " zero true value(s) at (node,t):";
		for (const auto& z : zeros) msg += " " + z;
		if (n_zero > zeros.size()) msg += " ...";
		throw DataError(msg);
	}
	double s = 0.0;
	for (std::size_t i = 0; i < truth.size(); ++i) s += std::abs(truth[i] - pred[i]) / std::abs(truth[i]);
	return 100.0 * s / static_cast<double>(truth.size());
}

/// sqrt((1/NT) sum (x - x_hat)^2)
inline double rmse(const Matrix& truth, const Matrix& pred) {
	detail::check_shapes(truth, pred, "rmse");
	double s = 0.0;
	for (std::size_t i = 0; i < truth.size(); ++i) s += (truth[i] - pred[i]) * (truth[i] - pred[i]);
	return std::sqrt(s / static_cast<double>(truth.size()));
}

inline Metrics evaluate(const Matrix& truth, const Matrix& pred) { return {mae(truth, pred), mape(truth, pred), rmse(truth, pred)}; }

/// Household sum of each series (1 x T), Wh to kWh.
inline Matrix aggregate_series(const Matrix& m) {
	Matrix out(1, m.cols());
	for (std::size_t i = 0; i < m.rows(); ++i)
		for (std::size_t t = 0; t < m.cols(); ++t) out(0, t) += m(i, t);
	out *= 1.0 / 1000.0;
	return out;
}

/// Metrics of the summed forecast against the summed truth, in kWh.
inline Metrics aggregate_eval(const Matrix& truth, const Matrix& pred) {
	detail::check_shapes(truth, pred, "aggregate_eval");
	return evaluate(aggregate_series(truth), aggregate_series(pred));
}

/// Forecasts laid out as one series per node (N x T) with the instant of
/// every column.
struct EvalSeries {
	Matrix values;
	std::vector<Timestamp> times;
};

/// Concatenates the windows of a [B x N x H] tensor along time; `origins[b]`
/// is the first instant of window b.
inline EvalSeries concat_windows(const Tensor3& x, const std::vector<Timestamp>& origins, std::int64_t step = kHalfHour) {
	if (origins.size() != x.batch) throw ShapeError("concat_windows: " + std::to_string(origins.size()) + " origins for " + x.shape_str());
	EvalSeries out{Matrix(x.nodes, x.batch * x.length), {}};
	out.times.reserve(x.batch * x.length);
	for (std::size_t b = 0; b < x.batch; ++b)
		for (std::size_t h = 0; h < x.length; ++h) {
			for (std::size_t n = 0; n < x.nodes; ++n) out.values(n, b * x.length + h) = x(b, n, h);
			out.times.push_back(origins[b] + static_cast<std::int64_t>(h) * step);
		}
	return out;
}

} // namespace stlf::eval
