#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stlf/core/error.hpp"
#include "stlf/core/log.hpp"
#include "stlf/core/matrix.hpp"
#include "stlf/data/scaler.hpp"
#include "stlf/data/splits.hpp"
#include "stlf/data/window.hpp"
#include "stlf/models/config.hpp"

namespace stlf::models {

/// Common forecasting interface: [B x N x W] scaled inputs to [B x N x H]
/// scaled forecasts.
class ForecastModel {
public:
	ForecastModel(ModelConfig config, std::size_t n_nodes) : config_(std::move(config)), n_nodes_(n_nodes) {
		if (n_nodes_ < 1) throw DataError("model needs at least one node");
		if (horizon() < 1) throw DataError("horizon must be >= 1");
		if (window() < 1) throw DataError("window must be >= 1");
	}
	virtual ~ForecastModel() = default;

	const ModelConfig& config() const { return config_; }
	ModelId id() const { return config_.model_id; }
	Architecture architecture() const { return config_.architecture(); }
	std::size_t n_nodes() const { return n_nodes_; }
	/// Original plus virtual nodes.
	virtual std::size_t total_nodes() const { return n_nodes_; }
	std::size_t window() const { return config_.window(); }
	std::size_t horizon() const { return config_.horizon(); }
	virtual bool trainable() const { return false; }

	Tensor3 forecast(const Tensor3& x) const {
		check_input(x);
		Tensor3 y = predict(x);
		if (y.batch != x.batch || y.nodes != n_nodes_ || y.length != horizon())
			throw InternalError(to_string(id()) + ": forecast shape " + y.shape_str());
		if (!y.all_finite()) throw InternalError(to_string(id()) + ": non-finite forecast");
		return y;
	}

	/// Forecast in the original units.
	Tensor3 forecast_original(const Tensor3& x, const data::Scaler& scaler) const { return scaler.inverse(forecast(x)); }

	void check_input(const Tensor3& x) const {
		if (x.nodes != n_nodes_ || x.length != window())
			throw ShapeError(to_string(id()) + ": expected input [B x " + std::to_string(n_nodes_) + " x " + std::to_string(window()) +
			                 "], got " + x.shape_str());
		for (std::size_t i = 0; i < x.data.size(); ++i)
			if (!std::isfinite(x.data[i])) {
				const std::size_t l = i % x.length, bn = i / x.length;
				throw DataError("forecast: non-finite input at batch " + std::to_string(bn / x.nodes) + ", node " +
				                std::to_string(bn % x.nodes) + ", step " + std::to_string(l));
			}
	}

protected:
	virtual Tensor3 predict(const Tensor3& x) const = 0;

private:
	ModelConfig config_;
	std::size_t n_nodes_;
};

/// Repeats the value of the same half-hour on the previous day.
class SeasonalNaive final : public ForecastModel {
public:
	static constexpr std::size_t kLag = data::kDayAheadSteps;

	SeasonalNaive(ModelConfig config, std::size_t n_nodes) : ForecastModel(std::move(config), n_nodes) {
		if (window() < kLag) throw DataError("seasonal_naive needs a window of at least " + std::to_string(kLag) + " steps");
	}

protected:
	Tensor3 predict(const Tensor3& x) const override {
		Tensor3 y(x.batch, x.nodes, horizon());
		const std::size_t w = x.length;
		for (std::size_t b = 0; b < x.batch; ++b)
			for (std::size_t n = 0; n < x.nodes; ++n)
				for (std::size_t h = 0; h < horizon(); ++h) y(b, n, h) = x(b, n, w - kLag + h % kLag);
		return y;
	}
};

/// Vector autoregression y_t = c + sum_l A_l y_{t-l}, multi-step by recursion.
class VarModel final : public ForecastModel {
public:
	VarModel(ModelConfig config, std::size_t n_nodes, std::size_t order, Matrix intercept, std::vector<Matrix> lags)
	    : ForecastModel(std::move(config), n_nodes), order_(order), intercept_(std::move(intercept)), lags_(std::move(lags)) {
		if (window() < order_) throw DataError("var: window must cover the lag order");
	}

	std::size_t order() const { return order_; }
	/// N x 1
	const Matrix& intercept() const { return intercept_; }
	/// A_l (N x N), l = 1..p; A_l(i, j) is the effect of node j at lag l on node i.
	const Matrix& coefficients(std::size_t lag) const { return lags_.at(lag - 1); }

protected:
	Tensor3 predict(const Tensor3& x) const override {
		const std::size_t n = n_nodes(), w = x.length, h_len = horizon();
		Tensor3 y(x.batch, n, h_len);
		std::vector<double> hist(n * (w + h_len));
		for (std::size_t b = 0; b < x.batch; ++b) {
			for (std::size_t i = 0; i < n; ++i)
				for (std::size_t t = 0; t < w; ++t) hist[t * n + i] = x(b, i, t);
			for (std::size_t h = 0; h < h_len; ++h) {
				const std::size_t t = w + h;
				for (std::size_t i = 0; i < n; ++i) {
					double s = intercept_[i];
					for (std::size_t l = 1; l <= order_; ++l) {
						const Matrix& a = lags_[l - 1];
						const double* prev = hist.data() + (t - l) * n;
						for (std::size_t j = 0; j < n; ++j) s += a(i, j) * prev[j];
					}
					hist[t * n + i] = s;
					y(b, i, h) = s;
				}
			}
		}
		return y;
	}

private:
	std::size_t order_;
	Matrix intercept_;
	std::vector<Matrix> lags_;
};

inline constexpr double kVarRidge = 1e-6;

/// Least-squares VAR(p) fit on columns [begin, end) of `values` (N x T).
inline VarModel fit_var(const Matrix& values, std::size_t begin, std::size_t end, std::size_t order, ModelConfig config = ModelConfig::make(ModelId::var)) {
	if (order < 1) throw DataError("var: order p must be >= 1");
	if (end > values.cols() || begin >= end) throw DataError("var: empty training range");
	const std::size_t n = values.rows(), span = end - begin;
	const std::size_t cols = 1 + n * order;
	const std::size_t rows = span > order ? span - order : 0;
	if (rows < 10 * cols)
		throw DataError("var: " + std::to_string(rows) + " training rows, need at least " + std::to_string(10 * cols) +
		                " for N=" + std::to_string(n) + ", p=" + std::to_string(order));

	Eigen::MatrixXd design(rows, cols), target(rows, n);
	for (std::size_t r = 0; r < rows; ++r) {
		const std::size_t t = begin + order + r;
		design(r, 0) = 1.0;
		for (std::size_t l = 1; l <= order; ++l)
			for (std::size_t j = 0; j < n; ++j) design(r, 1 + (l - 1) * n + j) = values(j, t - l);
		for (std::size_t i = 0; i < n; ++i) target(r, i) = values(i, t);
	}
	Eigen::MatrixXd gram = design.transpose() * design;
	const Eigen::MatrixXd rhs = design.transpose() * target;
	Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
	Eigen::MatrixXd coef;
	if (lu.rank() < static_cast<Eigen::Index>(cols)) {
		log::warn("var: singular design matrix, using ridge regularisation " + std::to_string(kVarRidge));
		gram.diagonal().array() += kVarRidge;
		coef = gram.ldlt().solve(rhs);
	} else {
		coef = lu.solve(rhs);
	}

	Matrix intercept(n, 1);
	std::vector<Matrix> lags(order, Matrix(n, n));
	for (std::size_t i = 0; i < n; ++i) {
		intercept[i] = coef(0, i);
		for (std::size_t l = 1; l <= order; ++l)
			for (std::size_t j = 0; j < n; ++j) lags[l - 1](i, j) = coef(1 + (l - 1) * n + j, i);
	}
	config.model_id = ModelId::var;
	config.set("order", static_cast<double>(order));
	if (!config.has("window")) config.set("window", static_cast<double>(std::max<std::size_t>(order, 1)));
	return VarModel(std::move(config), n, order, std::move(intercept), std::move(lags));
}

/// Fits on the (unscaled) training months of `spec`.
inline VarModel fit_var(const data::LoadPanel& panel, const data::SplitSpec& spec, std::size_t order,
                        ModelConfig config = ModelConfig::make(ModelId::var)) {
	const auto& tl = panel.timeline();
	const auto train = spec.train();
	return fit_var(panel.values(), tl.lower_index(train.start), tl.lower_index(train.end), order, std::move(config));
}

} // namespace stlf::models
