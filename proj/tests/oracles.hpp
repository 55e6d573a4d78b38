#pragma once

// Reference computations for the tests, written directly from the textbook
// definitions and sharing no code with the library.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "stlf/core/matrix.hpp"
#include "stlf/core/random.hpp"
#include "stlf/data/panel.hpp"
#include "stlf/nn/params.hpp"

namespace oracle {

using stlf::Matrix;

inline Matrix matmul(const Matrix& a, const Matrix& b) {
	Matrix out(a.rows(), b.cols());
	for (std::size_t i = 0; i < a.rows(); ++i)
		for (std::size_t j = 0; j < b.cols(); ++j) {
			long double s = 0.0L;
			for (std::size_t k = 0; k < a.cols(); ++k) s += static_cast<long double>(a(i, k)) * b(k, j);
			out(i, j) = static_cast<double>(s);
		}
	return out;
}

/// relu?(D^-1/2 (A + I) D^-1/2 H W + b) with A given without self-loops.
inline Matrix gcn_dense(const Matrix& a, const Matrix& h, const Matrix& w, const Matrix& b, bool relu) {
	const std::size_t n = a.rows();
	Matrix at = a;
	for (std::size_t i = 0; i < n; ++i) at(i, i) += 1.0;
	std::vector<double> deg(n, 0.0);
	for (std::size_t i = 0; i < n; ++i)
		for (std::size_t j = 0; j < n; ++j) deg[i] += at(i, j);
	Matrix norm(n, n);
	for (std::size_t i = 0; i < n; ++i)
		for (std::size_t j = 0; j < n; ++j) norm(i, j) = at(i, j) / std::sqrt(deg[i] * deg[j]);
	Matrix out = oracle::matmul(oracle::matmul(norm, h), w);
	for (std::size_t i = 0; i < out.rows(); ++i)
		for (std::size_t j = 0; j < out.cols(); ++j) {
			out(i, j) += b(0, j);
			if (relu) out(i, j) = std::max(0.0, out(i, j));
		}
	return out;
}

/// Minimum |x_i - y_j| cost over every monotone warping path from (0,0) to
/// (n-1,m-1), enumerated exhaustively. Cells with |i - j| > band are
/// forbidden when band >= 0.
inline double dtw_by_enumeration(const std::vector<double>& x, const std::vector<double>& y, long band = -1) {
	double best = std::numeric_limits<double>::infinity();
	std::function<void(std::size_t, std::size_t, double)> walk = [&](std::size_t i, std::size_t j, double acc) {
		if (band >= 0 && std::labs(static_cast<long>(i) - static_cast<long>(j)) > band) return;
		acc += std::abs(x[i] - y[j]);
		if (i + 1 == x.size() && j + 1 == y.size()) {
			best = std::min(best, acc);
			return;
		}
		if (i + 1 < x.size()) walk(i + 1, j, acc);
		if (j + 1 < y.size()) walk(i, j + 1, acc);
		if (i + 1 < x.size() && j + 1 < y.size()) walk(i + 1, j + 1, acc);
	};
	walk(0, 0, 0.0);
	return best;
}

/// Pearson correlation from raw moments.
inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
	const double n = static_cast<double>(x.size());
	long double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
	for (std::size_t t = 0; t < x.size(); ++t) {
		sx += x[t];
		sy += y[t];
		sxx += static_cast<long double>(x[t]) * x[t];
		syy += static_cast<long double>(y[t]) * y[t];
		sxy += static_cast<long double>(x[t]) * y[t];
	}
	const long double cov = sxy / n - (sx / n) * (sy / n);
	const long double vx = sxx / n - (sx / n) * (sx / n), vy = syy / n - (sy / n) * (sy / n);
	return static_cast<double>(cov / std::sqrt(vx * vy));
}

/// Panel with values f(node, step) on a half-hour grid starting at `start`.
inline stlf::data::LoadPanel panel(std::size_t n, std::size_t t, const std::function<double(std::size_t, std::size_t)>& f,
                                   stlf::Timestamp start = stlf::Timestamp::from_civil(2013, 1, 1)) {
	Matrix v(n, t);
	std::vector<std::string> ids;
	for (std::size_t i = 0; i < n; ++i) {
		ids.push_back("M" + std::to_string(100 + i));
		for (std::size_t s = 0; s < t; ++s) v(i, s) = f(i, s);
	}
	return stlf::data::LoadPanel(std::move(v), std::move(ids), {start, stlf::kHalfHour, t});
}

inline Matrix random_matrix(std::size_t r, std::size_t c, stlf::Rng& rng, double scale = 1.0) {
	Matrix m(r, c);
	for (std::size_t i = 0; i < m.size(); ++i) m[i] = rng.normal(0.0, scale);
	return m;
}

/// Largest mismatch between tape gradients and central differences of
/// `loss` over every parameter entry: |g - fd| / max(1, |g|, |fd|).
inline double gradient_error(stlf::nn::ParameterStore& params, const std::function<stlf::nn::Var(stlf::nn::Context&)>& loss,
                             double eps = 1e-6) {
	std::map<std::string, Matrix> analytic;
	{
		stlf::nn::Tape tape;
		stlf::nn::Context ctx(tape, params, true);
		stlf::nn::Var l = loss(ctx);
		tape.backward(l);
		analytic = ctx.gradients();
	}
	auto value = [&] {
		stlf::nn::Tape tape;
		stlf::nn::Context ctx(tape, params, false);
		return loss(ctx).value()(0, 0);
	};
	double worst = 0.0;
	for (auto& [name, m] : params) {
		for (std::size_t k = 0; k < m.size(); ++k) {
			const double keep = m[k];
			m[k] = keep + eps;
			const double up = value();
			m[k] = keep - eps;
			const double down = value();
			m[k] = keep;
			const double fd = (up - down) / (2 * eps);
			const double g = analytic.at(name)[k];
			worst = std::max(worst, std::abs(g - fd) / std::max({1.0, std::abs(g), std::abs(fd)}));
		}
	}
	return worst;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
	const auto p = std::filesystem::temp_directory_path() / ("stlf_test_" + name);
	std::filesystem::remove_all(p);
	std::filesystem::create_directories(p);
	return p;
}

} // namespace oracle
