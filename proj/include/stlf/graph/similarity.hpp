#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "stlf/core/error.hpp"
#include "stlf/core/log.hpp"
#include "stlf/core/matrix.hpp"
#include "stlf/core/random.hpp"
#include "stlf/data/panel.hpp"
#include "stlf/data/splits.hpp"

namespace stlf::graph {

enum class Measure { pearson, euclidean, dtw, correntropy };

inline std::string to_string(Measure m) {
	switch (m) {
	case Measure::pearson: return "pearson";
	case Measure::euclidean: return "euclidean";
	case Measure::dtw: return "dtw";
	case Measure::correntropy: return "correntropy";
	}
	return "?";
}

inline Measure measure_from_string(const std::string& s) {
	if (s == "pearson") return Measure::pearson;
	if (s == "euclidean") return Measure::euclidean;
	if (s == "dtw") return Measure::dtw;
	if (s == "correntropy") return Measure::correntropy;
	throw DataError("unknown similarity measure '" + s + "' (expected pearson|euclidean|dtw|correntropy)");
}

inline bool is_distance(Measure m) { return m == Measure::euclidean || m == Measure::dtw; }

/// Pairwise matrix for one measure. Distances (euclidean, dtw) have a zero
/// diagonal; similarities (pearson, correntropy) a unit diagonal.
struct SimilarityMatrix {
	Matrix values;
	Measure measure = Measure::pearson;
	std::map<std::string, double> params;

	std::size_t size() const { return values.rows(); }
	bool is_symmetric(double tol = 1e-9) const {
		for (std::size_t i = 0; i < values.rows(); ++i)
			for (std::size_t j = i + 1; j < values.cols(); ++j)
				if (std::abs(values(i, j) - values(j, i)) > tol) return false;
		return true;
	}
};

// ---------------------------------------------------------------------------
// Pairwise primitives

inline double pearson(std::span<const double> x, std::span<const double> y) {
	if (x.size() != y.size()) throw ShapeError("pearson: length mismatch");
	const double n = static_cast<double>(x.size());
	double mx = 0.0, my = 0.0;
	for (std::size_t t = 0; t < x.size(); ++t) {
		mx += x[t];
		my += y[t];
	}
	mx /= n;
	my /= n;
	double sxy = 0.0, sxx = 0.0, syy = 0.0;
	for (std::size_t t = 0; t < x.size(); ++t) {
		const double dx = x[t] - mx, dy = y[t] - my;
		sxy += dx * dy;
		sxx += dx * dx;
		syy += dy * dy;
	}
	if (sxx <= 0.0 || syy <= 0.0) return 0.0;
	return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

inline double euclidean(std::span<const double> x, std::span<const double> y) {
	if (x.size() != y.size()) throw ShapeError("euclidean: length mismatch");
	double s = 0.0;
	for (std::size_t t = 0; t < x.size(); ++t) s += (x[t] - y[t]) * (x[t] - y[t]);
	return std::sqrt(s);
}

/// Dynamic time warping with |x_i - y_j| local cost and unit steps
/// (match, insertion, deletion). `band` is the Sakoe-Chiba half-width; it is
/// widened to |len(x) - len(y)| so that the end cell stays reachable.
inline double dtw(std::span<const double> x, std::span<const double> y, std::optional<std::size_t> band = std::nullopt) {
	const std::size_t n = x.size(), m = y.size();
	if (n == 0 || m == 0) throw DataError("dtw: empty series");
	const std::size_t diff = n > m ? n - m : m - n;
	const std::size_t w = band ? std::max(*band, diff) : std::max(n, m);
	constexpr double inf = std::numeric_limits<double>::infinity();
	std::vector<double> prev(m, inf), cur(m, inf);
	std::size_t prev_lo = 0, prev_hi = 0;
	for (std::size_t i = 0; i < n; ++i) {
		const std::size_t lo = i > w ? i - w : 0;
		const std::size_t hi = std::min(m - 1, i + w);
		auto prev_at = [&](std::size_t j) { return (i > 0 && j >= prev_lo && j <= prev_hi) ? prev[j] : inf; };
		for (std::size_t j = lo; j <= hi; ++j) {
			const double cost = std::abs(x[i] - y[j]);
			double best;
			if (i == 0 && j == 0) {
				best = 0.0;
			} else {
				best = prev_at(j);                                   // insertion
				if (j > lo) best = std::min(best, cur[j - 1]);       // deletion
				if (j > 0) best = std::min(best, prev_at(j - 1));    // match
			}
			cur[j] = cost + best;
		}
		std::swap(prev, cur);
		prev_lo = lo;
		prev_hi = hi;
	}
	return prev[m - 1];
}

/// Mean Gaussian kernel of pointwise differences: (1/T) sum exp(-(x-y)^2 / (2 sigma^2)).
inline double correntropy(std::span<const double> x, std::span<const double> y, double sigma) {
	if (!(sigma > 0.0)) throw DataError("correntropy: sigma must be > 0");
	if (x.size() != y.size()) throw ShapeError("correntropy: length mismatch");
	if (x.empty()) throw DataError("correntropy: empty series");
	const double denom = 2.0 * sigma * sigma;
	double s = 0.0;
	for (std::size_t t = 0; t < x.size(); ++t) {
		const double d = x[t] - y[t];
		s += std::exp(-(d * d) / denom);
	}
	return s / static_cast<double>(x.size());
}

// ---------------------------------------------------------------------------
// Batch kernel interface

struct KernelParams {
	std::optional<std::size_t> band; // DTW only
	double sigma = 1.0;              // correntropy only
};

/// Batch pairwise entry point: rows of `series` are the time series; returns
/// the full N x N matrix (distance for euclidean/dtw, similarity otherwise).
class PairwiseKernel {
public:
	virtual ~PairwiseKernel() = default;
	virtual Matrix pairwise(const Matrix& series, Measure measure, const KernelParams& params) const = 0;
	virtual std::string name() const = 0;
};

/// Straightforward implementation; evaluates the upper triangle, optionally
/// spread over `threads` workers, and mirrors it. Each cell is written by
/// exactly one worker, so the result does not depend on the thread count.
class ReferenceKernel : public PairwiseKernel {
public:
	explicit ReferenceKernel(unsigned threads = 1) : threads_(std::max(1u, threads)) {}

	Matrix pairwise(const Matrix& series, Measure measure, const KernelParams& params) const override {
		const std::size_t n = series.rows();
		Matrix out(n, n);
		std::vector<std::pair<std::size_t, std::size_t>> pairs;
		pairs.reserve(n * (n - 1) / 2);
		for (std::size_t i = 0; i < n; ++i)
			for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
		auto eval = [&](std::size_t i, std::size_t j) {
			const auto x = series.row(i), y = series.row(j);
			switch (measure) {
			case Measure::pearson: return pearson(x, y);
			case Measure::euclidean: return euclidean(x, y);
			case Measure::dtw: return dtw(x, y, params.band);
			case Measure::correntropy: return correntropy(x, y, params.sigma);
			}
			return 0.0;
		};
		auto work = [&](std::size_t begin, std::size_t end) {
			for (std::size_t p = begin; p < end; ++p) {
				const auto [i, j] = pairs[p];
				const double v = eval(i, j);
				out(i, j) = v;
				out(j, i) = v;
			}
		};
		if (threads_ <= 1 || pairs.size() < 2 * threads_) {
			work(0, pairs.size());
		} else {
			std::vector<std::thread> pool;
			const std::size_t chunk = (pairs.size() + threads_ - 1) / threads_;
			for (unsigned t = 0; t < threads_; ++t) {
				const std::size_t b = t * chunk, e = std::min(pairs.size(), b + chunk);
				if (b < e) pool.emplace_back(work, b, e);
			}
			for (auto& th : pool) th.join();
		}
		const double diag = (measure == Measure::pearson || measure == Measure::correntropy) ? 1.0 : 0.0;
		for (std::size_t i = 0; i < n; ++i) out(i, i) = diag;
		return out;
	}

	std::string name() const override { return "reference"; }

private:
	unsigned threads_;
};

// ---------------------------------------------------------------------------
// Panel-level builders

/// A period restricted to the training partition of a split. Building graphs
/// from anything later would leak evaluation data into the model.
class GraphPeriod {
public:
	GraphPeriod(TimeRange range, Timestamp training_end) : range_(range) {
		if (range.empty()) throw DataError("graph period is empty");
		if (range.end > training_end)
			throw DataError("graph leakage: period " + range.start.iso() + " .. " + range.end.iso() +
			                " extends past the end of training (" + training_end.iso() + ")");
	}
	/// The whole training partition of `split`.
	static GraphPeriod training(const data::SplitSpec& split) { return {split.train(), split.train_end}; }

	const TimeRange& range() const { return range_; }

private:
	TimeRange range_;
};

struct BuildOptions {
	bool zscore = true;                           // euclidean / dtw
	std::optional<std::size_t> band = 48;         // dtw; nullopt = unconstrained
	std::optional<double> sigma;                  // correntropy; default median heuristic
	const PairwiseKernel* kernel = nullptr;       // defaults to a sequential ReferenceKernel
};

namespace detail {
inline Matrix period_rows(const data::LoadPanel& panel, const GraphPeriod& period) {
	const auto& tl = panel.timeline();
	const std::size_t lo = tl.lower_index(period.range().start), hi = tl.lower_index(period.range().end);
	if (hi < lo + 2) throw DataError("graph period holds fewer than 2 samples per node");
	Matrix out(panel.n_nodes(), hi - lo);
	for (std::size_t i = 0; i < panel.n_nodes(); ++i)
		std::copy_n(panel.values().row(i).begin() + static_cast<std::ptrdiff_t>(lo), hi - lo, out.row(i).begin());
	return out;
}

inline void zscore_rows(Matrix& m) {
	for (std::size_t i = 0; i < m.rows(); ++i) {
		auto r = m.row(i);
		double mean = 0.0;
		for (double v : r) mean += v;
		mean /= static_cast<double>(r.size());
		double ss = 0.0;
		for (double v : r) ss += (v - mean) * (v - mean);
		const double sd = std::sqrt(ss / static_cast<double>(r.size()));
		for (double& v : r) v = sd > 0.0 ? (v - mean) / sd : 0.0;
	}
}

inline void warn_constant_rows(const Matrix& m) {
	for (std::size_t i = 0; i < m.rows(); ++i) {
		const auto r = m.row(i);
		if (std::all_of(r.begin(), r.end(), [&](double v) { return v == r[0]; }))
			log::warn("pearson: node " + std::to_string(i) + " has zero variance; its correlations are set to 0");
	}
}

inline const PairwiseKernel& kernel_or_reference(const BuildOptions& opt) {
	static const ReferenceKernel reference;
	return opt.kernel ? *opt.kernel : reference;
}
} // namespace detail

/// Median of |x_t - y_t| over a deterministic sample of up to 64 node pairs.
inline double median_abs_difference(const Matrix& series, std::uint64_t seed = 0x5eed) {
	const std::size_t n = series.rows();
	std::vector<std::pair<std::size_t, std::size_t>> pairs;
	for (std::size_t i = 0; i < n; ++i)
		for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
	constexpr std::size_t kMaxPairs = 64;
	if (pairs.size() > kMaxPairs) {
		Rng rng(seed);
		rng.shuffle(pairs);
		pairs.resize(kMaxPairs);
	}
	std::vector<double> diffs;
	diffs.reserve(pairs.size() * series.cols());
	for (auto [i, j] : pairs)
		for (std::size_t t = 0; t < series.cols(); ++t) diffs.push_back(std::abs(series(i, t) - series(j, t)));
	if (diffs.empty()) return 1.0;
	auto mid = diffs.begin() + static_cast<std::ptrdiff_t>(diffs.size() / 2);
	std::nth_element(diffs.begin(), mid, diffs.end());
	return *mid > 0.0 ? *mid : 1.0;
}

inline SimilarityMatrix pearson_matrix(const data::LoadPanel& panel, const GraphPeriod& period, const BuildOptions& opt = {}) {
	Matrix rows = detail::period_rows(panel, period);
	detail::warn_constant_rows(rows);
	return {detail::kernel_or_reference(opt).pairwise(rows, Measure::pearson, {}), Measure::pearson, {}};
}

inline SimilarityMatrix euclidean_matrix(const data::LoadPanel& panel, const GraphPeriod& period, const BuildOptions& opt = {}) {
	Matrix rows = detail::period_rows(panel, period);
	if (opt.zscore) detail::zscore_rows(rows);
	return {detail::kernel_or_reference(opt).pairwise(rows, Measure::euclidean, {}),
	        Measure::euclidean,
	        {{"zscore", opt.zscore ? 1.0 : 0.0}}};
}

inline SimilarityMatrix dtw_matrix(const data::LoadPanel& panel, const GraphPeriod& period, const BuildOptions& opt = {}) {
	Matrix rows = detail::period_rows(panel, period);
	if (opt.zscore) detail::zscore_rows(rows);
	KernelParams kp;
	kp.band = opt.band;
	return {detail::kernel_or_reference(opt).pairwise(rows, Measure::dtw, kp),
	        Measure::dtw,
	        {{"zscore", opt.zscore ? 1.0 : 0.0}, {"band", opt.band ? static_cast<double>(*opt.band) : -1.0}}};
}

inline SimilarityMatrix correntropy_matrix(const data::LoadPanel& panel, const GraphPeriod& period, const BuildOptions& opt = {}) {
	Matrix rows = detail::period_rows(panel, period);
	KernelParams kp;
	kp.sigma = opt.sigma ? *opt.sigma : median_abs_difference(rows);
	if (!(kp.sigma > 0.0)) throw DataError("correntropy: sigma must be > 0");
	return {detail::kernel_or_reference(opt).pairwise(rows, Measure::correntropy, kp),
	        Measure::correntropy,
	        {{"sigma", kp.sigma}}};
}

inline SimilarityMatrix similarity_matrix(Measure m, const data::LoadPanel& panel, const GraphPeriod& period,
                                          const BuildOptions& opt = {}) {
	switch (m) {
	case Measure::pearson: return pearson_matrix(panel, period, opt);
	case Measure::euclidean: return euclidean_matrix(panel, period, opt);
	case Measure::dtw: return dtw_matrix(panel, period, opt);
	case Measure::correntropy: return correntropy_matrix(panel, period, opt);
	}
	throw InternalError("unreachable measure");
}

/// Gaussian conversion s = exp(-d^2 / gamma), gamma = mean squared
/// off-diagonal distance. Similarity inputs pass through unchanged.
inline SimilarityMatrix to_similarity(const SimilarityMatrix& sim) {
	if (!is_distance(sim.measure)) return sim;
	const std::size_t n = sim.size();
	double sum_sq = 0.0;
	for (std::size_t i = 0; i < n; ++i)
		for (std::size_t j = 0; j < n; ++j)
			if (i != j) sum_sq += sim.values(i, j) * sim.values(i, j);
	const double gamma = n > 1 ? sum_sq / static_cast<double>(n * (n - 1)) : 0.0;
	SimilarityMatrix out = sim;
	for (std::size_t i = 0; i < n; ++i)
		for (std::size_t j = 0; j < n; ++j) {
			const double d = sim.values(i, j);
			out.values(i, j) = (i == j || gamma <= 0.0) ? 1.0 : std::exp(-(d * d) / gamma);
		}
	out.params["gamma"] = gamma;
	return out;
}

} // namespace stlf::graph
