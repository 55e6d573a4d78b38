#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "stlf/core/error.hpp"
#include "stlf/core/matrix.hpp"
#include "stlf/core/time.hpp"
#include "stlf/eval/metrics.hpp"

namespace stlf::eval {

struct Moments {
	double mean = 0.0;
	double median = 0.0;
	double skewness = 0.0; // population third standardized moment; 0 for constant data
};

inline Moments moments(std::vector<double> v) {
	if (v.empty()) throw DataError("moments: empty sample");
	Moments m;
	const double n = static_cast<double>(v.size());
	for (double x : v) m.mean += x;
	m.mean /= n;
	double m2 = 0.0, m3 = 0.0;
	for (double x : v) {
		const double d = x - m.mean;
		m2 += d * d;
		m3 += d * d * d;
	}
	m2 /= n;
	m3 /= n;
	m.skewness = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
	std::sort(v.begin(), v.end());
	const std::size_t k = v.size() / 2;
	m.median = v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
	return m;
}

struct ModelErrors {
	std::string model_id;
	std::vector<double> errors; // forecast - truth, one per household
	std::vector<std::size_t> counts;
	Moments stats;
	double mean_minus_median() const { return stats.mean - stats.median; }
};

struct ErrorHistogram {
	Timestamp timestamp;
	std::vector<std::string> node_ids;
	std::vector<double> edges; // bins + 1 ascending edges shared by all models
	std::vector<ModelErrors> models;
};

inline std::size_t bin_of(const std::vector<double>& edges, double x) {
	const auto it = std::upper_bound(edges.begin(), edges.end(), x);
	const std::size_t k = static_cast<std::size_t>(it - edges.begin());
	const std::size_t bins = edges.size() - 1;
	return k == 0 ? 0 : std::min(k - 1, bins - 1);
}

/// Per-household errors of each model at one instant of the evaluation grid.
inline ErrorHistogram error_histogram(const EvalSeries& truth, const std::vector<std::pair<std::string, Matrix>>& preds, Timestamp at,
                                      std::size_t bins, std::vector<std::string> node_ids = {}) {
	if (bins < 1) throw DataError("error_histogram: need at least one bin");
	const auto it = std::find(truth.times.begin(), truth.times.end(), at);
	if (it == truth.times.end()) throw DataError("error_histogram: " + at.iso() + " is not on the evaluation grid");
	const std::size_t col = static_cast<std::size_t>(it - truth.times.begin());
	const std::size_t n = truth.values.rows();

	ErrorHistogram h;
	h.timestamp = at;
	h.node_ids = std::move(node_ids);
	double lo = INFINITY, hi = -INFINITY;
	for (const auto& [id, p] : preds) {
		if (p.rows() != n || p.cols() != truth.values.cols())
			throw ShapeError("error_histogram: " + id + " forecast " + p.shape_str() + " vs truth " + truth.values.shape_str());
		ModelErrors me{id, std::vector<double>(n), {}, {}};
		for (std::size_t i = 0; i < n; ++i) {
			me.errors[i] = p(i, col) - truth.values(i, col);
			lo = std::min(lo, me.errors[i]);
			hi = std::max(hi, me.errors[i]);
		}
		me.stats = moments(me.errors);
		h.models.push_back(std::move(me));
	}
	if (h.models.empty()) throw DataError("error_histogram: no forecasts given");
	if (hi - lo <= 0.0) {
		lo -= 0.5;
		hi += 0.5;
	}
	h.edges.resize(bins + 1);
	for (std::size_t k = 0; k <= bins; ++k) h.edges[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(bins);
	h.edges.back() = hi;
	for (auto& me : h.models) {
		me.counts.assign(bins, 0);
		for (double e : me.errors) ++me.counts[bin_of(h.edges, e)];
	}
	return h;
}

} // namespace stlf::eval
