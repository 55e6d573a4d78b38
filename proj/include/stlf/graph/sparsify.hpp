#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <variant>
#include <vector>

#include "stlf/core/error.hpp"
#include "stlf/core/log.hpp"
#include "stlf/graph/graph.hpp"
#include "stlf/graph/similarity.hpp"

namespace stlf::graph {

struct Threshold {
	double tau;
};
struct KNearest {
	std::size_t k;
};
/// Threshold chosen by bisection so that the mean node degree reaches
/// `target_degree` (clamped to N - 1).
struct AutoThreshold {
	double target_degree = 10.0;
};

using SparsifyRule = std::variant<Threshold, KNearest, AutoThreshold>;

/// "threshold:0.5", "threshold:auto", "threshold:auto:6", "knn:10".
inline SparsifyRule parse_rule(const std::string& text) {
	auto fail = [&] { return DataError("invalid sparsify rule '" + text + "' (expected threshold:<tau>|threshold:auto[:deg]|knn:<k>)"); };
	const auto colon = text.find(':');
	if (colon == std::string::npos) throw fail();
	const std::string kind = text.substr(0, colon), arg = text.substr(colon + 1);
	try {
		if (kind == "knn") {
			std::size_t pos = 0;
			const auto k = std::stoul(arg, &pos);
			if (pos != arg.size()) throw fail();
			return KNearest{k};
		}
		if (kind == "threshold") {
			if (arg == "auto") return AutoThreshold{};
			if (arg.rfind("auto:", 0) == 0) return AutoThreshold{std::stod(arg.substr(5))};
			std::size_t pos = 0;
			const double tau = std::stod(arg, &pos);
			if (pos != arg.size()) throw fail();
			return Threshold{tau};
		}
	} catch (const std::logic_error&) {
		throw fail();
	}
	throw fail();
}

namespace detail {
inline std::size_t directed_edges_at(const Matrix& s, double tau) {
	std::size_t count = 0;
	for (std::size_t i = 0; i < s.rows(); ++i)
		for (std::size_t j = 0; j < s.cols(); ++j)
			if (i != j && s(i, j) >= tau && s(i, j) > 0.0) ++count;
	return count;
}

inline void check_tau(const SimilarityMatrix& sim, double tau) {
	const double lo = sim.measure == Measure::pearson ? -1.0 : 0.0;
	if (!(tau >= lo && tau <= 1.0))
		throw DataError("threshold " + std::to_string(tau) + " outside the similarity range of " + to_string(sim.measure));
}
} // namespace detail

/// Largest tau whose thresholded graph still has mean degree >= target.
inline double auto_threshold(const SimilarityMatrix& raw, double target_degree) {
	const SimilarityMatrix sim = to_similarity(raw);
	const std::size_t n = sim.size();
	const double target = std::min(target_degree, static_cast<double>(n - 1));
	auto mean_degree = [&](double tau) { return static_cast<double>(detail::directed_edges_at(sim.values, tau)) / static_cast<double>(n); };
	double lo = sim.measure == Measure::pearson ? -1.0 : 0.0, hi = 1.0;
	if (mean_degree(lo) < target) return lo;
	for (int it = 0; it < 80; ++it) {
		const double mid = 0.5 * (lo + hi);
		if (mean_degree(mid) >= target) lo = mid;
		else hi = mid;
	}
	return lo;
}

/// Signal graph from a similarity (or distance) matrix. Edges carry the
/// similarity as weight; only strictly positive similarities become edges.
inline Graph sparsify(const SimilarityMatrix& raw, const SparsifyRule& rule) {
	const SimilarityMatrix sim = to_similarity(raw);
	const std::size_t n = sim.size();
	if (n < 2) throw DataError("sparsify: need at least 2 nodes");
	std::vector<Edge> edges;
	std::map<std::string, double> params = sim.params;

	auto threshold_edges = [&](double tau) {
		for (std::size_t i = 0; i < n; ++i)
			for (std::size_t j = 0; j < n; ++j)
				if (i != j && sim.values(i, j) >= tau && sim.values(i, j) > 0.0) edges.push_back({i, j, sim.values(i, j)});
		params["tau"] = tau;
	};

	if (const auto* t = std::get_if<Threshold>(&rule)) {
		detail::check_tau(sim, t->tau);
		threshold_edges(t->tau);
	} else if (const auto* a = std::get_if<AutoThreshold>(&rule)) {
		threshold_edges(auto_threshold(raw, a->target_degree));
		params["target_degree"] = a->target_degree;
	} else {
		const std::size_t k = std::get<KNearest>(rule).k;
		if (k < 1 || k >= n) throw DataError("sparsify: knn requires 1 <= k < N");
		Matrix keep(n, n);
		std::vector<std::size_t> order;
		for (std::size_t i = 0; i < n; ++i) {
			order.resize(n);
			std::iota(order.begin(), order.end(), 0);
			order.erase(order.begin() + static_cast<std::ptrdiff_t>(i));
			std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return sim.values(i, a) > sim.values(i, b); });
			for (std::size_t r = 0; r < k; ++r) {
				keep(i, order[r]) = 1.0;
				keep(order[r], i) = 1.0; // union symmetrization
			}
		}
		for (std::size_t i = 0; i < n; ++i)
			for (std::size_t j = 0; j < n; ++j)
				if (keep(i, j) > 0.0 && sim.values(i, j) > 0.0) edges.push_back({i, j, sim.values(i, j)});
		params["k"] = static_cast<double>(k);
	}
	if (edges.empty()) log::warn("sparsify: resulting " + to_string(sim.measure) + " graph has no edges");
	Graph g(n, 0, GraphKind::signal, std::move(edges));
	g.measure = to_string(sim.measure);
	g.params = std::move(params);
	return g;
}

} // namespace stlf::graph
