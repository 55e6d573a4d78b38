#pragma once

// Graph propagation over batched node features.
//
// Node features are stored as rows ((b * nodes + n) * inner + t): batch
// element b, node n, and an optional inner index t (time step) for layouts
// that carry whole sequences per node.

#include <algorithm>
#include <cstdint>
#include <memory>
#include <numeric>
#include <vector>

#include "stlf/core/error.hpp"
#include "stlf/core/matrix.hpp"
#include "stlf/nn/autodiff.hpp"

namespace stlf::nn {

/// Per batch element, the canonical rank of each node: nodes sorted by their
/// input window (lexicographically, ties by index). Summing neighbours in rank
/// order makes every node-mixing reduction independent of how households are
/// numbered, so relabelling them permutes outputs bit-for-bit.
using NodeRanks = std::vector<std::vector<std::size_t>>;

inline NodeRanks canonical_ranks(const Tensor3& x) {
	NodeRanks ranks(x.batch, std::vector<std::size_t>(x.nodes));
	std::vector<std::size_t> order(x.nodes);
	for (std::size_t b = 0; b < x.batch; ++b) {
		std::iota(order.begin(), order.end(), 0);
		std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
			const auto si = x.series(b, i), sj = x.series(b, j);
			return std::lexicographical_compare(si.begin(), si.end(), sj.begin(), sj.end());
		});
		for (std::size_t r = 0; r < x.nodes; ++r) ranks[b][order[r]] = r;
	}
	return ranks;
}

/// Identity ranks (index order) for `batches` elements.
inline NodeRanks index_ranks(std::size_t batches, std::size_t nodes) {
	NodeRanks ranks(batches, std::vector<std::size_t>(nodes));
	for (auto& r : ranks) std::iota(r.begin(), r.end(), 0);
	return ranks;
}

/// Fixed-weight propagation: out(b, n) = sum_m w(n, m) * h(b, m), neighbours
/// visited in canonical rank order.
struct PropagationPlan {
	std::size_t batches = 0;
	std::size_t nodes = 0;
	// entries[b * nodes + n] = (m, w) pairs in summation order
	std::vector<std::vector<std::pair<std::uint32_t, double>>> entries;

	static std::shared_ptr<const PropagationPlan> build(const Matrix& adjacency, const NodeRanks& ranks) {
		if (adjacency.rows() != adjacency.cols()) throw ShapeError("propagation: adjacency must be square, got " + adjacency.shape_str());
		auto plan = std::make_shared<PropagationPlan>();
		plan->batches = ranks.size();
		plan->nodes = adjacency.rows();
		plan->entries.resize(plan->batches * plan->nodes);
		for (std::size_t b = 0; b < plan->batches; ++b) {
			if (ranks[b].size() != plan->nodes) throw ShapeError("propagation: ranks do not match adjacency size");
			for (std::size_t n = 0; n < plan->nodes; ++n) {
				auto& row = plan->entries[b * plan->nodes + n];
				for (std::size_t m = 0; m < plan->nodes; ++m)
					if (adjacency(n, m) != 0.0) row.emplace_back(static_cast<std::uint32_t>(m), adjacency(n, m));
				std::sort(row.begin(), row.end(), [&](const auto& a, const auto& c) { return ranks[b][a.first] < ranks[b][c.first]; });
			}
		}
		return plan;
	}
};

inline Var propagate(Var h, std::shared_ptr<const PropagationPlan> plan, std::size_t inner = 1) {
	const std::size_t n = plan->nodes, c = h.cols();
	if (h.rows() != plan->batches * n * inner)
		throw ShapeError("propagate: features " + h.value().shape_str() + " do not match " + std::to_string(plan->batches) + " x " +
		                 std::to_string(n) + " x " + std::to_string(inner));
	const Matrix& v = h.value();
	Matrix out(v.rows(), c);
	for (std::size_t b = 0; b < plan->batches; ++b)
		for (std::size_t i = 0; i < n; ++i)
			for (std::size_t t = 0; t < inner; ++t) {
				double* o = out.data() + ((b * n + i) * inner + t) * c;
				for (const auto& [m, w] : plan->entries[b * n + i]) {
					const double* src = v.data() + ((b * n + m) * inner + t) * c;
					for (std::size_t j = 0; j < c; ++j) o[j] += w * src[j];
				}
			}
	return h.tape->record(std::move(out), {h}, [h, plan, inner, n, c](Tape& t, const Matrix& g) {
		if (Matrix* gh = t.grad_slot(h))
			for (std::size_t b = 0; b < plan->batches; ++b)
				for (std::size_t i = 0; i < n; ++i)
					for (std::size_t tt = 0; tt < inner; ++tt) {
						const double* gi = g.data() + ((b * n + i) * inner + tt) * c;
						for (const auto& [m, w] : plan->entries[b * n + i]) {
							double* dst = gh->data() + ((b * n + m) * inner + tt) * c;
							for (std::size_t j = 0; j < c; ++j) dst[j] += w * gi[j];
						}
					}
	});
}

/// Propagation with a dense, possibly trainable adjacency `a` (nodes x nodes).
inline Var propagate_dense(Var a, Var h, std::size_t batches, std::size_t inner = 1) {
	const std::size_t n = a.rows(), c = h.cols();
	if (a.cols() != n || h.rows() != batches * n * inner)
		throw ShapeError("propagate_dense: adjacency " + a.value().shape_str() + " vs features " + h.value().shape_str());
	const Matrix &A = a.value(), &v = h.value();
	Matrix out(v.rows(), c);
	for (std::size_t b = 0; b < batches; ++b)
		for (std::size_t i = 0; i < n; ++i)
			for (std::size_t t = 0; t < inner; ++t) {
				double* o = out.data() + ((b * n + i) * inner + t) * c;
				for (std::size_t m = 0; m < n; ++m) {
					const double w = A(i, m);
					const double* src = v.data() + ((b * n + m) * inner + t) * c;
					for (std::size_t j = 0; j < c; ++j) o[j] += w * src[j];
				}
			}
	return h.tape->record(std::move(out), {a, h}, [a, h, batches, inner, n, c](Tape& t, const Matrix& g) {
		const Matrix &A = t.value(a), &v = t.value(h);
		Matrix* ga = t.grad_slot(a);
		Matrix* gh = t.grad_slot(h);
		for (std::size_t b = 0; b < batches; ++b)
			for (std::size_t i = 0; i < n; ++i)
				for (std::size_t tt = 0; tt < inner; ++tt) {
					const double* gi = g.data() + ((b * n + i) * inner + tt) * c;
					for (std::size_t m = 0; m < n; ++m) {
						const std::size_t src = ((b * n + m) * inner + tt) * c;
						if (ga) {
							double s = 0.0;
							for (std::size_t j = 0; j < c; ++j) s += gi[j] * v[src + j];
							(*ga)(i, m) += s;
						}
						if (gh) {
							const double w = A(i, m);
							for (std::size_t j = 0; j < c; ++j) (*gh)[src + j] += w * gi[j];
						}
					}
				}
	});
}

} // namespace stlf::nn
