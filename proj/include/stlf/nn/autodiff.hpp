#pragma once

// Reverse-mode automatic differentiation over dense matrices.
//
// A Tape records every operation of one forward pass; Var is a handle into
// it. Gradients are only propagated into operands that (transitively) depend
// on a variable leaf, so constants such as inputs and fixed adjacency
// matrices cost nothing on the backward pass.

#include <cmath>
#include <cstdint>
#include <algorithm>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stlf/core/error.hpp"
#include "stlf/core/matrix.hpp"

namespace stlf::nn {

class Tape;

struct Var {
	Tape* tape = nullptr;
	std::size_t id = 0;

	const Matrix& value() const;
	std::size_t rows() const { return value().rows(); }
	std::size_t cols() const { return value().cols(); }
};

class Tape {
public:
	using Backward = std::function<void(Tape&, const Matrix&)>;

	Tape() { nodes_.reserve(1024); }
	Tape(const Tape&) = delete;
	Tape& operator=(const Tape&) = delete;

	Var constant(Matrix v) { return push(std::move(v), false, {}); }
	Var variable(Matrix v) { return push(std::move(v), true, {}); }

	/// Records an op. `backward` is only kept when some input needs a gradient.
	Var record(Matrix value, std::initializer_list<Var> inputs, Backward backward) {
		bool needs = false;
		for (const Var& in : inputs) needs = needs || nodes_[in.id].requires_grad;
		return push(std::move(value), needs, needs ? std::move(backward) : Backward{});
	}
	Var record(Matrix value, std::span<const Var> inputs, Backward backward) {
		bool needs = false;
		for (const Var& in : inputs) needs = needs || nodes_[in.id].requires_grad;
		return push(std::move(value), needs, needs ? std::move(backward) : Backward{});
	}

	const Matrix& value(Var v) const { return nodes_[v.id].value; }
	bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

	/// Gradient accumulated into `v` by the last backward(); zeros if untouched.
	Matrix grad(Var v) const {
		const Node& n = nodes_[v.id];
		return n.grad.empty() ? Matrix(n.value.rows(), n.value.cols()) : n.grad;
	}

	/// Accumulator for `v`, allocated on first use. Null when `v` is constant.
	Matrix* grad_slot(Var v) {
		Node& n = nodes_[v.id];
		if (!n.requires_grad) return nullptr;
		if (n.grad.empty()) n.grad = Matrix(n.value.rows(), n.value.cols());
		return &n.grad;
	}

	void backward(Var scalar) {
		const Matrix& out = value(scalar);
		if (out.rows() != 1 || out.cols() != 1) throw ShapeError("backward: expected a 1x1 loss, got " + out.shape_str());
		for (auto& n : nodes_) n.grad = Matrix();
		if (!nodes_[scalar.id].requires_grad) return;
		nodes_[scalar.id].grad = Matrix(1, 1, 1.0);
		for (std::size_t i = scalar.id + 1; i-- > 0;) {
			Node& n = nodes_[i];
			if (n.backward && !n.grad.empty()) n.backward(*this, n.grad);
		}
	}

	std::size_t size() const { return nodes_.size(); }

private:
	struct Node {
		Matrix value;
		Matrix grad;
		bool requires_grad = false;
		Backward backward;
	};

	Var push(Matrix v, bool requires_grad, Backward bw) {
		nodes_.push_back(Node{std::move(v), Matrix(), requires_grad, std::move(bw)});
		return Var{this, nodes_.size() - 1};
	}

	std::vector<Node> nodes_;
};

inline const Matrix& Var::value() const { return tape->value(*this); }

namespace detail {
template <typename F>
Matrix map(const Matrix& a, F f) {
	Matrix out(a.rows(), a.cols());
	for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
	return out;
}
} // namespace detail

// ---------------------------------------------------------------------------
// Linear algebra

inline Var matmul(Var a, Var b) {
	Tape& t = *a.tape;
	if (!(a.cols() == b.rows())) throw ShapeError("matmul: " + a.value().shape_str() + " x " + b.value().shape_str());
	return t.record(stlf::matmul(a.value(), b.value()), {a, b}, [a, b](Tape& t, const Matrix& g) {
		if (Matrix* ga = t.grad_slot(a)) matmul_nt_accumulate(g, t.value(b), *ga);
		if (Matrix* gb = t.grad_slot(b)) matmul_tn_accumulate(t.value(a), g, *gb);
	});
}

inline Var transpose(Var a) {
	return a.tape->record(a.value().transpose(), {a}, [a](Tape& t, const Matrix& g) {
		if (Matrix* ga = t.grad_slot(a)) *ga += g.transpose();
	});
}

inline Var add(Var a, Var b) {
	if (!(a.value().same_shape(b.value()))) throw ShapeError("add: " + a.value().shape_str() + " vs " + b.value().shape_str());
	return a.tape->record(a.value() + b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
		if (Matrix* ga = t.grad_slot(a)) *ga += g;
		if (Matrix* gb = t.grad_slot(b)) *gb += g;
	});
}

inline Var sub(Var a, Var b) {
	if (!(a.value().same_shape(b.value()))) throw ShapeError("sub: " + a.value().shape_str() + " vs " + b.value().shape_str());
	return a.tape->record(a.value() - b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
		if (Matrix* ga = t.grad_slot(a)) *ga += g;
		if (Matrix* gb = t.grad_slot(b)) *gb -= g;
	});
}

/// Elementwise product.
inline Var mul(Var a, Var b) {
	if (!(a.value().same_shape(b.value()))) throw ShapeError("mul: " + a.value().shape_str() + " vs " + b.value().shape_str());
	Matrix out = a.value();
	for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
	return a.tape->record(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g) {
		if (Matrix* ga = t.grad_slot(a))
			for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * t.value(b)[i];
		if (Matrix* gb = t.grad_slot(b))
			for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * t.value(a)[i];
	});
}

inline Var scale(Var a, double s) {
	return a.tape->record(a.value() * s, {a}, [a, s](Tape& t, const Matrix& g) {
		if (Matrix* ga = t.grad_slot(a))
			for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += s * g[i];
	});
}

/// 1 - a
inline Var one_minus(Var a) {
	return a.tape->record(detail::map(a.value(), [](double v) { return 1.0 - v; }), {a}, [a](Tape& t, const Matrix& g) {
		if (Matrix* ga = t.grad_slot(a)) *ga -= g;
	});
}

/// a + bias, bias is 1 x cols broadcast over rows.
inline Var add_row(Var a, Var bias) {
	if (!(bias.rows() == 1 && bias.cols() == a.cols())) throw ShapeError("add_row: " + a.value().shape_str() + " + " + bias.value().shape_str());
	Matrix out = a.value();
	const std::size_t c = out.cols();
	for (std::size_t r = 0; r < out.rows(); ++r)
		for (std::size_t j = 0; j < c; ++j) out(r, j) += bias.value()[j];
	return a.tape->record(std::move(out), {a, bias}, [a, bias](Tape& t, const Matrix& g) {
		if (Matrix* ga = t.grad_slot(a)) *ga += g;
		if (Matrix* gb = t.grad_slot(bias))
			for (std::size_t r = 0; r < g.rows(); ++r)
				for (std::size_t j = 0; j < g.cols(); ++j) (*gb)[j] += g(r, j);
	});
}

/// Row r of `a` scaled by col[r] (col is rows x 1).
inline Var mul_col(Var a, Var col) {
	if (!(col.cols() == 1 && col.rows() == a.rows())) throw ShapeError("mul_col: " + a.value().shape_str() + " * " + col.value().shape_str());
	Matrix out = a.value();
	for (std::size_t r = 0; r < out.rows(); ++r)
		for (std::size_t j = 0; j < out.cols(); ++j) out(r, j) *= col.value()[r];
	return a.tape->record(std::move(out), {a, col}, [a, col](Tape& t, const Matrix& g) {
		if (Matrix* ga = t.grad_slot(a))
			for (std::size_t r = 0; r < g.rows(); ++r)
				for (std::size_t j = 0; j < g.cols(); ++j) (*ga)(r, j) += g(r, j) * t.value(col)[r];
		if (Matrix* gc = t.grad_slot(col))
			for (std::size_t r = 0; r < g.rows(); ++r) {
				double s = 0.0;
				for (std::size_t j = 0; j < g.cols(); ++j) s += g(r, j) * t.value(a)(r, j);
				(*gc)[r] += s;
			}
	});
}

// ---------------------------------------------------------------------------
// Activations

inline double sigmoid_scalar(double x) {
	if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
	const double e = std::exp(x);
	return e / (1.0 + e);
}

inline Var sigmoid(Var a) {
	Matrix out = detail::map(a.value(), sigmoid_scalar);
	return a.tape->record(out, {a}, [a, out](Tape& t, const Matrix& g) {
		if (Matrix* ga = t.grad_slot(a))
			for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * out[i] * (1.0 - out[i]);
	});
}

inline Var tanh(Var a) {
	Matrix out = detail::map(a.value(), [](double v) { return std::tanh(v); });
	return a.tape->record(out, {a}, [a, out](Tape& t, const Matrix& g) {
		if (Matrix* ga = t.grad_slot(a))
			for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * (1.0 - out[i] * out[i]);
	});
}

inline Var relu(Var a) {
	return a.tape->record(detail::map(a.value(), [](double v) { return v > 0.0 ? v : 0.0; }), {a}, [a](Tape& t, const Matrix& g) {
		if (Matrix* ga = t.grad_slot(a))
			for (std::size_t i = 0; i < g.size(); ++i)
				if (t.value(a)[i] > 0.0) (*ga)[i] += g[i];
	});
}

/// Softmax along each row.
inline Var row_softmax(Var a) {
	const Matrix& x = a.value();
	Matrix out(x.rows(), x.cols());
	for (std::size_t r = 0; r < x.rows(); ++r) {
		double mx = -INFINITY;
		for (double v : x.row(r)) mx = std::max(mx, v);
		double s = 0.0;
		for (std::size_t j = 0; j < x.cols(); ++j) s += (out(r, j) = std::exp(x(r, j) - mx));
		for (std::size_t j = 0; j < x.cols(); ++j) out(r, j) /= s;
	}
	return a.tape->record(out, {a}, [a, out](Tape& t, const Matrix& g) {
		if (Matrix* ga = t.grad_slot(a))
			for (std::size_t r = 0; r < g.rows(); ++r) {
				double dot = 0.0;
				for (std::size_t j = 0; j < g.cols(); ++j) dot += g(r, j) * out(r, j);
				for (std::size_t j = 0; j < g.cols(); ++j) (*ga)(r, j) += out(r, j) * (g(r, j) - dot);
			}
	});
}

// ---------------------------------------------------------------------------
// Reshaping

inline Var concat_cols(std::span<const Var> parts) {
	if (!(!parts.empty())) throw ShapeError("concat_cols: no inputs");
	const std::size_t rows = parts[0].rows();
	std::size_t cols = 0;
	for (const Var& p : parts) {
		if (!(p.rows() == rows)) throw ShapeError("concat_cols: row mismatch");
		cols += p.cols();
	}
	Matrix out(rows, cols);
	std::size_t off = 0;
	for (const Var& p : parts) {
		const Matrix& v = p.value();
		for (std::size_t r = 0; r < rows; ++r) std::copy(v.row(r).begin(), v.row(r).end(), out.row(r).begin() + static_cast<std::ptrdiff_t>(off));
		off += v.cols();
	}
	std::vector<Var> ins(parts.begin(), parts.end());
	return parts[0].tape->record(std::move(out), parts, [ins](Tape& t, const Matrix& g) {
		std::size_t off = 0;
		for (const Var& p : ins) {
			const std::size_t c = t.value(p).cols();
			if (Matrix* gp = t.grad_slot(p))
				for (std::size_t r = 0; r < g.rows(); ++r)
					for (std::size_t j = 0; j < c; ++j) (*gp)(r, j) += g(r, off + j);
			off += c;
		}
	});
}
inline Var concat_cols(std::initializer_list<Var> parts) { return concat_cols(std::span<const Var>(parts.begin(), parts.size())); }

inline Var slice_cols(Var a, std::size_t start, std::size_t count) {
	if (!(start + count <= a.cols())) throw ShapeError("slice_cols: out of range");
	const Matrix& v = a.value();
	Matrix out(v.rows(), count);
	for (std::size_t r = 0; r < v.rows(); ++r)
		for (std::size_t j = 0; j < count; ++j) out(r, j) = v(r, start + j);
	return a.tape->record(std::move(out), {a}, [a, start, count](Tape& t, const Matrix& g) {
		if (Matrix* ga = t.grad_slot(a))
			for (std::size_t r = 0; r < g.rows(); ++r)
				for (std::size_t j = 0; j < count; ++j) (*ga)(r, start + j) += g(r, j);
	});
}

inline Var concat_rows(std::span<const Var> parts) {
	if (!(!parts.empty())) throw ShapeError("concat_rows: no inputs");
	const std::size_t cols = parts[0].cols();
	std::size_t rows = 0;
	for (const Var& p : parts) {
		if (!(p.cols() == cols)) throw ShapeError("concat_rows: column mismatch");
		rows += p.rows();
	}
	Matrix out(rows, cols);
	std::size_t off = 0;
	for (const Var& p : parts) {
		std::copy(p.value().data(), p.value().data() + p.value().size(), out.data() + off * cols);
		off += p.rows();
	}
	std::vector<Var> ins(parts.begin(), parts.end());
	return parts[0].tape->record(std::move(out), parts, [ins, cols](Tape& t, const Matrix& g) {
		std::size_t off = 0;
		for (const Var& p : ins) {
			const std::size_t n = t.value(p).size();
			if (Matrix* gp = t.grad_slot(p))
				for (std::size_t i = 0; i < n; ++i) (*gp)[i] += g[off * cols + i];
			off += t.value(p).rows();
		}
	});
}
inline Var concat_rows(std::initializer_list<Var> parts) { return concat_rows(std::span<const Var>(parts.begin(), parts.size())); }

inline Var slice_rows(Var a, std::size_t start, std::size_t count) {
	if (!(start + count <= a.rows())) throw ShapeError("slice_rows: out of range");
	const std::size_t c = a.cols();
	Matrix out(count, c);
	std::copy(a.value().data() + start * c, a.value().data() + (start + count) * c, out.data());
	return a.tape->record(std::move(out), {a}, [a, start, c](Tape& t, const Matrix& g) {
		if (Matrix* ga = t.grad_slot(a))
			for (std::size_t i = 0; i < g.size(); ++i) (*ga)[start * c + i] += g[i];
	});
}

/// Stacks `times` copies of `a` vertically.
inline Var tile_rows(Var a, std::size_t times) {
	const Matrix& v = a.value();
	Matrix out(v.rows() * times, v.cols());
	for (std::size_t k = 0; k < times; ++k) std::copy(v.data(), v.data() + v.size(), out.data() + k * v.size());
	return a.tape->record(std::move(out), {a}, [a, times](Tape& t, const Matrix& g) {
		if (Matrix* ga = t.grad_slot(a)) {
			const std::size_t n = ga->size();
			for (std::size_t k = 0; k < times; ++k)
				for (std::size_t i = 0; i < n; ++i) (*ga)[i] += g[k * n + i];
		}
	});
}

/// out[i] = a[index[i]]
inline Var gather_rows(Var a, std::vector<std::size_t> index) {
	const Matrix& v = a.value();
	const std::size_t c = v.cols();
	Matrix out(index.size(), c);
	for (std::size_t i = 0; i < index.size(); ++i) {
		if (!(index[i] < v.rows())) throw ShapeError("gather_rows: index out of range");
		std::copy_n(v.data() + index[i] * c, c, out.data() + i * c);
	}
	return a.tape->record(std::move(out), {a}, [a, index = std::move(index), c](Tape& t, const Matrix& g) {
		if (Matrix* ga = t.grad_slot(a))
			for (std::size_t i = 0; i < index.size(); ++i)
				for (std::size_t j = 0; j < c; ++j) (*ga)(index[i], j) += g(i, j);
	});
}

/// Ordered reduction plan: output row r sums input rows sources[r] in the
/// listed order. Fixing the order makes the reduction independent of how the
/// inputs happen to be enumerated.
struct ReductionPlan {
	std::vector<std::vector<std::size_t>> sources;
	std::size_t input_rows = 0;
};

inline Var sum_rows(Var a, std::shared_ptr<const ReductionPlan> plan) {
	if (!(plan->input_rows == a.rows())) throw ShapeError("sum_rows: plan built for " + std::to_string(plan->input_rows) + " rows");
	const Matrix& v = a.value();
	const std::size_t c = v.cols();
	Matrix out(plan->sources.size(), c);
	for (std::size_t r = 0; r < plan->sources.size(); ++r) {
		double* o = out.data() + r * c;
		for (std::size_t s : plan->sources[r]) {
			const double* src = v.data() + s * c;
			for (std::size_t j = 0; j < c; ++j) o[j] += src[j];
		}
	}
	return a.tape->record(std::move(out), {a}, [a, plan, c](Tape& t, const Matrix& g) {
		if (Matrix* ga = t.grad_slot(a))
			for (std::size_t r = 0; r < plan->sources.size(); ++r)
				for (std::size_t s : plan->sources[r])
					for (std::size_t j = 0; j < c; ++j) (*ga)(s, j) += g(r, j);
	});
}

// ---------------------------------------------------------------------------
// Sequence ops. Rows are grouped in consecutive blocks of `seq_len` steps,
// one block per sequence.

/// out[t] = a[t - shift] within each sequence, zero for t < shift.
inline Var shift_causal(Var a, std::size_t shift, std::size_t seq_len) {
	if (!(seq_len > 0 && a.rows() % seq_len == 0)) throw ShapeError("shift_causal: rows not a multiple of seq_len");
	if (shift == 0) return a;
	const Matrix& v = a.value();
	const std::size_t c = v.cols(), seqs = v.rows() / seq_len;
	Matrix out(v.rows(), c);
	for (std::size_t s = 0; s < seqs; ++s)
		for (std::size_t t = shift; t < seq_len; ++t)
			std::copy_n(v.data() + (s * seq_len + t - shift) * c, c, out.data() + (s * seq_len + t) * c);
	return a.tape->record(std::move(out), {a}, [a, shift, seq_len, c, seqs](Tape& t, const Matrix& g) {
		if (Matrix* ga = t.grad_slot(a))
			for (std::size_t s = 0; s < seqs; ++s)
				for (std::size_t tt = shift; tt < seq_len; ++tt)
					for (std::size_t j = 0; j < c; ++j) (*ga)(s * seq_len + tt - shift, j) += g(s * seq_len + tt, j);
	});
}

/// Row `step` of every sequence.
inline Var select_step(Var a, std::size_t step, std::size_t seq_len) {
	if (!(seq_len > 0 && a.rows() % seq_len == 0 && step < seq_len)) throw ShapeError("select_step: bad sequence layout");
	std::vector<std::size_t> idx(a.rows() / seq_len);
	for (std::size_t s = 0; s < idx.size(); ++s) idx[s] = s * seq_len + step;
	return gather_rows(a, std::move(idx));
}

/// Mean over the steps of each sequence.
inline Var mean_over_steps(Var a, std::size_t seq_len) {
	if (!(seq_len > 0 && a.rows() % seq_len == 0)) throw ShapeError("mean_over_steps: bad sequence layout");
	const Matrix& v = a.value();
	const std::size_t c = v.cols(), seqs = v.rows() / seq_len;
	const double inv = 1.0 / static_cast<double>(seq_len);
	Matrix out(seqs, c);
	for (std::size_t s = 0; s < seqs; ++s)
		for (std::size_t t = 0; t < seq_len; ++t)
			for (std::size_t j = 0; j < c; ++j) out(s, j) += v(s * seq_len + t, j);
	out *= inv;
	return a.tape->record(std::move(out), {a}, [a, seq_len, c, seqs, inv](Tape& t, const Matrix& g) {
		if (Matrix* ga = t.grad_slot(a))
			for (std::size_t s = 0; s < seqs; ++s)
				for (std::size_t tt = 0; tt < seq_len; ++tt)
					for (std::size_t j = 0; j < c; ++j) (*ga)(s * seq_len + tt, j) += g(s, j) * inv;
	});
}

/// Scaled dot-product self-attention within each sequence:
/// softmax(Q K^T / sqrt(d)) V. The attention weights of every sequence are
/// written to `weights_out` when given (seq_len rows per sequence).
inline Var block_attention(Var q, Var k, Var v, std::size_t seq_len, Matrix* weights_out = nullptr) {
	if (!(q.value().same_shape(k.value()) && q.rows() == v.rows() && seq_len > 0 && q.rows() % seq_len == 0)) throw ShapeError("block_attention: incompatible shapes");
	const std::size_t d = q.cols(), dv = v.cols(), seqs = q.rows() / seq_len;
	const double scale = 1.0 / std::sqrt(static_cast<double>(d));
	Matrix probs(q.rows(), seq_len), out(q.rows(), dv);
	const Matrix &Q = q.value(), &K = k.value(), &V = v.value();
	for (std::size_t s = 0; s < seqs; ++s) {
		const std::size_t base = s * seq_len;
		for (std::size_t i = 0; i < seq_len; ++i) {
			double mx = -INFINITY;
			for (std::size_t j = 0; j < seq_len; ++j) {
				double dot = 0.0;
				for (std::size_t p = 0; p < d; ++p) dot += Q(base + i, p) * K(base + j, p);
				probs(base + i, j) = dot * scale;
				mx = std::max(mx, probs(base + i, j));
			}
			double sum = 0.0;
			for (std::size_t j = 0; j < seq_len; ++j) sum += (probs(base + i, j) = std::exp(probs(base + i, j) - mx));
			for (std::size_t j = 0; j < seq_len; ++j) probs(base + i, j) /= sum;
			for (std::size_t j = 0; j < seq_len; ++j) {
				const double p = probs(base + i, j);
				for (std::size_t c = 0; c < dv; ++c) out(base + i, c) += p * V(base + j, c);
			}
		}
	}
	if (weights_out) *weights_out = probs;
	return q.tape->record(std::move(out), {q, k, v}, [q, k, v, probs, seq_len, seqs, d, dv, scale](Tape& t, const Matrix& g) {
		const Matrix &Q = t.value(q), &K = t.value(k), &V = t.value(v);
		Matrix* gq = t.grad_slot(q);
		Matrix* gk = t.grad_slot(k);
		Matrix* gv = t.grad_slot(v);
		std::vector<double> dp(seq_len);
		for (std::size_t s = 0; s < seqs; ++s) {
			const std::size_t base = s * seq_len;
			for (std::size_t i = 0; i < seq_len; ++i) {
				double dot = 0.0;
				for (std::size_t j = 0; j < seq_len; ++j) {
					double acc = 0.0;
					for (std::size_t c = 0; c < dv; ++c) acc += g(base + i, c) * V(base + j, c);
					dp[j] = acc;
					dot += acc * probs(base + i, j);
					if (gv)
						for (std::size_t c = 0; c < dv; ++c) (*gv)(base + j, c) += probs(base + i, j) * g(base + i, c);
				}
				for (std::size_t j = 0; j < seq_len; ++j) {
					const double ds = probs(base + i, j) * (dp[j] - dot) * scale;
					if (gq)
						for (std::size_t p = 0; p < d; ++p) (*gq)(base + i, p) += ds * K(base + j, p);
					if (gk)
						for (std::size_t p = 0; p < d; ++p) (*gk)(base + j, p) += ds * Q(base + i, p);
				}
			}
		}
	});
}

// ---------------------------------------------------------------------------
// Reductions to a scalar

/// mean |a - target|, the training loss. The subgradient at 0 is 0.
inline Var mean_abs_error(Var pred, const Matrix& target) {
	if (!(pred.value().same_shape(target))) throw ShapeError("mean_abs_error: " + pred.value().shape_str() + " vs " + target.shape_str());
	const Matrix& p = pred.value();
	double s = 0.0;
	for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - target[i]);
	const double inv = 1.0 / static_cast<double>(p.size());
	return pred.tape->record(Matrix(1, 1, s * inv), {pred}, [pred, target, inv](Tape& t, const Matrix& g) {
		if (Matrix* gp = t.grad_slot(pred)) {
			const Matrix& p = t.value(pred);
			for (std::size_t i = 0; i < p.size(); ++i) {
				const double d = p[i] - target[i];
				(*gp)[i] += g[0] * inv * (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0));
			}
		}
	});
}

/// sum_ij a_ij * w_ij for a constant weight matrix.
inline Var weighted_sum(Var a, const Matrix& w) {
	if (!(a.value().same_shape(w))) throw ShapeError("weighted_sum: shape mismatch");
	double s = 0.0;
	for (std::size_t i = 0; i < w.size(); ++i) s += a.value()[i] * w[i];
	return a.tape->record(Matrix(1, 1, s), {a}, [a, w](Tape& t, const Matrix& g) {
		if (Matrix* ga = t.grad_slot(a))
			for (std::size_t i = 0; i < w.size(); ++i) (*ga)[i] += g[0] * w[i];
	});
}

} // namespace stlf::nn
