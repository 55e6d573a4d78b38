#pragma once

// Differentiable building blocks shared by the forecasting models.

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "stlf/core/error.hpp"
#include "stlf/core/matrix.hpp"
#include "stlf/core/random.hpp"
#include "stlf/nn/autodiff.hpp"
#include "stlf/nn/params.hpp"
#include "stlf/nn/propagation.hpp"

namespace stlf::nn {

enum class Activation { linear, relu, tanh };

inline Var activate(Var x, Activation act) {
	switch (act) {
	case Activation::linear: return x;
	case Activation::relu: return relu(x);
	case Activation::tanh: return nn::tanh(x);
	}
	return x;
}

/// Inverted dropout; identity when `rng` is null or p == 0.
inline Var dropout(Var x, double p, Rng* rng) {
	if (!rng || p <= 0.0) return x;
	if (p >= 1.0) throw DataError("dropout rate must be < 1");
	Matrix mask(x.rows(), x.cols());
	const double keep = 1.0 / (1.0 - p);
	for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = rng->uniform() < p ? 0.0 : keep;
	return mul(x, x.tape->constant(std::move(mask)));
}

/// x W + b
struct Linear {
	std::string weight;
	std::string bias;
	std::size_t in = 0;
	std::size_t out = 0;

	static Linear create(ParameterStore& ps, Rng& rng, const std::string& name, std::size_t in, std::size_t out, bool with_bias = true) {
		Linear l{name + ".w", with_bias ? name + ".b" : std::string{}, in, out};
		ps.add_weight(l.weight, in, out, rng);
		if (with_bias) ps.add_bias(l.bias, out);
		return l;
	}

	Var operator()(Context& ctx, Var x) const {
		if (x.cols() != in) throw ShapeError("linear " + weight + ": expected " + std::to_string(in) + " input columns, got " + x.value().shape_str());
		Var y = matmul(x, ctx.param(weight));
		return bias.empty() ? y : add_row(y, ctx.param(bias));
	}
};

/// Spatial mixing: either a fixed normalized adjacency (predefined graphs) or
/// a dense adjacency living on the tape (learned graphs).
struct Propagator {
	std::shared_ptr<const PropagationPlan> plan;
	std::optional<Var> dense;
	std::size_t batches = 0;

	static Propagator fixed(std::shared_ptr<const PropagationPlan> p) {
		const std::size_t b = p->batches;
		return {std::move(p), std::nullopt, b};
	}
	static Propagator learned(Var adjacency, std::size_t batches) { return {nullptr, adjacency, batches}; }

	Var operator()(Var h, std::size_t inner = 1) const {
		if (plan) return propagate(h, plan, inner);
		if (dense) return propagate_dense(*dense, h, batches, inner);
		throw InternalError("propagator has no adjacency");
	}
};

/// act(A_hat H W + b)
struct GCNLayer {
	Linear linear;
	Activation activation = Activation::linear;

	static GCNLayer create(ParameterStore& ps, Rng& rng, const std::string& name, std::size_t in, std::size_t out, Activation act) {
		return {Linear::create(ps, rng, name, in, out), act};
	}

	Var forward(Context& ctx, Var h, const Propagator& prop) const { return activate(linear(ctx, prop(h)), activation); }
};

/// Evaluates one GCN layer on plain matrices (one graph, no batch).
inline Matrix gcn_forward(const GCNLayer& layer, const ParameterStore& ps, const Matrix& a_hat, const Matrix& h) {
	if (a_hat.rows() != a_hat.cols() || a_hat.rows() != h.rows())
		throw ShapeError("gcn_forward: A_hat " + a_hat.shape_str() + " incompatible with H " + h.shape_str());
	Tape tape;
	Context ctx(tape, ps, false);
	const auto plan = PropagationPlan::build(a_hat, index_ranks(1, a_hat.rows()));
	return layer.forward(ctx, tape.constant(h), Propagator::fixed(plan)).value();
}

/// Gated recurrent cell. With a spatial mode the gate inputs [x, h] are
/// propagated over the graph before the linear maps:
///   replace: gates read A_hat [x, h]              (graph-convolutional GRU)
///   augment: gates read [[x, h], A [x, h]]        (self plus neighbours)
struct GRUCell {
	enum class Spatial { none, replace, augment };

	std::string w_gates, b_gates, w_cand, b_cand;
	std::size_t in = 0;
	std::size_t hidden = 0;
	Spatial spatial = Spatial::none;

	static GRUCell create(ParameterStore& ps, Rng& rng, const std::string& name, std::size_t in, std::size_t hidden,
	                      Spatial spatial = Spatial::none) {
		GRUCell c{name + ".w_gates", name + ".b_gates", name + ".w_cand", name + ".b_cand", in, hidden, spatial};
		const std::size_t fan_in = (in + hidden) * (spatial == Spatial::augment ? 2 : 1);
		ps.add_weight(c.w_gates, fan_in, 2 * hidden, rng);
		ps.add_bias(c.b_gates, 2 * hidden);
		ps.add_weight(c.w_cand, fan_in, hidden, rng);
		ps.add_bias(c.b_cand, hidden);
		return c;
	}

	/// z = sigma(.. W_z), r = sigma(.. W_r), c = tanh([x, r*h] W_c),
	/// h' = (1 - z) * h + z * c
	Var step(Context& ctx, Var x, Var h, const Propagator* prop = nullptr) const {
		if (spatial != Spatial::none && !prop) throw DataError("graph recurrent cell requires an adjacency");
		if (x.cols() != in || h.cols() != hidden || x.rows() != h.rows())
			throw ShapeError("gru_step: x " + x.value().shape_str() + ", h " + h.value().shape_str());
		auto spatialize = [&](Var u) {
			switch (spatial) {
			case Spatial::none: return u;
			case Spatial::replace: return (*prop)(u);
			case Spatial::augment: return concat_cols({u, (*prop)(u)});
			}
			return u;
		};
		Var gates = sigmoid(add_row(matmul(spatialize(concat_cols({x, h})), ctx.param(w_gates)), ctx.param(b_gates)));
		Var z = slice_cols(gates, 0, hidden);
		Var r = slice_cols(gates, hidden, hidden);
		Var cand = nn::tanh(add_row(matmul(spatialize(concat_cols({x, mul(r, h)})), ctx.param(w_cand)), ctx.param(b_cand)));
		return add(mul(one_minus(z), h), mul(z, cand));
	}
};

/// Causal dilated convolution over sequences laid out as consecutive row
/// blocks: y[t] = b + sum_k x[t - k * dilation] W_k.
struct CausalConv {
	std::vector<std::string> taps;
	std::string bias;
	std::size_t kernel = 1;
	std::size_t dilation = 1;
	std::size_t in = 0;
	std::size_t out = 0;

	static CausalConv create(ParameterStore& ps, Rng& rng, const std::string& name, std::size_t in, std::size_t out,
	                         std::size_t kernel, std::size_t dilation) {
		if (kernel < 1 || dilation < 1) throw DataError("causal conv: kernel and dilation must be >= 1");
		CausalConv c{{}, name + ".b", kernel, dilation, in, out};
		for (std::size_t k = 0; k < kernel; ++k) {
			c.taps.push_back(name + ".w" + std::to_string(k));
			ps.add_weight(c.taps.back(), in, out, rng, in * kernel);
		}
		ps.add_bias(c.bias, out);
		return c;
	}

	std::size_t reach() const { return (kernel - 1) * dilation; }

	Var forward(Context& ctx, Var x, std::size_t seq_len) const {
		Var acc = matmul(x, ctx.param(taps[0]));
		for (std::size_t k = 1; k < kernel; ++k) acc = add(acc, matmul(shift_causal(x, k * dilation, seq_len), ctx.param(taps[k])));
		return add_row(acc, ctx.param(bias));
	}
};

/// Stack of causal convolutions; its output at step t only sees inputs <= t.
struct TemporalConvNet {
	std::vector<CausalConv> layers;
	Activation activation = Activation::relu;

	struct LayerSpec {
		std::size_t dilation;
		std::size_t kernel;
	};

	static TemporalConvNet create(ParameterStore& ps, Rng& rng, const std::string& name, std::size_t in, std::size_t hidden,
	                              const std::vector<LayerSpec>& specs, Activation act) {
		TemporalConvNet net{{}, act};
		std::size_t width = in;
		for (std::size_t l = 0; l < specs.size(); ++l) {
			net.layers.push_back(CausalConv::create(ps, rng, name + ".l" + std::to_string(l), width, hidden, specs[l].kernel, specs[l].dilation));
			width = hidden;
		}
		return net;
	}

	std::size_t receptive_field() const {
		std::size_t f = 1;
		for (const auto& l : layers) f += l.reach();
		return f;
	}

	/// All steps: input and output are [sequences * seq_len x features].
	Var forward_sequence(Context& ctx, Var x, std::size_t seq_len) const {
		if (receptive_field() > seq_len)
			throw DataError("tcn: receptive field " + std::to_string(receptive_field()) + " exceeds window " + std::to_string(seq_len));
		Var h = x;
		for (const auto& l : layers) h = activate(l.forward(ctx, h, seq_len), activation);
		return h;
	}

	/// Encoding at the last step of every sequence: [sequences x hidden].
	Var forward(Context& ctx, Var x, std::size_t seq_len) const { return select_step(forward_sequence(ctx, x, seq_len), seq_len - 1, seq_len); }
};

/// row_softmax(relu(E E^T)): a row-stochastic adjacency learned from node
/// embeddings.
inline Var adaptive_adjacency(Var embeddings) { return row_softmax(relu(matmul(embeddings, transpose(embeddings)))); }

/// Message plan over batched node rows. Message e reads rows src[e] and
/// dst[e]; each destination sums its incoming messages in `reduce` order.
struct MessagePlan {
	std::vector<std::size_t> src;
	std::vector<std::size_t> dst;
	std::shared_ptr<ReductionPlan> reduce;
	std::size_t rows = 0;
};

/// `edges` are (src, dst) node ids over `nodes_per_batch` nodes; `row_of(b, v)`
/// maps them to feature rows and `rank(b, v)` fixes the summation order of a
/// destination's incoming messages.
template <typename RowOf, typename Rank>
MessagePlan make_message_plan(const std::vector<std::pair<std::size_t, std::size_t>>& edges, std::size_t batches,
                              std::size_t total_rows, RowOf row_of, Rank rank) {
	MessagePlan plan;
	plan.rows = total_rows;
	plan.reduce = std::make_shared<ReductionPlan>();
	plan.reduce->sources.resize(total_rows);
	plan.reduce->input_rows = edges.size() * batches;
	std::vector<std::vector<std::pair<std::size_t, std::size_t>>> incoming(total_rows); // (rank, message)
	for (std::size_t b = 0; b < batches; ++b)
		for (std::size_t e = 0; e < edges.size(); ++e) {
			const auto [s, d] = edges[e];
			const std::size_t msg = plan.src.size();
			plan.src.push_back(row_of(b, s));
			plan.dst.push_back(row_of(b, d));
			incoming[plan.dst.back()].emplace_back(rank(b, s), msg);
		}
	for (std::size_t r = 0; r < total_rows; ++r) {
		std::sort(incoming[r].begin(), incoming[r].end());
		for (const auto& [_, m] : incoming[r]) plan.reduce->sources[r].push_back(m);
	}
	return plan;
}

/// Attention-gated message passing:
///   h_i' = phi_h([h_i, sum_j alpha_ij * phi_e([h_i, h_j])]),
///   alpha_ij = sigmoid(phi_att([h_i, h_j])).
struct AttentionAggregator {
	Linear message;
	Linear score;
	Linear update;
	std::size_t dim = 0;

	static AttentionAggregator create(ParameterStore& ps, Rng& rng, const std::string& name, std::size_t dim) {
		return {Linear::create(ps, rng, name + ".msg", 2 * dim, dim), Linear::create(ps, rng, name + ".att", 2 * dim, 1),
		        Linear::create(ps, rng, name + ".upd", 2 * dim, dim), dim};
	}

	/// Attention weights of every message, in plan order.
	Var attention(Context& ctx, Var h, const MessagePlan& plan) const {
		return sigmoid(score(ctx, concat_cols({gather_rows(h, plan.dst), gather_rows(h, plan.src)})));
	}

	Var forward(Context& ctx, Var h, const MessagePlan& plan) const {
		if (h.rows() != plan.rows || h.cols() != dim) throw ShapeError("attend_aggregate: features " + h.value().shape_str());
		Var aggregated;
		if (plan.src.empty()) {
			aggregated = ctx.constant(Matrix(h.rows(), dim));
		} else {
			Var pair = concat_cols({gather_rows(h, plan.dst), gather_rows(h, plan.src)});
			Var msg = relu(message(ctx, pair));
			Var alpha = sigmoid(score(ctx, pair));
			aggregated = sum_rows(mul_col(msg, alpha), plan.reduce);
		}
		return relu(update(ctx, concat_cols({h, aggregated})));
	}
};

/// Linear readout from the final hidden state to the H-step forecast.
struct Decoder {
	Linear linear;

	static Decoder create(ParameterStore& ps, Rng& rng, const std::string& name, std::size_t hidden, std::size_t horizon) {
		return {Linear::create(ps, rng, name, hidden, horizon)};
	}
	Var forward(Context& ctx, Var h) const { return linear(ctx, h); }
	std::size_t horizon() const { return linear.out; }
};

/// Sinusoidal position code, `length` x `dim`.
inline Matrix positional_encoding(std::size_t length, std::size_t dim) {
	Matrix pe(length, dim);
	for (std::size_t t = 0; t < length; ++t)
		for (std::size_t i = 0; i < dim; ++i) {
			const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(dim));
			pe(t, i) = (i % 2 == 0) ? std::sin(static_cast<double>(t) * freq) : std::cos(static_cast<double>(t) * freq);
		}
	return pe;
}

/// One encoder layer: single-head self-attention and a ReLU feed-forward
/// block, each with a residual connection.
struct SelfAttentionLayer {
	Linear query, key, value, output, ffn_in, ffn_out;

	static SelfAttentionLayer create(ParameterStore& ps, Rng& rng, const std::string& name, std::size_t dim, std::size_t ffn) {
		return {Linear::create(ps, rng, name + ".q", dim, dim, false), Linear::create(ps, rng, name + ".k", dim, dim, false),
		        Linear::create(ps, rng, name + ".v", dim, dim, false), Linear::create(ps, rng, name + ".o", dim, dim),
		        Linear::create(ps, rng, name + ".ff1", dim, ffn),      Linear::create(ps, rng, name + ".ff2", ffn, dim)};
	}

	Var forward(Context& ctx, Var z, std::size_t seq_len, Matrix* attention_out = nullptr) const {
		Var att = block_attention(query(ctx, z), key(ctx, z), value(ctx, z), seq_len, attention_out);
		Var h = add(z, output(ctx, att));
		return add(h, ffn_out(ctx, relu(ffn_in(ctx, h))));
	}
};

} // namespace stlf::nn
