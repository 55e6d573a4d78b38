#pragma once

// Neural forecasters. Every model maps a scaled [B x N x W] window to a
// [B*N x H] tape value whose row b*N + n is the forecast of node n.

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "stlf/core/random.hpp"
#include "stlf/graph/graph.hpp"
#include "stlf/models/model.hpp"
#include "stlf/nn/blocks.hpp"

namespace stlf::models {

using nn::Context;
using nn::Var;

class NeuralModel : public ForecastModel {
public:
	NeuralModel(ModelConfig config, std::size_t n_nodes)
	    : ForecastModel(std::move(config), n_nodes), hidden_(this->config().get_size("hidden", 32)),
	      dropout_(this->config().get_double("dropout", 0.0)) {
		if (hidden_ < 1) throw DataError("hidden size must be >= 1");
		if (dropout_ < 0.0 || dropout_ >= 1.0) throw DataError("dropout must lie in [0, 1)");
	}

	bool trainable() const override { return true; }
	nn::ParameterStore& parameters() { return params_; }
	const nn::ParameterStore& parameters() const { return params_; }
	std::size_t hidden() const { return hidden_; }

	/// Differentiable forecast; `dropout_rng` enables dropout (training only).
	virtual Var forward(Context& ctx, const Tensor3& x, Rng* dropout_rng = nullptr) const = 0;

protected:
	Tensor3 predict(const Tensor3& x) const override {
		nn::Tape tape;
		Context ctx(tape, params_, false);
		return Tensor3::from_matrix(forward(ctx, x).value(), x.batch, n_nodes());
	}

	void init_decoder(Rng& rng) { decoder_ = nn::Decoder::create(params_, rng, "decoder", hidden_, horizon()); }
	Var head(Context& ctx, Var h, Rng* rng) const { return decoder_.forward(ctx, nn::dropout(h, dropout_, rng)); }

	/// [B*N*W x 1], row (b*N + n)*W + t.
	static Var sequence_input(Context& ctx, const Tensor3& x) {
		Matrix m(x.data.size(), 1);
		std::copy(x.data.begin(), x.data.end(), m.data());
		return ctx.constant(std::move(m));
	}
	static Var step_input(Context& ctx, const Tensor3& x, std::size_t t) { return ctx.constant(x.step(t)); }

	/// Fixed propagation over this batch, neighbours summed in canonical order.
	nn::Propagator fixed_propagator(const Matrix& a_hat, const Tensor3& x) const {
		return nn::Propagator::fixed(nn::PropagationPlan::build(a_hat, nn::canonical_ranks(x)));
	}

	nn::ParameterStore params_;
	std::size_t hidden_;
	double dropout_;
	nn::Decoder decoder_;
};

/// Stacked recurrent encoder returning the last hidden state of the top layer.
struct GruEncoder {
	std::vector<nn::GRUCell> cells;

	static GruEncoder create(nn::ParameterStore& ps, Rng& rng, const std::string& name, std::size_t in, std::size_t hidden,
	                         std::size_t layers, nn::GRUCell::Spatial spatial = nn::GRUCell::Spatial::none) {
		if (layers < 1) throw DataError("recurrent encoder needs >= 1 layer");
		GruEncoder e;
		for (std::size_t l = 0; l < layers; ++l)
			e.cells.push_back(nn::GRUCell::create(ps, rng, name + ".l" + std::to_string(l), l == 0 ? in : hidden, hidden, spatial));
		return e;
	}

	Var run(Context& ctx, const std::function<Var(std::size_t)>& input, std::size_t steps, std::size_t rows,
	        const nn::Propagator* prop = nullptr) const {
		std::vector<Var> h(cells.size(), ctx.constant(Matrix(rows, cells.front().hidden)));
		for (std::size_t t = 0; t < steps; ++t) {
			Var in = input(t);
			for (std::size_t l = 0; l < cells.size(); ++l) {
				h[l] = cells[l].step(ctx, in, h[l], prop);
				in = h[l];
			}
		}
		return h.back();
	}
};

class GruModel final : public NeuralModel {
public:
	GruModel(ModelConfig config, std::size_t n_nodes, std::uint64_t seed) : NeuralModel(std::move(config), n_nodes) {
		Rng rng(seed);
		encoder_ = GruEncoder::create(params_, rng, "gru", 1, hidden_, this->config().get_size("layers", 1));
		init_decoder(rng);
	}
	Var forward(Context& ctx, const Tensor3& x, Rng* rng = nullptr) const override {
		Var h = encoder_.run(ctx, [&](std::size_t t) { return step_input(ctx, x, t); }, x.length, x.batch * x.nodes);
		return head(ctx, h, rng);
	}

private:
	GruEncoder encoder_;
};

/// Per-node self-attention encoder; no mixing across households.
class TransformerModel final : public NeuralModel {
public:
	TransformerModel(ModelConfig config, std::size_t n_nodes, std::uint64_t seed) : NeuralModel(std::move(config), n_nodes) {
		Rng rng(seed);
		input_ = nn::Linear::create(params_, rng, "tf.in", 1, hidden_);
		const std::size_t layers = this->config().get_size("layers", 1), ffn = this->config().get_size("ffn", 2 * hidden_);
		for (std::size_t l = 0; l < layers; ++l) layers_.push_back(nn::SelfAttentionLayer::create(params_, rng, "tf.l" + std::to_string(l), hidden_, ffn));
		positions_ = nn::positional_encoding(window(), hidden_);
		init_decoder(rng);
	}

	Var forward(Context& ctx, const Tensor3& x, Rng* rng = nullptr) const override { return head(ctx, encode(ctx, x, nullptr), rng); }

	/// Attention weights of the first layer, [B*N*W x W].
	Matrix attention_weights(const Tensor3& x) const {
		check_input(x);
		nn::Tape tape;
		Context ctx(tape, params_, false);
		Matrix weights;
		encode(ctx, x, &weights);
		return weights;
	}

private:
	Var encode(Context& ctx, const Tensor3& x, Matrix* weights) const {
		const std::size_t w = x.length;
		Var z = nn::add(input_(ctx, sequence_input(ctx, x)), nn::tile_rows(ctx.constant(positions_), x.batch * x.nodes));
		for (std::size_t l = 0; l < layers_.size(); ++l) z = layers_[l].forward(ctx, z, w, l == 0 ? weights : nullptr);
		return nn::mean_over_steps(z, w);
	}

	nn::Linear input_;
	std::vector<nn::SelfAttentionLayer> layers_;
	Matrix positions_;
};

/// Shared plumbing for models on a predefined graph.
class PredefinedGraphModel : public NeuralModel {
public:
	PredefinedGraphModel(ModelConfig config, const graph::Graph& g, std::size_t n_nodes) : NeuralModel(std::move(config), n_nodes), graph_(g) {
		if (g.n_nodes() != n_nodes) throw DataError("graph has " + std::to_string(g.n_nodes()) + " nodes, panel has " + std::to_string(n_nodes));
	}
	const graph::Graph& graph() const { return graph_; }

protected:
	graph::Graph graph_;
};

/// Signal-graph models propagate with the normalized adjacency.
class SignalGraphModel : public PredefinedGraphModel {
public:
	SignalGraphModel(ModelConfig config, const graph::Graph& g, std::size_t n_nodes)
	    : PredefinedGraphModel(std::move(config), g, n_nodes), a_hat_(graph::normalize(g)) {}
	const Matrix& normalized_adjacency() const { return a_hat_; }

protected:
	Matrix a_hat_;
};

/// Time then space: a GRU encodes each household, then GCN layers mix the
/// encodings over the graph.
class GrugcnModel final : public SignalGraphModel {
public:
	GrugcnModel(ModelConfig config, const graph::Graph& g, std::size_t n_nodes, std::uint64_t seed)
	    : SignalGraphModel(std::move(config), g, n_nodes) {
		Rng rng(seed);
		encoder_ = GruEncoder::create(params_, rng, "gru", 1, hidden_, this->config().get_size("layers", 1));
		const std::size_t gcn_layers = this->config().get_size("gcn_layers", 2);
		for (std::size_t l = 0; l < gcn_layers; ++l)
			gcn_.push_back(nn::GCNLayer::create(params_, rng, "gcn" + std::to_string(l), hidden_, hidden_, nn::Activation::relu));
		init_decoder(rng);
	}
	Var forward(Context& ctx, const Tensor3& x, Rng* rng = nullptr) const override {
		Var h = encoder_.run(ctx, [&](std::size_t t) { return step_input(ctx, x, t); }, x.length, x.batch * x.nodes);
		const nn::Propagator prop = fixed_propagator(a_hat_, x);
		Var s = h;
		for (const auto& layer : gcn_) s = layer.forward(ctx, s, prop);
		return head(ctx, nn::add(h, s), rng);
	}

private:
	GruEncoder encoder_;
	std::vector<nn::GCNLayer> gcn_;
};

/// Time and space: every gate of the recurrent cell is a graph convolution
/// over [x_t, h].
class GcgruModel final : public SignalGraphModel {
public:
	GcgruModel(ModelConfig config, const graph::Graph& g, std::size_t n_nodes, std::uint64_t seed)
	    : SignalGraphModel(std::move(config), g, n_nodes) {
		Rng rng(seed);
		encoder_ = GruEncoder::create(params_, rng, "gru", 1, hidden_, this->config().get_size("layers", 1), nn::GRUCell::Spatial::replace);
		init_decoder(rng);
	}
	Var forward(Context& ctx, const Tensor3& x, Rng* rng = nullptr) const override { return forward_with(ctx, x, a_hat_, rng); }

	/// Same weights on an explicit normalized adjacency.
	Var forward_with(Context& ctx, const Tensor3& x, const Matrix& a_hat, Rng* rng = nullptr) const {
		const nn::Propagator prop = fixed_propagator(a_hat, x);
		Var h = encoder_.run(ctx, [&](std::size_t t) { return step_input(ctx, x, t); }, x.length, x.batch * x.nodes, &prop);
		return head(ctx, h, rng);
	}

private:
	GruEncoder encoder_;
};

/// A two-layer GCN updates the input features of every step; the hidden
/// state itself is only updated by a dense recurrent cell.
class TgcnModel final : public SignalGraphModel {
public:
	TgcnModel(ModelConfig config, const graph::Graph& g, std::size_t n_nodes, std::uint64_t seed)
	    : SignalGraphModel(std::move(config), g, n_nodes) {
		Rng rng(seed);
		const std::size_t width = this->config().get_size("gcn_hidden", hidden_);
		gcn1_ = nn::GCNLayer::create(params_, rng, "gcn0", 1, width, nn::Activation::relu);
		gcn2_ = nn::GCNLayer::create(params_, rng, "gcn1", width, width, nn::Activation::relu);
		encoder_ = GruEncoder::create(params_, rng, "gru", width, hidden_, this->config().get_size("layers", 1));
		init_decoder(rng);
	}
	Var forward(Context& ctx, const Tensor3& x, Rng* rng = nullptr) const override {
		const std::size_t w = x.length;
		const nn::Propagator prop = fixed_propagator(a_hat_, x);
		auto spatial = [&](const nn::GCNLayer& layer, Var h) { return nn::activate(layer.linear(ctx, prop(h, w)), layer.activation); };
		Var features = spatial(gcn2_, spatial(gcn1_, sequence_input(ctx, x)));
		Var h = encoder_.run(ctx, [&](std::size_t t) { return nn::select_step(features, t, w); }, w, x.batch * x.nodes);
		return head(ctx, h, rng);
	}

private:
	nn::GCNLayer gcn1_, gcn2_;
	GruEncoder encoder_;
};

/// Recurrent cell on a learned adjacency; node embeddings are appended to the
/// inputs of every step.
class AgcrnModel final : public NeuralModel {
public:
	AgcrnModel(ModelConfig config, std::size_t n_nodes, std::uint64_t seed) : NeuralModel(std::move(config), n_nodes) {
		Rng rng(seed);
		embed_dim_ = this->config().get_size("embed_dim", 8);
		if (embed_dim_ < 1) throw DataError("embed_dim must be >= 1");
		params_.add_embedding("node_embedding", n_nodes, embed_dim_, rng);
		encoder_ = GruEncoder::create(params_, rng, "gru", 1 + embed_dim_, hidden_, this->config().get_size("layers", 1),
		                              nn::GRUCell::Spatial::augment);
		init_decoder(rng);
	}
	Var forward(Context& ctx, const Tensor3& x, Rng* rng = nullptr) const override {
		Var e = ctx.param("node_embedding");
		const nn::Propagator prop = nn::Propagator::learned(nn::adaptive_adjacency(e), x.batch);
		Var tiled = nn::tile_rows(e, x.batch);
		Var h = encoder_.run(ctx, [&](std::size_t t) { return nn::concat_cols({step_input(ctx, x, t), tiled}); }, x.length,
		                     x.batch * x.nodes, &prop);
		return head(ctx, h, rng);
	}
	Matrix adjacency() const {
		nn::Tape tape;
		return nn::adaptive_adjacency(tape.constant(params_.at("node_embedding"))).value();
	}

private:
	std::size_t embed_dim_ = 8;
	GruEncoder encoder_;
};

/// Stacked blocks of gated dilated causal convolution followed by a graph
/// convolution on the learned adjacency, with residual connections.
class GraphWavenetModel final : public NeuralModel {
public:
	GraphWavenetModel(ModelConfig config, std::size_t n_nodes, std::uint64_t seed) : NeuralModel(std::move(config), n_nodes) {
		Rng rng(seed);
		const std::size_t embed_dim = this->config().get_size("embed_dim", 8);
		const std::size_t blocks = this->config().get_size("blocks", 4), kernel = this->config().get_size("kernel", 2);
		if (embed_dim < 1 || blocks < 1 || kernel < 1) throw DataError("graphwavenet: embed_dim, blocks and kernel must be >= 1");
		params_.add_embedding("node_embedding", n_nodes, embed_dim, rng);
		input_ = nn::Linear::create(params_, rng, "gw.in", 1, hidden_);
		std::size_t field = 1;
		for (std::size_t b = 0; b < blocks; ++b) {
			const std::size_t dilation = std::size_t{1} << b;
			const std::string name = "gw.b" + std::to_string(b);
			filter_.push_back(nn::CausalConv::create(params_, rng, name + ".filter", hidden_, hidden_, kernel, dilation));
			gate_.push_back(nn::CausalConv::create(params_, rng, name + ".gate", hidden_, hidden_, kernel, dilation));
			mix_.push_back(nn::Linear::create(params_, rng, name + ".gc", hidden_, hidden_));
			field += filter_.back().reach();
		}
		if (field > window())
			throw DataError("graphwavenet: receptive field " + std::to_string(field) + " exceeds window " + std::to_string(window()));
		receptive_field_ = field;
		init_decoder(rng);
	}
	std::size_t receptive_field() const { return receptive_field_; }

	Var forward(Context& ctx, const Tensor3& x, Rng* rng = nullptr) const override {
		const std::size_t w = x.length;
		Var adjacency = nn::adaptive_adjacency(ctx.param("node_embedding"));
		Var h = input_(ctx, sequence_input(ctx, x));
		for (std::size_t b = 0; b < filter_.size(); ++b) {
			Var z = nn::mul(nn::tanh(filter_[b].forward(ctx, h, w)), nn::sigmoid(gate_[b].forward(ctx, h, w)));
			h = nn::add(h, mix_[b](ctx, nn::propagate_dense(adjacency, z, x.batch, w)));
		}
		return head(ctx, nn::relu(nn::select_step(h, w - 1, w)), rng);
	}

private:
	nn::Linear input_;
	std::vector<nn::CausalConv> filter_, gate_;
	std::vector<nn::Linear> mix_;
	std::size_t receptive_field_ = 1;
};

/// Shared MLP temporal encoder and attention message passing used by the
/// complete-graph and bipartite models.
class MessagePassingModel : public PredefinedGraphModel {
public:
	MessagePassingModel(ModelConfig config, const graph::Graph& g, std::size_t n_nodes, std::uint64_t seed, std::size_t default_layers)
	    : PredefinedGraphModel(std::move(config), g, n_nodes), rng_(seed) {
		mlp1_ = nn::Linear::create(params_, rng_, "mlp0", window(), hidden_);
		mlp2_ = nn::Linear::create(params_, rng_, "mlp1", hidden_, hidden_);
		const std::size_t layers = this->config().get_size("mp_layers", default_layers);
		if (layers < 1) throw DataError("mp_layers must be >= 1");
		for (std::size_t l = 0; l < layers; ++l)
			layers_.push_back(nn::AttentionAggregator::create(params_, rng_, "mp" + std::to_string(l), hidden_));
		for (const auto& e : g.edges()) edges_.emplace_back(e.src, e.dst);
	}

protected:
	Var encode_nodes(Context& ctx, const Tensor3& x) const {
		return nn::relu(mlp2_(ctx, nn::relu(mlp1_(ctx, ctx.constant(x.as_matrix())))));
	}

	/// Message passing over `rows` = batch * total_nodes feature rows.
	Var pass(Context& ctx, Var h, const nn::MessagePlan& plan) const {
		for (const auto& layer : layers_) h = nn::add(h, layer.forward(ctx, h, plan));
		return h;
	}

	Rng rng_;
	nn::Linear mlp1_, mlp2_;
	std::vector<nn::AttentionAggregator> layers_;
	std::vector<std::pair<std::size_t, std::size_t>> edges_;
};

class FcgnnModel final : public MessagePassingModel {
public:
	FcgnnModel(ModelConfig config, const graph::Graph& g, std::size_t n_nodes, std::uint64_t seed)
	    : MessagePassingModel(std::move(config), g, n_nodes, seed, 1) {
		init_decoder(rng_);
	}
	Var forward(Context& ctx, const Tensor3& x, Rng* rng = nullptr) const override {
		const auto ranks = nn::canonical_ranks(x);
		const std::size_t n = x.nodes;
		const auto plan = nn::make_message_plan(
		    edges_, x.batch, x.batch * n, [n](std::size_t b, std::size_t v) { return b * n + v; },
		    [&](std::size_t b, std::size_t v) { return ranks[b][v]; });
		return head(ctx, pass(ctx, encode_nodes(ctx, x), plan), rng);
	}
};

/// Virtual hub nodes (learned embeddings) connected to every household.
class BpgnnModel final : public MessagePassingModel {
public:
	BpgnnModel(ModelConfig config, const graph::Graph& g, std::size_t n_nodes, std::uint64_t seed)
	    : MessagePassingModel(std::move(config), g, n_nodes, seed, 2), k_(g.virtual_nodes()) {
		if (k_ < 1) throw DataError("bpgnn needs at least one virtual node");
		params_.add_embedding("virtual_nodes", k_, hidden_, rng_);
		init_decoder(rng_);
	}
	std::size_t total_nodes() const override { return n_nodes() + k_; }
	std::size_t virtual_nodes() const { return k_; }

	Var forward(Context& ctx, const Tensor3& x, Rng* rng = nullptr) const override {
		const auto ranks = nn::canonical_ranks(x);
		const std::size_t n = x.nodes, m = n + k_, batches = x.batch;
		// stacked = [households (b*N + i); hubs (B*N + b*K + k)] -> rows b*M + v
		std::vector<std::size_t> to_batched(batches * m), to_households(batches * n);
		for (std::size_t b = 0; b < batches; ++b) {
			for (std::size_t v = 0; v < m; ++v) to_batched[b * m + v] = v < n ? b * n + v : batches * n + b * k_ + (v - n);
			for (std::size_t i = 0; i < n; ++i) to_households[b * n + i] = b * m + i;
		}
		Var stacked = nn::concat_rows({encode_nodes(ctx, x), nn::tile_rows(ctx.param("virtual_nodes"), batches)});
		Var h = nn::gather_rows(stacked, std::move(to_batched));
		const auto plan = nn::make_message_plan(
		    edges_, batches, batches * m, [m](std::size_t b, std::size_t v) { return b * m + v; },
		    [&](std::size_t b, std::size_t v) { return v < n ? ranks[b][v] : v; });
		h = pass(ctx, h, plan);
		return head(ctx, nn::gather_rows(h, std::move(to_households)), rng);
	}

private:
	std::size_t k_;
};

} // namespace stlf::models
