#pragma once

#include <memory>

#include "stlf/graph/graph.hpp"
#include "stlf/models/model.hpp"
#include "stlf/models/neural.hpp"

namespace stlf::models {

inline void check_graph(const ModelConfig& config, const graph::Graph* g, std::size_t n_nodes) {
	config.validate();
	const GraphSource& src = config.graph_source;
	const std::string who = "model '" + to_string(config.model_id) + "'";
	if (!src.needs_graph_object()) {
		if (g) throw DataError(who + " takes no predefined graph");
		return;
	}
	if (!g) throw DataError(who + " requires " + describe(src.kind) + " but none was supplied");
	if (g->n_nodes() != n_nodes)
		throw DataError(who + ": graph has " + std::to_string(g->n_nodes()) + " nodes, data has " + std::to_string(n_nodes));
	switch (src.kind) {
	case GraphSourceKind::signal:
		if (g->kind() != graph::GraphKind::signal) throw DataError(who + " requires a signal graph, got " + graph::to_string(g->kind()));
		break;
	case GraphSourceKind::full:
		if (g->kind() != graph::GraphKind::full) throw DataError(who + " requires the complete graph, got " + graph::to_string(g->kind()));
		break;
	case GraphSourceKind::bipartite:
		if (g->kind() != graph::GraphKind::bipartite) throw DataError(who + " requires a bipartite graph, got " + graph::to_string(g->kind()));
		if (g->virtual_nodes() != src.virtual_nodes)
			throw DataError(who + ": graph has K=" + std::to_string(g->virtual_nodes()) + " virtual nodes, configured K=" +
			                std::to_string(src.virtual_nodes));
		break;
	default: break;
	}
}

/// Builds a model with freshly initialised parameters. A VAR model starts
/// with zero coefficients; fit it with fit_var.
inline std::unique_ptr<ForecastModel> build(const ModelConfig& config, const graph::Graph* g, std::size_t n_nodes, std::uint64_t seed = 0) {
	check_graph(config, g, n_nodes);
	switch (config.model_id) {
	case ModelId::seasonal_naive: return std::make_unique<SeasonalNaive>(config, n_nodes);
	case ModelId::var: {
		const std::size_t p = config.get_size("order", 1);
		if (p < 1) throw DataError("var: order p must be >= 1");
		return std::make_unique<VarModel>(config, n_nodes, p, Matrix(n_nodes, 1), std::vector<Matrix>(p, Matrix(n_nodes, n_nodes)));
	}
	case ModelId::gru: return std::make_unique<GruModel>(config, n_nodes, seed);
	case ModelId::transformer: return std::make_unique<TransformerModel>(config, n_nodes, seed);
	case ModelId::grugcn: return std::make_unique<GrugcnModel>(config, *g, n_nodes, seed);
	case ModelId::gcgru: return std::make_unique<GcgruModel>(config, *g, n_nodes, seed);
	case ModelId::tgcn: return std::make_unique<TgcnModel>(config, *g, n_nodes, seed);
	case ModelId::agcrn: return std::make_unique<AgcrnModel>(config, n_nodes, seed);
	case ModelId::graphwavenet: return std::make_unique<GraphWavenetModel>(config, n_nodes, seed);
	case ModelId::fcgnn: return std::make_unique<FcgnnModel>(config, *g, n_nodes, seed);
	case ModelId::bpgnn: return std::make_unique<BpgnnModel>(config, *g, n_nodes, seed);
	}
	throw InternalError("unhandled model id");
}

inline std::unique_ptr<ForecastModel> build(const ModelConfig& config, const graph::Graph& g, std::size_t n_nodes, std::uint64_t seed = 0) {
	return build(config, &g, n_nodes, seed);
}

inline NeuralModel* as_neural(ForecastModel* m) { return dynamic_cast<NeuralModel*>(m); }
inline const NeuralModel* as_neural(const ForecastModel* m) { return dynamic_cast<const NeuralModel*>(m); }

} // namespace stlf::models
