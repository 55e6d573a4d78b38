#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

#include "stlf/core/error.hpp"
#include "stlf/graph/graph.hpp"

namespace stlf::models {

enum class ModelId { seasonal_naive, var, gru, transformer, grugcn, gcgru, tgcn, agcrn, graphwavenet, fcgnn, bpgnn };

inline constexpr std::array kAllModels = {ModelId::seasonal_naive, ModelId::var,   ModelId::gru,          ModelId::transformer,
                                          ModelId::grugcn,         ModelId::gcgru, ModelId::tgcn,         ModelId::agcrn,
                                          ModelId::graphwavenet,   ModelId::fcgnn, ModelId::bpgnn};

inline std::string to_string(ModelId id) {
	switch (id) {
	case ModelId::seasonal_naive: return "seasonal_naive";
	case ModelId::var: return "var";
	case ModelId::gru: return "gru";
	case ModelId::transformer: return "transformer";
	case ModelId::grugcn: return "grugcn";
	case ModelId::gcgru: return "gcgru";
	case ModelId::tgcn: return "tgcn";
	case ModelId::agcrn: return "agcrn";
	case ModelId::graphwavenet: return "graphwavenet";
	case ModelId::fcgnn: return "fcgnn";
	case ModelId::bpgnn: return "bpgnn";
	}
	return "?";
}

inline ModelId model_from_string(std::string_view s) {
	for (ModelId id : kAllModels)
		if (to_string(id) == s) return id;
	throw DataError("unknown model '" + std::string(s) + "'");
}

/// Models that take no graph and only look at each household's own history.
inline bool is_benchmark(ModelId id) {
	return id == ModelId::seasonal_naive || id == ModelId::var || id == ModelId::gru || id == ModelId::transformer;
}
inline bool is_stgnn(ModelId id) { return !is_benchmark(id); }

enum class Architecture { tts, tas, temporal_only, statistical, naive };

inline std::string to_string(Architecture a) {
	switch (a) {
	case Architecture::tts: return "TTS";
	case Architecture::tas: return "T&S";
	case Architecture::temporal_only: return "temporal_only";
	case Architecture::statistical: return "statistical";
	case Architecture::naive: return "naive";
	}
	return "?";
}

inline Architecture architecture_of(ModelId id) {
	switch (id) {
	case ModelId::seasonal_naive: return Architecture::naive;
	case ModelId::var: return Architecture::statistical;
	case ModelId::gru:
	case ModelId::transformer: return Architecture::temporal_only;
	case ModelId::gcgru:
	case ModelId::tgcn:
	case ModelId::agcrn: return Architecture::tas;
	default: return Architecture::tts;
	}
}

enum class GraphSourceKind { none, signal, full, bipartite, learnable };

struct GraphSource {
	GraphSourceKind kind = GraphSourceKind::none;
	std::string measure;   // signal graphs: pearson, euclidean, dtw, correntropy, planted
	std::size_t virtual_nodes = 0; // bipartite K

	/// "none", "signal:<measure>", "full", "bipartite:<K>", "learnable".
	static GraphSource parse(std::string_view s) {
		GraphSource g;
		const auto colon = s.find(':');
		const std::string head(s.substr(0, colon));
		const std::string tail = colon == std::string_view::npos ? "" : std::string(s.substr(colon + 1));
		if (head == "none") g.kind = GraphSourceKind::none;
		else if (head == "signal") {
			g.kind = GraphSourceKind::signal;
			g.measure = tail.empty() ? "pearson" : tail;
			if (g.measure != "pearson" && g.measure != "euclidean" && g.measure != "dtw" && g.measure != "correntropy" && g.measure != "planted")
				throw DataError("unknown similarity measure '" + g.measure + "'");
			return g;
		} else if (head == "full") g.kind = GraphSourceKind::full;
		else if (head == "bipartite") {
			g.kind = GraphSourceKind::bipartite;
			try {
				g.virtual_nodes = tail.empty() ? 4 : std::stoul(tail);
			} catch (const std::exception&) {
				throw DataError("bad bipartite virtual node count '" + tail + "'");
			}
			if (g.virtual_nodes < 1) throw DataError("bipartite graph needs K >= 1 virtual nodes");
			return g;
		} else if (head == "learnable") g.kind = GraphSourceKind::learnable;
		else throw DataError("unknown graph source '" + std::string(s) + "'");
		if (!tail.empty()) throw DataError("graph source '" + head + "' takes no argument");
		return g;
	}

	std::string str() const {
		switch (kind) {
		case GraphSourceKind::none: return "none";
		case GraphSourceKind::signal: return "signal:" + measure;
		case GraphSourceKind::full: return "full";
		case GraphSourceKind::bipartite: return "bipartite:" + std::to_string(virtual_nodes);
		case GraphSourceKind::learnable: return "learnable";
		}
		return "?";
	}
	bool needs_graph_object() const {
		return kind == GraphSourceKind::signal || kind == GraphSourceKind::full || kind == GraphSourceKind::bipartite;
	}
};

/// The graph formation each model is defined for.
inline GraphSourceKind required_graph(ModelId id) {
	switch (id) {
	case ModelId::grugcn:
	case ModelId::gcgru:
	case ModelId::tgcn: return GraphSourceKind::signal;
	case ModelId::agcrn:
	case ModelId::graphwavenet: return GraphSourceKind::learnable;
	case ModelId::fcgnn: return GraphSourceKind::full;
	case ModelId::bpgnn: return GraphSourceKind::bipartite;
	default: return GraphSourceKind::none;
	}
}

inline std::string describe(GraphSourceKind k) {
	switch (k) {
	case GraphSourceKind::none: return "no graph";
	case GraphSourceKind::signal: return "a predefined signal-similarity graph";
	case GraphSourceKind::full: return "the predefined complete graph";
	case GraphSourceKind::bipartite: return "the predefined bipartite graph";
	case GraphSourceKind::learnable: return "a learnable graph";
	}
	return "?";
}

struct ModelConfig {
	ModelId model_id = ModelId::gru;
	GraphSource graph_source;
	std::map<std::string, std::string> hyper;

	static ModelConfig make(ModelId id, std::map<std::string, std::string> hyper = {}) {
		ModelConfig c;
		c.model_id = id;
		switch (required_graph(id)) {
		case GraphSourceKind::signal: c.graph_source = GraphSource::parse("signal:pearson"); break;
		case GraphSourceKind::full: c.graph_source = GraphSource::parse("full"); break;
		case GraphSourceKind::bipartite: c.graph_source = GraphSource::parse("bipartite:4"); break;
		case GraphSourceKind::learnable: c.graph_source = GraphSource::parse("learnable"); break;
		case GraphSourceKind::none: break;
		}
		c.hyper = std::move(hyper);
		return c;
	}

	Architecture architecture() const { return architecture_of(model_id); }

	/// Rejects a graph source the model is not defined for.
	void validate() const {
		const GraphSourceKind need = required_graph(model_id);
		if (graph_source.kind != need)
			throw DataError("model '" + to_string(model_id) + "' requires " + describe(need) + " (configured: " + graph_source.str() + ")");
	}

	bool has(const std::string& key) const { return hyper.count(key) != 0; }
	std::string get_string(const std::string& key, const std::string& fallback) const {
		auto it = hyper.find(key);
		return it == hyper.end() ? fallback : it->second;
	}
	double get_double(const std::string& key, double fallback) const {
		auto it = hyper.find(key);
		if (it == hyper.end()) return fallback;
		try {
			std::size_t pos = 0;
			const double v = std::stod(it->second, &pos);
			if (pos != it->second.size()) throw std::invalid_argument("trailing");
			return v;
		} catch (const std::exception&) {
			throw DataError("hyperparameter '" + key + "': expected a number, got '" + it->second + "'");
		}
	}
	std::size_t get_size(const std::string& key, std::size_t fallback) const {
		const double v = get_double(key, static_cast<double>(fallback));
		if (v < 0 || v != static_cast<double>(static_cast<std::size_t>(v)))
			throw DataError("hyperparameter '" + key + "': expected a non-negative integer");
		return static_cast<std::size_t>(v);
	}
	void set(const std::string& key, const std::string& value) { hyper[key] = value; }
	void set(const std::string& key, double value) {
		std::ostringstream os;
		os.precision(17);
		os << value;
		hyper[key] = os.str();
	}

	std::size_t window() const { return get_size("window", 336); }
	std::size_t horizon() const { return get_size("horizon", 48); }

	/// Canonical text form (sorted keys), used for hashing.
	std::string canonical() const {
		std::string s = "model=" + to_string(model_id) + ";graph=" + graph_source.str();
		for (const auto& [k, v] : hyper) s += ";" + k + "=" + v;
		return s;
	}
};

} // namespace stlf::models
