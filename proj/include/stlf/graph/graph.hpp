#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stlf/core/error.hpp"
#include "stlf/core/matrix.hpp"

namespace stlf::graph {

enum class GraphKind { signal, full, bipartite };

inline std::string to_string(GraphKind k) {
	switch (k) {
	case GraphKind::signal: return "signal";
	case GraphKind::full: return "full";
	case GraphKind::bipartite: return "bipartite";
	}
	return "?";
}

inline GraphKind graph_kind_from_string(const std::string& s) {
	if (s == "signal") return GraphKind::signal;
	if (s == "full") return GraphKind::full;
	if (s == "bipartite") return GraphKind::bipartite;
	throw DataError("unknown graph kind '" + s + "'");
}

/// Directed weighted edge; undirected graphs store both directions.
struct Edge {
	std::size_t src = 0;
	std::size_t dst = 0;
	double weight = 1.0;
	bool operator==(const Edge&) const = default;
};

/// Weighted graph over `n_nodes` original nodes plus `virtual_nodes` hubs
/// (indices n_nodes .. n_nodes+K-1). Self-loops are never stored.
class Graph {
public:
	Graph() = default;
	Graph(std::size_t n_nodes, std::size_t virtual_nodes, GraphKind kind, std::vector<Edge> edges)
	    : n_nodes_(n_nodes), virtual_nodes_(virtual_nodes), kind_(kind), edges_(std::move(edges)) {
		std::sort(edges_.begin(), edges_.end(), [](const Edge& a, const Edge& b) {
			return a.dst != b.dst ? a.dst < b.dst : a.src < b.src;
		});
		validate();
	}

	std::size_t n_nodes() const { return n_nodes_; }
	std::size_t virtual_nodes() const { return virtual_nodes_; }
	std::size_t total_nodes() const { return n_nodes_ + virtual_nodes_; }
	GraphKind kind() const { return kind_; }
	const std::vector<Edge>& edges() const { return edges_; }

	/// Messages exchanged per propagation round (one per directed edge).
	std::size_t directed_message_count() const { return edges_.size(); }
	std::size_t undirected_edge_count() const { return edges_.size() / 2; }

	double mean_degree() const {
		return n_nodes_ == 0 ? 0.0 : static_cast<double>(edges_.size()) / static_cast<double>(total_nodes());
	}
	double density() const {
		const double n = static_cast<double>(total_nodes());
		return n < 2 ? 0.0 : static_cast<double>(edges_.size()) / (n * (n - 1));
	}

	Matrix dense_adjacency() const {
		Matrix a(total_nodes(), total_nodes());
		for (const auto& e : edges_) a(e.src, e.dst) = e.weight;
		return a;
	}

	bool is_symmetric(double tol = 0.0) const {
		const Matrix a = dense_adjacency();
		for (std::size_t i = 0; i < a.rows(); ++i)
			for (std::size_t j = i + 1; j < a.cols(); ++j)
				if (std::abs(a(i, j) - a(j, i)) > tol) return false;
		return true;
	}

	std::string measure;
	std::map<std::string, double> params;

	bool operator==(const Graph& o) const {
		return n_nodes_ == o.n_nodes_ && virtual_nodes_ == o.virtual_nodes_ && kind_ == o.kind_ && edges_ == o.edges_ &&
		       measure == o.measure && params == o.params;
	}

private:
	void validate() const {
		const std::size_t total = total_nodes();
		for (const auto& e : edges_) {
			if (e.src >= total || e.dst >= total) throw DataError("graph edge references node out of range");
			if (e.src == e.dst) throw DataError("graph must not store self-loops (node " + std::to_string(e.src) + ")");
			if (!(e.weight >= 0.0) || !std::isfinite(e.weight)) throw DataError("graph edge weights must be finite and >= 0");
			if (kind_ == GraphKind::bipartite && ((e.src < n_nodes_) == (e.dst < n_nodes_)))
				throw DataError("bipartite graph may only connect original and virtual nodes");
		}
		if (kind_ != GraphKind::bipartite && virtual_nodes_ != 0)
			throw DataError("only bipartite graphs carry virtual nodes");
	}

	std::size_t n_nodes_ = 0;
	std::size_t virtual_nodes_ = 0;
	GraphKind kind_ = GraphKind::signal;
	std::vector<Edge> edges_;
};

/// Complete graph with unit weights: N(N-1) directed messages.
inline Graph full_graph(std::size_t n) {
	if (n < 2) throw DataError("full_graph requires N >= 2");
	std::vector<Edge> edges;
	edges.reserve(n * (n - 1));
	for (std::size_t i = 0; i < n; ++i)
		for (std::size_t j = 0; j < n; ++j)
			if (i != j) edges.push_back({i, j, 1.0});
	return Graph(n, 0, GraphKind::full, std::move(edges));
}

/// K virtual hubs, each linked in both directions to all N originals: 2KN
/// directed messages per round.
inline Graph bipartite_graph(std::size_t n, std::size_t k) {
	if (k < 1) throw DataError("bipartite_graph requires K >= 1");
	if (n < 1) throw DataError("bipartite_graph requires N >= 1");
	std::vector<Edge> edges;
	edges.reserve(2 * k * n);
	for (std::size_t v = 0; v < k; ++v)
		for (std::size_t i = 0; i < n; ++i) {
			edges.push_back({i, n + v, 1.0});
			edges.push_back({n + v, i, 1.0});
		}
	Graph g(n, k, GraphKind::bipartite, std::move(edges));
	g.params["K"] = static_cast<double>(k);
	return g;
}

/// Block-diagonal cluster graph: unit-weight cliques over contiguous blocks.
inline Graph cluster_graph(std::size_t n, const std::vector<std::size_t>& cluster_of) {
	if (cluster_of.size() != n) throw DataError("cluster_graph: assignment length mismatch");
	std::vector<Edge> edges;
	for (std::size_t i = 0; i < n; ++i)
		for (std::size_t j = 0; j < n; ++j)
			if (i != j && cluster_of[i] == cluster_of[j]) edges.push_back({i, j, 1.0});
	Graph g(n, 0, GraphKind::signal, std::move(edges));
	g.measure = "planted";
	return g;
}

/// Symmetric GCN normalization D^-1/2 (A + I) D^-1/2 over original nodes.
inline Matrix normalize(const Graph& g) {
	if (g.kind() == GraphKind::bipartite) throw DataError("normalize: bipartite graphs are not used with graph convolution");
	const std::size_t n = g.n_nodes();
	Matrix a = g.dense_adjacency();
	for (std::size_t i = 0; i < n; ++i) a(i, i) += 1.0;
	// degrees summed in sorted-weight order so relabelling nodes cannot change rounding
	std::vector<double> inv_sqrt_deg(n), row(n);
	for (std::size_t i = 0; i < n; ++i) {
		for (std::size_t j = 0; j < n; ++j) row[j] = a(i, j);
		std::sort(row.begin(), row.end());
		double d = 0.0;
		for (double w : row) d += w;
		inv_sqrt_deg[i] = 1.0 / std::sqrt(d);
	}
	for (std::size_t i = 0; i < n; ++i)
		for (std::size_t j = 0; j < n; ++j) a(i, j) *= inv_sqrt_deg[i] * inv_sqrt_deg[j];
	return a;
}

// Graph files: "<prefix>.edges.csv" holding src,dst,weight rows and
// "<prefix>.json" holding kind, node counts, measure and parameters.

inline void write_graph(const Graph& g, const std::string& prefix) {
	{
		std::ofstream out(prefix + ".edges.csv", std::ios::trunc);
		if (!out) throw DataError("cannot write '" + prefix + ".edges.csv'");
		out << "src,dst,weight\n";
		char buf[64];
		for (const auto& e : g.edges()) {
			std::snprintf(buf, sizeof buf, "%.17g", e.weight);
			out << e.src << ',' << e.dst << ',' << buf << '\n';
		}
	}
	nlohmann::json header{{"format", "stlf-graph"},
	                      {"version", 1},
	                      {"kind", to_string(g.kind())},
	                      {"n_nodes", g.n_nodes()},
	                      {"K", g.virtual_nodes()},
	                      {"measure", g.measure},
	                      {"params", g.params},
	                      {"directed_edges", g.edges().size()}};
	std::ofstream out(prefix + ".json", std::ios::trunc);
	if (!out) throw DataError("cannot write '" + prefix + ".json'");
	out << header.dump(2) << '\n';
}

inline Graph read_graph(const std::string& prefix) {
	std::ifstream hin(prefix + ".json");
	if (!hin) throw DataError("cannot open graph header '" + prefix + ".json'");
	nlohmann::json header;
	try {
		hin >> header;
	} catch (const nlohmann::json::exception& e) {
		throw DataError("malformed graph header: " + std::string(e.what()));
	}
	std::ifstream ein(prefix + ".edges.csv");
	if (!ein) throw DataError("cannot open edge list '" + prefix + ".edges.csv'");
	std::vector<Edge> edges;
	std::string line;
	std::getline(ein, line);
	std::size_t lineno = 1;
	while (std::getline(ein, line)) {
		++lineno;
		if (line.empty()) continue;
		std::istringstream ss(line);
		std::string a, b, w;
		if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, w))
			throw DataError("edge list line " + std::to_string(lineno) + ": expected src,dst,weight");
		try {
			edges.push_back({std::stoull(a), std::stoull(b), std::stod(w)});
		} catch (const std::exception&) {
			throw DataError("edge list line " + std::to_string(lineno) + ": unparseable");
		}
	}
	Graph g(header.at("n_nodes").get<std::size_t>(), header.at("K").get<std::size_t>(),
	        graph_kind_from_string(header.at("kind").get<std::string>()), std::move(edges));
	g.measure = header.value("measure", std::string{});
	g.params = header.value("params", std::map<std::string, double>{});
	return g;
}

} // namespace stlf::graph
