#include <catch_amalgamated.hpp>

#include "oracles.hpp"
#include "stlf/models/registry.hpp"

using namespace stlf;
using namespace stlf::models;

namespace {

constexpr std::size_t kNodes = 5;

ModelConfig small_config(ModelId id, std::size_t window = 48, std::size_t horizon = 48) {
	auto c = ModelConfig::make(id, {{"hidden", "4"}, {"embed_dim", "3"}, {"blocks", "3"}});
	c.set("window", static_cast<double>(window));
	c.set("horizon", static_cast<double>(horizon));
	return c;
}

graph::Graph ring(std::size_t n) {
	std::vector<graph::Edge> e;
	for (std::size_t i = 0; i < n; ++i) {
		const std::size_t j = (i + 1) % n;
		e.push_back({i, j, 0.5 + 0.1 * static_cast<double>(i)});
		e.push_back({j, i, 0.5 + 0.1 * static_cast<double>(i)});
		// chords give every node four neighbours, so degree sums depend on order
		const std::size_t k = (i + 2) % n;
		e.push_back({i, k, 0.3 + 0.07 * static_cast<double>(i)});
		e.push_back({k, i, 0.3 + 0.07 * static_cast<double>(i)});
	}
	return graph::Graph(n, 0, graph::GraphKind::signal, e);
}

std::optional<graph::Graph> graph_for_model(ModelId id, std::size_t n) {
	switch (required_graph(id)) {
	case GraphSourceKind::signal: return ring(n);
	case GraphSourceKind::full: return graph::full_graph(n);
	case GraphSourceKind::bipartite: return graph::bipartite_graph(n, 4);
	default: return std::nullopt;
	}
}

Tensor3 random_input(std::size_t b, std::size_t n, std::size_t w, std::uint64_t seed) {
	Rng rng(seed);
	Tensor3 x(b, n, w);
	for (auto& v : x.data) v = rng.normal();
	return x;
}

Tensor3 permute_nodes(const Tensor3& x, const std::vector<std::size_t>& perm) {
	Tensor3 y(x.batch, x.nodes, x.length);
	for (std::size_t b = 0; b < x.batch; ++b)
		for (std::size_t i = 0; i < x.nodes; ++i)
			for (std::size_t t = 0; t < x.length; ++t) y(b, perm[i], t) = x(b, i, t);
	return y;
}

graph::Graph permute_graph(const graph::Graph& g, const std::vector<std::size_t>& perm) {
	std::vector<graph::Edge> e;
	auto map = [&](std::size_t v) { return v < g.n_nodes() ? perm[v] : v; };
	for (const auto& x : g.edges()) e.push_back({map(x.src), map(x.dst), x.weight});
	return graph::Graph(g.n_nodes(), g.virtual_nodes(), g.kind(), e);
}

} // namespace

TEST_CASE("every model forecasts [B x N x H]", "[models]") {
	const Tensor3 x = random_input(3, kNodes, 48, 1);
	for (ModelId id : kAllModels) {
		INFO(to_string(id));
		const auto g = graph_for_model(id, kNodes);
		const auto m = build(small_config(id, 48, 24), g ? &*g : nullptr, kNodes, 7);
		const Tensor3 y = m->forecast(x);
		CHECK(y.batch == 3);
		CHECK(y.nodes == kNodes);
		CHECK(y.length == 24);
		CHECK(y.all_finite());
		CHECK(m->trainable() == !(id == ModelId::seasonal_naive || id == ModelId::var));
	}
}

TEST_CASE("seasonal naive repeats the previous day", "[models]") {
	const Tensor3 x = random_input(2, 3, 96, 2);
	const auto m = build(small_config(ModelId::seasonal_naive, 96, 48), nullptr, 3);
	const Tensor3 y = m->forecast(x);
	for (std::size_t b = 0; b < 2; ++b)
		for (std::size_t n = 0; n < 3; ++n)
			for (std::size_t h = 0; h < 48; ++h) CHECK(y(b, n, h) == x(b, n, 48 + h));
	CHECK_THROWS_AS(build(small_config(ModelId::seasonal_naive, 24, 48), nullptr, 3), DataError);
}

TEST_CASE("var fit recovers known coefficients", "[models][var]") {
	const Matrix a{{0.5, 0.2, 0.0}, {0.0, 0.3, -0.1}, {0.1, 0.0, 0.6}};
	const std::vector<double> c{1.0, 2.0, 3.0};
	const std::size_t t_len = 20000;
	Matrix values(3, t_len);
	Rng rng(8);
	for (std::size_t t = 1; t < t_len; ++t)
		for (std::size_t i = 0; i < 3; ++i) {
			double s = c[i] + rng.normal(0.0, 1.0);
			for (std::size_t j = 0; j < 3; ++j) s += a(i, j) * values(j, t - 1);
			values(i, t) = s;
		}
	const VarModel m = fit_var(values, 100, t_len, 1);
	for (std::size_t i = 0; i < 3; ++i) {
		CHECK(m.intercept()[i] == Catch::Approx(c[i]).margin(0.2));
		for (std::size_t j = 0; j < 3; ++j) CHECK(m.coefficients(1)(i, j) == Catch::Approx(a(i, j)).margin(0.03));
	}

	// multi-step forecasts follow the recursion
	auto cfg = small_config(ModelId::var, 1, 2);
	const VarModel exact(cfg, 3, 1, Matrix{{1.0}, {2.0}, {3.0}}, {a});
	Tensor3 x(1, 3, 1);
	x.data = {1.0, 0.0, -1.0};
	const Tensor3 y = exact.forecast(x);
	const double y1[] = {1.0 + 0.5, 2.0 + 0.1, 3.0 + 0.1 - 0.6};
	for (std::size_t i = 0; i < 3; ++i) CHECK(y(0, i, 0) == Catch::Approx(y1[i]));
	CHECK(y(0, 0, 1) == Catch::Approx(1.0 + 0.5 * y1[0] + 0.2 * y1[1]));

	CHECK_THROWS_AS(fit_var(values, 0, 30, 1), DataError);
}

TEST_CASE("gcgru on an edgeless graph is exactly a gru", "[models]") {
	const graph::Graph empty(kNodes, 0, graph::GraphKind::signal, {});
	const auto gru = build(small_config(ModelId::gru), nullptr, kNodes, 11);
	const auto gcgru = build(small_config(ModelId::gcgru), empty, kNodes, 11);
	REQUIRE(as_neural(gru.get())->parameters() == as_neural(gcgru.get())->parameters());
	const Tensor3 x = random_input(2, kNodes, 48, 3);
	CHECK(gru->forecast(x) == gcgru->forecast(x));
}

TEST_CASE("graph models are equivariant to relabelling households", "[models][equivariance]") {
	const Tensor3 x = random_input(2, kNodes, 48, 4);
	const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
	const Tensor3 xp = permute_nodes(x, perm);
	for (ModelId id : {ModelId::gru, ModelId::transformer, ModelId::grugcn, ModelId::gcgru, ModelId::tgcn, ModelId::fcgnn, ModelId::bpgnn}) {
		INFO(to_string(id));
		const auto g = graph_for_model(id, kNodes);
		const auto gp = g ? std::optional<graph::Graph>(permute_graph(*g, perm)) : std::nullopt;
		const auto m = build(small_config(id), g ? &*g : nullptr, kNodes, 5);
		const auto mp = build(small_config(id), gp ? &*gp : nullptr, kNodes, 5);
		CHECK(permute_nodes(m->forecast(x), perm) == mp->forecast(xp));
	}
}

TEST_CASE("models reject graphs they are not defined for", "[models]") {
	const graph::Graph sig = ring(kNodes);
	const graph::Graph full = graph::full_graph(kNodes);
	CHECK_THROWS_AS(build(small_config(ModelId::gcgru), full, kNodes), DataError);
	CHECK_THROWS_AS(build(small_config(ModelId::fcgnn), sig, kNodes), DataError);
	CHECK_THROWS_AS(build(small_config(ModelId::gru), sig, kNodes), DataError);
	CHECK_THROWS_AS(build(small_config(ModelId::grugcn), nullptr, kNodes), DataError);
	CHECK_THROWS_AS(build(small_config(ModelId::bpgnn), graph::bipartite_graph(kNodes, 2), kNodes), DataError);
	CHECK_THROWS_AS(build(small_config(ModelId::tgcn), ring(kNodes + 1), kNodes), DataError);

	auto wrong = small_config(ModelId::fcgnn);
	wrong.graph_source = GraphSource::parse("signal:pearson");
	CHECK_THROWS_WITH(build(wrong, sig, kNodes), Catch::Matchers::ContainsSubstring("complete graph"));
	CHECK_THROWS_AS(GraphSource::parse("signal:cosine"), DataError);
	CHECK_THROWS_AS(GraphSource::parse("bipartite:0"), DataError);
}

TEST_CASE("non-finite or misshaped input is reported", "[models]") {
	const auto m = build(small_config(ModelId::gru), nullptr, kNodes, 1);
	Tensor3 x = random_input(2, kNodes, 48, 6);
	x(1, 2, 30) = std::nan("");
	CHECK_THROWS_WITH(m->forecast(x), Catch::Matchers::ContainsSubstring("batch 1, node 2, step 30"));
	CHECK_THROWS_AS(m->forecast(random_input(1, kNodes, 47, 1)), ShapeError);
}

TEST_CASE("learned adjacencies and attention weights are stochastic", "[models]") {
	const auto agcrn = build(small_config(ModelId::agcrn), nullptr, kNodes, 2);
	const Matrix a = dynamic_cast<const AgcrnModel&>(*agcrn).adjacency();
	const auto tf = build(small_config(ModelId::transformer, 12, 4), nullptr, kNodes, 2);
	const Matrix w = dynamic_cast<const TransformerModel&>(*tf).attention_weights(random_input(1, kNodes, 12, 1));
	for (const Matrix* m : {&a, &w})
		for (std::size_t i = 0; i < m->rows(); ++i) {
			double s = 0.0;
			for (std::size_t j = 0; j < m->cols(); ++j) s += (*m)(i, j);
			CHECK(s == Catch::Approx(1.0));
		}
	CHECK_THROWS_AS(build(ModelConfig::make(ModelId::graphwavenet, {{"window", "8"}, {"blocks", "4"}}), nullptr, kNodes), DataError);
}

TEST_CASE("model configs hash canonically", "[models]") {
	auto a = ModelConfig::make(ModelId::gru, {{"hidden", "8"}, {"window", "48"}});
	auto b = ModelConfig::make(ModelId::gru, {{"window", "48"}, {"hidden", "8"}});
	CHECK(a.canonical() == b.canonical());
	CHECK(a.canonical() == "model=gru;graph=none;hidden=8;window=48");
	b.set("hidden", 9.0);
	CHECK(a.canonical() != b.canonical());
	CHECK_THROWS_AS(ModelConfig::make(ModelId::gru, {{"hidden", "x"}}).get_size("hidden", 1), DataError);
	CHECK(architecture_of(ModelId::gcgru) == Architecture::tas);
	CHECK(architecture_of(ModelId::grugcn) == Architecture::tts);
}
