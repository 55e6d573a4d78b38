#include <catch_amalgamated.hpp>

#include <cstdlib>

#include "oracles.hpp"
#include "stlf/data/splits.hpp"
#include "stlf/graph/graph.hpp"
#include "stlf/graph/native_kernel.hpp"
#include "stlf/graph/similarity.hpp"
#include "stlf/graph/sparsify.hpp"

using namespace stlf;
using namespace stlf::graph;

namespace {

std::vector<double> random_series(Rng& rng, std::size_t n) {
	std::vector<double> v(n);
	for (auto& x : v) x = rng.normal();
	return v;
}

Matrix random_rows(std::size_t n, std::size_t t, std::uint64_t seed) {
	Rng rng(seed);
	return oracle::random_matrix(n, t, rng);
}

struct SplitPanel {
	data::LoadPanel panel;
	data::SplitSpec spec;
};

SplitPanel small_panel(std::size_t n = 6) {
	Rng rng(21);
	std::vector<double> shared(48 * 8);
	for (auto& s : shared) s = rng.normal();
	auto p = oracle::panel(n, 48 * 8, [&](std::size_t i, std::size_t t) {
		return 200.0 + 50.0 * (i % 2 ? shared[t] : -shared[t]) + 10.0 * rng.normal() + 5.0 * static_cast<double>(i);
	});
	auto spec = data::make_duration_split(p.timeline(), 4 * kDay, 2 * kDay, 2 * kDay);
	return {std::move(p), spec};
}

} // namespace

TEST_CASE("pearson matches the raw-moment formula", "[similarity]") {
	Rng rng(1);
	for (int k = 0; k < 20; ++k) {
		const auto x = random_series(rng, 50), y = random_series(rng, 50);
		CHECK(pearson(x, y) == Catch::Approx(oracle::pearson(x, y)).margin(1e-12));
	}
	const std::vector<double> c(10, 3.0), z{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
	CHECK(pearson(c, z) == 0.0);
	CHECK(pearson(z, z) == Catch::Approx(1.0));
}

TEST_CASE("dtw equals the minimum over all warping paths", "[similarity][dtw]") {
	Rng rng(2);
	for (int k = 0; k < 30; ++k) {
		const std::size_t n = 2 + rng.index(5), m = 2 + rng.index(5);
		const auto x = random_series(rng, n), y = random_series(rng, m);
		CHECK(dtw(x, y) == Catch::Approx(oracle::dtw_by_enumeration(x, y)).margin(1e-12));
		if (n == m)
			for (std::size_t band : {0u, 1u, 2u})
				CHECK(dtw(x, y, band) == Catch::Approx(oracle::dtw_by_enumeration(x, y, static_cast<long>(band))).margin(1e-12));
	}
	// a time shift costs nothing under warping but a lot pointwise
	const std::vector<double> a{0, 0, 1, 2, 1, 0, 0}, b{0, 1, 2, 1, 0, 0, 0};
	CHECK(dtw(a, b) == 0.0);
	CHECK(euclidean(a, b) > 1.0);
	CHECK(dtw(a, b, 0) == 4.0); // lockstep alignment: sum of |a_t - b_t|
	CHECK(dtw(a, b, 100) == dtw(a, b));
}

TEST_CASE("correntropy of identical series is one", "[similarity]") {
	const std::vector<double> x{1, 2, 3}, y{1, 2, 5};
	CHECK(correntropy(x, x, 0.7) == 1.0);
	CHECK(correntropy(x, y, 1.0) == Catch::Approx((2.0 + std::exp(-2.0)) / 3.0));
	CHECK_THROWS_AS(correntropy(x, y, 0.0), DataError);
}

TEST_CASE("pairwise matrices are symmetric with the conventional diagonal", "[similarity]") {
	const auto sp = small_panel();
	const auto period = GraphPeriod::training(sp.spec);
	for (Measure m : {Measure::pearson, Measure::euclidean, Measure::dtw, Measure::correntropy}) {
		const auto s = similarity_matrix(m, sp.panel, period);
		CHECK(s.is_symmetric(0.0));
		CHECK(s.values(0, 0) == (is_distance(m) ? 0.0 : 1.0));
	}
	const auto corr = pearson_matrix(sp.panel, period);
	CHECK(corr.values(1, 3) > 0.5);
	CHECK(corr.values(0, 1) < -0.5);
}

TEST_CASE("graphs cannot look past the training period", "[similarity]") {
	const auto sp = small_panel();
	CHECK_THROWS_WITH(GraphPeriod({sp.spec.train_start, sp.spec.val.end}, sp.spec.train_end), Catch::Matchers::ContainsSubstring("leakage"));
	CHECK_NOTHROW(GraphPeriod({sp.spec.train_start, sp.spec.train_end}, sp.spec.train_end));
}

TEST_CASE("threshold, knn and auto rules", "[sparsify]") {
	const auto sp = small_panel(10);
	const auto sim = pearson_matrix(sp.panel, GraphPeriod::training(sp.spec));

	const Graph t = sparsify(sim, parse_rule("threshold:0.5"));
	for (const auto& e : t.edges()) CHECK(sim.values(e.src, e.dst) >= 0.5);
	std::size_t expected = 0;
	for (std::size_t i = 0; i < 10; ++i)
		for (std::size_t j = 0; j < 10; ++j)
			if (i != j && sim.values(i, j) >= 0.5) ++expected;
	CHECK(t.edges().size() == expected);
	CHECK(t.is_symmetric());

	for (std::size_t k : {1u, 3u, 5u}) {
		const Graph g = sparsify(sim, parse_rule("knn:" + std::to_string(k)));
		CHECK(g.is_symmetric());
		const Matrix a = g.dense_adjacency();
		for (std::size_t i = 0; i < 10; ++i) {
			std::size_t deg = 0;
			for (std::size_t j = 0; j < 10; ++j) deg += a(i, j) > 0.0;
			CHECK(deg >= std::min<std::size_t>(k, 4)); // only same-parity nodes correlate positively
		}
	}

	const Graph au = sparsify(sim, parse_rule("threshold:auto:3"));
	CHECK(au.mean_degree() >= 3.0);
	CHECK(au.params.count("tau"));

	CHECK_THROWS_AS(parse_rule("knn:x"), DataError);
	CHECK_THROWS_AS(parse_rule("median"), DataError);
	CHECK_THROWS_AS(sparsify(sim, parse_rule("knn:10")), DataError);
}

TEST_CASE("knn on distances keeps the nearest series", "[sparsify]") {
	const auto p = oracle::panel(4, 96, [](std::size_t i, std::size_t t) { return (i < 2 ? 100.0 : 400.0) + static_cast<double>((t * (i + 3)) % 11); });
	const auto spec = data::make_duration_split(p.timeline(), kDay, 12 * 1800, 12 * 1800);
	BuildOptions opt;
	opt.zscore = false;
	const Graph g = sparsify(euclidean_matrix(p, GraphPeriod::training(spec), opt), KNearest{1});
	const Matrix a = g.dense_adjacency();
	CHECK(a(0, 1) > 0.0);
	CHECK(a(2, 3) > 0.0);
	CHECK(a(0, 2) == 0.0);
}

TEST_CASE("full and bipartite graphs have the documented message counts", "[graph]") {
	for (std::size_t n : {2u, 5u, 20u}) {
		CHECK(full_graph(n).directed_message_count() == n * (n - 1));
		for (std::size_t k : {1u, 3u}) {
			const Graph b = bipartite_graph(n, k);
			CHECK(b.directed_message_count() == 2 * k * n);
			CHECK(b.total_nodes() == n + k);
			for (const auto& e : b.edges()) CHECK((e.src < n) != (e.dst < n));
		}
	}
	CHECK_THROWS_AS(Graph(3, 0, GraphKind::signal, {{1, 1, 1.0}}), DataError);
	CHECK_THROWS_AS(Graph(3, 1, GraphKind::bipartite, {{0, 1, 1.0}}), DataError);
	CHECK_THROWS_AS(normalize(bipartite_graph(3, 1)), DataError);
}

TEST_CASE("normalization matches the dense formula", "[graph]") {
	const Graph g(4, 0, GraphKind::signal, {{0, 1, 1.0}, {1, 0, 1.0}, {1, 2, 0.5}, {2, 1, 0.5}});
	const Matrix a = normalize(g);
	// degrees with self-loops: 2, 2.5, 1.5, 1
	CHECK(a(0, 0) == Catch::Approx(0.5));
	CHECK(a(0, 1) == Catch::Approx(1.0 / std::sqrt(2.0 * 2.5)));
	CHECK(a(1, 2) == Catch::Approx(0.5 / std::sqrt(2.5 * 1.5)));
	CHECK(a(3, 3) == 1.0);
	CHECK(a(0, 3) == 0.0);
}

TEST_CASE("graph files round-trip", "[graph]") {
	const auto dir = oracle::scratch_dir("graph_io");
	Graph g(3, 0, GraphKind::signal, {{0, 2, 0.123456789012345678}, {2, 0, 0.123456789012345678}});
	g.measure = "dtw";
	g.params["band"] = 48;
	write_graph(g, (dir / "g").string());
	CHECK(read_graph((dir / "g").string()) == g);
	const Graph b = bipartite_graph(4, 2);
	write_graph(b, (dir / "b").string());
	CHECK(read_graph((dir / "b").string()) == b);
}

TEST_CASE("reference kernel does not depend on the thread count", "[kernel]") {
	const Matrix rows = random_rows(9, 40, 4);
	KernelParams kp;
	kp.band = 5;
	kp.sigma = 0.8;
	for (Measure m : {Measure::pearson, Measure::euclidean, Measure::dtw, Measure::correntropy}) {
		const Matrix a = ReferenceKernel(1).pairwise(rows, m, kp), b = ReferenceKernel(4).pairwise(rows, m, kp);
		CHECK(a == b);
	}
}

TEST_CASE("native kernel passes the handshake and matches the reference", "[kernel]") {
	const auto k = NativeKernel::open(MOCK_KERNEL);
	CHECK(k->version() == "1.0.0-mock");
	const Matrix rows = random_rows(7, 30, 8);
	for (auto band : {std::optional<std::size_t>{}, std::optional<std::size_t>{3}}) {
		KernelParams kp;
		kp.band = band;
		kp.sigma = 1.3;
		for (Measure m : {Measure::pearson, Measure::euclidean, Measure::dtw, Measure::correntropy}) {
			const Matrix a = ReferenceKernel().pairwise(rows, m, kp), b = k->pairwise(rows, m, kp);
			for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-9);
		}
	}
	Matrix bad = rows;
	bad(2, 5) = std::nan("");
	CHECK_THROWS_WITH(k->pairwise(bad, Measure::dtw, {}), Catch::Matchers::ContainsSubstring("(2, 5)"));
}

TEST_CASE("mismatched kernels are refused", "[kernel]") {
	CHECK_THROWS_AS(NativeKernel::open(MOCK_KERNEL_BAD_ABI), KernelHandshakeError);
	CHECK_THROWS_AS(NativeKernel::open(MOCK_KERNEL_BAD_VERSION), KernelHandshakeError);
	CHECK_THROWS_AS(resolve_kernel(MOCK_KERNEL_BAD_ABI), KernelHandshakeError);
}

TEST_CASE("missing kernel falls back to the reference path", "[kernel]") {
	log::ScopedCapture cap;
	const auto k = resolve_kernel("/nonexistent/libstlf_sim.so");
	CHECK(k->name() == "reference");
	CHECK(cap.contains("falling back"));

	::setenv("STLF_SIM_KERNEL", MOCK_KERNEL, 1);
	const auto e = resolve_kernel();
	::unsetenv("STLF_SIM_KERNEL");
	CHECK(e->name().rfind("native:", 0) == 0);
}

TEST_CASE("graph from the native kernel equals the reference graph", "[kernel]") {
	const auto sp = small_panel(8);
	const auto native = NativeKernel::open(MOCK_KERNEL);
	BuildOptions a, b;
	b.kernel = native.get();
	for (Measure m : {Measure::euclidean, Measure::dtw, Measure::correntropy}) {
		const auto sa = similarity_matrix(m, sp.panel, GraphPeriod::training(sp.spec), a);
		const auto sb = similarity_matrix(m, sp.panel, GraphPeriod::training(sp.spec), b);
		for (std::size_t i = 0; i < sa.values.size(); ++i) CHECK(std::abs(sa.values[i] - sb.values[i]) <= 1e-9);
	}
}
