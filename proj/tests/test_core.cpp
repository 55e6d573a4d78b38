#include <catch_amalgamated.hpp>

#include "oracles.hpp"
#include "stlf/core/archive.hpp"
#include "stlf/core/hash.hpp"
#include "stlf/core/log.hpp"
#include "stlf/core/matrix.hpp"
#include "stlf/core/random.hpp"
#include "stlf/core/time.hpp"

using namespace stlf;

TEST_CASE("matmul variants agree with the naive product", "[matrix]") {
	Rng rng(3);
	const Matrix a = oracle::random_matrix(7, 5, rng), b = oracle::random_matrix(5, 4, rng);
	const Matrix want = oracle::matmul(a, b);
	const Matrix got = matmul(a, b);
	for (std::size_t i = 0; i < want.size(); ++i) CHECK(got[i] == Catch::Approx(want[i]).epsilon(1e-13));

	Matrix tn(7, 4);
	matmul_tn_accumulate(a.transpose(), b, tn);
	Matrix nt(7, 4);
	matmul_nt_accumulate(a, b.transpose(), nt);
	for (std::size_t i = 0; i < want.size(); ++i) {
		CHECK(tn[i] == Catch::Approx(want[i]).epsilon(1e-13));
		CHECK(nt[i] == Catch::Approx(want[i]).epsilon(1e-13));
	}
	CHECK_THROWS_AS(matmul(a, a), ShapeError);
}

TEST_CASE("tensor layout is batch, node, step", "[matrix]") {
	Tensor3 x(2, 3, 4);
	for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] = static_cast<double>(i);
	CHECK(x(1, 2, 3) == 23.0);
	CHECK(x.series(1, 0)[2] == 14.0);
	const Matrix s = x.step(2);
	REQUIRE(s.rows() == 6);
	CHECK(s(4, 0) == x(1, 1, 2));
	const Tensor3 back = Tensor3::from_matrix(x.as_matrix(), 2, 3);
	CHECK(back == x);
}

TEST_CASE("timestamps parse, print and step through months", "[time]") {
	const auto t = parse_timestamp("2013-11-19 19:00:00.0000000");
	REQUIRE(t);
	CHECK(t->iso() == "2013-11-19T19:00:00");
	CHECK(parse_timestamp("2013-11-19T19:30")->iso() == "2013-11-19T19:30:00");
	CHECK(parse_timestamp("2013-02-30") == std::nullopt);
	CHECK(parse_timestamp("yesterday") == std::nullopt);
	CHECK_THROWS_AS(parse_timestamp_or_throw("13/11/2013"), DataError);
	CHECK(add_months(Timestamp::from_civil(2013, 11, 1), 2) == Timestamp::from_civil(2014, 1, 1));
	CHECK(Timestamp::from_civil(2013, 3, 1) - Timestamp::from_civil(2013, 2, 1) == 28 * kDay);
	const TimeRange r{Timestamp::from_civil(2013, 1, 1), Timestamp::from_civil(2013, 1, 2)};
	CHECK(r.steps() == 48);
	CHECK(r.contains(r.start));
	CHECK_FALSE(r.contains(r.end));
}

TEST_CASE("rng streams are reproducible", "[random]") {
	Rng a(42), b(42), c(43);
	for (int i = 0; i < 100; ++i) {
		const double x = a.uniform();
		CHECK(x == b.uniform());
		CHECK(x >= 0.0);
		CHECK(x < 1.0);
	}
	CHECK(a.next() != c.next());
	auto p = Rng(7).permutation(10);
	std::sort(p.begin(), p.end());
	for (std::size_t i = 0; i < 10; ++i) CHECK(p[i] == i);

	Rng g(11);
	double s = 0, ss = 0;
	const int n = 20000;
	for (int i = 0; i < n; ++i) {
		const double z = g.normal();
		s += z;
		ss += z * z;
	}
	CHECK(std::abs(s / n) < 0.03);
	CHECK(std::abs(ss / n - 1.0) < 0.05);
}

TEST_CASE("fnv-1a hash matches published test vectors", "[hash]") {
	CHECK(hash_string("") == "cbf29ce484222325");
	CHECK(hash_string("a") == "af63dc4c8601ec8c");
	CHECK(hash_string("foobar") == "85944171f73967e8");
}

TEST_CASE("array archive round-trips bit-exactly", "[archive]") {
	const auto dir = oracle::scratch_dir("archive");
	ArrayMap arrays;
	arrays["w"] = NamedArray{{2, 3}, {1.0, -0.0, 1e-310, 3.5, std::nextafter(1.0, 2.0), -7.25}};
	arrays["empty"] = NamedArray{{0}, {}};
	write_archive((dir / "a.bin").string(), arrays);
	const auto back = read_archive((dir / "a.bin").string());
	REQUIRE(back.size() == 2);
	CHECK(back.at("w").shape == arrays["w"].shape);
	CHECK(std::memcmp(back.at("w").values.data(), arrays["w"].values.data(), 6 * sizeof(double)) == 0);

	{
		std::ofstream f(dir / "bad.bin", std::ios::binary);
		f << "not an archive";
	}
	CHECK_THROWS_AS(read_archive((dir / "bad.bin").string()), DataError);
	CHECK_THROWS_AS(read_archive((dir / "missing.bin").string()), DataError);
}

TEST_CASE("warnings can be captured", "[log]") {
	log::ScopedCapture cap;
	log::warn("node 3 has zero variance");
	CHECK(cap.contains("zero variance"));
	CHECK(cap.messages().size() == 1);
}
