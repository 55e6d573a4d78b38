#include <catch_amalgamated.hpp>

#include <sstream>

#include "oracles.hpp"
#include "stlf/data/panel.hpp"
#include "stlf/data/scaler.hpp"
#include "stlf/data/splits.hpp"
#include "stlf/data/synth.hpp"
#include "stlf/data/window.hpp"

using namespace stlf;
using namespace stlf::data;

namespace {

std::string lcl_csv(const std::vector<std::string>& ids, std::size_t steps, bool shuffle = false) {
	std::vector<std::string> rows;
	for (std::size_t m = 0; m < ids.size(); ++m)
		for (std::size_t t = 0; t < steps; ++t) {
			const Timestamp ts = Timestamp::from_civil(2013, 1, 1) + static_cast<std::int64_t>(t) * kHalfHour;
			char buf[64];
			std::snprintf(buf, sizeof buf, "%.3f", 0.1 + 0.01 * static_cast<double>(m) + 0.001 * static_cast<double>(t % 7));
			rows.push_back(ids[m] + ",Std," + ts.iso() + ".0000000," + buf);
		}
	if (shuffle) Rng(5).shuffle(rows);
	std::string out = "meter_id,tariff,timestamp,consumption_kWh\n";
	for (const auto& r : rows) out += r + "\n";
	return out;
}

} // namespace

TEST_CASE("ingest builds a Wh panel from long-format rows", "[ingest]") {
	std::istringstream in(lcl_csv({"MAC001", "MAC002", "MAC003"}, 96));
	const auto r = ingest_csv(in);
	REQUIRE(r.panel.n_nodes() == 3);
	CHECK(r.panel.n_steps() == 96);
	CHECK(r.panel.timeline().start == Timestamp::from_civil(2013, 1, 1));
	CHECK(r.panel.timeline().step == kHalfHour);
	CHECK(r.panel.values()(1, 3) == Catch::Approx(113.0));
	CHECK(r.dropped_count() == 0);
}

TEST_CASE("ingest then cohort selection ignores input row order", "[ingest]") {
	const std::vector<std::string> ids{"MAC001", "MAC002", "MAC003", "MAC004"};
	std::istringstream a(lcl_csv(ids, 48)), b(lcl_csv(ids, 48, true));
	const std::vector<std::string> cohort{"MAC004", "MAC002"};
	const auto pa = select_cohort(ingest_csv(a).panel, cohort);
	const auto pb = select_cohort(ingest_csv(b).panel, cohort);
	CHECK(pa == pb);
	CHECK(pa.node_ids() == cohort);
	CHECK_THROWS_AS(select_cohort(pa, {"MAC999"}), DataError);
}

TEST_CASE("meters with gaps are dropped and reported", "[ingest]") {
	std::string csv = lcl_csv({"MAC001", "MAC002", "MAC003"}, 48);
	const auto pos = csv.find("MAC002,Std,2013-01-01T05:00:00.0000000,");
	REQUIRE(pos != std::string::npos);
	const auto end = csv.find('\n', pos);
	csv.replace(pos, end - pos, "MAC002,Std,2013-01-01T05:00:00.0000000,Null");
	std::istringstream in(csv);
	const auto r = ingest_csv(in);
	CHECK(r.panel.n_nodes() == 2);
	CHECK(r.dropped_meters == std::vector<std::string>{"MAC002"});
}

TEST_CASE("corrupt rows abort ingest with a row report", "[ingest]") {
	std::string csv = lcl_csv({"MAC001", "MAC002"}, 8);
	csv += "MAC001,Std,not-a-time,0.1\n";
	csv += "MAC002,Std,2013-01-01T00:00:00,-3\n";
	std::istringstream in(csv);
	try {
		ingest_csv(in);
		FAIL("expected IngestError");
	} catch (const IngestError& e) {
		REQUIRE(e.rows().size() == 2);
		CHECK(e.rows()[0].line == 18);
		CHECK(e.rows()[1].message.find("invalid consumption") != std::string::npos);
	}
	std::istringstream nohdr("a,b,c\n1,2,3\n");
	CHECK_THROWS_AS(ingest_csv(nohdr), DataError);
}

TEST_CASE("monthly splits follow the calendar without overlap", "[splits]") {
	const Timeline tl{Timestamp::from_civil(2013, 1, 1), kHalfHour, 17520};
	const auto s = make_splits(tl, 2013);
	REQUIRE(s.size() == 3);
	const unsigned train_end_month[] = {7, 9, 11};
	for (std::size_t k = 0; k < 3; ++k) {
		CHECK(s[k].id == "split" + std::to_string(k + 1));
		CHECK(s[k].train_start == Timestamp::from_civil(2013, 1, 1));
		CHECK(s[k].train_end == Timestamp::from_civil(2013, train_end_month[k], 1));
		CHECK(s[k].val.start == s[k].train_end);
		CHECK(s[k].test.start == s[k].val.end);
		CHECK(s[k].train_end < s[k].val.end);
	}
	CHECK(s[0].val.end == Timestamp::from_civil(2013, 8, 1));
	CHECK(s[2].test.end == Timestamp::from_civil(2014, 1, 1));
	// July and December have 31 days.
	CHECK(s[0].val.steps() == 31 * 48);
	CHECK(s[2].test.steps() == 31 * 48);
}

TEST_CASE("splits require the full year and name the missing range", "[splits]") {
	const Timeline tl{Timestamp::from_civil(2013, 1, 1), kHalfHour, 48 * 200};
	try {
		make_splits(tl, 2013);
		FAIL("expected DataError");
	} catch (const DataError& e) {
		CHECK(std::string(e.what()).find("2013-07-20T00:00:00") != std::string::npos);
	}
	SplitSpec bad{"x", Timestamp::from_civil(2013, 1, 1), Timestamp::from_civil(2013, 3, 1),
	              {Timestamp::from_civil(2013, 2, 1), Timestamp::from_civil(2013, 4, 1)},
	              {Timestamp::from_civil(2013, 4, 1), Timestamp::from_civil(2013, 5, 1)}};
	CHECK_THROWS_AS(bad.validate(), DataError);
}

TEST_CASE("window counts and contents", "[window]") {
	for (std::size_t len : {10u, 96u, 1000u})
		for (std::size_t w : {1u, 5u, 48u})
			for (std::size_t h : {1u, 48u})
				for (std::size_t s : {1u, 3u, 48u}) {
					std::size_t brute = 0;
					for (std::size_t start = 0; start + w + h <= len; start += s) ++brute;
					CHECK(window_count(len, w, h, s) == brute);
				}

	const auto p = oracle::panel(3, 48 * 12, [](std::size_t i, std::size_t t) { return 1000.0 * static_cast<double>(i) + static_cast<double>(t); });
	const auto spec = make_duration_split(p.timeline(), 6 * kDay, 3 * kDay, 3 * kDay);
	const auto w = window(p, spec, 48, 48);
	CHECK(w.train.size() == 6 * 48 - 96 + 1);
	CHECK(w.val.size() == 2);
	CHECK(w.test.size() == 2);
	CHECK(w.test.inputs(1, 2, 0) == 2000.0 + 9 * 48 + 48);
	CHECK(w.test.targets(1, 2, 47) == 2000.0 + 12 * 48 - 1);
	CHECK(w.test.origins[0] == spec.test.start + 48 * kHalfHour);
	CHECK_THROWS_AS(window(p, spec, 48 * 3, 48), DataError);
}

TEST_CASE("scaler statistics come from training rows only", "[scaler]") {
	const auto p = oracle::panel(2, 48 * 10, [](std::size_t i, std::size_t t) { return t < 48 * 5 ? (i + 1.0) * (t % 4) : 1e6; });
	const auto spec = make_duration_split(p.timeline(), 5 * kDay, 2 * kDay, 3 * kDay);
	const Scaler s = fit_scaler(p, spec);
	// values 0,1,2,3 repeated: mean 1.5, population variance 1.25
	CHECK(s.mean()[0] == Catch::Approx(1.5));
	CHECK(s.stddev()[0] == Catch::Approx(std::sqrt(1.25)));
	CHECK(s.mean()[1] == Catch::Approx(3.0));
	CHECK(s.inverse(1, s.transform(1, 7.25)) == Catch::Approx(7.25));

	const auto flat = oracle::panel(2, 48 * 10, [](std::size_t i, std::size_t) { return 10.0 * static_cast<double>(i + 1); });
	log::ScopedCapture cap;
	const Scaler f = fit_scaler(flat, spec);
	CHECK(cap.contains("zero variance"));
	CHECK(f.stddev()[0] == Scaler::kStdFloor);
	CHECK(std::isfinite(f.transform(0, 11.0)));
}

TEST_CASE("panel cache round-trips", "[cache]") {
	const auto dir = oracle::scratch_dir("panel_cache");
	const auto p = oracle::panel(4, 100, [](std::size_t i, std::size_t t) { return 0.1 * static_cast<double>(i * t) + 1e-9; });
	write_panel_cache(p, (dir / "p").string());
	const auto q = read_panel_cache((dir / "p").string());
	CHECK(q == p);
	CHECK(q.fingerprint() == p.fingerprint());
	CHECK_THROWS_AS(read_panel_cache((dir / "nope").string()), DataError);
}

TEST_CASE("panel rejects negative or non-finite readings", "[panel]") {
	Matrix v(2, 3, 1.0);
	v(1, 2) = -1.0;
	CHECK_THROWS_AS(LoadPanel(v, {"a", "b"}, {Timestamp::from_civil(2013, 1, 1), kHalfHour, 3}), DataError);
	Matrix one(1, 3, 1.0);
	CHECK_THROWS_AS(LoadPanel(one, {"a"}, {Timestamp::from_civil(2013, 1, 1), kHalfHour, 3}), DataError);
}

TEST_CASE("synthetic panel is seeded and clustered", "[synth]") {
	const auto a = synth_panel(12, 48 * 28, 3, 0.8, 9);
	const auto b = synth_panel(12, 48 * 28, 3, 0.8, 9);
	CHECK(a.panel == b.panel);
	CHECK(a.panel.n_nodes() == 12);
	CHECK(a.cluster_of[0] == 0);
	CHECK(a.cluster_of[11] == 2);
	CHECK(a.planted.undirected_edge_count() == 3 * 6);
	for (std::size_t i = 0; i < a.panel.values().size(); ++i) CHECK(a.panel.values()[i] > 0.0);

	// Households in the same cluster correlate more than across clusters.
	auto row = [&](std::size_t i) {
		const auto r = a.panel.values().row(i);
		return std::vector<double>(r.begin(), r.end());
	};
	CHECK(oracle::pearson(row(0), row(1)) > oracle::pearson(row(0), row(11)));
	CHECK_THROWS_AS(synth_panel(3, 10, 4, 0.5, 0), DataError);
	CHECK_THROWS_AS(synth_panel(8, 10, 2, 1.5, 0), DataError);
}
