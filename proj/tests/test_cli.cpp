#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <sstream>

#include <sys/wait.h>

#include "oracles.hpp"
#include "stlf/cli/app.hpp"

using namespace stlf;
namespace fs = std::filesystem;

namespace {

struct Result {
	int code;
	std::string out;
	std::string err;
};

Result invoke(std::vector<std::string> args) {
	std::ostringstream out, err;
	const int code = cli::run(args, out, err);
	return {code, out.str(), err.str()};
}

int exe(const std::string& args) {
	const std::string cmd = std::string(STLF_EXE) + " " + args + " >/dev/null 2>&1";
	const int status = std::system(cmd.c_str());
	return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
	std::ifstream f(p, std::ios::binary);
	std::ostringstream ss;
	ss << f.rdbuf();
	return ss.str();
}

void write(const fs::path& p, const std::string& text) {
	std::ofstream f(p, std::ios::binary);
	f << text;
}

const char* kBenchConfig = R"([data]
synthetic = true
nodes = 5
steps = 1400
clusters = 2
splits = duration:20/3/3

[graph]
measure = pearson
rule = knn:2

[models]
ids = seasonal_naive, gru, gcgru
hidden = 4
window = 48

[training]
n_trials = 2
max_epochs = 3
patience = 1
max_batches_per_epoch = 2
batch_size = 8
)";

} // namespace

TEST_CASE("help and parse errors map to exit codes", "[cli]") {
	CHECK(invoke({"--help"}).code == 0);
	CHECK(invoke({"benchmark", "--help"}).code == 0);
	CHECK(invoke({}).code == 2);
	CHECK(invoke({"frobnicate"}).code == 2);
	CHECK(invoke({"graph"}).code == 2); // --panel is required
	CHECK(invoke({"synth", "--nodes", "many"}).code == 2);
}

TEST_CASE("the installed binary reports the same exit codes", "[cli]") {
	CHECK(exe("--help") == 0);
	CHECK(exe("graph --panel /nonexistent/panel") == 2);
	CHECK(exe("--bogus-flag") == 2);
}

TEST_CASE("synth then graph writes a graph and a manifest", "[cli]") {
	const auto dir = oracle::scratch_dir("cli_graph");
	const std::string panel = (dir / "syn").string();
	REQUIRE(invoke({"synth", "--out", panel, "--nodes", "8", "--steps", "1400", "--clusters", "2"}).code == 0);
	CHECK(fs::exists(panel + ".planted.json"));
	for (const char* measure : {"pearson", "euclidean", "dtw", "correntropy"}) {
		INFO(measure);
		const std::string out = (dir / (std::string("g_") + measure)).string();
		const auto r = invoke({"graph", "--panel", panel, "--measure", measure, "--rule", "knn:2", "--split", "duration:20/3/3", "--out", out});
		REQUIRE(r.code == 0);
		CHECK(r.out.find("mean_degree=") != std::string::npos);
		CHECK(graph::read_graph(out).mean_degree() >= 2.0);
		CHECK(cli::verify_manifest(out + ".manifest.json").empty());
	}
	CHECK(invoke({"graph", "--panel", panel, "--measure", "cosine"}).code == 2);
	CHECK(invoke({"graph", "--panel", panel, "--rule", "knn:50", "--split", "duration:20/3/3"}).code == 2);
	CHECK(invoke({"graph", "--panel", panel, "--split", "split1"}).code == 2); // panel does not cover a year
}

TEST_CASE("bare names resolve inside the cache directory", "[cli]") {
	const auto dir = oracle::scratch_dir("cli_cache");
	::setenv("STLF_CACHE_DIR", dir.c_str(), 1);
	const auto r = invoke({"synth", "--out", "cached", "--nodes", "4", "--steps", "200", "--clusters", "2"});
	::unsetenv("STLF_CACHE_DIR");
	CHECK(r.code == 0);
	CHECK(fs::exists(dir / "cached.bin"));
}

TEST_CASE("corrupt ingest input exits with a row report", "[cli]") {
	const auto dir = oracle::scratch_dir("cli_ingest");
	write(dir / "bad.csv", "meter_id,tariff,timestamp,consumption_kWh\nMAC1,Std,2013-01-01 00:00:00,0.1\nMAC1,Std,garbage,0.1\n");
	const auto r = invoke({"ingest", "--input", (dir / "bad.csv").string(), "--out", (dir / "p").string()});
	CHECK(r.code == 2);
	CHECK(r.err.find("line 3") != std::string::npos);
	CHECK(invoke({"ingest", "--input", (dir / "missing.csv").string()}).code == 2);
}

TEST_CASE("config errors exit with a data error", "[cli][config]") {
	const auto dir = oracle::scratch_dir("cli_config");
	write(dir / "unknown.ini", std::string(kBenchConfig) + "colour = blue\n");
	const auto r = invoke({"benchmark", "--config", (dir / "unknown.ini").string(), "--out", (dir / "run").string()});
	CHECK(r.code == 2);
	CHECK(r.err.find("unknown key [training] colour") != std::string::npos);

	std::string bad_graph = kBenchConfig;
	bad_graph += "\n[model.gcgru]\ngraph = full\n";
	write(dir / "graph.ini", bad_graph);
	CHECK(invoke({"benchmark", "--config", (dir / "graph.ini").string()}).code == 2);
	CHECK_THROWS_AS(cli::parse_config("[models]\nids = gru, gru\n[data]\nsynthetic = true\n"), DataError);
}

TEST_CASE("benchmark writes a complete, reproducible run", "[cli][benchmark]") {
	const auto dir = oracle::scratch_dir("cli_bench");
	write(dir / "bench.ini", kBenchConfig);
	const auto a = invoke({"benchmark", "--config", (dir / "bench.ini").string(), "--out", (dir / "a").string()});
	INFO(a.err);
	REQUIRE(a.code == 0);
	for (const char* f : {"report.csv", "tables.md", "trials.json", "forecasts.bin", "forecasts.json", "manifest.json", "config.ini"})
		CHECK(fs::exists(dir / "a" / f));

	std::istringstream report(slurp(dir / "a" / "report.csv"));
	std::string line;
	std::getline(report, line);
	CHECK(line == "model_id,split,level,metric,mean,std,n_trials");
	std::size_t rows = 0;
	while (std::getline(report, line)) {
		++rows;
		CHECK(line.substr(line.rfind(',') + 1) == "2");
	}
	CHECK(rows == 3 * 2 * 3); // models x levels x metrics

	const auto b = invoke({"benchmark", "--config", (dir / "bench.ini").string(), "--out", (dir / "b").string(), "--workers", "2"});
	REQUIRE(b.code == 0);
	CHECK(slurp(dir / "a" / "report.csv") == slurp(dir / "b" / "report.csv"));
	CHECK(slurp(dir / "a" / "forecasts.bin") == slurp(dir / "b" / "forecasts.bin"));

	CHECK(cli::verify_manifest(dir / "a" / "manifest.json").empty());
	write(dir / "a" / "report.csv", "tampered\n");
	CHECK_FALSE(cli::verify_manifest(dir / "a" / "manifest.json").empty());

	{
		const auto e = invoke({"evaluate", "--run", (dir / "b").string(), "--timestamp", "2013-01-25T12:00:00", "--bins", "4"});
		INFO(e.err);
		CHECK(e.code == 0);
		CHECK(fs::exists(dir / "b" / "histogram.csv"));
		CHECK(invoke({"evaluate", "--run", (dir / "b").string(), "--timestamp", "2013-01-02T12:00:00"}).code == 2);
		CHECK(invoke({"plot", "--histogram", (dir / "b" / "histogram").string(), "--out", (dir / "h.svg").string()}).code == 0);
		CHECK(slurp(dir / "h.svg").find("<svg") != std::string::npos);
		CHECK(invoke({"plot", "--report", (dir / "b" / "report.csv").string(), "--out", (dir / "r.svg").string()}).code == 0);
		CHECK(invoke({"plot", "--report", (dir / "nope.csv").string(), "--out", (dir / "x.svg").string()}).code == 2);
	}
}
