#pragma once

// The `stlf` command line: ingest, synth, graph, tune, benchmark, evaluate
// and plot. run() returns the process exit code: 0 success, 1 internal
// error, 2 user or data error.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "stlf/cli/config.hpp"
#include "stlf/cli/manifest.hpp"
#include "stlf/cli/svg.hpp"
#include "stlf/core/archive.hpp"
#include "stlf/core/error.hpp"
#include "stlf/data/panel.hpp"
#include "stlf/data/splits.hpp"
#include "stlf/data/synth.hpp"
#include "stlf/eval/histogram.hpp"
#include "stlf/eval/report.hpp"
#include "stlf/graph/native_kernel.hpp"
#include "stlf/graph/sparsify.hpp"
#include "stlf/train/experiment.hpp"

namespace stlf::cli {

namespace fs = std::filesystem;

/// $STLF_CACHE_DIR, or the working directory.
inline fs::path cache_dir() {
	if (const char* env = std::getenv("STLF_CACHE_DIR"); env && *env) return env;
	return ".";
}

/// Bare names (no directory part) resolve inside the cache directory.
inline std::string resolve_prefix(const std::string& p) {
	const fs::path path(p);
	if (path.has_parent_path() || path.is_absolute()) return p;
	return (cache_dir() / path).string();
}

/// "split1".."split3" (calendar months of the panel's first year) or
/// "duration:<train>/<val>/<test>" in days, counted from the panel start.
inline data::SplitSpec resolve_split(const data::LoadPanel& panel, const std::string& text) {
	if (text.rfind("duration:", 0) == 0) {
		std::vector<std::string> parts;
		std::istringstream is(text.substr(9));
		for (std::string p; std::getline(is, p, '/');) parts.push_back(p);
		if (parts.size() != 3) throw DataError("split '" + text + "': expected duration:<train>/<val>/<test> in days");
		std::int64_t sec[3];
		for (int k = 0; k < 3; ++k)
			sec[k] = static_cast<std::int64_t>(std::llround(detail::to_double("split " + text, parts[static_cast<std::size_t>(k)]) * kDay));
		return data::make_duration_split(panel.timeline(), sec[0], sec[1], sec[2], "duration");
	}
	for (auto& s : data::make_splits(panel))
		if (s.id == text) return s;
	throw DataError("unknown split '" + text + "' (expected split1, split2, split3 or duration:<train>/<val>/<test>)");
}

struct LoadedData {
	data::LoadPanel panel;
	std::optional<graph::Graph> planted;
};

inline LoadedData load_data(const DataSection& d) {
	if (d.synthetic) {
		auto s = data::synth_panel(d.nodes, d.steps, d.clusters, d.coupling, d.seed);
		return {std::move(s.panel), std::move(s.planted)};
	}
	const std::string prefix = resolve_prefix(d.panel);
	LoadedData out{data::read_panel_cache(prefix), std::nullopt};
	if (fs::exists(prefix + ".planted.json")) out.planted = graph::read_graph(prefix + ".planted");
	return out;
}

inline std::string file_safe(std::string s) {
	for (char& c : s)
		if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.' || c == '@')) c = '_';
	return s;
}

inline void write_text(const fs::path& p, const std::string& text) {
	std::ofstream f(p, std::ios::binary);
	if (!f) throw DataError("cannot write '" + p.string() + "'");
	f << text;
}

inline std::string read_text(const fs::path& p) {
	std::ifstream f(p, std::ios::binary);
	if (!f) throw DataError("cannot open '" + p.string() + "'");
	std::ostringstream ss;
	ss << f.rdbuf();
	return ss.str();
}

class Stopwatch {
public:
	double lap() {
		const auto now = std::chrono::steady_clock::now();
		const double s = std::chrono::duration<double>(now - last_).count();
		last_ = now;
		return s;
	}

private:
	std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

/// Training flags shared by `tune` and `benchmark`; unset flags keep the
/// config values.
struct TrainOverrides {
	std::optional<double> learning_rate;
	std::optional<std::size_t> batch_size, max_epochs, patience, n_trials, max_batches, workers;
	std::optional<std::uint64_t> base_seed;
	std::optional<double> clip_norm;
	bool no_clip = false;

	void attach(CLI::App& app) {
		app.add_option("--learning-rate", learning_rate, "Adam learning rate");
		app.add_option("--batch-size", batch_size, "Minibatch size");
		app.add_option("--max-epochs", max_epochs, "Upper bound on training epochs");
		app.add_option("--patience", patience, "Early-stopping patience in epochs");
		app.add_option("--n-trials", n_trials, "Trials per model and split (seeds base_seed + i)");
		app.add_option("--base-seed", base_seed, "Seed of the first trial");
		app.add_option("--clip-norm", clip_norm, "Global gradient-norm bound");
		app.add_flag("--no-clip", no_clip, "Disable gradient clipping");
		app.add_option("--max-batches-per-epoch", max_batches, "Minibatches per epoch (0 = full pass)");
		app.add_option("--workers", workers, "Concurrent trials; results do not depend on it");
	}
	void apply(RunConfig& cfg) const {
		auto& t = cfg.training;
		if (learning_rate) t.learning_rate = *learning_rate;
		if (batch_size) t.batch_size = *batch_size;
		if (max_epochs) t.max_epochs = *max_epochs;
		if (patience) t.patience = *patience;
		if (n_trials) t.n_trials = *n_trials;
		if (base_seed) t.base_seed = *base_seed;
		if (clip_norm) t.clip_norm = *clip_norm;
		if (no_clip) t.clip_gradients = false;
		if (max_batches) t.max_batches_per_epoch = *max_batches;
		if (workers) cfg.workers = *workers;
		t.validate();
		if (cfg.workers < 1) throw DataError("--workers must be >= 1");
	}
};

inline graph::BuildOptions build_options(const GraphSection& g, const graph::PairwiseKernel* kernel) {
	graph::BuildOptions opt;
	opt.zscore = g.zscore;
	opt.band = g.band;
	opt.sigma = g.sigma;
	opt.kernel = kernel;
	return opt;
}

// ---------------------------------------------------------------------------
// ingest

struct IngestArgs {
	std::string input, cohort, out, id_column = "meter_id", time_column = "timestamp", value_column = "consumption_kWh";
	std::int64_t resolution = kHalfHour;
};

inline int cmd_ingest(const IngestArgs& a, std::ostream& out) {
	Stopwatch sw;
	data::IngestOptions opt;
	opt.id_column = a.id_column;
	opt.time_column = a.time_column;
	opt.value_column = a.value_column;
	auto result = data::ingest_csv(a.input, a.resolution, opt);
	data::LoadPanel panel = std::move(result.panel);
	if (!a.cohort.empty()) panel = data::select_cohort(panel, data::read_cohort_file(a.cohort));
	const std::string prefix = resolve_prefix(a.out.empty() ? fs::path(a.input).stem().string() : a.out);
	if (fs::path(prefix).has_parent_path()) fs::create_directories(fs::path(prefix).parent_path());
	data::write_panel_cache(panel, prefix);

	RunManifest m;
	m.command = "ingest";
	m.config_hash = hash_string(a.input + "|" + a.cohort);
	m.data_fingerprint = panel.fingerprint();
	m.timings.emplace_back("ingest", sw.lap());
	const std::string stem = fs::path(prefix).filename().string();
	m.add_output(stem + ".bin");
	m.add_output(stem + ".json");
	m.write(prefix + ".manifest.json");

	out << "N=" << panel.n_nodes() << " T=" << panel.n_steps() << " span=" << panel.timeline().start.iso() << " .. "
	    << panel.timeline().end().iso() << " dropped_meters=" << result.dropped_count() << '\n';
	out << "wrote " << prefix << ".bin, " << prefix << ".json\n";
	return 0;
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
	std::string out = "synthetic";
	std::size_t nodes = 20, steps = 2688, clusters = 4;
	double coupling = 0.6;
	std::uint64_t seed = 0;
};

inline int cmd_synth(const SynthArgs& a, std::ostream& out) {
	Stopwatch sw;
	auto s = data::synth_panel(a.nodes, a.steps, a.clusters, a.coupling, a.seed);
	const std::string prefix = resolve_prefix(a.out);
	if (fs::path(prefix).has_parent_path()) fs::create_directories(fs::path(prefix).parent_path());
	data::write_panel_cache(s.panel, prefix);
	graph::write_graph(s.planted, prefix + ".planted");

	RunManifest m;
	m.command = "synth";
	m.config_hash = hash_string(std::to_string(a.nodes) + "|" + std::to_string(a.steps) + "|" + std::to_string(a.clusters) + "|" +
	                            std::to_string(a.coupling) + "|" + std::to_string(a.seed));
	m.seeds = {a.seed};
	m.data_fingerprint = s.panel.fingerprint();
	m.timings.emplace_back("synth", sw.lap());
	const std::string stem = fs::path(prefix).filename().string();
	for (const char* ext : {".bin", ".json", ".planted.edges.csv", ".planted.json"}) m.add_output(stem + ext);
	m.write(prefix + ".manifest.json");

	out << "N=" << s.panel.n_nodes() << " T=" << s.panel.n_steps() << " clusters=" << a.clusters << " coupling=" << a.coupling
	    << " span=" << s.panel.timeline().start.iso() << " .. " << s.panel.timeline().end().iso() << '\n';
	out << "wrote " << prefix << " (panel) and " << prefix << ".planted (planted graph)\n";
	return 0;
}

// ---------------------------------------------------------------------------
// graph

struct GraphArgs {
	std::string panel, measure = "pearson", rule = "threshold:auto", out, split = "split1", band = "48", sigma = "auto", kernel;
	bool no_zscore = false;
	unsigned threads = 1;
};

inline int cmd_graph(const GraphArgs& a, std::ostream& out) {
	Stopwatch sw;
	const std::string panel_prefix = resolve_prefix(a.panel);
	const auto panel = data::read_panel_cache(panel_prefix);
	const auto split = resolve_split(panel, a.split);
	GraphSection gs;
	gs.measure = a.measure;
	gs.rule = a.rule;
	gs.band = a.band == "none" ? std::nullopt : std::optional<std::size_t>(detail::to_size("--band", a.band));
	gs.sigma = a.sigma == "auto" ? std::nullopt : std::optional<double>(detail::to_double("--sigma", a.sigma));
	gs.zscore = !a.no_zscore;
	const auto kernel = graph::resolve_kernel(a.kernel, a.threads);
	const auto sim = graph::similarity_matrix(graph::measure_from_string(a.measure), panel, graph::GraphPeriod::training(split),
	                                          build_options(gs, kernel.get()));
	const auto g = graph::sparsify(sim, graph::parse_rule(a.rule));
	const std::string prefix =
	    resolve_prefix(a.out.empty() ? fs::path(panel_prefix).filename().string() + "." + a.measure + "." + split.id : a.out);
	if (fs::path(prefix).has_parent_path()) fs::create_directories(fs::path(prefix).parent_path());
	graph::write_graph(g, prefix);

	RunManifest m;
	m.command = "graph";
	m.config_hash = hash_string(a.measure + "|" + a.rule + "|" + a.split + "|" + a.band + "|" + a.sigma + "|" + (a.no_zscore ? "raw" : "z"));
	m.data_fingerprint = panel.fingerprint();
	m.timings.emplace_back("graph", sw.lap());
	const std::string stem = fs::path(prefix).filename().string();
	m.add_output(stem + ".edges.csv");
	m.add_output(stem + ".json");
	m.write(prefix + ".manifest.json");

	char buf[160];
	std::snprintf(buf, sizeof buf, "nodes=%zu undirected_edges=%zu mean_degree=%.3f density=%.4f", g.n_nodes(), g.undirected_edge_count(),
	              g.mean_degree(), g.density());
	out << "measure=" << a.measure << " rule=" << a.rule << " kernel=" << kernel->name() << " split=" << split.id << '\n' << buf << '\n';
	for (const auto& [k, v] : g.params) out << k << '=' << v << '\n';
	out << "wrote " << prefix << ".edges.csv\n";
	return 0;
}

// ---------------------------------------------------------------------------
// shared by tune and benchmark

/// Graphs per (split, source), built once.
class GraphCache {
public:
	GraphCache(const RunConfig& cfg, const LoadedData& data, const graph::PairwiseKernel* kernel)
	    : cfg_(cfg), data_(data), rule_(graph::parse_rule(cfg.graph.rule)), kernel_(kernel) {}

	const graph::Graph* get(const data::SplitSpec& spec, const models::GraphSource& source, const fs::path& dump_dir = {},
	                        RunManifest* manifest = nullptr) {
		if (!source.needs_graph_object()) return nullptr;
		const std::string key = spec.id + "/" + source.str();
		auto it = graphs_.find(key);
		if (it != graphs_.end()) return &it->second;
		auto g = train::graph_for(source, data_.panel, spec, rule_, build_options(cfg_.graph, kernel_), data_.planted ? &*data_.planted : nullptr);
		it = graphs_.emplace(key, std::move(*g)).first;
		if (!dump_dir.empty()) {
			const std::string stem = file_safe(spec.id + "." + source.str());
			graph::write_graph(it->second, (dump_dir / "graphs" / stem).string());
			if (manifest) {
				manifest->add_output("graphs/" + stem + ".edges.csv");
				manifest->add_output("graphs/" + stem + ".json");
			}
		}
		return &it->second;
	}

private:
	const RunConfig& cfg_;
	const LoadedData& data_;
	graph::SparsifyRule rule_;
	const graph::PairwiseKernel* kernel_;
	std::map<std::string, graph::Graph> graphs_;
};

inline nlohmann::json tune_json(const train::TuneResult& r) {
	nlohmann::json cands = nlohmann::json::array();
	for (const auto& c : r.candidates) {
		nlohmann::json j{{"learning_rate", c.learning_rate}, {"batch_size", c.batch_size}, {"window", c.window}, {"failed", c.failed}};
		j["val_loss"] = std::isfinite(c.val_loss) ? nlohmann::json(c.val_loss) : nlohmann::json(nullptr);
		if (c.failed) j["failure"] = c.failure;
		cands.push_back(j);
	}
	const auto& b = r.candidates[r.best];
	return {{"best", {{"learning_rate", b.learning_rate}, {"batch_size", b.batch_size}, {"window", b.window}, {"val_loss", b.val_loss}}},
	        {"candidates", cands}};
}

// ---------------------------------------------------------------------------
// tune

struct TuneArgs {
	std::string config, out;
	std::vector<std::string> splits;
	TrainOverrides overrides;
};

inline int cmd_tune(const TuneArgs& a, std::ostream& out) {
	Stopwatch sw;
	RunConfig cfg = load_config(a.config);
	a.overrides.apply(cfg);
	const fs::path dir = a.out.empty() ? fs::path("tune") : fs::path(a.out);
	fs::create_directories(dir);
	const auto data = load_data(cfg.data);
	const auto kernel = graph::resolve_kernel(cfg.graph.kernel);
	GraphCache graphs(cfg, data, kernel.get());
	auto audit = std::make_shared<train::AuditLog>();
	RunManifest m;
	m.command = "tune";
	m.config_hash = cfg.hash();
	m.data_fingerprint = data.panel.fingerprint();
	m.seeds = {cfg.training.base_seed};
	m.timings.emplace_back("load", sw.lap());

	nlohmann::json results = nlohmann::json::object();
	for (const auto& split_name : a.splits.empty() ? cfg.data.splits : a.splits) {
		const auto spec = resolve_split(data.panel, split_name);
		train::SplitData sd(data.panel, spec, cfg.data.horizon, audit);
		for (const auto& e : cfg.models) {
			if (models::is_benchmark(e.config.model_id) && models::architecture_of(e.config.model_id) != models::Architecture::temporal_only) {
				out << spec.id << ' ' << e.label << ": nothing to tune\n";
				continue;
			}
			const auto r = train::tune(e.config, graphs.get(spec, e.config.graph_source), sd, cfg.grid, cfg.training, cfg.training.base_seed);
			results[spec.id][e.label] = tune_json(r);
			const auto& b = r.candidates[r.best];
			out << spec.id << ' ' << e.label << ": lr=" << b.learning_rate << " batch=" << b.batch_size << " W=" << b.window
			    << " val_mae=" << b.val_loss << '\n';
			m.timings.emplace_back(spec.id + "/" + e.label, sw.lap());
		}
	}
	nlohmann::json doc{{"results", results}, {"audit", audit->to_json()}, {"test_partition_read", audit->touched("test")}};
	write_text(dir / "tune.json", doc.dump(2) + "\n");
	m.add_output("tune.json");
	m.write(dir / "manifest.json");
	out << "wrote " << (dir / "tune.json").string() << '\n';
	return 0;
}

// ---------------------------------------------------------------------------
// evaluate (also used by benchmark when a histogram timestamp is configured)

/// Forecast archive of a benchmark run: "<split>/truth" and "<split>/<label>"
/// arrays (N x T, Wh) in forecasts.bin; times and labels in forecasts.json.
struct ForecastStore {
	nlohmann::json index = {{"node_ids", nlohmann::json::array()}, {"splits", nlohmann::json::object()}};
	ArrayMap arrays;

	void put_truth(const std::string& split, const eval::EvalSeries& s, const std::vector<std::string>& node_ids) {
		index["node_ids"] = node_ids;
		nlohmann::json times = nlohmann::json::array();
		for (const auto& t : s.times) times.push_back(t.iso());
		index["splits"][split]["times"] = times;
		if (!index["splits"][split].contains("models")) index["splits"][split]["models"] = nlohmann::json::array();
		arrays[split + "/truth"] = NamedArray{{s.values.rows(), s.values.cols()}, s.values.storage()};
	}
	void put_forecast(const std::string& split, const std::string& label, const Matrix& m) {
		index["splits"][split]["models"].push_back(label);
		arrays[split + "/" + label] = NamedArray{{m.rows(), m.cols()}, m.storage()};
	}
	void write(const fs::path& dir) const {
		write_archive((dir / "forecasts.bin").string(), arrays);
		write_text(dir / "forecasts.json", index.dump(1) + "\n");
	}
};

inline Matrix to_matrix(const NamedArray& a) {
	if (a.shape.size() != 2) throw DataError("forecast archive: expected a 2-d array");
	Matrix m(a.shape[0], a.shape[1]);
	std::copy(a.values.begin(), a.values.end(), m.data());
	return m;
}

struct HistogramArgs {
	std::string run, timestamp, split, out;
	std::size_t bins = 30;
	std::vector<std::string> models;
};

/// Writes <out>.csv (model_id,node_id,error_Wh) and <out>.json (bin edges,
/// counts and moments per model).
inline eval::ErrorHistogram write_histogram(const HistogramArgs& a, std::vector<std::string>* written = nullptr) {
	const fs::path dir(a.run);
	const auto index = nlohmann::json::parse(read_text(dir / "forecasts.json"), nullptr, false);
	if (index.is_discarded()) throw DataError("malformed " + (dir / "forecasts.json").string());
	const auto arrays = read_archive((dir / "forecasts.bin").string());
	const Timestamp at = parse_timestamp_or_throw(a.timestamp);

	std::string split = a.split;
	if (split.empty()) {
		for (const auto& [name, s] : index.at("splits").items()) {
			const auto& times = s.at("times");
			if (std::find(times.begin(), times.end(), at.iso()) != times.end()) {
				split = name;
				break;
			}
		}
		if (split.empty()) throw DataError("evaluate: " + at.iso() + " is not in the test period of any split of this run");
	}
	if (!index.at("splits").contains(split)) throw DataError("evaluate: run has no split '" + split + "'");
	const auto& s = index.at("splits").at(split);
	eval::EvalSeries truth;
	truth.values = to_matrix(arrays.at(split + "/truth"));
	for (const auto& t : s.at("times")) truth.times.push_back(parse_timestamp_or_throw(t.get<std::string>()));
	std::vector<std::pair<std::string, Matrix>> preds;
	for (const auto& label : s.at("models")) {
		const std::string l = label.get<std::string>();
		if (!a.models.empty() && std::find(a.models.begin(), a.models.end(), l) == a.models.end()) continue;
		preds.emplace_back(l, to_matrix(arrays.at(split + "/" + l)));
	}
	const auto node_ids = index.at("node_ids").get<std::vector<std::string>>();
	const auto h = eval::error_histogram(truth, preds, at, a.bins, node_ids);

	const std::string prefix = a.out.empty() ? (dir / "histogram").string() : a.out;
	std::ostringstream csv;
	csv << "model_id,node_id,error_Wh\n";
	char buf[64];
	for (const auto& me : h.models)
		for (std::size_t i = 0; i < me.errors.size(); ++i) {
			std::snprintf(buf, sizeof buf, "%.17g", me.errors[i]);
			csv << me.model_id << ',' << node_ids[i] << ',' << buf << '\n';
		}
	write_text(prefix + ".csv", csv.str());
	nlohmann::json models = nlohmann::json::array();
	for (const auto& me : h.models)
		models.push_back({{"model_id", me.model_id},
		                  {"counts", me.counts},
		                  {"mean", me.stats.mean},
		                  {"median", me.stats.median},
		                  {"skewness", me.stats.skewness},
		                  {"mean_minus_median", me.mean_minus_median()}});
	nlohmann::json doc{{"format", "stlf-histogram"}, {"timestamp", at.iso()}, {"split", split}, {"edges", h.edges}, {"models", models}};
	write_text(prefix + ".json", doc.dump(2) + "\n");
	if (written) {
		written->push_back(prefix + ".csv");
		written->push_back(prefix + ".json");
	}
	return h;
}

inline int cmd_evaluate(const HistogramArgs& a, std::ostream& out) {
	Stopwatch sw;
	std::vector<std::string> files;
	const auto h = write_histogram(a, &files);
	RunManifest m;
	m.command = "evaluate";
	m.config_hash = hash_string(a.run + "|" + a.timestamp + "|" + std::to_string(a.bins));
	m.timings.emplace_back("evaluate", sw.lap());
	const fs::path manifest = files.front().substr(0, files.front().size() - 4) + ".manifest.json";
	for (const auto& f : files) m.add_output(fs::path(f).filename().string());
	m.write(manifest);
	char buf[160];
	for (const auto& me : h.models) {
		std::snprintf(buf, sizeof buf, "%-16s mean=%9.3f median=%9.3f mean-median=%8.3f skew=%7.3f", me.model_id.c_str(), me.stats.mean,
		              me.stats.median, me.mean_minus_median(), me.stats.skewness);
		out << buf << '\n';
	}
	out << "wrote " << files[0] << ", " << files[1] << '\n';
	return 0;
}

// ---------------------------------------------------------------------------
// benchmark

struct BenchmarkArgs {
	std::string config, out;
	TrainOverrides overrides;
};

inline nlohmann::json metrics_json(const eval::Metrics& m) { return {{"mae", m.mae}, {"mape", m.mape}, {"rmse", m.rmse}}; }

inline int cmd_benchmark(const BenchmarkArgs& a, std::ostream& out, std::ostream& err) {
	Stopwatch sw;
	RunConfig cfg = load_config(a.config);
	a.overrides.apply(cfg);
	const fs::path dir = a.out.empty() ? fs::path("run") : fs::path(a.out);
	fs::create_directories(dir / "logs");
	fs::create_directories(dir / "graphs");
	write_text(dir / "config.ini", cfg.source_text);

	RunManifest m;
	m.command = "benchmark";
	m.config_hash = cfg.hash();
	for (std::size_t i = 0; i < cfg.training.n_trials; ++i) m.seeds.push_back(cfg.training.base_seed + i);
	m.add_output("config.ini");

	const auto data = load_data(cfg.data);
	m.data_fingerprint = data.panel.fingerprint();
	const auto kernel = graph::resolve_kernel(cfg.graph.kernel);
	GraphCache graphs(cfg, data, kernel.get());
	auto audit = std::make_shared<train::AuditLog>();
	m.timings.emplace_back("load", sw.lap());

	eval::MetricReport report;
	ForecastStore store;
	nlohmann::json trials = nlohmann::json::object();
	nlohmann::json tuned = nlohmann::json::object();
	nlohmann::json failures = nlohmann::json::array();
	int status = 0;
	auto fail = [&](int code, const std::string& where, const std::string& what) {
		status = std::max(status, code);
		err << "error: " << where << ": " << what << '\n';
		failures.push_back({{"where", where}, {"error", what}});
	};

	for (const auto& split_name : cfg.data.splits) {
		std::optional<train::SplitData> sd;
		try {
			sd.emplace(data.panel, resolve_split(data.panel, split_name), cfg.data.horizon, audit);
		} catch (const DataError& e) {
			fail(2, split_name, e.what());
			continue;
		}
		const auto& spec = sd->spec();
		for (const auto& e : cfg.models) {
			const std::string where = spec.id + "/" + e.label;
			try {
				const graph::Graph* g = graphs.get(spec, e.config.graph_source, dir, &m);
				models::ModelConfig mc = e.config;
				train::TrainConfig tc = cfg.training;
				const bool trainable = !models::is_benchmark(mc.model_id) || models::architecture_of(mc.model_id) == models::Architecture::temporal_only;
				if (cfg.tune && trainable) {
					const auto r = train::tune(mc, g, *sd, cfg.grid, tc, tc.base_seed);
					mc = r.config;
					tc = r.train;
					tuned[spec.id][e.label] = tune_json(r);
				}
				const std::string log_prefix = (dir / "logs" / file_safe(spec.id + "." + e.label)).string();
				auto set = train::run_trials(mc, g, *sd, tc, cfg.workers, log_prefix);
				set.model_id = e.label;
				set.add_to(report, spec.id);
				for (const auto& t : set.trials) {
					const std::string log_file = "logs/" + file_safe(spec.id + "." + e.label) + ".seed" + std::to_string(t.seed) + ".jsonl";
					if (fs::exists(dir / log_file)) m.add_output(log_file);
					nlohmann::json j{{"seed", t.seed}, {"failed", t.failed}, {"epochs_run", t.epochs_run}, {"wall_time", t.wall_time}};
					j["best_val_loss"] = std::isfinite(t.best_val_loss) ? nlohmann::json(t.best_val_loss) : nlohmann::json(nullptr);
					if (t.failed) j["failure"] = t.failure;
					else {
						j["residential"] = metrics_json(t.residential);
						j["aggregate"] = metrics_json(t.aggregate);
					}
					trials[spec.id][e.label].push_back(j);
				}
				const auto done = set.completed();
				if (!store.index["splits"].contains(spec.id)) store.put_truth(spec.id, done.front()->truth, data.panel.node_ids());
				store.put_forecast(spec.id, e.label, done.front()->forecast.values);
				out << where << ": MAE " << set.summary(eval::Level::residential, eval::Metric::mae) << " Wh, aggregate MAE "
				    << set.summary(eval::Level::aggregate, eval::Metric::mae) << " kWh\n";
			} catch (const DataError& ex) {
				fail(2, where, ex.what());
			} catch (const std::exception& ex) {
				fail(1, where, ex.what());
			}
			m.timings.emplace_back(where, sw.lap());
		}
	}

	// Whatever finished is written out, failures included.
	{
		std::ofstream csv(dir / "report.csv", std::ios::binary);
		report.write_csv(csv);
	}
	std::ostringstream tables;
	eval::render_tables(report, tables);
	write_text(dir / "tables.md", tables.str());
	nlohmann::json summary{{"trials", trials}, {"failures", failures}, {"test_read_by_tuning", audit->touched("test", "tune")}};
	if (!tuned.empty()) summary["tuning"] = tuned;
	write_text(dir / "trials.json", summary.dump(2) + "\n");
	for (const char* f : {"report.csv", "tables.md", "trials.json"}) m.add_output(f);
	if (!store.arrays.empty()) {
		store.write(dir);
		m.add_output("forecasts.bin");
		m.add_output("forecasts.json");
		if (cfg.evaluation.histogram_timestamp) {
			try {
				HistogramArgs h;
				h.run = dir.string();
				h.timestamp = *cfg.evaluation.histogram_timestamp;
				h.bins = cfg.evaluation.bins;
				write_histogram(h);
				m.add_output("histogram.csv");
				m.add_output("histogram.json");
			} catch (const DataError& ex) {
				fail(2, "histogram", ex.what());
			}
		}
	}
	m.timings.emplace_back("report", sw.lap());
	m.write(dir / "manifest.json");
	out << '\n' << tables.str();
	out << "wrote " << (dir / "report.csv").string() << " and " << (dir / "manifest.json").string() << '\n';
	return status;
}

// ---------------------------------------------------------------------------
// plot

struct PlotArgs {
	std::string histogram, report, out, metric = "MAE", level = "residential", title;
};

inline int cmd_plot(const PlotArgs& a, std::ostream& out) {
	if (a.histogram.empty() == a.report.empty()) throw DataError("plot: give exactly one of --histogram or --report");
	std::string svg_text;
	std::string source;
	if (!a.histogram.empty()) {
		source = a.histogram;
		if (fs::path(source).extension() != ".json") source += ".json";
		const auto doc = nlohmann::json::parse(read_text(source), nullptr, false);
		if (doc.is_discarded() || doc.value("format", "") != "stlf-histogram") throw DataError("'" + source + "' is not a histogram file");
		std::vector<HistogramPanel> panels;
		const auto edges = doc.at("edges").get<std::vector<double>>();
		for (const auto& mj : doc.at("models")) {
			char buf[96];
			std::snprintf(buf, sizeof buf, " (mean-median %.1f Wh)", mj.at("mean_minus_median").get<double>());
			panels.push_back({mj.at("model_id").get<std::string>() + buf, edges, mj.at("counts").get<std::vector<std::size_t>>()});
		}
		svg_text = render_histograms(panels, a.title.empty() ? "Forecast minus truth at " + doc.at("timestamp").get<std::string>() + " (Wh)" : a.title);
	} else {
		source = a.report;
		std::ifstream f(source);
		if (!f) throw DataError("cannot open report '" + source + "'");
		std::string line;
		std::getline(f, line);
		if (line.rfind("model_id,split,level,metric,mean", 0) != 0) throw DataError("'" + source + "' is not a metric report");
		std::vector<BarGroup> groups;
		while (std::getline(f, line)) {
			const auto c = data::detail::split_line(line, ',');
			if (c.size() < 7) continue;
			if (c[2] != a.level || c[3] != a.metric) continue;
			auto it = std::find_if(groups.begin(), groups.end(), [&](const BarGroup& g) { return g.label == c[1]; });
			if (it == groups.end()) it = groups.insert(groups.end(), BarGroup{c[1], {}});
			it->bars.emplace_back(c[0], detail::to_double("report", c[4]));
		}
		if (groups.empty()) throw DataError("report '" + source + "' has no " + a.level + " " + a.metric + " rows");
		const std::string unit = a.metric == "MAPE" ? "%" : (a.level == "aggregate" ? "kWh" : "Wh");
		svg_text = render_bars(groups, a.title.empty() ? a.level + " " + a.metric : a.title, unit);
	}
	const std::string target = a.out.empty() ? fs::path(source).replace_extension(".svg").string() : a.out;
	if (fs::path(target).has_parent_path()) fs::create_directories(fs::path(target).parent_path());
	write_text(target, svg_text);
	RunManifest m;
	m.command = "plot";
	m.config_hash = hash_file(source);
	m.add_output(fs::path(target).filename().string());
	m.write(target + ".manifest.json");
	out << "wrote " << target << '\n';
	return 0;
}

// ---------------------------------------------------------------------------

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
	CLI::App app{"Short-term load forecasting benchmark: data ingestion, graph construction, training and reporting.\n"
	             "Bare file names resolve inside $STLF_CACHE_DIR (default: the working directory)."};
	app.name("stlf");
	app.require_subcommand(1);

	IngestArgs ingest;
	auto* c_ingest = app.add_subcommand("ingest", "Read a long-format meter CSV into a panel cache");
	c_ingest->add_option("--input", ingest.input, "CSV with one reading per row")->required();
	c_ingest->add_option("--cohort", ingest.cohort, "File listing meter ids to keep, one per line");
	c_ingest->add_option("--out", ingest.out, "Cache prefix (writes <prefix>.bin and <prefix>.json)");
	c_ingest->add_option("--resolution", ingest.resolution, "Sampling interval in seconds")->capture_default_str();
	c_ingest->add_option("--id-column", ingest.id_column, "Meter id column")->capture_default_str();
	c_ingest->add_option("--time-column", ingest.time_column, "Timestamp column")->capture_default_str();
	c_ingest->add_option("--value-column", ingest.value_column, "Consumption column in kWh")->capture_default_str();

	SynthArgs synth;
	auto* c_synth = app.add_subcommand("synth", "Generate a clustered synthetic panel and its planted graph");
	c_synth->add_option("--out", synth.out, "Cache prefix")->capture_default_str();
	c_synth->add_option("--nodes", synth.nodes, "Households")->capture_default_str();
	c_synth->add_option("--steps", synth.steps, "Half-hour steps")->capture_default_str();
	c_synth->add_option("--clusters", synth.clusters, "Household clusters")->capture_default_str();
	c_synth->add_option("--coupling", synth.coupling, "Weight of the shared cluster factor, in [0, 1]")->capture_default_str();
	c_synth->add_option("--seed", synth.seed, "Generator seed")->capture_default_str();

	GraphArgs graph_args;
	auto* c_graph = app.add_subcommand("graph", "Build a similarity graph from the training period of a split");
	c_graph->add_option("--panel", graph_args.panel, "Panel cache prefix")->required();
	c_graph->add_option("--measure", graph_args.measure, "pearson, euclidean, dtw or correntropy")->capture_default_str();
	c_graph->add_option("--rule", graph_args.rule, "threshold:<tau>, threshold:auto[:deg] or knn:<k>")->capture_default_str();
	c_graph->add_option("--out", graph_args.out, "Graph prefix (writes <prefix>.edges.csv and <prefix>.json)");
	c_graph->add_option("--split", graph_args.split, "split1..split3 or duration:<train>/<val>/<test> (days)")->capture_default_str();
	c_graph->add_option("--band", graph_args.band, "DTW Sakoe-Chiba band in steps, or none")->capture_default_str();
	c_graph->add_option("--sigma", graph_args.sigma, "Correntropy kernel width, or auto")->capture_default_str();
	c_graph->add_flag("--no-zscore", graph_args.no_zscore, "Use raw series for euclidean and dtw");
	c_graph->add_option("--kernel", graph_args.kernel, "Native pairwise kernel library (default: $STLF_SIM_KERNEL)");
	c_graph->add_option("--threads", graph_args.threads, "Threads for the reference kernel")->capture_default_str();

	TuneArgs tune_args;
	auto* c_tune = app.add_subcommand("tune", "Grid-search learning rate, batch size and window on validation MAE");
	c_tune->add_option("--config", tune_args.config, "Run configuration")->required();
	c_tune->add_option("--out", tune_args.out, "Output directory (default: tune)");
	c_tune->add_option("--split", tune_args.splits, "Splits to tune on (default: all configured)");
	tune_args.overrides.attach(*c_tune);

	BenchmarkArgs bench;
	auto* c_bench = app.add_subcommand("benchmark", "Train and score every configured model on every split");
	c_bench->add_option("--config", bench.config, "Run configuration")->required();
	c_bench->add_option("--out", bench.out, "Output directory (default: run)");
	bench.overrides.attach(*c_bench);

	HistogramArgs hist;
	auto* c_eval = app.add_subcommand("evaluate", "Per-household error histogram of a benchmark run at one instant");
	c_eval->add_option("--run", hist.run, "Benchmark output directory")->required();
	c_eval->add_option("--timestamp", hist.timestamp, "Instant on the test grid, e.g. 2013-11-19T19:00:00")->required();
	c_eval->add_option("--bins", hist.bins, "Histogram bins")->capture_default_str();
	c_eval->add_option("--split", hist.split, "Split (default: the one whose test period holds the instant)");
	c_eval->add_option("--models", hist.models, "Models to include (default: all)");
	c_eval->add_option("--out", hist.out, "Output prefix (default: <run>/histogram)");

	PlotArgs plot;
	auto* c_plot = app.add_subcommand("plot", "Render a histogram file or a metric report as SVG");
	c_plot->add_option("--histogram", plot.histogram, "Histogram written by evaluate (.json or its prefix)");
	c_plot->add_option("--report", plot.report, "report.csv written by benchmark");
	c_plot->add_option("--out", plot.out, "SVG path");
	c_plot->add_option("--metric", plot.metric, "MAE, MAPE or RMSE (report plots)")->capture_default_str();
	c_plot->add_option("--level", plot.level, "residential or aggregate (report plots)")->capture_default_str();
	c_plot->add_option("--title", plot.title, "Figure title");

	std::vector<const char*> argv{"stlf"};
	for (const auto& a : args) argv.push_back(a.c_str());
	try {
		app.parse(static_cast<int>(argv.size()), argv.data());
	} catch (const CLI::ParseError& e) {
		const int code = app.exit(e, out, err);
		return code == 0 ? 0 : 2;
	}

	try {
		if (c_ingest->parsed()) return cmd_ingest(ingest, out);
		if (c_synth->parsed()) return cmd_synth(synth, out);
		if (c_graph->parsed()) return cmd_graph(graph_args, out);
		if (c_tune->parsed()) return cmd_tune(tune_args, out);
		if (c_bench->parsed()) return cmd_benchmark(bench, out, err);
		if (c_eval->parsed()) return cmd_evaluate(hist, out);
		if (c_plot->parsed()) return cmd_plot(plot, out);
	} catch (const data::IngestError& e) {
		err << "error: " << e.what() << '\n';
		std::size_t shown = 0;
		for (const auto& r : e.rows()) {
			if (shown++ == 20) {
				err << "  ... " << e.rows().size() - 20 << " more\n";
				break;
			}
			err << "  line " << r.line << ": " << r.message << '\n';
		}
		return 2;
	} catch (const DataError& e) {
		err << "error: " << e.what() << '\n';
		return 2;
	} catch (const std::exception& e) {
		err << "internal error: " << e.what() << '\n';
		return 1;
	}
	return 1;
}

} // namespace stlf::cli
