#pragma once

// Run configuration: INI-style text with sections [data], [graph], [models],
// [model.<label>], [training] and [evaluation]. Unknown sections or keys are
// rejected.

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "stlf/core/error.hpp"
#include "stlf/core/hash.hpp"
#include "stlf/models/config.hpp"
#include "stlf/train/experiment.hpp"

namespace stlf::cli {

struct DataSection {
	std::string panel;             // cache prefix written by `ingest` or `synth`
	bool synthetic = false;        // generate instead of loading
	std::size_t nodes = 20;
	std::size_t steps = 2688;
	std::size_t clusters = 4;
	double coupling = 0.6;
	std::uint64_t seed = 0;
	std::vector<std::string> splits{"split1", "split2", "split3"};
	std::size_t horizon = 48;
};

struct GraphSection {
	std::string measure = "pearson";
	std::string rule = "threshold:auto";
	std::optional<std::size_t> band = 48;
	std::optional<double> sigma;
	bool zscore = true;
	std::string kernel; // shared library path; empty = environment / reference
};

struct ModelEntry {
	std::string label; // model id, optionally "<id>@<tag>" to run a model more than once
	models::ModelConfig config;
};

struct EvaluationSection {
	std::optional<std::string> histogram_timestamp;
	std::size_t bins = 30;
};

struct RunConfig {
	DataSection data;
	GraphSection graph;
	std::vector<ModelEntry> models;
	train::TrainConfig training;
	train::TuneGrid grid;
	bool tune = false;
	std::size_t workers = 1;
	EvaluationSection evaluation;
	std::string source_text;

	std::string hash() const { return hash_string(source_text); }
};

inline std::vector<std::string> split_list(const std::string& s) {
	std::vector<std::string> out;
	std::string cur;
	std::istringstream is(s);
	while (std::getline(is, cur, ',')) {
		const auto b = cur.find_first_not_of(" \t"), e = cur.find_last_not_of(" \t");
		if (b != std::string::npos) out.push_back(cur.substr(b, e - b + 1));
	}
	return out;
}

namespace detail {

inline double to_double(const std::string& where, const std::string& v) {
	try {
		std::size_t pos = 0;
		const double d = std::stod(v, &pos);
		if (pos != v.size()) throw std::invalid_argument("trailing");
		return d;
	} catch (const std::exception&) {
		throw DataError("config " + where + ": expected a number, got '" + v + "'");
	}
}
inline std::size_t to_size(const std::string& where, const std::string& v) {
	const double d = to_double(where, v);
	if (d < 0 || d != static_cast<double>(static_cast<std::size_t>(d))) throw DataError("config " + where + ": expected a non-negative integer");
	return static_cast<std::size_t>(d);
}
inline bool to_bool(const std::string& where, const std::string& v) {
	if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
	if (v == "false" || v == "no" || v == "0" || v == "off") return false;
	throw DataError("config " + where + ": expected true/false, got '" + v + "'");
}

inline const std::set<std::string> kModelKeys = {"graph", "hidden", "layers", "window", "dropout", "embed_dim", "gcn_layers",
                                                 "gcn_hidden", "ffn", "blocks", "kernel", "mp_layers", "order"};

} // namespace detail

inline RunConfig parse_config(const std::string& text) {
	namespace pt = boost::property_tree;
	pt::ptree tree;
	std::istringstream is(text);
	try {
		pt::ini_parser::read_ini(is, tree);
	} catch (const pt::ini_parser_error& e) {
		throw DataError("config: " + std::string(e.what()));
	}

	RunConfig cfg;
	cfg.source_text = text;
	std::map<std::string, std::string> model_defaults;
	std::map<std::string, std::map<std::string, std::string>> model_sections;
	std::vector<std::string> ids;

	for (const auto& [section, body] : tree) {
		if (!body.data().empty()) throw DataError("config: key '" + section + "' outside of a section");
		auto each = [&](auto&& fn) {
			for (const auto& [key, value] : body) fn(key, value.data(), "[" + section + "] " + key);
		};
		if (section == "data") {
			each([&](const std::string& k, const std::string& v, const std::string& w) {
				if (k == "panel") cfg.data.panel = v;
				else if (k == "synthetic") cfg.data.synthetic = detail::to_bool(w, v);
				else if (k == "nodes") cfg.data.nodes = detail::to_size(w, v);
				else if (k == "steps") cfg.data.steps = detail::to_size(w, v);
				else if (k == "clusters") cfg.data.clusters = detail::to_size(w, v);
				else if (k == "coupling") cfg.data.coupling = detail::to_double(w, v);
				else if (k == "seed") cfg.data.seed = detail::to_size(w, v);
				else if (k == "splits") cfg.data.splits = split_list(v);
				else if (k == "horizon") cfg.data.horizon = detail::to_size(w, v);
				else throw DataError("config: unknown key " + w);
			});
		} else if (section == "graph") {
			each([&](const std::string& k, const std::string& v, const std::string& w) {
				if (k == "measure") cfg.graph.measure = v;
				else if (k == "rule") cfg.graph.rule = v;
				else if (k == "band") cfg.graph.band = (v == "none") ? std::nullopt : std::optional<std::size_t>(detail::to_size(w, v));
				else if (k == "sigma") cfg.graph.sigma = (v == "auto") ? std::nullopt : std::optional<double>(detail::to_double(w, v));
				else if (k == "zscore") cfg.graph.zscore = detail::to_bool(w, v);
				else if (k == "kernel") cfg.graph.kernel = v;
				else throw DataError("config: unknown key " + w);
			});
		} else if (section == "models") {
			each([&](const std::string& k, const std::string& v, const std::string& w) {
				if (k == "ids") ids = split_list(v);
				else if (detail::kModelKeys.count(k)) model_defaults[k] = v;
				else throw DataError("config: unknown key " + w);
			});
		} else if (section.rfind("model.", 0) == 0) {
			auto& m = model_sections[section.substr(6)];
			each([&](const std::string& k, const std::string& v, const std::string& w) {
				if (!detail::kModelKeys.count(k)) throw DataError("config: unknown key " + w);
				m[k] = v;
			});
		} else if (section == "training") {
			each([&](const std::string& k, const std::string& v, const std::string& w) {
				auto& t = cfg.training;
				if (k == "learning_rate") t.learning_rate = detail::to_double(w, v);
				else if (k == "batch_size") t.batch_size = detail::to_size(w, v);
				else if (k == "max_epochs") t.max_epochs = detail::to_size(w, v);
				else if (k == "patience") t.patience = detail::to_size(w, v);
				else if (k == "n_trials") t.n_trials = detail::to_size(w, v);
				else if (k == "base_seed") t.base_seed = detail::to_size(w, v);
				else if (k == "clip_gradients") t.clip_gradients = detail::to_bool(w, v);
				else if (k == "clip_norm") t.clip_norm = detail::to_double(w, v);
				else if (k == "max_batches_per_epoch") t.max_batches_per_epoch = detail::to_size(w, v);
				else if (k == "workers") cfg.workers = detail::to_size(w, v);
				else if (k == "tune") cfg.tune = detail::to_bool(w, v);
				else if (k == "tune_learning_rates") {
					cfg.grid.learning_rates.clear();
					for (const auto& x : split_list(v)) cfg.grid.learning_rates.push_back(detail::to_double(w, x));
				} else if (k == "tune_batch_sizes") {
					cfg.grid.batch_sizes.clear();
					for (const auto& x : split_list(v)) cfg.grid.batch_sizes.push_back(detail::to_size(w, x));
				} else if (k == "tune_windows") {
					cfg.grid.windows.clear();
					for (const auto& x : split_list(v)) cfg.grid.windows.push_back(detail::to_size(w, x));
				} else if (k == "tune_budget") cfg.grid.budget = detail::to_size(w, v);
				else throw DataError("config: unknown key " + w);
			});
		} else if (section == "evaluation") {
			each([&](const std::string& k, const std::string& v, const std::string& w) {
				if (k == "histogram_timestamp") cfg.evaluation.histogram_timestamp = v;
				else if (k == "bins") cfg.evaluation.bins = detail::to_size(w, v);
				else throw DataError("config: unknown key " + w);
			});
		} else {
			throw DataError("config: unknown section [" + section + "]");
		}
	}

	if (ids.empty()) throw DataError("config: [models] ids must list at least one model");
	for (const auto& [label, _] : model_sections)
		if (std::find(ids.begin(), ids.end(), label) == ids.end())
			throw DataError("config: section [model." + label + "] does not match any entry of [models] ids");
	for (const auto& label : ids) {
		if (std::count(ids.begin(), ids.end(), label) > 1) throw DataError("config: model '" + label + "' listed twice");
		const std::string id = label.substr(0, label.find('@'));
		ModelEntry e{label, models::ModelConfig::make(models::model_from_string(id))};
		std::map<std::string, std::string> keys = model_defaults;
		if (auto it = model_sections.find(label); it != model_sections.end())
			for (const auto& [k, v] : it->second) keys[k] = v;
		for (const auto& [k, v] : keys) {
			if (k == "graph") e.config.graph_source = models::GraphSource::parse(v);
			else e.config.hyper[k] = v;
		}
		if (e.config.graph_source.kind == models::GraphSourceKind::signal && !keys.count("graph"))
			e.config.graph_source = models::GraphSource::parse("signal:" + cfg.graph.measure);
		e.config.set("horizon", static_cast<double>(cfg.data.horizon));
		e.config.validate();
		cfg.models.push_back(std::move(e));
	}
	cfg.training.validate();
	if (cfg.workers < 1) throw DataError("config: [training] workers must be >= 1");
	if (cfg.data.panel.empty() && !cfg.data.synthetic) throw DataError("config: [data] needs a panel or synthetic = true");
	if (cfg.data.splits.empty()) throw DataError("config: [data] splits is empty");
	return cfg;
}

inline RunConfig load_config(const std::string& path) {
	std::ifstream f(path, std::ios::binary);
	if (!f) throw DataError("cannot open config '" + path + "'");
	std::ostringstream ss;
	ss << f.rdbuf();
	return parse_config(ss.str());
}

} // namespace stlf::cli
