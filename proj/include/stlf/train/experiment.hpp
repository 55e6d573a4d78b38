#pragma once

// Split-level experiment plumbing: guarded data access, seeded trials and
// grid tuning.

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "stlf/core/error.hpp"
#include "stlf/core/log.hpp"
#include "stlf/data/scaler.hpp"
#include "stlf/data/window.hpp"
#include "stlf/eval/metrics.hpp"
#include "stlf/eval/report.hpp"
#include "stlf/graph/similarity.hpp"
#include "stlf/graph/sparsify.hpp"
#include "stlf/models/registry.hpp"
#include "stlf/train/trainer.hpp"

namespace stlf::train {

/// Records every read of a data partition, so a run can show which stages
/// looked at test data.
class AuditLog {
public:
	struct Entry {
		std::string stage;
		std::string partition;
		std::size_t window = 0;
	};

	void record(const std::string& stage, const std::string& partition, std::size_t window) {
		std::lock_guard lock(mu_);
		entries_.push_back({stage, partition, window});
	}
	std::vector<Entry> entries() const {
		std::lock_guard lock(mu_);
		return entries_;
	}
	/// Whether `partition` was read, optionally only by `stage`.
	bool touched(const std::string& partition, const std::string& stage = {}) const {
		std::lock_guard lock(mu_);
		return std::any_of(entries_.begin(), entries_.end(),
		                   [&](const Entry& e) { return e.partition == partition && (stage.empty() || e.stage == stage); });
	}
	nlohmann::json to_json() const {
		nlohmann::json j = nlohmann::json::array();
		for (const auto& e : entries()) j.push_back({{"stage", e.stage}, {"partition", e.partition}, {"window", e.window}});
		return j;
	}

private:
	mutable std::mutex mu_;
	std::vector<Entry> entries_;
};

/// One split of one panel: the scaler fitted on its training rows and
/// windowed partitions for any input length W, each read logged.
class SplitData {
public:
	SplitData(const data::LoadPanel& panel, data::SplitSpec spec, std::size_t horizon = data::kDayAheadSteps,
	          std::shared_ptr<AuditLog> audit = std::make_shared<AuditLog>())
	    : panel_(panel), spec_(std::move(spec)), horizon_(horizon), audit_(std::move(audit)) {
		spec_.validate();
		scaler_ = data::Scaler::fit(panel_, spec_);
		scaled_ = scaler_.transform(panel_);
	}

	const data::LoadPanel& panel() const { return panel_; }
	const data::SplitSpec& spec() const { return spec_; }
	const data::Scaler& scaler() const { return scaler_; }
	const data::SeriesPanel& scaled() const { return scaled_; }
	std::size_t horizon() const { return horizon_; }
	AuditLog& audit() const { return *audit_; }

	/// Scaled windows.
	const data::WindowBatch& train(std::size_t w, const std::string& stage) const { return get(w, stage, "train").train; }
	const data::WindowBatch& val(std::size_t w, const std::string& stage) const { return get(w, stage, "val").val; }
	const data::WindowBatch& test(std::size_t w, const std::string& stage) const { return get(w, stage, "test").test; }
	/// Unscaled test windows (Wh), same origins as test().
	const data::WindowBatch& raw_test(std::size_t w, const std::string& stage) const {
		audit_->record(stage, "test", w);
		std::lock_guard lock(mu_);
		auto it = raw_.find(w);
		if (it == raw_.end()) it = raw_.emplace(w, data::window(panel_, spec_, w, horizon_)).first;
		return it->second.test;
	}

	/// Materialises windows up front so concurrent trials only read.
	void prepare(std::size_t w) const {
		std::lock_guard lock(mu_);
		if (!cache_.count(w)) cache_.emplace(w, data::window(scaled_, spec_, w, horizon_));
		if (!raw_.count(w)) raw_.emplace(w, data::window(panel_, spec_, w, horizon_));
	}

private:
	const data::PartitionedWindows& get(std::size_t w, const std::string& stage, const std::string& partition) const {
		audit_->record(stage, partition, w);
		std::lock_guard lock(mu_);
		auto it = cache_.find(w);
		if (it == cache_.end()) it = cache_.emplace(w, data::window(scaled_, spec_, w, horizon_)).first;
		return it->second;
	}

	const data::LoadPanel& panel_;
	data::SplitSpec spec_;
	std::size_t horizon_;
	std::shared_ptr<AuditLog> audit_;
	data::Scaler scaler_;
	data::SeriesPanel scaled_;
	mutable std::mutex mu_;
	mutable std::map<std::size_t, data::PartitionedWindows> cache_, raw_;
};

/// Graph for `source` built from the training rows of the split only.
/// Signal graphs use `measure`/`rule`; "planted" graphs must be supplied.
inline std::optional<graph::Graph> graph_for(const models::GraphSource& source, const data::LoadPanel& panel, const data::SplitSpec& spec,
                                             const graph::SparsifyRule& rule, const graph::BuildOptions& opt = {},
                                             const graph::Graph* planted = nullptr) {
	switch (source.kind) {
	case models::GraphSourceKind::signal: {
		if (source.measure == "planted") {
			if (!planted) throw DataError("graph source signal:planted needs a planted graph");
			return *planted;
		}
		const auto sim = graph::similarity_matrix(graph::measure_from_string(source.measure), panel, graph::GraphPeriod::training(spec), opt);
		return graph::sparsify(sim, rule);
	}
	case models::GraphSourceKind::full: return graph::full_graph(panel.n_nodes());
	case models::GraphSourceKind::bipartite: return graph::bipartite_graph(panel.n_nodes(), source.virtual_nodes);
	default: return std::nullopt;
	}
}

struct TrialResult {
	std::uint64_t seed = 0;
	bool failed = false;
	std::string failure;
	double best_val_loss = NAN;
	std::size_t epochs_run = 0;
	double wall_time = 0.0;
	eval::Metrics residential;
	eval::Metrics aggregate;
	eval::EvalSeries truth;    // Wh
	eval::EvalSeries forecast; // Wh
	std::vector<EpochRecord> history;
};

/// Forecasts the test windows of `data` and scores them in Wh / kWh.
inline void score_test(const models::ForecastModel& model, const SplitData& data, const std::string& stage, TrialResult& out) {
	const auto& test = data.test(model.window(), stage);
	const auto& raw = data.raw_test(model.window(), stage);
	Tensor3 pred(test.size(), model.n_nodes(), model.horizon());
	const std::size_t chunk = 128;
	for (std::size_t start = 0; start < test.size(); start += chunk) {
		std::vector<std::size_t> idx(std::min(chunk, test.size() - start));
		std::iota(idx.begin(), idx.end(), start);
		const Tensor3 part = model.forecast_original(test.subset(idx).inputs, data.scaler());
		std::copy(part.data.begin(), part.data.end(), pred.data.begin() + static_cast<std::ptrdiff_t>(start * model.n_nodes() * model.horizon()));
	}
	out.truth = eval::concat_windows(raw.targets, raw.origins, data.panel().timeline().step);
	out.forecast = eval::concat_windows(pred, test.origins, data.panel().timeline().step);
	out.residential = eval::evaluate(out.truth.values, out.forecast.values);
	out.aggregate = eval::aggregate_eval(out.truth.values, out.forecast.values);
}

/// Builds, fits and scores one model with one seed.
inline TrialResult run_trial(const models::ModelConfig& config, const graph::Graph* g, const SplitData& data, const TrainConfig& cfg,
                             std::uint64_t seed, std::ostream* log = nullptr, const std::string& stage = "trial") {
	TrialResult r;
	r.seed = seed;
	auto model = models::build(config, g, data.panel().n_nodes(), seed);
	const std::size_t w = model->window();
	if (auto* neural = models::as_neural(model.get())) {
		const auto outcome = fit(*neural, data.train(w, stage), data.val(w, stage), cfg, seed, log);
		r.best_val_loss = outcome.best_val_loss;
		r.epochs_run = outcome.epochs_run;
		r.wall_time = outcome.wall_time;
		r.history = outcome.history;
		if (outcome.failed) {
			r.failed = true;
			r.failure = outcome.failure;
			return r;
		}
	} else if (config.model_id == models::ModelId::var) {
		const auto& tl = data.scaled().timeline;
		const auto train = data.spec().train();
		auto fitted = models::fit_var(data.scaled().values, tl.lower_index(train.start), tl.lower_index(train.end),
		                              config.get_size("order", 1), config);
		model = std::make_unique<models::VarModel>(std::move(fitted));
		r.best_val_loss = evaluate_loss(*model, data.val(w, stage));
	} else {
		r.best_val_loss = evaluate_loss(*model, data.val(w, stage));
	}
	score_test(*model, data, stage, r);
	return r;
}

struct TrialSet {
	std::string model_id;
	std::vector<TrialResult> trials; // ordered by seed

	std::vector<const TrialResult*> completed() const {
		std::vector<const TrialResult*> out;
		for (const auto& t : trials)
			if (!t.failed) out.push_back(&t);
		return out;
	}
	std::size_t failures() const { return trials.size() - completed().size(); }

	/// "mean(std)" of one metric over completed trials.
	std::string summary(eval::Level level, eval::Metric metric) const {
		std::vector<double> v;
		for (const auto* t : completed()) v.push_back(eval::pick(level == eval::Level::residential ? t->residential : t->aggregate, metric));
		if (v.empty()) return "failed";
		std::string s = eval::format_mean_std(eval::summarize(v), eval::decimals(level, metric));
		if (failures()) s += " [" + std::to_string(v.size()) + "/" + std::to_string(trials.size()) + " trials]";
		return s;
	}

	void add_to(eval::MetricReport& report, const std::string& split) const {
		for (const auto* t : completed()) {
			report.add_trial(model_id, split, eval::Level::residential, t->residential);
			report.add_trial(model_id, split, eval::Level::aggregate, t->aggregate);
		}
	}
};

/// n trials with seeds base_seed + 0..n-1. Failed trials are kept and
/// reported; the run only fails if every trial does. `workers` > 1 runs
/// trials concurrently; results do not depend on it.
inline TrialSet run_trials(const models::ModelConfig& config, const graph::Graph* g, const SplitData& data, const TrainConfig& cfg,
                           std::size_t workers = 1, const std::string& log_prefix = {}) {
	cfg.validate();
	TrialSet set{models::to_string(config.model_id), std::vector<TrialResult>(cfg.n_trials)};
	data.prepare(config.window());
	auto one = [&](std::size_t i) {
		const std::uint64_t seed = cfg.base_seed + i;
		std::ostringstream log;
		try {
			set.trials[i] = run_trial(config, g, data, cfg, seed, log_prefix.empty() ? nullptr : &log);
		} catch (const DataError&) {
			throw;
		} catch (const std::exception& e) {
			set.trials[i].seed = seed;
			set.trials[i].failed = true;
			set.trials[i].failure = e.what();
		}
		if (!log_prefix.empty() && !log.str().empty()) {
			std::ofstream f(log_prefix + ".seed" + std::to_string(seed) + ".jsonl", std::ios::binary);
			f << log.str();
		}
	};
	if (workers <= 1) {
		for (std::size_t i = 0; i < cfg.n_trials; ++i) one(i);
	} else {
		std::vector<std::exception_ptr> errors(cfg.n_trials);
		std::vector<std::thread> pool;
		std::mutex mu;
		std::size_t next = 0;
		for (std::size_t k = 0; k < std::min(workers, cfg.n_trials); ++k)
			pool.emplace_back([&] {
				for (;;) {
					std::size_t i;
					{
						std::lock_guard lock(mu);
						if (next >= cfg.n_trials) return;
						i = next++;
					}
					try {
						one(i);
					} catch (...) {
						errors[i] = std::current_exception();
					}
				}
			});
		for (auto& t : pool) t.join();
		for (auto& e : errors)
			if (e) std::rethrow_exception(e);
	}
	for (const auto& t : set.trials)
		if (t.failed) log::warn(set.model_id + ": trial with seed " + std::to_string(t.seed) + " failed: " + t.failure);
	if (set.completed().empty()) throw RunError(set.model_id + ": all " + std::to_string(cfg.n_trials) + " trials failed");
	return set;
}

struct TuneGrid {
	std::vector<double> learning_rates{1e-3, 3e-4};
	std::vector<std::size_t> batch_sizes; // empty = the training batch size
	std::vector<std::size_t> windows{48, 168, 336};
	std::size_t budget = 0; // 0 = exhaustive

	std::size_t size() const { return learning_rates.size() * std::max<std::size_t>(batch_sizes.size(), 1) * windows.size(); }
};

struct TuneCandidate {
	double learning_rate = 0.0;
	std::size_t batch_size = 0;
	std::size_t window = 0;
	double val_loss = NAN;
	bool failed = false;
	std::string failure;
};

struct TuneResult {
	models::ModelConfig config;
	TrainConfig train;
	std::vector<TuneCandidate> candidates;
	std::size_t best = 0;
};

/// Grid search on validation MAE. Only train and validation partitions are
/// read (stage "tune" in the audit log).
inline TuneResult tune(const models::ModelConfig& base, const graph::Graph* g, const SplitData& data, const TuneGrid& grid,
                       const TrainConfig& cfg, std::uint64_t seed) {
	if (grid.size() == 0) throw DataError("tune: empty grid");
	std::vector<TuneCandidate> all;
	for (std::size_t w : grid.windows)
		for (double lr : grid.learning_rates)
			for (std::size_t bs : grid.batch_sizes.empty() ? std::vector<std::size_t>{cfg.batch_size} : grid.batch_sizes) {
				TuneCandidate c;
				c.learning_rate = lr;
				c.batch_size = bs;
				c.window = w;
				all.push_back(c);
			}
	if (grid.budget && grid.budget < all.size()) {
		Rng rng(seed);
		auto idx = rng.permutation(all.size());
		idx.resize(grid.budget);
		std::sort(idx.begin(), idx.end());
		std::vector<TuneCandidate> picked;
		for (std::size_t i : idx) picked.push_back(all[i]);
		all = std::move(picked);
	}

	TuneResult result;
	std::optional<std::size_t> best;
	for (std::size_t c = 0; c < all.size(); ++c) {
		auto& cand = all[c];
		models::ModelConfig mc = base;
		mc.set("window", static_cast<double>(cand.window));
		TrainConfig tc = cfg;
		tc.learning_rate = cand.learning_rate;
		tc.batch_size = cand.batch_size;
		try {
			auto model = models::build(mc, g, data.panel().n_nodes(), seed);
			auto* neural = models::as_neural(model.get());
			if (!neural) throw DataError("tune: model '" + models::to_string(mc.model_id) + "' has no trainable parameters");
			const auto outcome = fit(*neural, data.train(cand.window, "tune"), data.val(cand.window, "tune"), tc, seed);
			cand.failed = outcome.failed;
			cand.failure = outcome.failure;
			cand.val_loss = outcome.best_val_loss;
		} catch (const DataError& e) {
			if (std::string(e.what()).rfind("tune:", 0) == 0) throw;
			cand.failed = true;
			cand.failure = e.what();
		}
		if (!cand.failed && (!best || cand.val_loss < all[*best].val_loss)) best = c;
	}
	if (!best) {
		std::string msg = "tune: every candidate failed:";
		for (const auto& c : all) msg += "\n  lr=" + std::to_string(c.learning_rate) + " batch=" + std::to_string(c.batch_size) +
		                                 " W=" + std::to_string(c.window) + ": " + c.failure;
		throw RunError(msg);
	}
	result.best = *best;
	result.config = base;
	result.config.set("window", static_cast<double>(all[*best].window));
	result.train = cfg;
	result.train.learning_rate = all[*best].learning_rate;
	result.train.batch_size = all[*best].batch_size;
	result.candidates = std::move(all);
	return result;
}

} // namespace stlf::train
