#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "stlf/core/error.hpp"
#include "stlf/core/log.hpp"
#include "stlf/eval/metrics.hpp"
#include "stlf/models/config.hpp"

namespace stlf::eval {

enum class Level { residential, aggregate };
enum class Metric { mae, mape, rmse };

inline std::string to_string(Level l) { return l == Level::residential ? "residential" : "aggregate"; }
inline std::string to_string(Metric m) {
	switch (m) {
	case Metric::mae: return "MAE";
	case Metric::mape: return "MAPE";
	case Metric::rmse: return "RMSE";
	}
	return "?";
}
inline constexpr Metric kMetrics[] = {Metric::mae, Metric::mape, Metric::rmse};
inline constexpr Level kLevels[] = {Level::residential, Level::aggregate};

inline double pick(const Metrics& m, Metric which) {
	switch (which) {
	case Metric::mae: return m.mae;
	case Metric::mape: return m.mape;
	case Metric::rmse: return m.rmse;
	}
	return NAN;
}

/// Residential values are Wh with 1 decimal, aggregate kWh with 2, MAPE
/// always 1 decimal.
inline int decimals(Level level, Metric metric) {
	if (metric == Metric::mape) return 1;
	return level == Level::residential ? 1 : 2;
}

struct Summary {
	double mean = 0.0;
	double std = 0.0; // population
	std::size_t n = 0;
};

inline Summary summarize(const std::vector<double>& values) {
	if (values.empty()) throw DataError("summarize: no values");
	Summary s;
	s.n = values.size();
	for (double v : values) s.mean += v;
	s.mean /= static_cast<double>(s.n);
	double ss = 0.0;
	for (double v : values) ss += (v - s.mean) * (v - s.mean);
	s.std = std::sqrt(ss / static_cast<double>(s.n));
	return s;
}

inline std::string fixed(double v, int digits) {
	char buf[64];
	std::snprintf(buf, sizeof buf, "%.*f", digits, v);
	std::string s = buf;
	if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') s.erase(0, 1); // no "-0.0"
	return s;
}

/// "mean(std)", e.g. "149.0(0.1)".
inline std::string format_mean_std(const Summary& s, int digits) { return fixed(s.mean, digits) + "(" + fixed(s.std, digits) + ")"; }

/// Trial-level metric values keyed by (model, split, level, metric).
class MetricReport {
public:
	using Key = std::tuple<std::string, std::string, Level, Metric>;

	void add_trial(const std::string& model, const std::string& split, Level level, const Metrics& m) {
		note(model, split);
		for (Metric k : kMetrics) cells_[{model, split, level, k}].push_back(pick(m, k));
	}
	void add_value(const std::string& model, const std::string& split, Level level, Metric metric, double value) {
		note(model, split);
		cells_[{model, split, level, metric}].push_back(value);
	}

	std::optional<Summary> summary(const std::string& model, const std::string& split, Level level, Metric metric) const {
		auto it = cells_.find({model, split, level, metric});
		if (it == cells_.end() || it->second.empty()) return std::nullopt;
		return summarize(it->second);
	}
	const std::vector<double>* values(const std::string& model, const std::string& split, Level level, Metric metric) const {
		auto it = cells_.find({model, split, level, metric});
		return it == cells_.end() ? nullptr : &it->second;
	}

	const std::vector<std::string>& models() const { return models_; }
	const std::vector<std::string>& splits() const { return splits_; }
	bool empty() const { return cells_.empty(); }

	/// model_id,split,level,metric,mean,std,n_trials
	void write_csv(std::ostream& os) const {
		os << "model_id,split,level,metric,mean,std,n_trials\n";
		for (const auto& model : models_)
			for (const auto& split : splits_)
				for (Level level : kLevels)
					for (Metric metric : kMetrics)
						if (auto s = summary(model, split, level, metric)) {
							char buf[128];
							std::snprintf(buf, sizeof buf, "%.17g,%.17g,%zu", s->mean, s->std, s->n);
							os << model << ',' << split << ',' << to_string(level) << ',' << to_string(metric) << ',' << buf << '\n';
						}
	}

private:
	void note(const std::string& model, const std::string& split) {
		if (std::find(models_.begin(), models_.end(), model) == models_.end()) models_.push_back(model);
		if (std::find(splits_.begin(), splits_.end(), split) == splits_.end()) splits_.push_back(split);
	}

	std::map<Key, std::vector<double>> cells_;
	std::vector<std::string> models_;
	std::vector<std::string> splits_;
};

/// Highlighting of one table column (split x metric) at one level.
struct ColumnMarks {
	std::set<std::string> best;            // minimum displayed mean, ties all marked
	std::set<std::string> beats_benchmarks; // graph models strictly below every benchmark present
};

inline bool is_benchmark_id(const std::string& id) {
	try {
		return models::is_benchmark(models::model_from_string(id));
	} catch (const DataError&) {
		return false;
	}
}

/// Compares means as displayed, so equal printed values tie.
inline ColumnMarks mark_column(const MetricReport& r, const std::string& split, Level level, Metric metric) {
	ColumnMarks marks;
	const int digits = decimals(level, metric);
	auto shown = [&](const Summary& s) { return std::stod(fixed(s.mean, digits)); };
	std::optional<double> best, best_benchmark;
	for (const auto& m : r.models())
		if (auto s = r.summary(m, split, level, metric)) {
			const double v = shown(*s);
			if (!best || v < *best) best = v;
			if (is_benchmark_id(m) && (!best_benchmark || v < *best_benchmark)) best_benchmark = v;
		}
	for (const auto& m : r.models())
		if (auto s = r.summary(m, split, level, metric)) {
			const double v = shown(*s);
			if (v == *best) marks.best.insert(m);
			if (!is_benchmark_id(m) && best_benchmark && v < *best_benchmark) marks.beats_benchmarks.insert(m);
		}
	return marks;
}

/// Markdown table per level: rows are models, columns split x metric. The
/// best value of a column is underlined (<u>..</u>); a graph model that beats
/// every benchmark in that column is bold.
inline void render_tables(const MetricReport& r, std::ostream& os) {
	const std::string missing = "n/a";
	for (Level level : kLevels) {
		os << "## " << (level == Level::residential ? "Residential level (Wh, MAPE %)" : "Aggregate level (kWh, MAPE %)") << "\n\n";
		os << "| Model |";
		for (const auto& split : r.splits())
			for (Metric metric : kMetrics) os << ' ' << split << ' ' << to_string(metric) << " |";
		os << "\n|---|";
		for (std::size_t i = 0; i < r.splits().size() * 3; ++i) os << "---|";
		os << '\n';
		std::map<std::pair<std::string, Metric>, ColumnMarks> marks;
		for (const auto& split : r.splits())
			for (Metric metric : kMetrics) marks[{split, metric}] = mark_column(r, split, level, metric);
		for (const auto& model : r.models()) {
			os << "| " << model << " |";
			for (const auto& split : r.splits())
				for (Metric metric : kMetrics) {
					const auto s = r.summary(model, split, level, metric);
					if (!s) {
						log::warn("render_tables: no result for " + model + " / " + split + " / " + to_string(level) + " " + to_string(metric));
						os << ' ' << missing << " |";
						continue;
					}
					std::string cell = format_mean_std(*s, decimals(level, metric));
					const auto& mk = marks[{split, metric}];
					if (mk.best.count(model)) cell = "<u>" + cell + "</u>";
					if (mk.beats_benchmarks.count(model)) cell = "**" + cell + "**";
					os << ' ' << cell << " |";
				}
			os << '\n';
		}
		os << '\n';
	}
}

} // namespace stlf::eval
