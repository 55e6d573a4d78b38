#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "stlf/core/archive.hpp"
#include "stlf/core/error.hpp"
#include "stlf/core/hash.hpp"
#include "stlf/core/matrix.hpp"
#include "stlf/core/time.hpp"

namespace stlf::data {

/// Uniform time axis: `length` instants starting at `start`, `step` seconds apart.
struct Timeline {
	Timestamp start;
	std::int64_t step = kHalfHour;
	std::size_t length = 0;

	Timestamp at(std::size_t i) const { return start + static_cast<std::int64_t>(i) * step; }
	Timestamp end() const { return at(length); }
	TimeRange range() const { return {start, end()}; }

	/// Index of an on-grid instant inside the timeline.
	std::optional<std::size_t> index_of(Timestamp t) const {
		const std::int64_t off = t - start;
		if (off < 0 || off % step != 0) return std::nullopt;
		const auto i = static_cast<std::size_t>(off / step);
		if (i >= length) return std::nullopt;
		return i;
	}
	/// First index at or after t, clamped to [0, length].
	std::size_t lower_index(Timestamp t) const {
		const std::int64_t off = t - start;
		if (off <= 0) return 0;
		const auto i = static_cast<std::size_t>((off + step - 1) / step);
		return std::min(i, length);
	}
	bool operator==(const Timeline&) const = default;
};

/// N x T matrix of consumption in Wh per interval, one row per meter.
/// Invariants: finite, non-negative, N >= 2, uniform timeline.
class LoadPanel {
public:
	LoadPanel() = default;
	LoadPanel(Matrix values, std::vector<std::string> node_ids, Timeline timeline)
	    : values_(std::move(values)), node_ids_(std::move(node_ids)), timeline_(timeline) {
		if (values_.rows() != node_ids_.size())
			throw DataError("panel: " + std::to_string(node_ids_.size()) + " ids for " + std::to_string(values_.rows()) + " rows");
		if (values_.cols() != timeline_.length) throw DataError("panel: timeline length does not match columns");
		if (values_.rows() < 2) throw DataError("panel needs at least 2 nodes, got " + std::to_string(values_.rows()));
		if (timeline_.step <= 0) throw DataError("panel: timeline step must be positive");
		for (std::size_t i = 0; i < values_.size(); ++i)
			if (!std::isfinite(values_[i]) || values_[i] < 0.0)
				throw DataError("panel: entry (" + std::to_string(i / values_.cols()) + ", " + std::to_string(i % values_.cols()) +
				                ") is negative or non-finite");
	}

	std::size_t n_nodes() const { return values_.rows(); }
	std::size_t n_steps() const { return values_.cols(); }
	const Matrix& values() const { return values_; }
	const std::vector<std::string>& node_ids() const { return node_ids_; }
	const Timeline& timeline() const { return timeline_; }
	Timestamp timestamp(std::size_t i) const { return timeline_.at(i); }
	std::vector<Timestamp> timestamps() const {
		std::vector<Timestamp> ts(n_steps());
		for (std::size_t i = 0; i < ts.size(); ++i) ts[i] = timeline_.at(i);
		return ts;
	}

	std::string fingerprint() const {
		Fnv1a h;
		h.update(values_.storage());
		for (const auto& id : node_ids_) h.update(id);
		h.update(timeline_.start.iso());
		return h.hex();
	}

	bool operator==(const LoadPanel&) const = default;

private:
	Matrix values_;
	std::vector<std::string> node_ids_;
	Timeline timeline_;
};

/// Same layout as LoadPanel, but values may be any real (e.g. standardized).
struct SeriesPanel {
	Matrix values;
	std::vector<std::string> node_ids;
	Timeline timeline;

	std::size_t n_nodes() const { return values.rows(); }
	std::size_t n_steps() const { return values.cols(); }
};

struct RowError {
	std::size_t line = 0;
	std::string message;
};

class IngestError : public DataError {
public:
	IngestError(std::string summary, std::vector<RowError> rows)
	    : DataError(std::move(summary)), rows_(std::move(rows)) {}
	const std::vector<RowError>& rows() const { return rows_; }

private:
	std::vector<RowError> rows_;
};

struct IngestOptions {
	std::string id_column = "meter_id";
	std::string time_column = "timestamp";
	std::string value_column = "consumption_kWh";
	char delimiter = ',';
	/// Requested span; defaults to [earliest, latest + resolution) over all rows.
	std::optional<TimeRange> span;
	/// Tokens accepted as "no reading" (the meter then counts as incomplete).
	std::vector<std::string> missing_tokens = {"Null", "NULL", "NaN", ""};
};

struct IngestResult {
	LoadPanel panel;
	std::vector<std::string> dropped_meters;
	std::size_t dropped_count() const { return dropped_meters.size(); }
};

namespace detail {
inline std::vector<std::string> split_line(const std::string& line, char delim) {
	std::vector<std::string> out;
	std::string cur;
	bool quoted = false;
	for (char c : line) {
		if (c == '"') {
			quoted = !quoted;
		} else if (c == delim && !quoted) {
			out.push_back(std::move(cur));
			cur.clear();
		} else if (c != '\r') {
			cur.push_back(c);
		}
	}
	out.push_back(std::move(cur));
	for (auto& s : out) {
		const auto b = s.find_first_not_of(' ');
		const auto e = s.find_last_not_of(' ');
		s = b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
	}
	return out;
}

inline std::optional<double> parse_double(const std::string& s) {
	double v = 0.0;
	const auto* end = s.data() + s.size();
	auto [p, ec] = std::from_chars(s.data(), end, v);
	if (ec != std::errc{} || p != end) return std::nullopt;
	return v;
}
} // namespace detail

/// Reads long-format meter readings (id, timestamp, kWh) into a Wh panel.
/// Duplicate (meter, timestamp) rows resolve last-wins; meters with any gap in
/// the span are dropped and reported. Rows that cannot be parsed abort the
/// ingest with an IngestError listing every offending line.
inline IngestResult ingest_csv(std::istream& in, std::int64_t resolution_seconds = kHalfHour,
                               const IngestOptions& opt = {}) {
	if (resolution_seconds <= 0) throw DataError("ingest: resolution must be positive");
	std::string line;
	if (!std::getline(in, line)) throw DataError("ingest: empty input");
	const auto header = detail::split_line(line, opt.delimiter);
	auto col = [&](const std::string& name) {
		auto it = std::find(header.begin(), header.end(), name);
		if (it == header.end()) throw DataError("ingest: missing column '" + name + "'");
		return static_cast<std::size_t>(it - header.begin());
	};
	const std::size_t id_col = col(opt.id_column), ts_col = col(opt.time_column), val_col = col(opt.value_column);
	const std::size_t needed = std::max({id_col, ts_col, val_col}) + 1;

	struct Reading {
		Timestamp t;
		double wh;
	};
	std::map<std::string, std::vector<Reading>> readings;
	std::vector<RowError> errors;
	std::optional<Timestamp> lo, hi;
	std::size_t lineno = 1;
	while (std::getline(in, line)) {
		++lineno;
		if (line.empty() || line == "\r") continue;
		const auto f = detail::split_line(line, opt.delimiter);
		if (f.size() < needed) {
			errors.push_back({lineno, "expected at least " + std::to_string(needed) + " fields, got " + std::to_string(f.size())});
			continue;
		}
		const auto t = parse_timestamp(f[ts_col]);
		if (!t) {
			errors.push_back({lineno, "unparseable timestamp '" + f[ts_col] + "'"});
			continue;
		}
		if (f[id_col].empty()) {
			errors.push_back({lineno, "empty meter id"});
			continue;
		}
		const bool missing = std::find(opt.missing_tokens.begin(), opt.missing_tokens.end(), f[val_col]) != opt.missing_tokens.end();
		double wh = std::nan("");
		if (!missing) {
			const auto v = detail::parse_double(f[val_col]);
			if (!v || !std::isfinite(*v) || *v < 0.0) {
				errors.push_back({lineno, "invalid consumption '" + f[val_col] + "'"});
				continue;
			}
			wh = *v * 1000.0;
		}
		readings[f[id_col]].push_back({*t, wh});
		if (!lo || *t < *lo) lo = *t;
		if (!hi || *t > *hi) hi = *t;
	}
	if (!errors.empty()) {
		std::ostringstream msg;
		msg << "ingest: " << errors.size() << " unparseable row(s); first at line " << errors.front().line << ": "
		    << errors.front().message;
		throw IngestError(msg.str(), std::move(errors));
	}
	if (readings.empty()) throw DataError("ingest: no complete meters (no data rows)");

	const TimeRange span = opt.span.value_or(TimeRange{*lo, *hi + resolution_seconds});
	if (span.empty()) throw DataError("ingest: empty span");
	if ((span.end - span.start) % resolution_seconds != 0) throw DataError("ingest: span is not a whole number of intervals");
	const Timeline timeline{span.start, resolution_seconds, static_cast<std::size_t>((span.end - span.start) / resolution_seconds)};

	std::vector<std::string> kept_ids, dropped;
	std::vector<std::vector<double>> rows;
	for (auto& [id, rs] : readings) {
		std::vector<double> row(timeline.length, std::nan(""));
		for (const auto& r : rs) {
			if (auto idx = timeline.index_of(r.t)) row[*idx] = r.wh; // last wins
		}
		if (std::any_of(row.begin(), row.end(), [](double v) { return std::isnan(v); })) {
			dropped.push_back(id);
			continue;
		}
		kept_ids.push_back(id);
		rows.push_back(std::move(row));
	}
	if (kept_ids.empty()) throw DataError("ingest: no complete meters (" + std::to_string(dropped.size()) + " dropped)");
	if (kept_ids.size() < 2) throw DataError("ingest: only one complete meter; at least 2 are required");
	Matrix values(kept_ids.size(), timeline.length);
	for (std::size_t i = 0; i < rows.size(); ++i) std::copy(rows[i].begin(), rows[i].end(), values.row(i).begin());
	return {LoadPanel(std::move(values), std::move(kept_ids), timeline), std::move(dropped)};
}

inline IngestResult ingest_csv(const std::string& path, std::int64_t resolution_seconds = kHalfHour,
                               const IngestOptions& opt = {}) {
	std::ifstream in(path);
	if (!in) throw DataError("ingest: cannot open '" + path + "'");
	return ingest_csv(in, resolution_seconds, opt);
}

/// Row subset in the order given by `ids`.
inline LoadPanel select_cohort(const LoadPanel& panel, const std::vector<std::string>& ids) {
	std::unordered_map<std::string, std::size_t> index;
	for (std::size_t i = 0; i < panel.node_ids().size(); ++i) index.emplace(panel.node_ids()[i], i);
	Matrix values(ids.size(), panel.n_steps());
	for (std::size_t r = 0; r < ids.size(); ++r) {
		auto it = index.find(ids[r]);
		if (it == index.end()) throw DataError("select_cohort: unknown meter id '" + ids[r] + "'");
		const auto src = panel.values().row(it->second);
		std::copy(src.begin(), src.end(), values.row(r).begin());
	}
	return LoadPanel(std::move(values), ids, panel.timeline());
}

/// One id per line; blank lines and '#' comments ignored.
inline std::vector<std::string> read_cohort_file(const std::string& path) {
	std::ifstream in(path);
	if (!in) throw DataError("cannot open cohort file '" + path + "'");
	std::vector<std::string> ids;
	std::string line;
	while (std::getline(in, line)) {
		while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
		if (line.empty() || line.front() == '#') continue;
		ids.push_back(line);
	}
	return ids;
}

// Panel cache: "<prefix>.bin" array archive with "values" [N, T] in Wh, and
// "<prefix>.json" sidecar {format, version, node_ids, timestamps, start,
// step_seconds, units}.

inline void write_panel_cache(const LoadPanel& panel, const std::string& prefix) {
	ArrayMap arrays;
	arrays["values"] = NamedArray{{panel.n_nodes(), panel.n_steps()}, panel.values().storage()};
	write_archive(prefix + ".bin", arrays);
	nlohmann::json ts = nlohmann::json::array();
	for (std::size_t i = 0; i < panel.n_steps(); ++i) ts.push_back(panel.timestamp(i).iso());
	nlohmann::json side{{"format", "stlf-panel"},    {"version", 1},
	                    {"node_ids", panel.node_ids()}, {"timestamps", std::move(ts)},
	                    {"start", panel.timeline().start.iso()},
	                    {"step_seconds", panel.timeline().step},
	                    {"units", "Wh"},
	                    {"fingerprint", panel.fingerprint()}};
	std::ofstream out(prefix + ".json", std::ios::trunc);
	if (!out) throw DataError("cannot write '" + prefix + ".json'");
	out << side.dump(1) << '\n';
}

inline LoadPanel read_panel_cache(const std::string& prefix) {
	std::ifstream in(prefix + ".json");
	if (!in) throw DataError("cannot open panel sidecar '" + prefix + ".json'");
	nlohmann::json side;
	try {
		in >> side;
	} catch (const nlohmann::json::exception& e) {
		throw DataError("malformed panel sidecar: " + std::string(e.what()));
	}
	if (side.value("format", "") != "stlf-panel") throw DataError("'" + prefix + ".json' is not a panel sidecar");
	const auto arrays = read_archive(prefix + ".bin");
	auto it = arrays.find("values");
	if (it == arrays.end() || it->second.shape.size() != 2) throw DataError("panel archive lacks a 2-d 'values' array");
	Matrix values(it->second.shape[0], it->second.shape[1]);
	std::copy(it->second.values.begin(), it->second.values.end(), values.data());
	const Timeline tl{parse_timestamp_or_throw(side.at("start").get<std::string>()), side.at("step_seconds").get<std::int64_t>(),
	                  values.cols()};
	return LoadPanel(std::move(values), side.at("node_ids").get<std::vector<std::string>>(), tl);
}

} // namespace stlf::data
