#pragma once

#include <string>
#include <vector>

#include "stlf/core/error.hpp"
#include "stlf/core/time.hpp"
#include "stlf/data/panel.hpp"

namespace stlf::data {

/// Train / validation / test partition of a timeline. Training runs from
/// `train_start` up to `train_end` (exclusive); the other two are half-open.
struct SplitSpec {
	std::string id;
	Timestamp train_start;
	Timestamp train_end;
	TimeRange val;
	TimeRange test;

	TimeRange train() const { return {train_start, train_end}; }

	/// Ordering and non-overlap: train < val < test.
	void validate() const {
		if (!(train_start < train_end)) throw DataError("split " + id + ": empty training period");
		if (val.empty() || test.empty()) throw DataError("split " + id + ": empty validation or test period");
		if (val.start < train_end) throw DataError("split " + id + ": validation overlaps training");
		if (test.start < val.end) throw DataError("split " + id + ": test overlaps validation");
	}
	bool operator==(const SplitSpec&) const = default;
};

/// The three leakage-free monthly splits: training from Jan 1 up to Jul 1,
/// Sep 1 and Nov 1; validation is the next calendar month and test the one
/// after it.
inline std::vector<SplitSpec> make_splits(const Timeline& timeline, int year) {
	const Timestamp year_start = Timestamp::from_civil(year, 1, 1);
	const Timestamp required_end = Timestamp::from_civil(year + 1, 1, 1);
	const TimeRange have = timeline.range();
	if (have.start > year_start || have.end < required_end) {
		const Timestamp miss_lo = have.start > year_start ? year_start : have.end;
		const Timestamp miss_hi = have.start > year_start ? have.start : required_end;
		throw DataError("make_splits: panel does not cover " + year_start.iso() + " .. " + required_end.iso() +
		                "; missing [" + miss_lo.iso() + ", " + miss_hi.iso() + ")");
	}
	std::vector<SplitSpec> splits;
	int idx = 1;
	for (unsigned month : {7u, 9u, 11u}) {
		const Timestamp train_end = Timestamp::from_civil(year, month, 1);
		const Timestamp val_end = add_months(train_end, 1);
		const Timestamp test_end = add_months(train_end, 2);
		SplitSpec s{"split" + std::to_string(idx++), year_start, train_end, {train_end, val_end}, {val_end, test_end}};
		s.validate();
		splits.push_back(s);
	}
	return splits;
}

inline std::vector<SplitSpec> make_splits(const LoadPanel& panel) {
	return make_splits(panel.timeline(), static_cast<int>(panel.timeline().start.date().year()));
}

/// Contiguous split by durations starting at the beginning of the timeline.
inline SplitSpec make_duration_split(const Timeline& timeline, std::int64_t train_seconds, std::int64_t val_seconds,
                                     std::int64_t test_seconds, std::string id = "split") {
	const Timestamp t0 = timeline.start;
	SplitSpec s{std::move(id), t0, t0 + train_seconds, {t0 + train_seconds, t0 + train_seconds + val_seconds},
	            {t0 + train_seconds + val_seconds, t0 + train_seconds + val_seconds + test_seconds}};
	s.validate();
	if (s.test.end > timeline.end()) throw DataError("split " + s.id + " extends past the end of the panel (" + timeline.end().iso() + ")");
	return s;
}

} // namespace stlf::data
