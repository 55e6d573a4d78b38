#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

#include "stlf/core/error.hpp"

namespace stlf {

/// UTC instant with one-second resolution.
class Timestamp {
public:
	constexpr Timestamp() = default;
	constexpr explicit Timestamp(std::int64_t seconds_since_epoch) : seconds_(seconds_since_epoch) {}

	static Timestamp from_civil(int year, unsigned month, unsigned day, int hour = 0, int minute = 0,
	                            int second = 0) {
		using namespace std::chrono;
		const sys_days d = year_month_day{std::chrono::year{year}, std::chrono::month{month},
		                                  std::chrono::day{day}};
		return Timestamp{d.time_since_epoch().count() * 86400LL + hour * 3600LL + minute * 60LL + second};
	}

	constexpr std::int64_t seconds() const { return seconds_; }
	constexpr Timestamp operator+(std::int64_t s) const { return Timestamp{seconds_ + s}; }
	constexpr Timestamp operator-(std::int64_t s) const { return Timestamp{seconds_ - s}; }
	constexpr std::int64_t operator-(Timestamp other) const { return seconds_ - other.seconds_; }
	constexpr auto operator<=>(const Timestamp&) const = default;

	std::chrono::year_month_day date() const {
		using namespace std::chrono;
		std::int64_t days = seconds_ / 86400;
		if (seconds_ % 86400 < 0) --days;
		return year_month_day{sys_days{std::chrono::days{days}}};
	}
	int seconds_of_day() const {
		const auto r = seconds_ % 86400;
		return static_cast<int>(r < 0 ? r + 86400 : r);
	}

	/// "YYYY-MM-DDTHH:MM:SS"
	std::string iso() const {
		const auto ymd = date();
		const int sod = seconds_of_day();
		char buf[32];
		std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d", static_cast<int>(ymd.year()),
		              static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), sod / 3600,
		              (sod / 60) % 60, sod % 60);
		return buf;
	}

private:
	std::int64_t seconds_ = 0;
};

inline constexpr std::int64_t kHalfHour = 1800;
inline constexpr std::int64_t kDay = 86400;

namespace detail {
inline bool read_int(std::string_view s, std::size_t pos, std::size_t len, int& out) {
	if (pos + len > s.size()) return false;
	int v = 0;
	for (std::size_t i = pos; i < pos + len; ++i) {
		if (s[i] < '0' || s[i] > '9') return false;
		v = v * 10 + (s[i] - '0');
	}
	out = v;
	return true;
}
} // namespace detail

/// Parses ISO-8601 style "YYYY-MM-DD", "YYYY-MM-DD HH:MM[:SS[.fraction]]" with
/// either ' ' or 'T' as separator and an optional trailing 'Z'. Fractional
/// seconds are truncated. Returns nullopt on malformed input.
inline std::optional<Timestamp> parse_timestamp(std::string_view s) {
	while (!s.empty() && (s.front() == ' ' || s.front() == '"')) s.remove_prefix(1);
	while (!s.empty() && (s.back() == ' ' || s.back() == '"' || s.back() == '\r')) s.remove_suffix(1);
	if (!s.empty() && s.back() == 'Z') s.remove_suffix(1);
	int y, mo, d, h = 0, mi = 0, sec = 0;
	if (s.size() < 10 || !detail::read_int(s, 0, 4, y) || s[4] != '-' || !detail::read_int(s, 5, 2, mo) ||
	    s[7] != '-' || !detail::read_int(s, 8, 2, d))
		return std::nullopt;
	if (s.size() > 10) {
		if ((s[10] != 'T' && s[10] != ' ') || !detail::read_int(s, 11, 2, h) || s.size() < 16 || s[13] != ':' ||
		    !detail::read_int(s, 14, 2, mi))
			return std::nullopt;
		if (s.size() > 16) {
			if (s[16] != ':' || !detail::read_int(s, 17, 2, sec)) return std::nullopt;
			if (s.size() > 19) {
				if (s[19] != '.') return std::nullopt;
				for (std::size_t i = 20; i < s.size(); ++i)
					if (s[i] < '0' || s[i] > '9') return std::nullopt;
			}
		}
	}
	const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(mo)},
	                                      std::chrono::day{static_cast<unsigned>(d)}};
	if (!ymd.ok() || h > 23 || mi > 59 || sec > 59) return std::nullopt;
	return Timestamp::from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d), h, mi, sec);
}

inline Timestamp parse_timestamp_or_throw(std::string_view s) {
	auto t = parse_timestamp(s);
	if (!t) throw DataError("unparseable timestamp '" + std::string(s) + "'");
	return *t;
}

/// Half-open interval [start, end).
struct TimeRange {
	Timestamp start;
	Timestamp end;

	bool contains(Timestamp t) const { return start <= t && t < end; }
	bool empty() const { return !(start < end); }
	std::int64_t steps(std::int64_t step = kHalfHour) const { return (end - start) / step; }
	bool operator==(const TimeRange&) const = default;
};

/// First instant of the month `months` after the month containing `t`.
inline Timestamp add_months(Timestamp month_start, int months) {
	const auto ymd = month_start.date();
	const auto shifted = std::chrono::year_month{ymd.year(), ymd.month()} + std::chrono::months{months};
	return Timestamp::from_civil(static_cast<int>(shifted.year()), static_cast<unsigned>(shifted.month()), 1);
}

} // namespace stlf
