#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

namespace stlf::log {

using Sink = std::function<void(const std::string&)>;

namespace detail {
inline std::mutex& sink_mutex() {
	static std::mutex m;
	return m;
}
inline Sink& warning_sink() {
	static Sink sink = [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
	return sink;
}
} // namespace detail

inline void warn(const std::string& msg) {
	std::lock_guard lock(detail::sink_mutex());
	detail::warning_sink()(msg);
}

/// Replaces the warning sink, returning the previous one.
inline Sink set_warning_sink(Sink sink) {
	std::lock_guard lock(detail::sink_mutex());
	return std::exchange(detail::warning_sink(), std::move(sink));
}

/// Captures warnings for the lifetime of the object (tests, CLI summaries).
class ScopedCapture {
public:
	ScopedCapture()
	    : previous_(set_warning_sink([this](const std::string& m) { messages_.push_back(m); })) {}
	~ScopedCapture() { set_warning_sink(std::move(previous_)); }
	ScopedCapture(const ScopedCapture&) = delete;
	ScopedCapture& operator=(const ScopedCapture&) = delete;

	const std::vector<std::string>& messages() const { return messages_; }
	bool contains(const std::string& needle) const {
		for (const auto& m : messages_)
			if (m.find(needle) != std::string::npos) return true;
		return false;
	}

private:
	std::vector<std::string> messages_;
	Sink previous_;
};

} // namespace stlf::log
