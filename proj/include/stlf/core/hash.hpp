#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <span>
#include <string>
#include <string_view>

#include "stlf/core/error.hpp"

namespace stlf {

/// 64-bit FNV-1a, used for config hashes and file fingerprints.
class Fnv1a {
public:
	void update(const void* data, std::size_t len) {
		const auto* p = static_cast<const unsigned char*>(data);
		for (std::size_t i = 0; i < len; ++i) {
			h_ ^= p[i];
			h_ *= 0x100000001b3ULL;
		}
	}
	void update(std::string_view s) { update(s.data(), s.size()); }
	void update(std::span<const double> v) { update(v.data(), v.size() * sizeof(double)); }
	std::uint64_t digest() const { return h_; }
	std::string hex() const { return to_hex(h_); }

	static std::string to_hex(std::uint64_t v) {
		char buf[17];
		std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
		return buf;
	}

private:
	std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

inline std::string hash_string(std::string_view s) {
	Fnv1a h;
	h.update(s);
	return h.hex();
}

inline std::string hash_file(const std::string& path) {
	std::ifstream in(path, std::ios::binary);
	if (!in) throw DataError("cannot open '" + path + "' for hashing");
	Fnv1a h;
	char buf[1 << 16];
	while (in) {
		in.read(buf, sizeof buf);
		h.update(buf, static_cast<std::size_t>(in.gcount()));
	}
	return h.hex();
}

} // namespace stlf
