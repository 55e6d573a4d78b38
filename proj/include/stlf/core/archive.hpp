#pragma once

// Binary array container shared by panel caches and checkpoints.
//
// Layout (little-endian):
//   magic   8 bytes  "STLFARR1"
//   u64     array count
//   per array:
//     u32   name length, followed by the name bytes (UTF-8)
//     u32   rank, followed by rank x u64 dimensions
//     f64   payload, product(dimensions) values, row-major
//
// Metadata (node ids, timestamps, shapes, seeds) lives in a JSON sidecar next
// to the container.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "stlf/core/error.hpp"

namespace stlf {

static_assert(std::endian::native == std::endian::little, "archive format assumes a little-endian host");

struct NamedArray {
	std::vector<std::uint64_t> shape;
	std::vector<double> values;
};

using ArrayMap = std::map<std::string, NamedArray>;

inline constexpr char kArchiveMagic[8] = {'S', 'T', 'L', 'F', 'A', 'R', 'R', '1'};

inline void write_archive(const std::string& path, const ArrayMap& arrays) {
	std::ofstream out(path, std::ios::binary | std::ios::trunc);
	if (!out) throw DataError("cannot write '" + path + "'");
	auto put = [&](const void* p, std::size_t n) { out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); };
	put(kArchiveMagic, 8);
	const std::uint64_t count = arrays.size();
	put(&count, 8);
	for (const auto& [name, arr] : arrays) {
		std::uint64_t expected = 1;
		for (auto d : arr.shape) expected *= d;
		if (expected != arr.values.size()) throw InternalError("archive array '" + name + "' shape/value mismatch");
		const auto len = static_cast<std::uint32_t>(name.size());
		put(&len, 4);
		put(name.data(), name.size());
		const auto rank = static_cast<std::uint32_t>(arr.shape.size());
		put(&rank, 4);
		put(arr.shape.data(), 8 * arr.shape.size());
		put(arr.values.data(), 8 * arr.values.size());
	}
	if (!out) throw DataError("write failed for '" + path + "'");
}

inline ArrayMap read_archive(const std::string& path) {
	std::ifstream in(path, std::ios::binary);
	if (!in) throw DataError("cannot open '" + path + "'");
	auto get = [&](void* p, std::size_t n) {
		in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
		if (!in) throw DataError("truncated archive '" + path + "'");
	};
	char magic[8];
	get(magic, 8);
	if (std::memcmp(magic, kArchiveMagic, 8) != 0) throw DataError("'" + path + "' is not an array archive");
	std::uint64_t count = 0;
	get(&count, 8);
	ArrayMap arrays;
	for (std::uint64_t i = 0; i < count; ++i) {
		std::uint32_t len = 0;
		get(&len, 4);
		std::string name(len, '\0');
		get(name.data(), len);
		std::uint32_t rank = 0;
		get(&rank, 4);
		NamedArray arr;
		arr.shape.resize(rank);
		get(arr.shape.data(), 8 * rank);
		std::uint64_t n = 1;
		for (auto d : arr.shape) n *= d;
		arr.values.resize(n);
		get(arr.values.data(), 8 * n);
		arrays.emplace(std::move(name), std::move(arr));
	}
	return arrays;
}

} // namespace stlf
