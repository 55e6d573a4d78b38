#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace stlf {

/// Seeded generator with toolchain-independent draws (the standard
/// distributions are implementation-defined).
class Rng {
public:
	explicit Rng(std::uint64_t seed) : engine_(seed) {}

	std::uint64_t next() { return engine_(); }

	/// Uniform in [0, 1).
	double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
	double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

	/// Standard normal via Box-Muller.
	double normal() {
		if (has_spare_) {
			has_spare_ = false;
			return spare_;
		}
		double u1 = uniform();
		while (u1 <= 0.0) u1 = uniform();
		const double u2 = uniform();
		const double r = std::sqrt(-2.0 * std::log(u1));
		spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
		has_spare_ = true;
		return r * std::cos(2.0 * std::numbers::pi * u2);
	}
	double normal(double mean, double stddev) { return mean + stddev * normal(); }

	std::size_t index(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }

	template <typename T>
	void shuffle(std::vector<T>& v) {
		for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[index(i)]);
	}

	std::vector<std::size_t> permutation(std::size_t n) {
		std::vector<std::size_t> p(n);
		for (std::size_t i = 0; i < n; ++i) p[i] = i;
		shuffle(p);
		return p;
	}

private:
	std::mt19937_64 engine_;
	double spare_ = 0.0;
	bool has_spare_ = false;
};

} // namespace stlf
