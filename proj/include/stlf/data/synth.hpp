#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "stlf/core/error.hpp"
#include "stlf/core/random.hpp"
#include "stlf/data/panel.hpp"
#include "stlf/graph/graph.hpp"

namespace stlf::data {

/// Knobs of the synthetic household generator. Amplitudes are in Wh.
struct SynthOptions {
	Timestamp start = Timestamp::from_civil(2013, 1, 1);
	double base_level = 300.0;
	double daily_amplitude = 100.0;
	double weekly_amplitude = 30.0;
	/// Shared cluster factor: slow AR(1), weighted by `coupling`.
	double shared_amplitude = 100.0;
	double shared_persistence = 0.998;
	/// Household factor: short-memory AR(1), weighted by 1 - coupling.
	double own_amplitude = 100.0;
	double own_persistence = 0.5;
	double white_noise = 20.0;
	double floor = 1.0;
};

struct SyntheticPanel {
	LoadPanel panel;
	graph::Graph planted;               // block-diagonal cluster cliques
	std::vector<std::size_t> cluster_of; // node -> cluster
	Matrix seasonal;                     // noise-free seasonal component per node
};

/// Households grouped into contiguous clusters of (almost) equal size. Each
/// cluster has its own daily/weekly profile and a slowly varying shared factor;
/// each household adds its own faster factor and white noise:
///
///   x_i(t) = s_i * (base_k(t) + c * A_f * f_k(t) + (1 - c) * A_u * u_i(t)) + sigma * e_i(t)
///
/// clipped below at `floor` so readings stay strictly positive.
inline SyntheticPanel synth_panel(std::size_t n, std::size_t t_steps, std::size_t k_clusters, double coupling,
                                  std::uint64_t seed, const SynthOptions& opt = {}) {
	if (!(coupling >= 0.0 && coupling <= 1.0)) throw DataError("synth_panel: coupling must lie in [0, 1]");
	if (k_clusters < 1 || n < k_clusters) throw DataError("synth_panel: requires N >= K_clusters >= 1");
	if (n < 2) throw DataError("synth_panel: requires N >= 2");
	if (t_steps < 1) throw DataError("synth_panel: requires T >= 1");

	Rng rng(seed);
	constexpr double two_pi = 2.0 * std::numbers::pi;
	const std::size_t day = 48, week = 336;

	std::vector<std::size_t> cluster_of(n);
	for (std::size_t i = 0; i < n; ++i) cluster_of[i] = i * k_clusters / n;

	struct ClusterShape {
		double daily_phase, weekly_phase, evening_phase;
	};
	std::vector<ClusterShape> shapes(k_clusters);
	for (auto& s : shapes) s = {rng.uniform(0.0, two_pi), rng.uniform(0.0, two_pi), rng.uniform(0.0, two_pi)};

	std::vector<double> scale(n);
	for (auto& s : scale) s = rng.uniform(0.7, 1.3);

	auto ar_innovation = [](double phi) { return std::sqrt(1.0 - phi * phi); };
	std::vector<double> shared(k_clusters), own(n);
	for (auto& f : shared) f = rng.normal();
	for (auto& u : own) u = rng.normal();

	Matrix values(n, t_steps), seasonal(n, t_steps);
	for (std::size_t t = 0; t < t_steps; ++t) {
		for (auto& f : shared) f = opt.shared_persistence * f + ar_innovation(opt.shared_persistence) * rng.normal();
		for (auto& u : own) u = opt.own_persistence * u + ar_innovation(opt.own_persistence) * rng.normal();
		const double day_pos = two_pi * static_cast<double>(t % day) / static_cast<double>(day);
		const double week_pos = two_pi * static_cast<double>(t % week) / static_cast<double>(week);
		for (std::size_t i = 0; i < n; ++i) {
			const auto& sh = shapes[cluster_of[i]];
			const double base = opt.base_level + opt.daily_amplitude * (0.7 * std::sin(day_pos + sh.daily_phase) +
			                                                           0.3 * std::sin(2.0 * day_pos + sh.evening_phase)) +
			                    opt.weekly_amplitude * std::sin(week_pos + sh.weekly_phase);
			seasonal(i, t) = scale[i] * base;
			const double latent = coupling * opt.shared_amplitude * shared[cluster_of[i]] +
			                      (1.0 - coupling) * opt.own_amplitude * own[i];
			values(i, t) = std::max(opt.floor, scale[i] * (base + latent) + opt.white_noise * rng.normal());
		}
	}

	std::vector<std::string> ids(n);
	for (std::size_t i = 0; i < n; ++i) ids[i] = "SYN" + std::string(i < 10 ? "00" : (i < 100 ? "0" : "")) + std::to_string(i);
	SyntheticPanel out{LoadPanel(std::move(values), std::move(ids), Timeline{opt.start, kHalfHour, t_steps}),
	                   graph::cluster_graph(n, cluster_of), cluster_of, std::move(seasonal)};
	return out;
}

} // namespace stlf::data
