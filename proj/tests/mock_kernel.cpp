// Minimal native kernel used by the loader tests. Full-matrix DTW, written
// independently of the reference implementation.

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "sim_kernel_abi.h"

#ifndef MOCK_ABI_SALT
#define MOCK_ABI_SALT 0
#endif
#ifndef MOCK_VERSION
#define MOCK_VERSION "1.0.0-mock"
#endif

namespace {

std::uint64_t fnv(const char* s) {
	std::uint64_t h = 0xcbf29ce484222325ULL;
	for (; *s; ++s) {
		h ^= static_cast<unsigned char>(*s);
		h *= 0x100000001b3ULL;
	}
	return h;
}

double dtw_full(const double* x, const double* y, std::size_t n, std::int64_t band) {
	const double inf = std::numeric_limits<double>::infinity();
	std::vector<double> d((n + 1) * (n + 1), inf);
	auto at = [&](std::size_t i, std::size_t j) -> double& { return d[i * (n + 1) + j]; };
	at(0, 0) = 0.0;
	for (std::size_t i = 1; i <= n; ++i)
		for (std::size_t j = 1; j <= n; ++j) {
			const std::int64_t off = static_cast<std::int64_t>(i) - static_cast<std::int64_t>(j);
			if (band >= 0 && (off > band || -off > band)) continue;
			double best = at(i - 1, j - 1);
			if (at(i - 1, j) < best) best = at(i - 1, j);
			if (at(i, j - 1) < best) best = at(i, j - 1);
			at(i, j) = std::fabs(x[i - 1] - y[j - 1]) + best;
		}
	return at(n, n);
}

} // namespace

extern "C" {

std::uint64_t stlf_sim_abi_hash(void) { return fnv(STLF_SIM_ABI_LAYOUT) + MOCK_ABI_SALT; }
const char* stlf_sim_version(void) { return MOCK_VERSION; }

std::int32_t stlf_sim_pairwise(const stlf_sim_job* job, const double* input, double* output, stlf_sim_status* status) {
	status->code = STLF_SIM_OK;
	if (job->abi_version != STLF_SIM_ABI_VERSION) return status->code = STLF_SIM_VERSION_MISMATCH;
	const std::size_t n = job->n_series, t = job->n_steps;
	if (n < 2 || t < 2) return status->code = STLF_SIM_INVALID_ARGUMENT;
	for (std::size_t i = 0; i < n * t; ++i)
		if (!std::isfinite(input[i])) {
			status->row = i / t;
			status->col = i % t;
			return status->code = STLF_SIM_NON_FINITE;
		}
	for (std::size_t i = 0; i < n; ++i) {
		output[i * n + i] = job->measure == STLF_SIM_CORRENTROPY ? 1.0 : 0.0;
		for (std::size_t j = i + 1; j < n; ++j) {
			const double *x = input + i * t, *y = input + j * t;
			double v = 0.0;
			switch (job->measure) {
			case STLF_SIM_EUCLIDEAN:
				for (std::size_t k = 0; k < t; ++k) v += (x[k] - y[k]) * (x[k] - y[k]);
				v = std::sqrt(v);
				break;
			case STLF_SIM_DTW: v = dtw_full(x, y, t, job->band); break;
			case STLF_SIM_CORRENTROPY:
				for (std::size_t k = 0; k < t; ++k) v += std::exp(-((x[k] - y[k]) * (x[k] - y[k])) / (2.0 * job->sigma * job->sigma));
				v /= static_cast<double>(t);
				break;
			default: return status->code = STLF_SIM_INVALID_ARGUMENT;
			}
			output[i * n + j] = output[j * n + i] = v;
		}
	}
	return STLF_SIM_OK;
}

}
