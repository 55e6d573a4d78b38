/*
 * Versioned C interface of the native pairwise-similarity kernel.
 *
 * A kernel library exports the three functions below. The input buffer is a
 * contiguous row-major [n_series x n_steps] block of IEEE-754 doubles; the
 * output buffer receives the [n_series x n_series] matrix, row-major. Only
 * distances (Euclidean, DTW) and correntropy are computed natively; Pearson
 * stays on the reference path.
 *
 * The ABI hash is FNV-1a/64 over STLF_SIM_ABI_LAYOUT. A caller refuses any
 * library whose hash or major version differs from its own.
 */
#ifndef STLF_SIM_KERNEL_ABI_H
#define STLF_SIM_KERNEL_ABI_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#define STLF_SIM_ABI_VERSION 1u
#define STLF_SIM_ABI_LAYOUT                                                                                    \
	"stlf_sim_job{u32 abi_version;u32 measure;u64 n_series;u64 n_steps;i64 band;f64 sigma;u64 reserved[4]}" \
	"stlf_sim_status{i32 code;u32 pad;u64 row;u64 col}v1"

enum stlf_sim_measure {
	STLF_SIM_EUCLIDEAN = 1,
	STLF_SIM_DTW = 2,
	STLF_SIM_CORRENTROPY = 3
};

enum stlf_sim_code {
	STLF_SIM_OK = 0,
	STLF_SIM_NON_FINITE = 1,   /* status.row/col = first offending (series, step) */
	STLF_SIM_VERSION_MISMATCH = 2,
	STLF_SIM_INVALID_ARGUMENT = 3
};

typedef struct stlf_sim_job {
	uint32_t abi_version; /* must equal STLF_SIM_ABI_VERSION */
	uint32_t measure;     /* stlf_sim_measure */
	uint64_t n_series;
	uint64_t n_steps;
	int64_t band;         /* Sakoe-Chiba half-width for DTW; negative = unconstrained */
	double sigma;         /* correntropy kernel width, > 0 */
	uint64_t reserved[4];
} stlf_sim_job;

typedef struct stlf_sim_status {
	int32_t code;
	uint32_t pad;
	uint64_t row;
	uint64_t col;
} stlf_sim_status;

typedef int32_t (*stlf_sim_pairwise_fn)(const stlf_sim_job* job, const double* input, double* output,
                                        stlf_sim_status* status);
typedef const char* (*stlf_sim_version_fn)(void);
typedef uint64_t (*stlf_sim_abi_hash_fn)(void);

/* Exported symbol names. */
#define STLF_SIM_SYM_PAIRWISE "stlf_sim_pairwise"
#define STLF_SIM_SYM_VERSION "stlf_sim_version"
#define STLF_SIM_SYM_ABI_HASH "stlf_sim_abi_hash"

#ifdef __cplusplus
}
#endif

#endif /* STLF_SIM_KERNEL_ABI_H */
