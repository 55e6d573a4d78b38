#pragma once

#include <dlfcn.h>

#include <cstdlib>
#include <memory>
#include <string>
#include <string_view>

#include "stlf/core/error.hpp"
#include "stlf/core/hash.hpp"
#include "stlf/core/log.hpp"
#include "stlf/graph/sim_kernel_abi.h"
#include "stlf/graph/similarity.hpp"

namespace stlf::graph {

constexpr std::uint64_t fnv1a_constexpr(std::string_view s) {
	std::uint64_t h = 0xcbf29ce484222325ULL;
	for (char c : s) {
		h ^= static_cast<unsigned char>(c);
		h *= 0x100000001b3ULL;
	}
	return h;
}

/// ABI hash this build expects from a kernel library.
inline constexpr std::uint64_t kSimAbiHash = fnv1a_constexpr(STLF_SIM_ABI_LAYOUT);
inline constexpr int kSimAbiMajor = 1;

class KernelHandshakeError : public DataError {
public:
	using DataError::DataError;
};

/// Pairwise kernel backed by a dynamically loaded native library. Pearson is
/// always evaluated by the reference path.
class NativeKernel : public PairwiseKernel {
public:
	/// Loads the library and performs the version / ABI handshake.
	static std::unique_ptr<NativeKernel> open(const std::string& path) {
		void* handle = ::dlopen(path.c_str(), RTLD_NOW | RTLD_LOCAL);
		if (!handle) throw DataError("cannot load sim kernel '" + path + "': " + std::string(::dlerror()));
		std::unique_ptr<NativeKernel> k(new NativeKernel(handle, path));
		k->pairwise_ = reinterpret_cast<stlf_sim_pairwise_fn>(k->symbol(STLF_SIM_SYM_PAIRWISE));
		k->version_fn_ = reinterpret_cast<stlf_sim_version_fn>(k->symbol(STLF_SIM_SYM_VERSION));
		auto abi_fn = reinterpret_cast<stlf_sim_abi_hash_fn>(k->symbol(STLF_SIM_SYM_ABI_HASH));
		const std::uint64_t got = abi_fn();
		if (got != kSimAbiHash)
			throw KernelHandshakeError("sim kernel '" + path + "' ABI hash " + Fnv1a::to_hex(got) + " does not match expected " +
			                           Fnv1a::to_hex(kSimAbiHash));
		k->version_ = k->version_fn_();
		if (k->version_.empty() || std::atoi(k->version_.c_str()) != kSimAbiMajor)
			throw KernelHandshakeError("sim kernel '" + path + "' reports version '" + k->version_ + "', expected major " +
			                           std::to_string(kSimAbiMajor));
		return k;
	}

	~NativeKernel() override {
		if (handle_) ::dlclose(handle_);
	}
	NativeKernel(const NativeKernel&) = delete;
	NativeKernel& operator=(const NativeKernel&) = delete;

	const std::string& version() const { return version_; }
	const std::string& path() const { return path_; }
	std::string name() const override { return "native:" + path_; }

	Matrix pairwise(const Matrix& series, Measure measure, const KernelParams& params) const override {
		if (measure == Measure::pearson) return ReferenceKernel{}.pairwise(series, measure, params);
		stlf_sim_job job{};
		job.abi_version = STLF_SIM_ABI_VERSION;
		job.measure = measure == Measure::euclidean ? STLF_SIM_EUCLIDEAN : measure == Measure::dtw ? STLF_SIM_DTW : STLF_SIM_CORRENTROPY;
		job.n_series = series.rows();
		job.n_steps = series.cols();
		job.band = params.band ? static_cast<std::int64_t>(*params.band) : -1;
		job.sigma = params.sigma;
		Matrix out(series.rows(), series.rows());
		stlf_sim_status status{};
		const std::int32_t code = pairwise_(&job, series.data(), out.data(), &status);
		switch (code) {
		case STLF_SIM_OK: return out;
		case STLF_SIM_NON_FINITE:
			throw DataError("sim kernel: non-finite input at (" + std::to_string(status.row) + ", " + std::to_string(status.col) + ")");
		case STLF_SIM_VERSION_MISMATCH: throw KernelHandshakeError("sim kernel rejected job: ABI version mismatch");
		default: throw DataError("sim kernel failed with code " + std::to_string(code));
		}
	}

private:
	NativeKernel(void* handle, std::string path) : handle_(handle), path_(std::move(path)) {}

	void* symbol(const char* name) const {
		void* s = ::dlsym(handle_, name);
		if (!s) throw KernelHandshakeError("sim kernel '" + path_ + "' lacks symbol " + name);
		return s;
	}

	void* handle_ = nullptr;
	std::string path_;
	std::string version_;
	stlf_sim_pairwise_fn pairwise_ = nullptr;
	stlf_sim_version_fn version_fn_ = nullptr;
};

/// Native kernel from `path` (or $STLF_SIM_KERNEL when empty). A missing
/// library degrades to the reference kernel with a warning; a library that
/// fails the handshake is refused.
inline std::unique_ptr<PairwiseKernel> resolve_kernel(std::string path = {}, unsigned reference_threads = 1) {
	if (path.empty()) {
		if (const char* env = std::getenv("STLF_SIM_KERNEL")) path = env;
	}
	if (!path.empty()) {
		try {
			return NativeKernel::open(path);
		} catch (const KernelHandshakeError&) {
			throw;
		} catch (const DataError& e) {
			log::warn(std::string(e.what()) + "; falling back to the reference kernel");
		}
	}
	return std::make_unique<ReferenceKernel>(reference_threads);
}

} // namespace stlf::graph
