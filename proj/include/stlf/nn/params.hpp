#pragma once

#include <cmath>
#include <fstream>
#include <map>
#include <string>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "stlf/core/archive.hpp"
#include "stlf/core/error.hpp"
#include "stlf/core/matrix.hpp"
#include "stlf/core/random.hpp"
#include "stlf/nn/autodiff.hpp"

namespace stlf::nn {

/// Named trainable arrays, iterated in name order.
class ParameterStore {
public:
	Matrix& add(const std::string& name, Matrix init) {
		auto [it, inserted] = params_.emplace(name, std::move(init));
		if (!inserted) throw InternalError("duplicate parameter '" + name + "'");
		return it->second;
	}
	/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)); fan_in defaults to `rows`.
	Matrix& add_weight(const std::string& name, std::size_t rows, std::size_t cols, Rng& rng, std::size_t fan_in = 0) {
		Matrix m(rows, cols);
		const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in ? fan_in : rows, 1)));
		for (std::size_t i = 0; i < m.size(); ++i) m[i] = rng.uniform(-bound, bound);
		return add(name, std::move(m));
	}
	Matrix& add_bias(const std::string& name, std::size_t width) { return add(name, Matrix(1, width)); }
	/// Gaussian(0, 0.1) node embeddings.
	Matrix& add_embedding(const std::string& name, std::size_t rows, std::size_t cols, Rng& rng, double scale = 0.1) {
		Matrix m(rows, cols);
		for (std::size_t i = 0; i < m.size(); ++i) m[i] = rng.normal(0.0, scale);
		return add(name, std::move(m));
	}

	bool contains(const std::string& name) const { return params_.count(name) != 0; }
	Matrix& at(const std::string& name) {
		auto it = params_.find(name);
		if (it == params_.end()) throw InternalError("unknown parameter '" + name + "'");
		return it->second;
	}
	const Matrix& at(const std::string& name) const {
		auto it = params_.find(name);
		if (it == params_.end()) throw InternalError("unknown parameter '" + name + "'");
		return it->second;
	}

	auto begin() { return params_.begin(); }
	auto end() { return params_.end(); }
	auto begin() const { return params_.begin(); }
	auto end() const { return params_.end(); }
	std::size_t size() const { return params_.size(); }

	std::size_t scalar_count() const {
		std::size_t n = 0;
		for (const auto& [_, m] : params_) n += m.size();
		return n;
	}

	void zero() {
		for (auto& [_, m] : params_) m.fill(0.0);
	}

	bool operator==(const ParameterStore&) const = default;

private:
	std::map<std::string, Matrix> params_;
};

/// Per-forward binding of parameters onto a tape. A parameter becomes a
/// variable leaf the first time it is requested.
class Context {
public:
	Context(Tape& tape, const ParameterStore& params, bool track_gradients)
	    : tape_(tape), params_(params), track_(track_gradients) {}

	Tape& tape() { return tape_; }
	bool training() const { return track_; }

	Var param(const std::string& name) {
		auto it = bound_.find(name);
		if (it != bound_.end()) return it->second;
		const Matrix& m = params_.at(name);
		Var v = track_ ? tape_.variable(m) : tape_.constant(m);
		bound_.emplace(name, v);
		return v;
	}
	Var constant(Matrix m) { return tape_.constant(std::move(m)); }

	/// Gradients of every bound parameter after tape().backward().
	std::map<std::string, Matrix> gradients() const {
		std::map<std::string, Matrix> out;
		for (const auto& [name, v] : bound_) out.emplace(name, tape_.grad(v));
		for (const auto& [name, m] : params_)
			if (!out.count(name)) out.emplace(name, Matrix(m.rows(), m.cols()));
		return out;
	}

private:
	Tape& tape_;
	const ParameterStore& params_;
	bool track_;
	std::unordered_map<std::string, Var> bound_;
};

// Checkpoint: "<prefix>.bin" array archive (one array per parameter) and
// "<prefix>.json" manifest {format, version, seed, config_hash, config,
// parameters: {name: shape}}.

struct CheckpointMeta {
	std::uint64_t seed = 0;
	std::string config_hash;
	nlohmann::json config = nlohmann::json::object();
};

inline void save_checkpoint(const ParameterStore& params, const std::string& prefix, const CheckpointMeta& meta) {
	ArrayMap arrays;
	nlohmann::json shapes = nlohmann::json::object();
	for (const auto& [name, m] : params) {
		arrays[name] = NamedArray{{m.rows(), m.cols()}, m.storage()};
		shapes[name] = {m.rows(), m.cols()};
	}
	write_archive(prefix + ".bin", arrays);
	nlohmann::json manifest{{"format", "stlf-checkpoint"}, {"version", 1},          {"seed", meta.seed},
	                        {"config_hash", meta.config_hash}, {"config", meta.config}, {"parameters", shapes}};
	std::ofstream out(prefix + ".json", std::ios::trunc);
	if (!out) throw DataError("cannot write '" + prefix + ".json'");
	out << manifest.dump(2) << '\n';
}

inline CheckpointMeta read_checkpoint_meta(const std::string& prefix) {
	std::ifstream in(prefix + ".json");
	if (!in) throw DataError("cannot open checkpoint manifest '" + prefix + ".json'");
	nlohmann::json manifest;
	try {
		in >> manifest;
	} catch (const nlohmann::json::exception& e) {
		throw DataError("malformed checkpoint manifest: " + std::string(e.what()));
	}
	if (manifest.value("format", "") != "stlf-checkpoint") throw DataError("'" + prefix + ".json' is not a checkpoint manifest");
	return {manifest.value("seed", std::uint64_t{0}), manifest.value("config_hash", std::string{}),
	        manifest.value("config", nlohmann::json::object())};
}

/// Overwrites `params` from a checkpoint; names and shapes must match exactly.
inline void load_checkpoint(ParameterStore& params, const std::string& prefix) {
	const auto arrays = read_archive(prefix + ".bin");
	if (arrays.size() != params.size())
		throw DataError("checkpoint has " + std::to_string(arrays.size()) + " arrays, model expects " + std::to_string(params.size()));
	for (auto& [name, m] : params) {
		auto it = arrays.find(name);
		if (it == arrays.end()) throw DataError("checkpoint lacks parameter '" + name + "'");
		const auto& arr = it->second;
		if (arr.shape.size() != 2 || arr.shape[0] != m.rows() || arr.shape[1] != m.cols())
			throw DataError("checkpoint parameter '" + name + "' has the wrong shape");
		std::copy(arr.values.begin(), arr.values.end(), m.data());
	}
}

} // namespace stlf::nn
