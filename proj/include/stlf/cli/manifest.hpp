#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stlf/core/error.hpp"
#include "stlf/core/hash.hpp"

#ifndef STLF_GIT_REVISION
#define STLF_GIT_REVISION "unknown"
#endif

namespace stlf::cli {

/// Provenance of one CLI invocation: what went in, what came out.
struct RunManifest {
	std::string command;
	std::string config_hash;
	std::string git_revision = STLF_GIT_REVISION;
	std::vector<std::uint64_t> seeds;
	std::string data_fingerprint;
	std::vector<std::pair<std::string, double>> timings; // stage -> seconds
	std::vector<std::string> outputs;                     // relative to the manifest directory

	void add_output(const std::string& path) { outputs.push_back(path); }

	/// Writes the manifest to `file`, hashing every output; output paths are
	/// relative to the manifest's directory.
	void write(const std::filesystem::path& file) const {
		const auto dir = file.parent_path().empty() ? std::filesystem::path(".") : file.parent_path();
		nlohmann::json j;
		j["format"] = "stlf-manifest";
		j["version"] = 1;
		j["command"] = command;
		j["config_hash"] = config_hash;
		j["git_revision"] = git_revision;
		j["seeds"] = seeds;
		j["data_fingerprint"] = data_fingerprint;
		nlohmann::json t = nlohmann::json::object();
		for (const auto& [stage, s] : timings) t[stage] = s;
		j["timings"] = t;
		nlohmann::json outs = nlohmann::json::array();
		for (const auto& o : outputs) outs.push_back({{"path", o}, {"hash", hash_file((dir / o).string())}});
		j["outputs"] = outs;
		std::ofstream f(file, std::ios::binary);
		if (!f) throw DataError("cannot write manifest '" + file.string() + "'");
		f << j.dump(2) << '\n';
	}
};

/// Problems found when re-checking a manifest against the files on disk.
inline std::vector<std::string> verify_manifest(const std::filesystem::path& manifest_path) {
	std::ifstream f(manifest_path, std::ios::binary);
	if (!f) throw DataError("cannot open manifest '" + manifest_path.string() + "'");
	const auto j = nlohmann::json::parse(f, nullptr, false);
	if (j.is_discarded() || j.value("format", "") != "stlf-manifest") throw DataError("'" + manifest_path.string() + "' is not a run manifest");
	std::vector<std::string> problems;
	const auto dir = manifest_path.parent_path().empty() ? std::filesystem::path(".") : manifest_path.parent_path();
	for (const auto& o : j.at("outputs")) {
		const auto p = dir / o.at("path").get<std::string>();
		if (!std::filesystem::exists(p)) problems.push_back("missing " + p.string());
		else if (hash_file(p.string()) != o.at("hash").get<std::string>()) problems.push_back("hash mismatch " + p.string());
	}
	return problems;
}

} // namespace stlf::cli
