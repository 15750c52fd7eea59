#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "nlva/backbone.hpp"
#include "nlva/run_config.hpp"
#include "nlva/tensor_io.hpp"

namespace nlva {

// Attention-layer weights as a directory of NVT1 files plus a manifest
// recording the channel sizes and the file of every weight.
inline void save_nonlocal_params(const std::string& dir, const NonLocalParams& p) {
	validate_params(p);
	std::filesystem::create_directories(dir);
	nlohmann::json manifest;
	manifest["c_in"] = p.c_in;
	manifest["c_embed"] = p.c_embed;
	auto store = [&](const char* name, const Tensor& t) {
		const std::string file = std::string(name) + ".nvt";
		write_nvt1(dir + "/" + file, t);
		manifest["files"][name] = file;
	};
	store("query_w", p.query_w);
	store("key_w", p.key_w);
	store("value_w", p.value_w);
	store("out_w", p.out_w);
	std::ofstream os(dir + "/manifest.json");
	if (!os) throw io_error("cannot write manifest in '" + dir + "'");
	os << manifest.dump(2) << "\n";
}

inline NonLocalParams load_nonlocal_params(const std::string& dir) {
	std::ifstream is(dir + "/manifest.json");
	if (!is) throw io_error("cannot open manifest in '" + dir + "'");
	nlohmann::json manifest = nlohmann::json::parse(is, nullptr, false);
	if (manifest.is_discarded() || !manifest.contains("c_in") || !manifest.contains("c_embed") ||
	    !manifest.contains("files"))
		throw io_error("malformed manifest in '" + dir + "'");
	NonLocalParams p;
	p.c_in = manifest["c_in"].get<std::size_t>();
	p.c_embed = manifest["c_embed"].get<std::size_t>();
	auto fetch = [&](const char* name) {
		if (!manifest["files"].contains(name)) throw io_error("manifest in '" + dir + "' lacks file for " + std::string(name));
		return read_nvt1(dir + "/" + manifest["files"][name].get<std::string>());
	};
	p.query_w = fetch("query_w");
	p.key_w = fetch("key_w");
	p.value_w = fetch("value_w");
	p.out_w = fetch("out_w");
	validate_params(p);
	return p;
}

namespace detail {

// Enumerate every tensor of a model under a stable dotted name, in the same
// order build_model draws them. Shared by save and load.
template <class Model_, class Fn>
void visit_model_tensors(Model_& m, Fn&& fn) {
	auto conv = [&](const std::string& prefix, auto& layer) {
		fn(prefix + ".w", layer.w);
		fn(prefix + ".bn.gamma", layer.bn.gamma);
		fn(prefix + ".bn.beta", layer.bn.beta);
		fn(prefix + ".bn.mean", layer.bn.mean);
		fn(prefix + ".bn.var", layer.bn.var);
	};
	conv("stem", m.stem);
	for (std::size_t s = 0; s < m.stages.size(); ++s)
		for (std::size_t b = 0; b < m.stages[s].size(); ++b) {
			const std::string block = "stage" + std::to_string(s + 2) + ".block" + std::to_string(b + 1);
			conv(block + ".reduce", m.stages[s][b].reduce);
			conv(block + ".middle", m.stages[s][b].middle);
			conv(block + ".expand", m.stages[s][b].expand);
			if (m.stages[s][b].proj) conv(block + ".proj", *m.stages[s][b].proj);
		}
	for (auto& site : m.attention) {
		const std::string prefix = "attn" + std::to_string(site.ordinal);
		fn(prefix + ".query_w", site.params.query_w);
		fn(prefix + ".key_w", site.params.key_w);
		fn(prefix + ".value_w", site.params.value_w);
		fn(prefix + ".out_w", site.params.out_w);
	}
}

} // namespace detail

// Model directory layout: config.json (backbone config), weights/<name>.nvt
// per tensor, manifest.json listing every weight file.
inline void save_model(const std::string& dir, const Model& m) {
	std::filesystem::create_directories(dir + "/weights");
	{
		std::ofstream os(dir + "/config.json");
		if (!os) throw io_error("cannot write config in '" + dir + "'");
		os << backbone_config_to_json(m.cfg).dump(2) << "\n";
	}
	nlohmann::json manifest;
	manifest["files"] = nlohmann::json::object();
	detail::visit_model_tensors(m, [&](const std::string& name, const Tensor& t) {
		const std::string file = "weights/" + name + ".nvt";
		write_nvt1(dir + "/" + file, t);
		manifest["files"][name] = file;
	});
	std::ofstream os(dir + "/manifest.json");
	if (!os) throw io_error("cannot write manifest in '" + dir + "'");
	os << manifest.dump(2) << "\n";
}

// Rebuilds the model skeleton from config.json (weights drawn then
// overwritten), so structure checks and file contents stay consistent.
inline Model load_model(const std::string& dir) {
	std::ifstream cis(dir + "/config.json");
	if (!cis) throw io_error("cannot open config in '" + dir + "'");
	nlohmann::json cj = nlohmann::json::parse(cis, nullptr, false);
	if (cj.is_discarded()) throw config_error("config in '" + dir + "' is not valid JSON");
	Model m = build_model(backbone_config_from_json(cj), 0);

	std::ifstream mis(dir + "/manifest.json");
	if (!mis) throw io_error("cannot open manifest in '" + dir + "'");
	nlohmann::json manifest = nlohmann::json::parse(mis, nullptr, false);
	if (manifest.is_discarded() || !manifest.contains("files"))
		throw io_error("malformed manifest in '" + dir + "'");

	detail::visit_model_tensors(m, [&](const std::string& name, Tensor& t) {
		if (!manifest["files"].contains(name)) throw io_error("manifest in '" + dir + "' lacks weight " + name);
		Tensor loaded = read_nvt1(dir + "/" + manifest["files"][name].get<std::string>());
		if (loaded.shape() != t.shape())
			throw io_error("weight " + name + " has shape " + shape_str(loaded.shape()) + ", model expects " +
			               shape_str(t.shape()));
		t = std::move(loaded);
	});
	return m;
}

} // namespace nlva
