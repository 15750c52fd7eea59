#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "nlva/backbone.hpp"
#include "nlva/tensor.hpp"

namespace nlva {

// CLI run description: the backbone configuration plus seed, synthetic
// track count and default I/O paths. Parsed strictly — unknown keys are
// rejected so a typo cannot silently fall back to a default.
struct RunConfig {
	BackboneConfig backbone;
	std::uint64_t seed = 0;
	std::size_t tracks = 4; // synthetic tracks generated by `forward`
	std::string input;      // optional NVT1 frame file
	std::string out;        // embedding output path
};

inline nlohmann::json backbone_config_to_json(const BackboneConfig& cfg) {
	nlohmann::json j;
	j["variant"] = variant_name(cfg.variant);
	j["width_multiplier"] = cfg.width_multiplier;
	j["frames"] = cfg.frames;
	j["input_hw"] = {cfg.input_hw[0], cfg.input_hw[1]};
	j["stripe_s"] = cfg.stripe_s;
	j["nonlocal_points"] = nlohmann::json::array();
	for (const auto& [stage, block] : cfg.nonlocal_points) j["nonlocal_points"].push_back({stage, block});
	j["temporal_pool_points"] = cfg.temporal_pool_points;
	return j;
}

namespace detail {

inline void apply_backbone_key(BackboneConfig& cfg, const std::string& key, const nlohmann::json& v, bool& known) {
	known = true;
	try {
		if (key == "variant") {
			cfg.variant = variant_from_name(v.get<std::string>());
		} else if (key == "width_multiplier") {
			cfg.width_multiplier = v.get<double>();
		} else if (key == "frames") {
			cfg.frames = v.get<std::size_t>();
		} else if (key == "input_hw") {
			const auto hw = v.get<std::vector<std::size_t>>();
			if (hw.size() != 2) throw config_error("input_hw must have exactly 2 entries");
			cfg.input_hw = {hw[0], hw[1]};
		} else if (key == "stripe_s") {
			cfg.stripe_s = v.get<std::size_t>();
		} else if (key == "nonlocal_points") {
			cfg.nonlocal_points.clear();
			for (const auto& p : v) {
				const auto pair = p.get<std::vector<std::size_t>>();
				if (pair.size() != 2) throw config_error("nonlocal_points entries must be [stage, block]");
				cfg.nonlocal_points.emplace_back(pair[0], pair[1]);
			}
		} else if (key == "temporal_pool_points") {
			cfg.temporal_pool_points = v.get<std::vector<std::size_t>>();
		} else {
			known = false;
		}
	} catch (const nlohmann::json::exception& e) {
		throw config_error("config key '" + key + "': " + e.what());
	}
}

} // namespace detail

inline BackboneConfig backbone_config_from_json(const nlohmann::json& j) {
	if (!j.is_object()) throw config_error("backbone config must be a JSON object");
	BackboneConfig cfg;
	for (const auto& [key, v] : j.items()) {
		bool known = false;
		detail::apply_backbone_key(cfg, key, v, known);
		if (!known) throw config_error("unknown config key '" + key + "'");
	}
	validate_config(cfg);
	return cfg;
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
	if (!j.is_object()) throw config_error("run config must be a JSON object");
	RunConfig rc;
	for (const auto& [key, v] : j.items()) {
		bool known = false;
		detail::apply_backbone_key(rc.backbone, key, v, known);
		if (known) continue;
		try {
			if (key == "seed") {
				rc.seed = v.get<std::uint64_t>();
			} else if (key == "tracks") {
				rc.tracks = v.get<std::size_t>();
			} else if (key == "input") {
				rc.input = v.get<std::string>();
			} else if (key == "out") {
				rc.out = v.get<std::string>();
			} else {
				throw config_error("unknown config key '" + key + "'");
			}
		} catch (const nlohmann::json::exception& e) {
			throw config_error("config key '" + key + "': " + e.what());
		}
	}
	validate_config(rc.backbone);
	return rc;
}

inline RunConfig load_run_config(const std::string& path) {
	std::ifstream is(path);
	if (!is) throw io_error("cannot open config '" + path + "'");
	nlohmann::json j = nlohmann::json::parse(is, nullptr, false);
	if (j.is_discarded()) throw config_error("config '" + path + "' is not valid JSON");
	return run_config_from_json(j);
}

} // namespace nlva
