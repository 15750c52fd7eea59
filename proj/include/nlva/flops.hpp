#pragma once

#include <algorithm>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "nlva/backbone.hpp"
#include "nlva/tensor.hpp"

namespace nlva {

// Cost accounting: one multiply-accumulate counts as one FLOP; batch norm,
// ReLU, softmax, pooling and residual additions are excluded throughout.

struct CostLine {
	std::string name;
	std::uint64_t flops = 0;
};

struct CostReport {
	std::string variant;
	std::vector<CostLine> per_layer;
	std::uint64_t total = 0;
};

inline std::uint64_t flops_conv2d(std::uint64_t c_in, std::uint64_t c_out, std::uint64_t k, std::uint64_t h_out,
                                  std::uint64_t w_out, std::uint64_t t_frames) {
	return t_frames * c_in * c_out * k * k * h_out * w_out;
}

// Dense attention over N = t*h*w positions: four channel projections plus
// the two N x N matrix products (similarity and aggregation).
inline std::uint64_t flops_nonlocal_dense(std::uint64_t c, std::uint64_t c_embed, std::uint64_t t, std::uint64_t h,
                                          std::uint64_t w) {
	const std::uint64_t n = t * h * w;
	return 4 * c * c_embed * n + 2 * c_embed * n * n;
}

// Stripe attention sees only t*s positions, so its cost carries no h or w.
inline std::uint64_t flops_nonlocal_stripe(std::uint64_t c, std::uint64_t c_embed, std::uint64_t t, std::uint64_t s) {
	return flops_nonlocal_dense(c, c_embed, t, s, 1);
}

// Walk the full-width architecture (width_multiplier is an execution-time
// convenience and deliberately ignored here) and sum every conv and
// attention layer, tracking the frame count through temporal halvings.
inline CostReport flops_model(const BackboneConfig& cfg) {
	validate_config(cfg);
	CostReport rep;
	rep.variant = variant_name(cfg.variant);
	auto line = [&rep](std::string name, std::uint64_t flops) {
		rep.per_layer.push_back({std::move(name), flops});
		rep.total += flops;
	};

	auto points = cfg.nonlocal_points;
	std::sort(points.begin(), points.end());
	const bool attend = variant_has_attention(cfg.variant);
	const bool stripes = variant_uses_stripes(cfg.variant);
	const bool temporal = variant_uses_temporal_pool(cfg.variant);

	std::uint64_t t = cfg.frames;
	std::size_t h = conv_out_extent(cfg.input_hw[0], 7, 2, 3);
	std::size_t w = conv_out_extent(cfg.input_hw[1], 7, 2, 3);
	line("stem", flops_conv2d(3, kStemWidth, 7, h, w, t));
	h = (h - 2) / 2 + 1; // 2x2/2 max pool
	w = (w - 2) / 2 + 1;

	std::size_t c_prev = kStemWidth;
	std::size_t ordinal = 0;
	for (std::size_t s = 0; s < kStageTable.size(); ++s) {
		const StageSpec& spec = kStageTable[s];
		const std::string stage = "stage" + std::to_string(s + 2);
		for (std::size_t b = 0; b < spec.blocks; ++b) {
			const std::size_t stride = (b == 0) ? spec.entry_stride : 1;
			const std::size_t c_in = (b == 0) ? c_prev : spec.out;
			h = conv_out_extent(h, 1, stride, 0);
			w = conv_out_extent(w, 1, stride, 0);
			const std::string block = stage + "_block" + std::to_string(b + 1);
			line(block + "_reduce", flops_conv2d(c_in, spec.mid, 1, h, w, t));
			line(block + "_mid", flops_conv2d(spec.mid, spec.mid, 3, h, w, t));
			line(block + "_expand", flops_conv2d(spec.mid, spec.out, 1, h, w, t));
			if (b == 0) line(block + "_proj", flops_conv2d(c_in, spec.out, 1, h, w, t));
			if (!attend) continue;
			for (const auto& [p_stage, p_block] : points) {
				if (p_stage != s + 2 || p_block != b + 1) continue;
				++ordinal;
				const std::uint64_t c_embed = spec.out / 2 > 0 ? spec.out / 2 : 1;
				const std::string name = "attn" + std::to_string(ordinal) + "_" + stage;
				if (stripes)
					line(name, flops_nonlocal_stripe(spec.out, c_embed, t, cfg.stripe_s));
				else
					line(name, flops_nonlocal_dense(spec.out, c_embed, t, h, w));
				const bool pool_here = temporal && std::find(cfg.temporal_pool_points.begin(),
				                                             cfg.temporal_pool_points.end(),
				                                             ordinal) != cfg.temporal_pool_points.end();
				if (pool_here && t > 2) t = (t + 1) / 2;
			}
		}
		c_prev = spec.out;
	}
	return rep;
}

inline std::string render_cost_json(const CostReport& rep) {
	nlohmann::json j;
	j["variant"] = rep.variant;
	j["total"] = rep.total;
	j["per_layer"] = nlohmann::json::array();
	for (const CostLine& l : rep.per_layer) j["per_layer"].push_back({{"name", l.name}, {"flops", l.flops}});
	return j.dump(2);
}

// Aligned two-column listing with a total row, e.g. for terminal output.
inline std::string render_cost_table(const CostReport& rep) {
	std::size_t name_w = 5; // "total"
	for (const CostLine& l : rep.per_layer) name_w = std::max(name_w, l.name.size());
	std::ostringstream os;
	os << "variant: " << rep.variant << "\n";
	for (const CostLine& l : rep.per_layer) {
		os << l.name;
		os << std::string(name_w - l.name.size() + 2, ' ') << l.flops << "\n";
	}
	os << "total" << std::string(name_w - 5 + 2, ' ') << rep.total << " (" << static_cast<double>(rep.total) / 1e9
	   << " G)\n";
	return os.str();
}

} // namespace nlva
