#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nlva/fpl.hpp"
#include "nlva/nonlocal.hpp"
#include "nlva/rng.hpp"
#include "nlva/tensor.hpp"

namespace nlva {

// Model family: the plain backbone (avg- or max-pooled head), the five-layer
// attention variant, its two reduction variants, and the combined variant.
enum class Variant { baseline, baseline_max, nvan, nvan_spatial, nvan_temporal, ste_nvan };

inline const char* variant_name(Variant v) {
	switch (v) {
		case Variant::baseline: return "baseline";
		case Variant::baseline_max: return "baseline_max";
		case Variant::nvan: return "nvan";
		case Variant::nvan_spatial: return "nvan_spatial";
		case Variant::nvan_temporal: return "nvan_temporal";
		case Variant::ste_nvan: return "ste_nvan";
	}
	throw config_error("variant_name: unknown variant value");
}

inline const std::array<Variant, 6>& all_variants() {
	static const std::array<Variant, 6> v{Variant::baseline,     Variant::baseline_max,  Variant::nvan,
	                                      Variant::nvan_spatial, Variant::nvan_temporal, Variant::ste_nvan};
	return v;
}

inline Variant variant_from_name(const std::string& name) {
	for (Variant v : all_variants())
		if (name == variant_name(v)) return v;
	throw config_error("unknown variant '" + name + "'");
}

inline bool variant_has_attention(Variant v) { return v != Variant::baseline && v != Variant::baseline_max; }
inline bool variant_uses_stripes(Variant v) { return v == Variant::nvan_spatial || v == Variant::ste_nvan; }
inline bool variant_uses_temporal_pool(Variant v) { return v == Variant::nvan_temporal || v == Variant::ste_nvan; }
inline PoolKind variant_fpl_kind(Variant v) { return v == Variant::baseline_max ? PoolKind::max : PoolKind::avg; }

// Fixed ResNet-50 stage table (stages conventionally numbered 2..5): block
// count, bottleneck mid width, output width, entry stride. The final stage
// keeps stride 1 so the feature map stays at 1/16 resolution.
struct StageSpec {
	std::size_t blocks, mid, out, entry_stride;
};

inline constexpr std::array<StageSpec, 4> kStageTable{{
    {3, 64, 256, 1},
    {4, 128, 512, 2},
    {6, 256, 1024, 2},
    {3, 512, 2048, 1},
}};
inline constexpr std::size_t kStemWidth = 64;

// Scale a channel count by the width multiplier, keeping it at least 1.
inline std::size_t scaled(std::size_t channels, double width) {
	const double v = std::ceil(static_cast<double>(channels) * width);
	return v < 1.0 ? 1 : static_cast<std::size_t>(v);
}

struct BackboneConfig {
	double width_multiplier = 1.0;
	std::size_t frames = 8;
	std::array<std::size_t, 2> input_hw{256, 128};
	Variant variant = Variant::baseline;
	std::size_t stripe_s = 16;
	// (stage, block) insertion points, 1-based blocks within stages 2..5
	std::vector<std::pair<std::size_t, std::size_t>> nonlocal_points{{3, 3}, {3, 4}, {4, 4}, {4, 5}, {4, 6}};
	// ordinals (1-based) of attention layers followed by temporal halving
	std::vector<std::size_t> temporal_pool_points{2, 5};
};

inline void validate_config(const BackboneConfig& cfg) {
	if (!(cfg.width_multiplier > 0.0) || cfg.width_multiplier > 1.0)
		throw config_error("width_multiplier must lie in (0, 1], got " + std::to_string(cfg.width_multiplier));
	if (cfg.frames < 1) throw config_error("frames must be >= 1");
	if (cfg.input_hw[0] < 1 || cfg.input_hw[1] < 1) throw config_error("input_hw entries must be >= 1");
	if (cfg.stripe_s < 1) throw config_error("stripe_s must be >= 1");
	for (const auto& [stage, block] : cfg.nonlocal_points) {
		if (stage < 2 || stage > 5)
			throw config_error("nonlocal point references stage " + std::to_string(stage) + ", valid stages are 2..5");
		if (block < 1 || block > kStageTable[stage - 2].blocks)
			throw config_error("nonlocal point (" + std::to_string(stage) + "," + std::to_string(block) +
			                   ") exceeds the stage's " + std::to_string(kStageTable[stage - 2].blocks) + " blocks");
	}
	for (std::size_t ord : cfg.temporal_pool_points)
		if (ord < 1 || ord > cfg.nonlocal_points.size())
			throw config_error("temporal pool point " + std::to_string(ord) + " exceeds the " +
			                   std::to_string(cfg.nonlocal_points.size()) + " attention layers");
}

// One convolution with its inference-mode batch norm.
struct ConvBn {
	Tensor w; // C_out x C_in x k x k
	std::size_t stride = 1, pad = 0;
	BnParams bn;
};

// 1x1 reduce -> 3x3 -> 1x1 expand, with an optional projection shortcut on
// the first block of a stage. Any entry stride sits on the reduce conv.
struct Bottleneck {
	ConvBn reduce, middle, expand;
	std::optional<ConvBn> proj;
};

struct AttentionSite {
	std::size_t stage = 0;   // 2..5
	std::size_t block = 0;   // 1-based within the stage
	std::size_t ordinal = 0; // 1-based across the whole model
	NonLocalParams params;
};

struct Model {
	BackboneConfig cfg;
	ConvBn stem; // 7x7 stride 2, followed by a 2x2/2 max pool in forward
	std::array<std::vector<Bottleneck>, 4> stages;
	std::vector<AttentionSite> attention; // ordered by (stage, block)
};

namespace detail {

// Kaiming-style uniform draw with bound sqrt(6 / fan_in).
inline ConvBn make_conv(std::size_t c_out, std::size_t c_in, std::size_t k, std::size_t stride, std::size_t pad,
                        Rng& rng) {
	ConvBn l;
	l.w = Tensor({c_out, c_in, k, k});
	const double bound = std::sqrt(6.0 / static_cast<double>(c_in * k * k));
	for (std::size_t i = 0; i < l.w.size(); ++i) l.w.data()[i] = rng.uniform(-bound, bound);
	l.stride = stride;
	l.pad = pad;
	l.bn = make_identity_bn(c_out);
	l.bn.eps = 1e-5;
	return l;
}

} // namespace detail

// Deterministic construction: weights are drawn in a fixed order (stem,
// stages front to back, then attention layers), so equal (cfg, seed) pairs
// produce bitwise-identical models.
inline Model build_model(const BackboneConfig& cfg, std::uint64_t seed) {
	validate_config(cfg);
	Model m;
	m.cfg = cfg;
	Rng rng(seed);
	const double w = cfg.width_multiplier;

	m.stem = detail::make_conv(scaled(kStemWidth, w), 3, 7, 2, 3, rng);

	std::size_t c_prev = scaled(kStemWidth, w);
	for (std::size_t s = 0; s < kStageTable.size(); ++s) {
		const StageSpec& spec = kStageTable[s];
		const std::size_t mid = scaled(spec.mid, w), out = scaled(spec.out, w);
		for (std::size_t b = 0; b < spec.blocks; ++b) {
			const std::size_t stride = (b == 0) ? spec.entry_stride : 1;
			const std::size_t c_in = (b == 0) ? c_prev : out;
			Bottleneck blk;
			blk.reduce = detail::make_conv(mid, c_in, 1, stride, 0, rng);
			blk.middle = detail::make_conv(mid, mid, 3, 1, 1, rng);
			blk.expand = detail::make_conv(out, mid, 1, 1, 0, rng);
			if (b == 0) blk.proj = detail::make_conv(out, c_in, 1, stride, 0, rng);
			m.stages[s].push_back(std::move(blk));
		}
		c_prev = out;
	}

	if (variant_has_attention(cfg.variant)) {
		auto points = cfg.nonlocal_points;
		std::sort(points.begin(), points.end());
		for (std::size_t i = 0; i < points.size(); ++i) {
			AttentionSite site;
			site.stage = points[i].first;
			site.block = points[i].second;
			site.ordinal = i + 1;
			const std::size_t c = scaled(kStageTable[site.stage - 2].out, w);
			site.params = make_nonlocal_params(c, std::max<std::size_t>(1, c / 2), rng);
			m.attention.push_back(std::move(site));
		}
	}
	return m;
}

// Max over adjacent frame pairs; an odd trailing frame passes through.
inline Tensor temporal_halve(const Tensor& x) {
	if (x.ndim() != 4) throw dim_error("temporal_halve: expected C x T x H x W, got " + shape_str(x.shape()));
	const std::size_t c = x.dim(0), t = x.dim(1), h = x.dim(2), wd = x.dim(3);
	if (t < 2) throw dim_error("temporal_halve: need at least 2 frames, got " + std::to_string(t));
	const std::size_t t_out = (t + 1) / 2;
	Tensor out({c, t_out, h, wd});
	const std::size_t plane = h * wd;
	for (std::size_t ci = 0; ci < c; ++ci)
		for (std::size_t ti = 0; ti < t_out; ++ti) {
			const double* a = x.data() + (ci * t + 2 * ti) * plane;
			const double* b = (2 * ti + 1 < t) ? a + plane : nullptr;
			double* dst = out.data() + (ci * t_out + ti) * plane;
			for (std::size_t i = 0; i < plane; ++i) dst[i] = b ? std::max(a[i], b[i]) : a[i];
		}
	return out;
}

// vector of T frame tensors (C x H x W) <-> one C x T x H x W volume
inline Tensor stack_frames(const std::vector<Tensor>& frames) {
	if (frames.empty()) throw dim_error("stack_frames: no frames");
	const std::size_t c = frames[0].dim(0), h = frames[0].dim(1), w = frames[0].dim(2);
	Tensor out({c, frames.size(), h, w});
	const std::size_t plane = h * w;
	for (std::size_t t = 0; t < frames.size(); ++t) {
		if (frames[t].shape() != frames[0].shape())
			throw dim_error("stack_frames: frame " + std::to_string(t) + " has shape " +
			                shape_str(frames[t].shape()) + ", expected " + shape_str(frames[0].shape()));
		for (std::size_t ci = 0; ci < c; ++ci)
			std::copy_n(frames[t].data() + ci * plane, plane, out.data() + (ci * frames.size() + t) * plane);
	}
	return out;
}

inline std::vector<Tensor> unstack_frames(const Tensor& x) {
	const std::size_t c = x.dim(0), t = x.dim(1), h = x.dim(2), w = x.dim(3);
	std::vector<Tensor> frames(t, Tensor({c, h, w}));
	const std::size_t plane = h * w;
	for (std::size_t ti = 0; ti < t; ++ti)
		for (std::size_t ci = 0; ci < c; ++ci)
			std::copy_n(x.data() + (ci * t + ti) * plane, plane, frames[ti].data() + ci * plane);
	return frames;
}

// Shape and event log of one forward pass, for structural assertions.
struct ForwardTrace {
	std::vector<std::size_t> temporal_sizes;                       // T at input, then after each halving
	std::vector<std::array<std::size_t, 2>> stage_hw;              // spatial size after each stage
	std::size_t attention_layers = 0;                              // layers actually applied
};

namespace detail {

inline Tensor conv_bn(const Tensor& x, const ConvBn& l) {
	Tensor y = conv2d(x, l.w, l.stride, l.pad);
	return batchnorm_infer(y, l.bn.gamma.values(), l.bn.beta.values(), l.bn.mean.values(), l.bn.var.values(),
	                       l.bn.eps);
}

inline Tensor bottleneck_forward(const Tensor& x, const Bottleneck& b) {
	const Tensor shortcut = b.proj ? conv_bn(x, *b.proj) : x;
	Tensor h = relu(conv_bn(x, b.reduce));
	h = relu(conv_bn(h, b.middle));
	h = conv_bn(h, b.expand);
	return relu(add(h, shortcut));
}

} // namespace detail

// Run T frames through the shared-weight convolutional stages, applying the
// configured attention layers jointly over all frames and, for temporal
// variants, halving the frame count after the designated attention layers
// until it reaches 2.
inline Tensor forward_video(const Model& m, const Tensor& frames, ForwardTrace* trace = nullptr) {
	const BackboneConfig& cfg = m.cfg;
	if (frames.ndim() != 4 || frames.dim(1) != 3)
		throw dim_error("forward_video: expected T x 3 x H x W frames, got " + shape_str(frames.shape()));
	if (frames.dim(0) != cfg.frames || frames.dim(2) != cfg.input_hw[0] || frames.dim(3) != cfg.input_hw[1])
		throw dim_error("forward_video: frames " + shape_str(frames.shape()) + " do not match configured T=" +
		                std::to_string(cfg.frames) + ", HxW=" + std::to_string(cfg.input_hw[0]) + "x" +
		                std::to_string(cfg.input_hw[1]));

	ForwardTrace local;
	ForwardTrace& tr = trace ? *trace : local;
	tr.temporal_sizes = {cfg.frames};
	tr.stage_hw.clear();
	tr.attention_layers = 0;

	// stem per frame: 7x7/2 conv + BN + ReLU, then 2x2/2 max pool
	const std::size_t plane = frames.dim(2) * frames.dim(3);
	std::vector<Tensor> per_frame(cfg.frames);
	for (std::size_t t = 0; t < cfg.frames; ++t) {
		Tensor img({3, frames.dim(2), frames.dim(3)});
		std::copy_n(frames.data() + t * 3 * plane, 3 * plane, img.data());
		Tensor h = relu(detail::conv_bn(img, m.stem));
		per_frame[t] = pool(h, PoolKind::max, {1, 2, 2}, {1, 2, 2});
	}

	const bool do_pool = variant_uses_temporal_pool(cfg.variant);
	for (std::size_t s = 0; s < kStageTable.size(); ++s) {
		for (std::size_t b = 0; b < m.stages[s].size(); ++b) {
			for (Tensor& f : per_frame) f = detail::bottleneck_forward(f, m.stages[s][b]);
			for (const AttentionSite& site : m.attention) {
				if (site.stage != s + 2 || site.block != b + 1) continue;
				Tensor video = stack_frames(per_frame);
				if (variant_uses_stripes(cfg.variant))
					video = stripe_nonlocal_forward(video, site.params, StripeConfig{cfg.stripe_s});
				else
					video = nonlocal_forward(video, site.params).z;
				++tr.attention_layers;
				const bool pool_here = do_pool && std::find(cfg.temporal_pool_points.begin(),
				                                            cfg.temporal_pool_points.end(),
				                                            site.ordinal) != cfg.temporal_pool_points.end();
				if (pool_here && video.dim(1) > 2) {
					video = temporal_halve(video);
					tr.temporal_sizes.push_back(video.dim(1));
				}
				per_frame = unstack_frames(video);
			}
		}
		tr.stage_hw.push_back({per_frame[0].dim(1), per_frame[0].dim(2)});
	}

	return stack_frames(per_frame);
}

} // namespace nlva
