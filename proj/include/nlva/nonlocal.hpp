#pragma once

#include <array>
#include <cstddef>
#include <utility>
#include <vector>

#include "nlva/rng.hpp"
#include "nlva/tensor.hpp"

namespace nlva {

// Weights of one non-local attention layer. query/key/value project the
// C-dim features into the C'-dim embedding space; out_w maps the aggregated
// values back to C before the residual addition. All projections are 1x1x1,
// i.e. plain matrices applied per position.
struct NonLocalParams {
	Tensor query_w; // C' x C
	Tensor key_w;   // C' x C
	Tensor value_w; // C' x C
	Tensor out_w;   // C x C'
	std::size_t c_in = 0;
	std::size_t c_embed = 0;
};

// out_w starts at zero so a freshly built layer is an exact identity;
// the other projections draw uniform values scaled by 1/sqrt(C).
inline NonLocalParams make_nonlocal_params(std::size_t c_in, std::size_t c_embed, Rng& rng) {
	if (c_embed < 1 || c_embed > c_in)
		throw config_error("nonlocal: c_embed must lie in [1, c_in], got " + std::to_string(c_embed) + " for c_in " +
		                   std::to_string(c_in));
	NonLocalParams p;
	p.c_in = c_in;
	p.c_embed = c_embed;
	const double bound = 1.0 / std::sqrt(static_cast<double>(c_in));
	auto draw = [&](std::size_t rows, std::size_t cols) {
		Tensor t({rows, cols});
		for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(-bound, bound);
		return t;
	};
	p.query_w = draw(c_embed, c_in);
	p.key_w = draw(c_embed, c_in);
	p.value_w = draw(c_embed, c_in);
	p.out_w = Tensor({c_in, c_embed});
	return p;
}

inline void validate_params(const NonLocalParams& p) {
	const std::vector<std::size_t> proj{p.c_embed, p.c_in};
	const std::vector<std::size_t> back{p.c_in, p.c_embed};
	if (p.c_embed < 1 || p.c_embed > p.c_in || p.query_w.shape() != proj || p.key_w.shape() != proj ||
	    p.value_w.shape() != proj || p.out_w.shape() != back)
		throw contract_error("nonlocal: inconsistent parameter shapes for c_in=" + std::to_string(p.c_in) +
		                     ", c_embed=" + std::to_string(p.c_embed));
}

// C x T x H x W -> (T*H*W) x C, positions as rows
inline Tensor positions_from_video(const Tensor& x) {
	Tensor p = permute(x, {1, 2, 3, 0});
	return reshape(p, {x.dim(1) * x.dim(2) * x.dim(3), x.dim(0)});
}

inline Tensor video_from_positions(const Tensor& m, std::size_t c, std::size_t t, std::size_t h, std::size_t w) {
	Tensor v = reshape(m, {t, h, w, c});
	return permute(v, {3, 0, 1, 2});
}

struct NonLocalCache {
	Tensor x_pos; // N x C
	Tensor q, k, v; // N x C'
	Tensor attn;  // N x N, row-stochastic
	std::array<std::size_t, 4> dims{}; // C,T,H,W of the forward input
};

struct NonLocalResult {
	Tensor z;
	NonLocalCache cache;
};

namespace detail {

// q = x Wq^T, k = x Wk^T, v = x Wv^T, attn = softmax(q k^T), y = attn v
inline void attend_positions(const Tensor& x_pos, const NonLocalParams& p, NonLocalCache& cache, Tensor& y) {
	cache.x_pos = x_pos;
	cache.q = matmul(x_pos, transpose(p.query_w));
	cache.k = matmul(x_pos, transpose(p.key_w));
	cache.v = matmul(x_pos, transpose(p.value_w));
	cache.attn = softmax_rows(matmul(cache.q, transpose(cache.k)));
	y = matmul(cache.attn, cache.v);
}

} // namespace detail

// Dense non-local layer: every position attends over all T*H*W positions,
// the aggregated value is mapped back to C channels and added to the input.
inline NonLocalResult nonlocal_forward(const Tensor& x, const NonLocalParams& p) {
	validate_params(p);
	if (x.ndim() != 4)
		throw dim_error("nonlocal_forward: expected C x T x H x W, got " + shape_str(x.shape()));
	if (x.dim(0) != p.c_in)
		throw dim_error("nonlocal_forward: input channels " + std::to_string(x.dim(0)) +
		                " do not match layer c_in " + std::to_string(p.c_in));
	if (!all_finite(x)) throw numeric_error("nonlocal_forward: non-finite input");

	NonLocalResult r;
	r.cache.dims = {x.dim(0), x.dim(1), x.dim(2), x.dim(3)};
	Tensor y;
	detail::attend_positions(positions_from_video(x), p, r.cache, y);
	Tensor z_pos = add(r.cache.x_pos, matmul(y, transpose(p.out_w)));
	if (!all_finite(z_pos)) throw numeric_error("nonlocal_forward: non-finite activations");
	r.z = video_from_positions(z_pos, x.dim(0), x.dim(1), x.dim(2), x.dim(3));
	return r;
}

struct NonLocalGrads {
	Tensor x;       // C x T x H x W
	Tensor query_w; // C' x C
	Tensor key_w;   // C' x C
	Tensor value_w; // C' x C
	Tensor out_w;   // C x C'
};

// Analytic gradients of the dense forward above.
inline NonLocalGrads nonlocal_backward(const Tensor& grad_z, const NonLocalCache& cache, const NonLocalParams& p) {
	validate_params(p);
	const auto [c, t, h, w] = cache.dims;
	const std::size_t n = t * h * w;
	if (grad_z.ndim() != 4 || grad_z.shape() != std::vector<std::size_t>{c, t, h, w})
		throw contract_error("nonlocal_backward: grad shape " + shape_str(grad_z.shape()) +
		                     " does not match cached forward dims");
	if (cache.x_pos.shape() != std::vector<std::size_t>{n, c} ||
	    cache.q.shape() != std::vector<std::size_t>{n, p.c_embed} ||
	    cache.attn.shape() != std::vector<std::size_t>{n, n} || c != p.c_in)
		throw contract_error("nonlocal_backward: cache does not match parameters");

	const Tensor g = positions_from_video(grad_z); // N x C
	NonLocalGrads out;

	// z = x + y out_w^T, y = attn v
	const Tensor y = matmul(cache.attn, cache.v);
	out.out_w = matmul(transpose(g), y);    // C x C'
	const Tensor gy = matmul(g, p.out_w);   // N x C'
	Tensor ga = matmul(gy, transpose(cache.v)); // N x N
	const Tensor gv = matmul(transpose(cache.attn), gy); // N x C'

	// softmax rows: gs_ij = a_ij * (ga_ij - sum_k ga_ik a_ik)
	Tensor gs({n, n});
	for (std::size_t i = 0; i < n; ++i) {
		const double* arow = cache.attn.data() + i * n;
		const double* grow = ga.data() + i * n;
		double dot = 0.0;
		for (std::size_t j = 0; j < n; ++j) dot += arow[j] * grow[j];
		double* srow = gs.data() + i * n;
		for (std::size_t j = 0; j < n; ++j) srow[j] = arow[j] * (grow[j] - dot);
	}

	const Tensor gq = matmul(gs, cache.k);            // N x C'
	const Tensor gk = matmul(transpose(gs), cache.q); // N x C'

	out.query_w = matmul(transpose(gq), cache.x_pos); // C' x C
	out.key_w = matmul(transpose(gk), cache.x_pos);
	out.value_w = matmul(transpose(gv), cache.x_pos);

	Tensor gx = g;
	gx = add(gx, matmul(gq, p.query_w));
	gx = add(gx, matmul(gk, p.key_w));
	gx = add(gx, matmul(gv, p.value_w));
	out.x = video_from_positions(gx, c, t, h, w);
	return out;
}

// Spatially reduced variant: horizontal bands pooled to stripes.
struct StripeConfig {
	std::size_t num_stripes = 16;
};

// Contiguous near-equal bands; the first H mod S bands get one extra row.
inline std::vector<std::pair<std::size_t, std::size_t>> stripe_bands(std::size_t h, std::size_t s) {
	std::vector<std::pair<std::size_t, std::size_t>> bands(s);
	const std::size_t base = h / s, extra = h % s;
	std::size_t row = 0;
	for (std::size_t b = 0; b < s; ++b) {
		const std::size_t height = base + (b < extra ? 1 : 0);
		bands[b] = {row, row + height};
		row += height;
	}
	return bands;
}

// C x T x H x W -> C x T x S; stripe value = mean over the band's rows and all columns.
inline Tensor make_stripes(const Tensor& x, const StripeConfig& s) {
	if (x.ndim() != 4) throw dim_error("make_stripes: expected C x T x H x W, got " + shape_str(x.shape()));
	const std::size_t c = x.dim(0), t = x.dim(1), h = x.dim(2), w = x.dim(3);
	if (s.num_stripes < 1 || s.num_stripes > h)
		throw dim_error("make_stripes: " + std::to_string(s.num_stripes) + " stripes do not fit height " +
		                std::to_string(h));
	const auto bands = stripe_bands(h, s.num_stripes);
	Tensor out({c, t, s.num_stripes});
	for (std::size_t ci = 0; ci < c; ++ci)
		for (std::size_t ti = 0; ti < t; ++ti)
			for (std::size_t b = 0; b < s.num_stripes; ++b) {
				double sum = 0.0;
				for (std::size_t hi = bands[b].first; hi < bands[b].second; ++hi)
					for (std::size_t wi = 0; wi < w; ++wi) sum += x.at(ci, ti, hi, wi);
				out.at(ci, ti, b) = sum / static_cast<double>((bands[b].second - bands[b].first) * w);
			}
	return out;
}

// Attention over the T*S stripe positions; the per-stripe update is mapped
// through out_w, repeated over the stripe's band and all columns, then added
// to the full-resolution input. Cost is independent of H and W.
inline Tensor stripe_nonlocal_forward(const Tensor& x, const NonLocalParams& p, const StripeConfig& s,
                                      NonLocalCache* cache_out = nullptr) {
	validate_params(p);
	if (x.ndim() != 4)
		throw dim_error("stripe_nonlocal_forward: expected C x T x H x W, got " + shape_str(x.shape()));
	if (x.dim(0) != p.c_in)
		throw dim_error("stripe_nonlocal_forward: input channels " + std::to_string(x.dim(0)) +
		                " do not match layer c_in " + std::to_string(p.c_in));
	if (!all_finite(x)) throw numeric_error("stripe_nonlocal_forward: non-finite input");
	const std::size_t c = x.dim(0), t = x.dim(1), h = x.dim(2), w = x.dim(3);

	const Tensor stripes = make_stripes(x, s); // C x T x S
	const Tensor xs = reshape(stripes, {c, t, s.num_stripes, 1});
	NonLocalCache cache;
	cache.dims = {c, t, s.num_stripes, 1};
	Tensor y;
	detail::attend_positions(positions_from_video(xs), p, cache, y);
	const Tensor u_pos = matmul(y, transpose(p.out_w)); // (T*S) x C
	const Tensor u = video_from_positions(u_pos, c, t, s.num_stripes, 1);
	if (!all_finite(u)) throw numeric_error("stripe_nonlocal_forward: non-finite activations");

	const auto bands = stripe_bands(h, s.num_stripes);
	Tensor z = x;
	for (std::size_t ci = 0; ci < c; ++ci)
		for (std::size_t ti = 0; ti < t; ++ti)
			for (std::size_t b = 0; b < s.num_stripes; ++b) {
				const double uv = u.at(ci, ti, b, std::size_t{0});
				for (std::size_t hi = bands[b].first; hi < bands[b].second; ++hi)
					for (std::size_t wi = 0; wi < w; ++wi) z.at(ci, ti, hi, wi) += uv;
			}
	if (cache_out) *cache_out = std::move(cache);
	return z;
}

} // namespace nlva
