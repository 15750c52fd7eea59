#pragma once

#include <cstddef>

#include "nlva/tensor.hpp"

namespace nlva {

// Inference-mode batch-norm statistics for the pooled feature vector.
// Defaults are the identity transform so an untrained head is a no-op.
struct BnParams {
	Tensor gamma, beta, mean, var;
	double eps = 0.0;
};

inline BnParams make_identity_bn(std::size_t c) {
	BnParams bn;
	bn.gamma = Tensor::full({c}, 1.0);
	bn.beta = Tensor({c});
	bn.mean = Tensor({c});
	bn.var = Tensor::full({c}, 1.0);
	return bn;
}

// Track embedding taps: the triplet loss reads the raw pooled vector,
// cross-entropy and retrieval read the normalized one.
struct PooledFeature {
	Tensor pre_bn;  // length C
	Tensor post_bn; // length C
};

// Pool a C x T' x H x W feature volume down to one C-vector (mean or max
// over every temporal-spatial position), then apply batch normalization.
inline PooledFeature fpl_forward(const Tensor& v, PoolKind kind, const BnParams& bn) {
	if (v.ndim() != 4) throw dim_error("fpl_forward: expected C x T x H x W, got " + shape_str(v.shape()));
	const std::size_t c = v.dim(0), span = v.dim(1) * v.dim(2) * v.dim(3);
	PooledFeature f;
	f.pre_bn = Tensor({c});
	for (std::size_t ci = 0; ci < c; ++ci) {
		const double* row = v.data() + ci * span;
		if (kind == PoolKind::avg) {
			double sum = 0.0;
			for (std::size_t i = 0; i < span; ++i) sum += row[i];
			f.pre_bn.at(ci) = sum / static_cast<double>(span);
		} else {
			double best = row[0];
			for (std::size_t i = 1; i < span; ++i) best = std::max(best, row[i]);
			f.pre_bn.at(ci) = best;
		}
	}
	f.post_bn = batchnorm_infer(f.pre_bn, bn.gamma.values(), bn.beta.values(), bn.mean.values(), bn.var.values(),
	                            bn.eps);
	return f;
}

} // namespace nlva
