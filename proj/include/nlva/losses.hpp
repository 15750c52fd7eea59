#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "nlva/rng.hpp"
#include "nlva/sampling.hpp"
#include "nlva/tensor.hpp"

namespace nlva {

struct LabeledBatch {
	Tensor embeddings; // B x D
	std::vector<int> labels;
};

// Mean negative log-likelihood over the batch, computed with the usual
// max-subtracted log-sum-exp so saturated logits stay finite.
inline double cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
	if (logits.ndim() != 2) throw dim_error("cross_entropy: expected B x K logits, got " + shape_str(logits.shape()));
	const std::size_t b = logits.dim(0), k = logits.dim(1);
	if (labels.size() != b)
		throw dim_error("cross_entropy: " + std::to_string(labels.size()) + " labels for batch of " +
		                std::to_string(b));
	double total = 0.0;
	for (std::size_t i = 0; i < b; ++i) {
		if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k)
			throw contract_error("cross_entropy: label " + std::to_string(labels[i]) + " outside [0, " +
			                     std::to_string(k) + ")");
		const double* row = logits.data() + i * k;
		double m = row[0];
		for (std::size_t j = 1; j < k; ++j) m = std::max(m, row[j]);
		double sum = 0.0;
		for (std::size_t j = 0; j < k; ++j) sum += std::exp(row[j] - m);
		total += m + std::log(sum) - row[static_cast<std::size_t>(labels[i])];
	}
	return total / static_cast<double>(b);
}

namespace detail {

inline double softplus(double x) {
	return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double row_distance(const Tensor& e, std::size_t i, std::size_t j) {
	const std::size_t d = e.dim(1);
	const double* a = e.data() + i * d;
	const double* b = e.data() + j * d;
	double sq = 0.0;
	for (std::size_t x = 0; x < d; ++x) {
		const double diff = a[x] - b[x];
		sq += diff * diff;
	}
	return std::sqrt(sq);
}

} // namespace detail

// Soft-margin batch-hard triplet loss: for every anchor, take its farthest
// in-batch positive and nearest in-batch negative (Euclidean distances) and
// average softplus(hardest_pos - hardest_neg) over the batch.
inline double batch_hard_triplet(const LabeledBatch& batch) {
	if (batch.embeddings.ndim() != 2)
		throw dim_error("batch_hard_triplet: expected B x D embeddings, got " + shape_str(batch.embeddings.shape()));
	const std::size_t b = batch.embeddings.dim(0);
	if (batch.labels.size() != b)
		throw dim_error("batch_hard_triplet: " + std::to_string(batch.labels.size()) + " labels for batch of " +
		                std::to_string(b));
	if (b < 2) throw contract_error("batch_hard_triplet: need at least 2 embeddings");

	double total = 0.0;
	for (std::size_t a = 0; a < b; ++a) {
		double hardest_pos = -1.0, hardest_neg = -1.0;
		for (std::size_t j = 0; j < b; ++j) {
			if (j == a) continue;
			const double d = detail::row_distance(batch.embeddings, a, j);
			if (batch.labels[j] == batch.labels[a])
				hardest_pos = std::max(hardest_pos, d);
			else if (hardest_neg < 0.0 || d < hardest_neg)
				hardest_neg = d;
		}
		if (hardest_pos < 0.0)
			throw contract_error("batch_hard_triplet: identity " + std::to_string(batch.labels[a]) +
			                     " has no positive in batch");
		if (hardest_neg < 0.0)
			throw contract_error("batch_hard_triplet: identity " + std::to_string(batch.labels[a]) +
			                     " has no negative in batch");
		total += detail::softplus(hardest_pos - hardest_neg);
	}
	return total / static_cast<double>(b);
}

// Seeded P x K batch composition: P distinct identities, K tracks per
// identity (drawn without replacement when the identity has enough tracks,
// with replacement otherwise). Returns catalog indices grouped by identity.
inline std::vector<std::size_t> pk_batch_compose(const std::vector<Track>& catalog, std::size_t p, std::size_t k,
                                                 std::uint64_t seed) {
	if (p < 1 || k < 1) throw contract_error("pk_batch_compose: P and K must be positive");

	// identities in first-appearance order, each with its track indices
	std::vector<int> ids;
	std::vector<std::vector<std::size_t>> tracks_of;
	for (std::size_t i = 0; i < catalog.size(); ++i) {
		const auto it = std::find(ids.begin(), ids.end(), catalog[i].id);
		if (it == ids.end()) {
			ids.push_back(catalog[i].id);
			tracks_of.push_back({i});
		} else {
			tracks_of[static_cast<std::size_t>(it - ids.begin())].push_back(i);
		}
	}
	if (ids.size() < p)
		throw contract_error("pk_batch_compose: need " + std::to_string(p) + " identities, catalog has " +
		                     std::to_string(ids.size()));

	Rng rng(seed);
	auto pick = [&](std::vector<std::size_t>& pool, std::size_t count) {
		// partial Fisher-Yates: the first `count` slots become the draw
		for (std::size_t i = 0; i < count; ++i)
			std::swap(pool[i], pool[i + rng.uniform_int(pool.size() - i)]);
		pool.resize(count);
	};

	std::vector<std::size_t> id_order(ids.size());
	for (std::size_t i = 0; i < id_order.size(); ++i) id_order[i] = i;
	pick(id_order, p);

	std::vector<std::size_t> batch;
	batch.reserve(p * k);
	for (const std::size_t which : id_order) {
		std::vector<std::size_t> pool = tracks_of[which];
		if (pool.size() >= k) {
			pick(pool, k);
			batch.insert(batch.end(), pool.begin(), pool.end());
		} else {
			for (std::size_t j = 0; j < k; ++j) batch.push_back(pool[rng.uniform_int(pool.size())]);
		}
	}
	return batch;
}

} // namespace nlva
