#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "nlva/tensor.hpp"
#include "nlva/tensor_io.hpp"

namespace nlva {

// A set of track embeddings with the labels retrieval needs.
struct EmbeddingSet {
	Tensor vectors; // N x D
	std::vector<int> ids;
	std::vector<int> cameras;
};

inline void validate_embedding_set(const EmbeddingSet& e) {
	if (e.vectors.ndim() != 2)
		throw dim_error("embedding set: expected N x D vectors, got " + shape_str(e.vectors.shape()));
	if (e.ids.size() != e.vectors.dim(0) || e.cameras.size() != e.vectors.dim(0))
		throw dim_error("embedding set: " + std::to_string(e.vectors.dim(0)) + " vectors but " +
		                std::to_string(e.ids.size()) + " ids / " + std::to_string(e.cameras.size()) + " cameras");
}

// Euclidean distance matrix between two embedding sets.
inline Tensor pairwise_distances(const EmbeddingSet& q, const EmbeddingSet& g) {
	validate_embedding_set(q);
	validate_embedding_set(g);
	if (q.vectors.dim(1) != g.vectors.dim(1))
		throw dim_error("pairwise_distances: query D " + std::to_string(q.vectors.dim(1)) + " vs gallery D " +
		                std::to_string(g.vectors.dim(1)));
	const std::size_t nq = q.vectors.dim(0), ng = g.vectors.dim(0), d = q.vectors.dim(1);
	Tensor dist({nq, ng});
	for (std::size_t i = 0; i < nq; ++i) {
		const double* qi = q.vectors.data() + i * d;
		for (std::size_t j = 0; j < ng; ++j) {
			const double* gj = g.vectors.data() + j * d;
			double sq = 0.0;
			for (std::size_t x = 0; x < d; ++x) {
				const double diff = qi[x] - gj[x];
				sq += diff * diff;
			}
			dist.at(i, j) = std::sqrt(sq);
		}
	}
	return dist;
}

// Queries that end up with no reachable correct gallery entry are dropped
// from the metric denominator and counted here instead.
struct EvalDiagnostics {
	std::size_t evaluated_queries = 0;
	std::size_t skipped_queries = 0;
};

namespace detail {

// Gallery order for one query: valid entries sorted by distance, ties broken
// by gallery index. Same-identity same-camera entries are dropped when the
// cross-camera protocol is active.
inline std::vector<std::size_t> ranked_gallery(const Tensor& dist, std::size_t qi, int q_id, int q_cam,
                                               const std::vector<int>& g_ids, const std::vector<int>& g_cams,
                                               bool cam_filter) {
	std::vector<std::size_t> order;
	for (std::size_t j = 0; j < g_ids.size(); ++j)
		if (!cam_filter || g_ids[j] != q_id || g_cams[j] != q_cam) order.push_back(j);
	std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
		const double da = dist.at(qi, a), db = dist.at(qi, b);
		return da != db ? da < db : a < b;
	});
	return order;
}

inline void check_metric_args(const Tensor& dist, const std::vector<int>& q_ids, const std::vector<int>& g_ids,
                              const std::vector<int>& q_cams, const std::vector<int>& g_cams) {
	if (dist.ndim() != 2) throw dim_error("retrieval metrics: expected Nq x Ng distances, got " + shape_str(dist.shape()));
	if (q_ids.size() != dist.dim(0) || q_cams.size() != dist.dim(0))
		throw dim_error("retrieval metrics: query labels do not match " + std::to_string(dist.dim(0)) + " rows");
	if (g_ids.size() != dist.dim(1) || g_cams.size() != dist.dim(1))
		throw dim_error("retrieval metrics: gallery labels do not match " + std::to_string(dist.dim(1)) + " columns");
}

} // namespace detail

// Fraction of queries whose nearest valid gallery entry has the right id.
inline double cmc_rank1(const Tensor& dist, const std::vector<int>& q_ids, const std::vector<int>& g_ids,
                        const std::vector<int>& q_cams, const std::vector<int>& g_cams, bool cam_filter = true,
                        EvalDiagnostics* diag = nullptr) {
	detail::check_metric_args(dist, q_ids, g_ids, q_cams, g_cams);
	std::size_t hits = 0, evaluated = 0, skipped = 0;
	for (std::size_t i = 0; i < q_ids.size(); ++i) {
		const auto order = detail::ranked_gallery(dist, i, q_ids[i], q_cams[i], g_ids, g_cams, cam_filter);
		const bool any_match = std::any_of(order.begin(), order.end(),
		                                   [&](std::size_t j) { return g_ids[j] == q_ids[i]; });
		if (!any_match) {
			++skipped;
			continue;
		}
		++evaluated;
		if (g_ids[order.front()] == q_ids[i]) ++hits;
	}
	if (diag) *diag = {evaluated, skipped};
	if (evaluated == 0) throw contract_error("cmc_rank1: no query has a valid gallery match");
	return static_cast<double>(hits) / static_cast<double>(evaluated);
}

// Mean over queries of average precision across the ranked valid gallery.
inline double mean_average_precision(const Tensor& dist, const std::vector<int>& q_ids,
                                     const std::vector<int>& g_ids, const std::vector<int>& q_cams,
                                     const std::vector<int>& g_cams, bool cam_filter = true,
                                     EvalDiagnostics* diag = nullptr) {
	detail::check_metric_args(dist, q_ids, g_ids, q_cams, g_cams);
	double ap_sum = 0.0;
	std::size_t evaluated = 0, skipped = 0;
	for (std::size_t i = 0; i < q_ids.size(); ++i) {
		const auto order = detail::ranked_gallery(dist, i, q_ids[i], q_cams[i], g_ids, g_cams, cam_filter);
		std::size_t relevant = 0;
		double precision_sum = 0.0;
		for (std::size_t rank = 0; rank < order.size(); ++rank) {
			if (g_ids[order[rank]] != q_ids[i]) continue;
			++relevant;
			precision_sum += static_cast<double>(relevant) / static_cast<double>(rank + 1);
		}
		if (relevant == 0) {
			++skipped;
			continue;
		}
		++evaluated;
		ap_sum += precision_sum / static_cast<double>(relevant);
	}
	if (diag) *diag = {evaluated, skipped};
	if (evaluated == 0) throw contract_error("mean_average_precision: no query has a valid gallery match");
	return ap_sum / static_cast<double>(evaluated);
}

// Embedding set file: one JSON header line {"n":N,"d":D}, the N x D vectors
// as an NVT1 blob, then N CSV lines of index,id,camera.
inline void write_embedding_set(const std::string& path, const EmbeddingSet& e) {
	validate_embedding_set(e);
	std::ofstream os(path, std::ios::binary);
	if (!os) throw io_error("cannot open '" + path + "' for writing");
	nlohmann::json header{{"n", e.vectors.dim(0)}, {"d", e.vectors.dim(1)}};
	os << header.dump() << "\n";
	write_nvt1(os, e.vectors);
	for (std::size_t i = 0; i < e.ids.size(); ++i)
		os << i << "," << e.ids[i] << "," << e.cameras[i] << "\n";
	if (!os) throw io_error("write failed for '" + path + "'");
}

inline EmbeddingSet read_embedding_set(const std::string& path) {
	std::ifstream is(path, std::ios::binary);
	if (!is) throw io_error("cannot open '" + path + "' for reading");
	std::string header_line;
	if (!std::getline(is, header_line)) throw io_error("'" + path + "': missing embedding header");
	nlohmann::json header = nlohmann::json::parse(header_line, nullptr, false);
	if (header.is_discarded() || !header.contains("n") || !header.contains("d"))
		throw io_error("'" + path + "': malformed embedding header");
	const std::size_t n = header["n"].get<std::size_t>(), d = header["d"].get<std::size_t>();

	EmbeddingSet e;
	e.vectors = read_nvt1(is);
	if (e.vectors.shape() != std::vector<std::size_t>{n, d})
		throw io_error("'" + path + "': vector blob is " + shape_str(e.vectors.shape()) + ", header says " +
		               std::to_string(n) + " x " + std::to_string(d));
	e.ids.resize(n);
	e.cameras.resize(n);
	std::string row;
	for (std::size_t i = 0; i < n; ++i) {
		if (!std::getline(is, row)) throw io_error("'" + path + "': truncated label rows");
		std::istringstream rs(row);
		std::size_t index = 0;
		char c1 = 0, c2 = 0;
		if (!(rs >> index >> c1 >> e.ids[i] >> c2 >> e.cameras[i]) || c1 != ',' || c2 != ',' || index != i)
			throw io_error("'" + path + "': bad label row '" + row + "'");
	}
	return e;
}

} // namespace nlva
