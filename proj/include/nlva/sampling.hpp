#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "nlva/rng.hpp"
#include "nlva/tensor.hpp"

namespace nlva {

// One pedestrian sequence: frame count plus the labels evaluation needs.
struct Track {
	std::size_t length = 0;
	int id = 0;
	int camera = 0;
};

// Restricted sampling of T frame indices from a track of `len` frames.
// The track is cut into T equal-measure chunks; chunk i covers
// [floor(i*len/T), floor((i+1)*len/T)). Training draws one frame uniformly
// inside each chunk, evaluation takes the chunk's first frame. Chunks that
// are empty (len < T) fall back to their start index, which duplicates
// neighbouring frames but keeps the output length fixed at T.
inline std::vector<std::size_t> sample_frames_train(std::size_t len, std::size_t t, Rng& rng) {
	if (len == 0) throw contract_error("sample_frames_train: empty track");
	if (t == 0) throw contract_error("sample_frames_train: zero frames requested");
	std::vector<std::size_t> picks(t);
	for (std::size_t i = 0; i < t; ++i) {
		const std::size_t lo = i * len / t;
		const std::size_t hi = (i + 1) * len / t;
		picks[i] = (hi > lo) ? lo + rng.uniform_int(hi - lo) : lo;
	}
	return picks;
}

inline std::vector<std::size_t> sample_frames_eval(std::size_t len, std::size_t t) {
	if (len == 0) throw contract_error("sample_frames_eval: empty track");
	if (t == 0) throw contract_error("sample_frames_eval: zero frames requested");
	std::vector<std::size_t> picks(t);
	for (std::size_t i = 0; i < t; ++i) picks[i] = i * len / t;
	return picks;
}

} // namespace nlva
