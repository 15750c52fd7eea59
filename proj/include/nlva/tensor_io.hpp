#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "nlva/tensor.hpp"

namespace nlva {

// NVT1 tensor file: magic "NVT1", u32 LE ndim, ndim x u32 LE dims,
// f32 LE row-major payload. Compute stays in doubles; files store f32.

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
	const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
	                   static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
	os.write(b, 4);
}

inline std::uint32_t get_u32(std::istream& is, const std::string& what) {
	unsigned char b[4];
	if (!is.read(reinterpret_cast<char*>(b), 4)) throw io_error("nvt1: truncated " + what);
	return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
	       (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

} // namespace detail

inline void write_nvt1(std::ostream& os, const Tensor& t) {
	os.write("NVT1", 4);
	detail::put_u32(os, static_cast<std::uint32_t>(t.ndim()));
	for (std::size_t d = 0; d < t.ndim(); ++d) detail::put_u32(os, static_cast<std::uint32_t>(t.dim(d)));
	for (std::size_t i = 0; i < t.size(); ++i) {
		const float f = static_cast<float>(t.data()[i]);
		std::uint32_t bits;
		std::memcpy(&bits, &f, 4);
		detail::put_u32(os, bits);
	}
	if (!os) throw io_error("nvt1: write failed");
}

inline void write_nvt1(const std::string& path, const Tensor& t) {
	std::ofstream os(path, std::ios::binary);
	if (!os) throw io_error("nvt1: cannot open " + path + " for writing");
	write_nvt1(os, t);
}

inline Tensor read_nvt1(std::istream& is) {
	char magic[4];
	if (!is.read(magic, 4) || std::memcmp(magic, "NVT1", 4) != 0) throw io_error("nvt1: bad magic");
	const std::uint32_t ndim = detail::get_u32(is, "rank");
	if (ndim < 1 || ndim > 32) throw io_error("nvt1: unreasonable rank " + std::to_string(ndim));
	std::vector<std::size_t> shape(ndim);
	std::size_t total = 1;
	for (std::uint32_t d = 0; d < ndim; ++d) {
		const std::uint32_t v = detail::get_u32(is, "dims");
		if (v == 0) throw io_error("nvt1: zero dimension");
		shape[d] = v;
		if (total > (std::size_t{1} << 33) / v) throw io_error("nvt1: implausibly large tensor");
		total *= v;
	}
	std::vector<double> data(total);
	for (std::size_t i = 0; i < total; ++i) {
		const std::uint32_t bits = detail::get_u32(is, "payload");
		float f;
		std::memcpy(&f, &bits, 4);
		data[i] = static_cast<double>(f);
	}
	return Tensor(std::move(shape), std::move(data));
}

inline Tensor read_nvt1(const std::string& path) {
	std::ifstream is(path, std::ios::binary);
	if (!is) throw io_error("nvt1: cannot open " + path);
	return read_nvt1(is);
}

} // namespace nlva
