#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace nlva {

struct error : std::runtime_error {
	using std::runtime_error::runtime_error;
};
// shape/size mismatch between operands
struct dim_error : error {
	using error::error;
};
// NaN/Inf where finite values are required
struct numeric_error : error {
	using error::error;
};
// violated call contract (labels out of range, stale cache, ...)
struct contract_error : error {
	using error::error;
};
// invalid configuration (unknown variant, bad insertion point, ...)
struct config_error : error {
	using error::error;
};
// unreadable or malformed file
struct io_error : error {
	using error::error;
};

inline std::string shape_str(std::span<const std::size_t> shape) {
	std::ostringstream os;
	os << '[';
	for (std::size_t i = 0; i < shape.size(); ++i) {
		if (i) os << ' ';
		os << shape[i];
	}
	os << ']';
	return os.str();
}

// Dense N-dimensional array of doubles, row-major, contiguous.
// The shape is fixed at construction; reshape/permute return new tensors.
class Tensor {
  public:
	Tensor() = default;

	explicit Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
		data_.assign(count(shape_), 0.0);
	}

	Tensor(std::vector<std::size_t> shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
		if (count(shape_) != data_.size())
			throw dim_error("tensor: shape " + shape_str(shape_) + " does not match data length " +
			                std::to_string(data_.size()));
	}

	static Tensor full(std::vector<std::size_t> shape, double value) {
		Tensor t(std::move(shape));
		std::fill(t.data_.begin(), t.data_.end(), value);
		return t;
	}

	const std::vector<std::size_t>& shape() const { return shape_; }
	std::size_t ndim() const { return shape_.size(); }
	std::size_t dim(std::size_t i) const { return shape_[i]; }
	std::size_t size() const { return data_.size(); }

	double* data() { return data_.data(); }
	const double* data() const { return data_.data(); }
	std::span<const double> values() const { return data_; }

	template <class... Ix>
	double& at(Ix... ix) {
		return data_[offset(ix...)];
	}
	template <class... Ix>
	double at(Ix... ix) const {
		return data_[offset(ix...)];
	}

	friend bool operator==(const Tensor& a, const Tensor& b) { return a.shape_ == b.shape_ && a.data_ == b.data_; }

  private:
	template <class... Ix>
	std::size_t offset(Ix... ix) const {
		static_assert((std::is_integral_v<Ix> && ...), "indices must be integral");
		assert(sizeof...(ix) == shape_.size());
		const std::size_t idx[] = {static_cast<std::size_t>(ix)...};
		std::size_t off = 0;
		for (std::size_t d = 0; d < sizeof...(ix); ++d) {
			assert(idx[d] < shape_[d]);
			off = off * shape_[d] + idx[d];
		}
		return off;
	}

	static std::size_t count(const std::vector<std::size_t>& shape) {
		std::size_t n = 1;
		for (std::size_t d : shape) n *= d;
		return n;
	}

	std::vector<std::size_t> shape_;
	std::vector<double> data_;
};

inline bool all_finite(const Tensor& t) {
	for (double v : t.values())
		if (!std::isfinite(v)) return false;
	return true;
}

// c[i][j] = sum_k a[i][k] * b[k][j]
inline Tensor matmul(const Tensor& a, const Tensor& b) {
	if (a.ndim() != 2 || b.ndim() != 2)
		throw dim_error("matmul: expected 2-D operands, got " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
	if (a.dim(1) != b.dim(0))
		throw dim_error("matmul: inner dimensions disagree for " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
	const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
	Tensor c({m, n});
	const double* pa = a.data();
	const double* pb = b.data();
	double* pc = c.data();
	for (std::size_t i = 0; i < m; ++i) {
		const double* ai = pa + i * k;
		double* ci = pc + i * n;
		for (std::size_t kk = 0; kk < k; ++kk) {
			const double av = ai[kk];
			const double* bk = pb + kk * n;
			for (std::size_t j = 0; j < n; ++j) ci[j] += av * bk[j];
		}
	}
	return c;
}

inline Tensor transpose(const Tensor& a) {
	if (a.ndim() != 2) throw dim_error("transpose: expected 2-D, got " + shape_str(a.shape()));
	const std::size_t m = a.dim(0), n = a.dim(1);
	Tensor t({n, m});
	for (std::size_t i = 0; i < m; ++i)
		for (std::size_t j = 0; j < n; ++j) t.at(j, i) = a.at(i, j);
	return t;
}

// Row-wise softmax with max subtraction.
inline Tensor softmax_rows(const Tensor& x) {
	if (x.ndim() != 2) throw dim_error("softmax_rows: expected 2-D, got " + shape_str(x.shape()));
	if (!all_finite(x)) throw numeric_error("softmax_rows: non-finite input");
	const std::size_t m = x.dim(0), n = x.dim(1);
	Tensor out({m, n});
	const double* px = x.data();
	double* po = out.data();
	for (std::size_t i = 0; i < m; ++i) {
		const double* row = px + i * n;
		double* orow = po + i * n;
		double mx = row[0];
		for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
		double sum = 0.0;
		for (std::size_t j = 0; j < n; ++j) {
			orow[j] = std::exp(row[j] - mx);
			sum += orow[j];
		}
		for (std::size_t j = 0; j < n; ++j) orow[j] /= sum;
	}
	return out;
}

inline std::size_t conv_out_extent(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad) {
	return (in + 2 * pad - k) / stride + 1;
}

// Lowers x (C_in x H x W) into a (C_in*k*k) x (H_out*W_out) matrix; zero padding.
inline Tensor im2col(const Tensor& x, std::size_t k, std::size_t stride, std::size_t pad) {
	const std::size_t c_in = x.dim(0), h = x.dim(1), w = x.dim(2);
	const std::size_t h_out = conv_out_extent(h, k, stride, pad);
	const std::size_t w_out = conv_out_extent(w, k, stride, pad);
	Tensor col({c_in * k * k, h_out * w_out});
	double* pc = col.data();
	const double* px = x.data();
	for (std::size_t c = 0; c < c_in; ++c) {
		for (std::size_t kh = 0; kh < k; ++kh) {
			for (std::size_t kw = 0; kw < k; ++kw) {
				double* crow = pc + ((c * k + kh) * k + kw) * (h_out * w_out);
				for (std::size_t oh = 0; oh < h_out; ++oh) {
					const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * stride + kh) - static_cast<std::ptrdiff_t>(pad);
					for (std::size_t ow = 0; ow < w_out; ++ow) {
						const std::ptrdiff_t iw =
						    static_cast<std::ptrdiff_t>(ow * stride + kw) - static_cast<std::ptrdiff_t>(pad);
						double v = 0.0;
						if (ih >= 0 && ih < static_cast<std::ptrdiff_t>(h) && iw >= 0 && iw < static_cast<std::ptrdiff_t>(w))
							v = px[(c * h + ih) * w + iw];
						crow[oh * w_out + ow] = v;
					}
				}
			}
		}
	}
	return col;
}

// 2-D convolution, square kernel, zero padding. im2col + matmul path.
inline Tensor conv2d(const Tensor& x, const Tensor& w, std::size_t stride, std::size_t pad) {
	if (x.ndim() != 3 || w.ndim() != 4)
		throw dim_error("conv2d: expected C_in x H x W input and C_out x C_in x k x k weights, got " +
		                shape_str(x.shape()) + " and " + shape_str(w.shape()));
	if (w.dim(2) != w.dim(3))
		throw dim_error("conv2d: kernel must be square, got " + shape_str(w.shape()));
	if (x.dim(0) != w.dim(1))
		throw dim_error("conv2d: channel mismatch between input " + shape_str(x.shape()) + " and weights " +
		                shape_str(w.shape()));
	if (stride < 1) throw contract_error("conv2d: stride must be >= 1");
	const std::size_t k = w.dim(2);
	if (x.dim(1) + 2 * pad < k || x.dim(2) + 2 * pad < k)
		throw dim_error("conv2d: kernel " + std::to_string(k) + "x" + std::to_string(k) +
		                " larger than padded input " + shape_str(x.shape()));
	const std::size_t c_out = w.dim(0);
	const std::size_t h_out = conv_out_extent(x.dim(1), k, stride, pad);
	const std::size_t w_out = conv_out_extent(x.dim(2), k, stride, pad);
	Tensor col = im2col(x, k, stride, pad);
	Tensor wmat({c_out, w.dim(1) * k * k}, std::vector<double>(w.data(), w.data() + w.size()));
	Tensor prod = matmul(wmat, col);
	return Tensor({c_out, h_out, w_out}, std::vector<double>(prod.data(), prod.data() + prod.size()));
}

// Inference-mode batch normalization over axis 0 (channels).
inline Tensor batchnorm_infer(const Tensor& x, std::span<const double> gamma, std::span<const double> beta,
                              std::span<const double> mean, std::span<const double> var, double eps) {
	if (x.ndim() < 1) throw dim_error("batchnorm_infer: empty tensor");
	const std::size_t c = x.dim(0);
	if (gamma.size() != c || beta.size() != c || mean.size() != c || var.size() != c)
		throw dim_error("batchnorm_infer: parameter length (" + std::to_string(gamma.size()) + "," +
		                std::to_string(beta.size()) + "," + std::to_string(mean.size()) + "," +
		                std::to_string(var.size()) + ") does not match channel count " + std::to_string(c));
	for (double v : var)
		if (v < 0.0) throw contract_error("batchnorm_infer: negative variance");
	const std::size_t inner = x.size() / c;
	Tensor out(x.shape());
	const double* px = x.data();
	double* po = out.data();
	for (std::size_t ch = 0; ch < c; ++ch) {
		const double scale = gamma[ch] / std::sqrt(var[ch] + eps);
		const double shift = beta[ch] - mean[ch] * scale;
		const double* xi = px + ch * inner;
		double* oi = po + ch * inner;
		for (std::size_t i = 0; i < inner; ++i) oi[i] = xi[i] * scale + shift;
	}
	return out;
}

enum class PoolKind { avg, max };

// Sliding-window reduction with per-axis window and stride, no padding.
inline Tensor pool(const Tensor& x, PoolKind kind, std::span<const std::size_t> window,
                   std::span<const std::size_t> stride) {
	const std::size_t nd = x.ndim();
	if (window.size() != nd || stride.size() != nd)
		throw dim_error("pool: window/stride rank does not match tensor rank " + std::to_string(nd));
	std::vector<std::size_t> out_shape(nd);
	for (std::size_t d = 0; d < nd; ++d) {
		if (window[d] < 1 || window[d] > x.dim(d))
			throw dim_error("pool: window " + std::to_string(window[d]) + " exceeds axis " + std::to_string(d) +
			                " of " + shape_str(x.shape()));
		if (stride[d] < 1) throw contract_error("pool: stride must be >= 1");
		out_shape[d] = (x.dim(d) - window[d]) / stride[d] + 1;
	}
	Tensor out(out_shape);
	std::size_t volume = 1;
	for (std::size_t d = 0; d < nd; ++d) volume *= window[d];

	std::vector<std::size_t> oi(nd, 0), wi(nd, 0);
	const std::size_t total = out.size();
	double* po = out.data();
	const double* px = x.data();
	for (std::size_t flat = 0; flat < total; ++flat) {
		std::size_t rem = flat;
		for (std::size_t d = nd; d-- > 0;) {
			oi[d] = rem % out_shape[d];
			rem /= out_shape[d];
		}
		double acc = (kind == PoolKind::max) ? -std::numeric_limits<double>::infinity() : 0.0;
		for (std::size_t wflat = 0; wflat < volume; ++wflat) {
			std::size_t wrem = wflat;
			for (std::size_t d = nd; d-- > 0;) {
				wi[d] = wrem % window[d];
				wrem /= window[d];
			}
			std::size_t off = 0;
			for (std::size_t d = 0; d < nd; ++d) off = off * x.dim(d) + oi[d] * stride[d] + wi[d];
			const double v = px[off];
			if (kind == PoolKind::max)
				acc = std::max(acc, v);
			else
				acc += v;
		}
		po[flat] = (kind == PoolKind::max) ? acc : acc / static_cast<double>(volume);
	}
	return out;
}

// Row-major reinterpretation; element count must be preserved.
inline Tensor reshape(const Tensor& x, std::vector<std::size_t> new_shape) {
	std::size_t n = 1;
	for (std::size_t d : new_shape) n *= d;
	if (n != x.size())
		throw dim_error("reshape: cannot reshape " + shape_str(x.shape()) + " to " + shape_str(new_shape));
	return Tensor(std::move(new_shape), std::vector<double>(x.data(), x.data() + x.size()));
}

// Axis reordering; materializes the result. order[d] names the source axis
// that becomes output axis d.
inline Tensor permute(const Tensor& x, std::span<const std::size_t> order) {
	const std::size_t nd = x.ndim();
	if (order.size() != nd) throw dim_error("permute: order rank does not match tensor rank " + std::to_string(nd));
	std::vector<bool> seen(nd, false);
	for (std::size_t a : order) {
		if (a >= nd || seen[a]) throw contract_error("permute: order is not a permutation of axes");
		seen[a] = true;
	}
	std::vector<std::size_t> out_shape(nd);
	for (std::size_t d = 0; d < nd; ++d) out_shape[d] = x.dim(order[d]);

	// source strides, then gather
	std::vector<std::size_t> src_stride(nd, 1);
	for (std::size_t d = nd - 1; d-- > 0;) src_stride[d] = src_stride[d + 1] * x.dim(d + 1);
	Tensor out(out_shape);
	double* po = out.data();
	const double* px = x.data();
	std::vector<std::size_t> oi(nd, 0);
	const std::size_t total = x.size();
	for (std::size_t flat = 0; flat < total; ++flat) {
		std::size_t src = 0;
		for (std::size_t d = 0; d < nd; ++d) src += oi[d] * src_stride[order[d]];
		po[flat] = px[src];
		for (std::size_t d = nd; d-- > 0;) {
			if (++oi[d] < out_shape[d]) break;
			oi[d] = 0;
		}
	}
	return out;
}

inline Tensor permute(const Tensor& x, std::initializer_list<std::size_t> order) {
	return permute(x, std::span<const std::size_t>(order.begin(), order.size()));
}

inline Tensor pool(const Tensor& x, PoolKind kind, std::initializer_list<std::size_t> window,
                   std::initializer_list<std::size_t> stride) {
	return pool(x, kind, std::span<const std::size_t>(window.begin(), window.size()),
	            std::span<const std::size_t>(stride.begin(), stride.size()));
}

inline Tensor add(const Tensor& a, const Tensor& b) {
	if (a.shape() != b.shape())
		throw dim_error("add: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
	Tensor out(a.shape());
	const double* pa = a.data();
	const double* pb = b.data();
	double* po = out.data();
	for (std::size_t i = 0; i < out.size(); ++i) po[i] = pa[i] + pb[i];
	return out;
}

inline Tensor relu(const Tensor& x) {
	Tensor out(x.shape());
	const double* px = x.data();
	double* po = out.data();
	for (std::size_t i = 0; i < out.size(); ++i) po[i] = px[i] > 0.0 ? px[i] : 0.0;
	return out;
}

} // namespace nlva
