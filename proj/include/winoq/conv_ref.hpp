#pragma once

#include <cstddef>
#include <vector>

#include "winoq/errors.hpp"
#include "winoq/gemm.hpp"
#include "winoq/quantize.hpp"
#include "winoq/tensor.hpp"

namespace winoq {

// Stride-1 square-kernel convolution geometry with zero padding.
struct ConvShape {
  size_t n = 1, c_in = 1, h = 1, w = 1, c_out = 1;
  size_t r = 3;
  size_t pad = 0;

  size_t out_h() const { return h + 2 * pad - r + 1; }
  size_t out_w() const { return w + 2 * pad - r + 1; }

  void validate() const {
    if (r != 3) throw InvalidShape("ConvShape: only r = 3 supported");
    if (h + 2 * pad < r || w + 2 * pad < r)
      throw InvalidShape("ConvShape: output would be empty");
  }

  void check_tensors(const Tensor& x, const Tensor& wt) const {
    validate();
    if (x.rank() != 4 || x.dim(0) != n || x.dim(1) != c_in || x.dim(2) != h ||
        x.dim(3) != w)
      throw InvalidShape("ConvShape: input tensor mismatch");
    if (wt.rank() != 4 || wt.dim(0) != c_out || wt.dim(1) != c_in ||
        wt.dim(2) != r || wt.dim(3) != r)
      throw InvalidShape("ConvShape: weight tensor mismatch");
  }
};

// Patch matrix [N*H'*W', C*r*r], zero padding materialized.
inline Tensor im2col(const Tensor& x, const ConvShape& s) {
  const size_t oh = s.out_h(), ow = s.out_w();
  const size_t kk = s.c_in * s.r * s.r;
  Tensor cols({s.n * oh * ow, kk});
  size_t row = 0;
  for (size_t b = 0; b < s.n; ++b)
    for (size_t i = 0; i < oh; ++i)
      for (size_t j = 0; j < ow; ++j, ++row) {
        float* dst = cols.data() + row * kk;
        size_t idx = 0;
        for (size_t c = 0; c < s.c_in; ++c)
          for (size_t u = 0; u < s.r; ++u)
            for (size_t v = 0; v < s.r; ++v, ++idx) {
              const long hh = static_cast<long>(i + u) - static_cast<long>(s.pad);
              const long ww = static_cast<long>(j + v) - static_cast<long>(s.pad);
              dst[idx] = (hh >= 0 && ww >= 0 && hh < static_cast<long>(s.h) &&
                          ww < static_cast<long>(s.w))
                             ? x.at4(b, c, static_cast<size_t>(hh),
                                     static_cast<size_t>(ww))
                             : 0.0f;
            }
      }
  return cols;
}

// Scatter a [N*H'*W', K] GEMM result back to NCHW.
inline Tensor cols_to_nchw(const Tensor& y, const ConvShape& s) {
  const size_t oh = s.out_h(), ow = s.out_w();
  Tensor out({s.n, s.c_out, oh, ow});
  size_t row = 0;
  for (size_t b = 0; b < s.n; ++b)
    for (size_t i = 0; i < oh; ++i)
      for (size_t j = 0; j < ow; ++j, ++row)
        for (size_t k = 0; k < s.c_out; ++k)
          out.at4(b, k, i, j) = y[row * s.c_out + k];
  return out;
}

// Direct convolution (cross-correlation), im2col + FP GEMM with FP64
// accumulation. Oracle for the Winograd engine.
inline Tensor conv_direct_fp(const Tensor& x, const Tensor& w, const ConvShape& s) {
  s.check_tensors(x, w);
  x.require_finite("conv_direct_fp x");
  w.require_finite("conv_direct_fp w");
  const Tensor cols = im2col(x, s);
  const size_t kk = s.c_in * s.r * s.r;
  Tensor y({cols.dim(0), s.c_out});
  gemm_fp(cols.data(), w.data(), cols.dim(0), s.c_out, kk, y.data());
  return cols_to_nchw(y, s);
}

// Group-quantized direct convolution over pre-quantized im2col operands:
// xq is the quantized patch matrix [N*H'*W', C*r*r], wq the quantized
// weight matrix [K, C*r*r], both grouped along the reduction axis.
inline Tensor conv_direct_q8(const GroupQuantized& xq, const GroupQuantized& wq,
                             const ConvShape& s, size_t vector_width = 8) {
  check_q2d(xq, "conv_direct_q8 x");
  check_q2d(wq, "conv_direct_q8 w");
  const size_t kk = s.c_in * s.r * s.r;
  if (xq.dims[1] != kk || wq.dims[1] != kk || wq.dims[0] != s.c_out ||
      xq.dims[0] != s.n * s.out_h() * s.out_w())
    throw InvalidSpec("conv_direct_q8: operand shapes do not match ConvShape");
  if (xq.padded_extent != wq.padded_extent || xq.group_size != wq.group_size)
    throw InvalidSpec("conv_direct_q8: group layout mismatch");
  const PackedWeights packed = pack_weights(wq, vector_width);
  const Tensor y = gemm_q8_fast(xq, packed);
  return cols_to_nchw(y, s);
}

// Convenience wrapper: quantize activations dynamically and weights once,
// then run the integer path.
inline Tensor conv_direct_q8(const Tensor& x, const Tensor& w, const ConvShape& s,
                             size_t group_size, Bits weight_bits = Bits::b8,
                             size_t vector_width = 8) {
  s.check_tensors(x, w);
  const size_t kk = s.c_in * s.r * s.r;
  GroupSpec spec{std::min(group_size, kk), 1};
  const GroupQuantized xq = quantize_tensor(im2col(x, s), spec, Bits::b8);
  Tensor wmat({s.c_out, kk});
  std::copy(w.data(), w.data() + w.size(), wmat.data());
  const GroupQuantized wq = quantize_tensor(wmat, spec, weight_bits);
  return conv_direct_q8(xq, wq, s, vector_width);
}

}  // namespace winoq
