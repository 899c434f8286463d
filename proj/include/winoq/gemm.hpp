#pragma once

#include <cstdint>
#include <cstring>
#include <vector>

#include "winoq/errors.hpp"
#include "winoq/quantize.hpp"
#include "winoq/tensor.hpp"

namespace winoq {

// Group-quantized GEMM, C = A * B^T:
//   A: M x K int8, per-(row, group) scales sa[m * G + g]
//   B: N x K int8, per-(row, group) scales sb[n * G + g]
//   out[m][n] = sum_g float(sa * sb) * int32( sum_{k in g} a[m,k] * b[n,k] )
// K must be a multiple of gs. The f32 epilogue order (ascending g) is part of
// the contract: every kernel must produce bit-identical output.
inline void gemm_q8_scalar(const int8_t* a, const float* sa, const int8_t* b,
                           const float* sb, size_t M, size_t N, size_t K,
                           size_t gs, float* out) {
  if (K % gs != 0) throw InvalidSpec("gemm_q8: K not a multiple of group size");
  const size_t groups = K / gs;
  for (size_t m = 0; m < M; ++m) {
    const int8_t* arow = a + m * K;
    for (size_t n = 0; n < N; ++n) {
      const int8_t* brow = b + n * K;
      float acc = 0.0f;
      for (size_t g = 0; g < groups; ++g) {
        int32_t dot = 0;
        const size_t base = g * gs;
        for (size_t k = 0; k < gs; ++k)
          dot += static_cast<int32_t>(arow[base + k]) *
                 static_cast<int32_t>(brow[base + k]);
        acc += sa[m * groups + g] * sb[n * groups + g] * static_cast<float>(dot);
      }
      out[m * N + n] = acc;
    }
  }
}

// Weights reordered offline for the fast kernel: channels are blocked in
// groups of `vector_width`, and within a block the payload is interleaved as
// [block][k][lane] so that each k step feeds all lanes from consecutive
// bytes. Element (n, k) lives at offset ((n / V) * K + k) * V + (n % V).
struct PackedWeights {
  size_t n = 0, k = 0;       // logical dims (N output channels, K reduction)
  size_t group_size = 0;
  size_t vector_width = 0;
  size_t n_padded = 0;       // N rounded up to a multiple of vector_width
  std::vector<int8_t> ints;     // [n_padded / V][K][V]
  std::vector<float> scales;    // [n_padded][K / gs], pad rows scale 1
};

inline PackedWeights pack_weights_raw(const int8_t* b, const float* sb,
                                      size_t N, size_t K, size_t gs,
                                      size_t vector_width) {
  if (vector_width == 0) throw InvalidSpec("pack_weights: zero vector width");
  if (K % gs != 0) throw InvalidSpec("pack_weights: K not a multiple of gs");
  PackedWeights p;
  p.n = N;
  p.k = K;
  p.group_size = gs;
  p.vector_width = vector_width;
  p.n_padded = (N + vector_width - 1) / vector_width * vector_width;
  const size_t groups = K / gs;
  p.ints.assign(p.n_padded * K, 0);
  p.scales.assign(p.n_padded * groups, 1.0f);
  for (size_t n = 0; n < N; ++n) {
    const size_t blk = n / vector_width, lane = n % vector_width;
    for (size_t kk = 0; kk < K; ++kk)
      p.ints[(blk * K + kk) * vector_width + lane] = b[n * K + kk];
    for (size_t g = 0; g < groups; ++g)
      p.scales[n * groups + g] = sb[n * groups + g];
  }
  return p;
}

inline void unpack_weights_raw(const PackedWeights& p, int8_t* b, float* sb) {
  const size_t groups = p.k / p.group_size;
  for (size_t n = 0; n < p.n; ++n) {
    const size_t blk = n / p.vector_width, lane = n % p.vector_width;
    for (size_t kk = 0; kk < p.k; ++kk)
      b[n * p.k + kk] = p.ints[(blk * p.k + kk) * p.vector_width + lane];
    for (size_t g = 0; g < groups; ++g)
      sb[n * groups + g] = p.scales[n * groups + g];
  }
}

namespace detail {

// Fast-kernel body. The lane count is a template parameter so the per-lane
// loops have a compile-time trip count and vectorize; LanesRT covers odd
// widths at runtime cost. Bit-identical to gemm_q8_scalar by construction
// (same int32 dots, same f32 epilogue order).
template <size_t LanesCT, size_t RowsCT>
void gemm_q8_fast_rows(const int8_t* a, const float* sa,
                       const PackedWeights& w, size_t m0, size_t rows,
                       float* out, size_t lanes_rt) {
  const size_t K = w.k, gs = w.group_size;
  const size_t V = LanesCT ? LanesCT : lanes_rt;
  const size_t groups = K / gs;
  const size_t nblocks = w.n_padded / V;
  constexpr size_t kMaxLanes = 32;
  int32_t acc[RowsCT][LanesCT ? LanesCT : kMaxLanes];
  float accf[RowsCT][LanesCT ? LanesCT : kMaxLanes];
  for (size_t m = m0; m + RowsCT <= m0 + rows; m += RowsCT) {
    for (size_t blk = 0; blk < nblocks; ++blk) {
      const int8_t* wblk = w.ints.data() + blk * K * V;
      for (size_t r = 0; r < RowsCT; ++r)
        for (size_t v = 0; v < V; ++v) accf[r][v] = 0.0f;
      for (size_t g = 0; g < groups; ++g) {
        for (size_t r = 0; r < RowsCT; ++r)
          for (size_t v = 0; v < V; ++v) acc[r][v] = 0;
        const size_t base = g * gs;
        for (size_t kk = 0; kk < gs; ++kk) {
          const int8_t* wrow = wblk + (base + kk) * V;
          for (size_t r = 0; r < RowsCT; ++r) {
            const int32_t av = a[(m + r) * K + base + kk];
            for (size_t v = 0; v < V; ++v)
              acc[r][v] += av * static_cast<int32_t>(wrow[v]);
          }
        }
        for (size_t r = 0; r < RowsCT; ++r) {
          const float sag = sa[(m + r) * groups + g];
          for (size_t v = 0; v < V; ++v) {
            const size_t n = blk * V + v;
            accf[r][v] +=
                sag * w.scales[n * groups + g] * static_cast<float>(acc[r][v]);
          }
        }
      }
      const size_t nlim = std::min(V, w.n - blk * V);
      for (size_t r = 0; r < RowsCT; ++r)
        for (size_t v = 0; v < nlim; ++v)
          out[(m + r) * w.n + blk * V + v] = accf[r][v];
      if (w.n <= blk * V) break;
    }
  }
}

// Register-block 4 A rows per pass (amortizes the streamed weight loads),
// then finish the remainder row by row; each row's dots and epilogue are
// untouched, so output stays bit-identical to the scalar kernel.
template <size_t LanesCT>
void gemm_q8_fast_body(const int8_t* a, const float* sa,
                       const PackedWeights& w, size_t M, float* out,
                       size_t lanes_rt = 0) {
  // Wider lane counts need fewer blocked rows to stay within registers.
  constexpr size_t kRows = LanesCT == 0 ? 1 : (LanesCT == 16 ? 2 : 4);
  const size_t blocked = (M / kRows) * kRows;
  gemm_q8_fast_rows<LanesCT, kRows>(a, sa, w, 0, blocked, out, lanes_rt);
  gemm_q8_fast_rows<LanesCT, 1>(a, sa, w, blocked, M - blocked, out, lanes_rt);
}

}  // namespace detail

// One pass over each A row feeds `vector_width` output channels; the
// per-lane int32 accumulators absorb the dot-product reduction implicitly.
inline void gemm_q8_fast(const int8_t* a, const float* sa,
                         const PackedWeights& w, size_t M, float* out) {
  if (w.vector_width > 32)
    throw InvalidSpec("gemm_q8_fast: vector width too large");
  switch (w.vector_width) {
    case 4:
      return detail::gemm_q8_fast_body<4>(a, sa, w, M, out);
    case 8:
      return detail::gemm_q8_fast_body<8>(a, sa, w, M, out);
    case 16:
      return detail::gemm_q8_fast_body<16>(a, sa, w, M, out);
    case 32:
      return detail::gemm_q8_fast_body<32>(a, sa, w, M, out);
    default:
      return detail::gemm_q8_fast_body<0>(a, sa, w, M, out, w.vector_width);
  }
}

// ---- GroupQuantized wrappers (rank-2, reduction along axis 1) ----

inline void check_q2d(const GroupQuantized& q, const char* what) {
  if (q.dims.size() != 2 || q.axis != 1)
    throw InvalidSpec(std::string(what) + ": expected rank-2, axis-1 operand");
}

inline Tensor gemm_q8_scalar(const GroupQuantized& a, const GroupQuantized& b) {
  check_q2d(a, "gemm_q8_scalar A");
  check_q2d(b, "gemm_q8_scalar B");
  if (a.padded_extent != b.padded_extent || a.group_size != b.group_size)
    throw InvalidSpec("gemm_q8_scalar: reduction/group mismatch");
  Tensor out({a.dims[0], b.dims[0]});
  gemm_q8_scalar(a.ints.data(), a.scales.data(), b.ints.data(), b.scales.data(),
                 a.dims[0], b.dims[0], a.padded_extent, a.group_size, out.data());
  return out;
}

inline PackedWeights pack_weights(const GroupQuantized& wq, size_t vector_width) {
  check_q2d(wq, "pack_weights");
  return pack_weights_raw(wq.ints.data(), wq.scales.data(), wq.dims[0],
                          wq.padded_extent, wq.group_size, vector_width);
}

inline GroupQuantized unpack_weights(const PackedWeights& p, size_t logical_k,
                                     Bits bits = Bits::b8) {
  GroupQuantized q;
  q.dims = {p.n, logical_k};
  q.axis = 1;
  q.padded_extent = p.k;
  q.group_size = p.group_size;
  q.bits = bits;
  q.ints.resize(p.n * p.k);
  q.scales.resize(p.n * (p.k / p.group_size));
  unpack_weights_raw(p, q.ints.data(), q.scales.data());
  return q;
}

inline Tensor gemm_q8_fast(const GroupQuantized& a, const PackedWeights& w) {
  check_q2d(a, "gemm_q8_fast A");
  if (a.padded_extent != w.k || a.group_size != w.group_size)
    throw InvalidSpec("gemm_q8_fast: reduction/group mismatch");
  Tensor out({a.dims[0], w.n});
  gemm_q8_fast(a.ints.data(), a.scales.data(), w, a.dims[0], out.data());
  return out;
}

// Plain float GEMM with FP64 accumulation, C = A * B^T.
inline void gemm_fp(const float* a, const float* b, size_t M, size_t N,
                    size_t K, float* out) {
  for (size_t m = 0; m < M; ++m)
    for (size_t n = 0; n < N; ++n) {
      double acc = 0.0;
      const float* arow = a + m * K;
      const float* brow = b + n * K;
      for (size_t k = 0; k < K; ++k)
        acc += static_cast<double>(arow[k]) * static_cast<double>(brow[k]);
      out[m * N + n] = static_cast<float>(acc);
    }
}

}  // namespace winoq
