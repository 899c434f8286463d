#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <vector>

#include "winoq/conv_ref.hpp"
#include "winoq/errors.hpp"
#include "winoq/gemm.hpp"
#include "winoq/mat.hpp"
#include "winoq/parallel.hpp"
#include "winoq/quantize.hpp"
#include "winoq/tensor.hpp"
#include "winoq/transforms.hpp"

namespace winoq {

enum class WinoMode { fp, fake_quant, int8 };

inline const char* wino_mode_name(WinoMode m) {
  switch (m) {
    case WinoMode::fp: return "fp";
    case WinoMode::fake_quant: return "fake_quant";
    default: return "int8";
  }
}

// The (A^T, B^T, G) triple the engine actually computes with. Decoupled from
// WinogradTransform so that learned free-form matrices can be run through the
// same pipeline.
struct TransformMatrices {
  size_t m = 0, r = 0, n = 0;
  Mat a_t;  // m x n
  Mat b_t;  // n x n
  Mat g;    // n x r

  static TransformMatrices from(const WinogradTransform& t) {
    return {t.m, t.r, t.n, t.a_t, t.b_t, t.g};
  }
};

// Tile grid bookkeeping: input tiles are n x n with stride m, outputs m x m,
// partial edge tiles zero-padded.
struct WinoPlan {
  size_t m = 0, r = 0, n = 0;
  ConvShape shape;
  size_t tiles_h = 0, tiles_w = 0;
  size_t tile_count = 0;  // N * tiles_h * tiles_w

  WinoPlan() = default;
  WinoPlan(const TransformMatrices& t, const ConvShape& s) {
    s.validate();
    if (s.r != t.r) throw InvalidShape("WinoPlan: filter size mismatch");
    m = t.m;
    r = t.r;
    n = t.n;
    shape = s;
    tiles_h = (s.out_h() + m - 1) / m;
    tiles_w = (s.out_w() + m - 1) / m;
    tile_count = s.n * tiles_h * tiles_w;
  }
};

struct WinoOptions {
  WinoMode mode = WinoMode::fp;
  size_t group_size = 64;
  Bits weight_bits = Bits::b8;
  size_t vector_width = 8;
  size_t threads = 1;
};

// Forward intermediates kept for the scale tuner's backward pass and for the
// tap-range diagnostic. Values are the fake-quant (or fp) stage outputs.
struct WinoTape {
  size_t m = 0, r = 0, n = 0;
  size_t tiles = 0, c_in = 0, c_out = 0;
  std::vector<float> x_tiles;  // [tile][c][n*n] spatial input tiles
  std::vector<float> x_dom;    // [tap][tile][c]  X after input transform
  std::vector<float> w_dom;    // [tap][k][c]     W = GwG^T
  std::vector<float> y_dom;    // [tap][tile][k]  Y after Hadamard
  Mat a_t_used;                // quantized (or fp) A^T actually multiplied
  Mat b_t_used;                // quantized (or fp) B^T actually multiplied
};

namespace detail {

constexpr size_t kMaxN = 8;

// Per-row symmetric 8-bit quantization of a small row-major matrix.
struct QSmall {
  int8_t q[kMaxN * kMaxN];
  float s[kMaxN];
  size_t rows = 0, cols = 0;
};

inline QSmall qsmall_rows(const float* a, size_t rows, size_t cols) {
  QSmall out;
  out.rows = rows;
  out.cols = cols;
  for (size_t i = 0; i < rows; ++i)
    out.s[i] = quantize_group(a + i * cols, cols, Bits::b8, out.q + i * cols);
  return out;
}

inline QSmall qsmall_cols(const float* a, size_t rows, size_t cols) {
  float t[kMaxN * kMaxN];
  for (size_t i = 0; i < rows; ++i)
    for (size_t j = 0; j < cols; ++j) t[j * rows + i] = a[i * cols + j];
  return qsmall_rows(t, cols, rows);  // row i of result = column i of a
}

// C[i][j] = A.s[i] * B.s[j] * sum_k A.q[i][k] * B.q[j][k].
// int8 route: exact int32 dot, scale applied in f32.
// fake route: f64 accumulation over dequantized operands.
inline void qsmall_mm(const QSmall& a, const QSmall& b, bool integer, float* out) {
  for (size_t i = 0; i < a.rows; ++i)
    for (size_t j = 0; j < b.rows; ++j) {
      if (integer) {
        int32_t dot = 0;
        for (size_t k = 0; k < a.cols; ++k)
          dot += static_cast<int32_t>(a.q[i * a.cols + k]) *
                 static_cast<int32_t>(b.q[j * b.cols + k]);
        out[i * b.rows + j] = a.s[i] * b.s[j] * static_cast<float>(dot);
      } else {
        double acc = 0.0;
        for (size_t k = 0; k < a.cols; ++k)
          acc += static_cast<double>(a.q[i * a.cols + k]) * a.s[i] *
                 static_cast<double>(b.q[j * b.cols + k]) * b.s[j];
        out[i * b.rows + j] = static_cast<float>(acc);
      }
    }
}

// Plain small product C = A * B^T in f64, f32 out.
inline void fsmall_mm(const float* a, size_t ar, size_t ac, const float* bt,
                      size_t br, float* out) {
  for (size_t i = 0; i < ar; ++i)
    for (size_t j = 0; j < br; ++j) {
      double acc = 0.0;
      for (size_t k = 0; k < ac; ++k)
        acc += static_cast<double>(a[i * ac + k]) *
               static_cast<double>(bt[j * ac + k]);
      out[i * br + j] = static_cast<float>(acc);
    }
}

inline void mat_to_f32(const Mat& m, float* out) {
  for (size_t i = 0; i < m.rows(); ++i)
    for (size_t j = 0; j < m.cols(); ++j)
      out[i * m.cols() + j] = static_cast<float>(m(i, j));
}

inline Mat qsmall_to_mat(const QSmall& q) {
  Mat m(q.rows, q.cols);
  for (size_t i = 0; i < q.rows; ++i)
    for (size_t j = 0; j < q.cols; ++j)
      m(i, j) = static_cast<double>(q.q[i * q.cols + j]) * q.s[i];
  return m;
}

}  // namespace detail

// Offline weight transform: W[k][c] = G w G^T per (output, input) channel
// pair, FP64 throughout, stored per tap as [tap][k][c].
inline std::vector<float> weight_transform(const Tensor& w,
                                           const TransformMatrices& t) {
  if (w.rank() != 4 || w.dim(2) != t.r || w.dim(3) != t.r)
    throw InvalidShape("weight_transform: expected [K,C,r,r] weights");
  w.require_finite("weight_transform");
  const size_t K = w.dim(0), C = w.dim(1), n = t.n, r = t.r;
  std::vector<float> out(n * n * K * C);
  for (size_t k = 0; k < K; ++k)
    for (size_t c = 0; c < C; ++c) {
      double gw[detail::kMaxN * 3];
      for (size_t i = 0; i < n; ++i)
        for (size_t v = 0; v < r; ++v) {
          double acc = 0.0;
          for (size_t u = 0; u < r; ++u)
            acc += t.g(i, u) * static_cast<double>(w.at4(k, c, u, v));
          gw[i * r + v] = acc;
        }
      for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j) {
          double acc = 0.0;
          for (size_t v = 0; v < r; ++v) acc += gw[i * r + v] * t.g(j, v);
          out[(i * n + j) * K * C + k * C + c] = static_cast<float>(acc);
        }
    }
  return out;
}

namespace detail {

inline void extract_tile(const Tensor& x, const WinoPlan& p, size_t tile,
                         size_t c, float* out) {
  const size_t n = p.n, m = p.m;
  const size_t per_img = p.tiles_h * p.tiles_w;
  const size_t b = tile / per_img;
  const size_t th = (tile % per_img) / p.tiles_w;
  const size_t tw = tile % p.tiles_w;
  const long h0 = static_cast<long>(th * m) - static_cast<long>(p.shape.pad);
  const long w0 = static_cast<long>(tw * m) - static_cast<long>(p.shape.pad);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j) {
      const long hh = h0 + static_cast<long>(i);
      const long ww = w0 + static_cast<long>(j);
      out[i * n + j] =
          (hh >= 0 && ww >= 0 && hh < static_cast<long>(p.shape.h) &&
           ww < static_cast<long>(p.shape.w))
              ? x.at4(b, c, static_cast<size_t>(hh), static_cast<size_t>(ww))
              : 0.0f;
    }
}

inline size_t hadamard_group(size_t group_size, size_t c_in) {
  return group_size >= c_in ? c_in : group_size;
}

}  // namespace detail

// Full Winograd convolution. mode=fp is the float reference; fake_quant and
// int8 are the two routes through the quantized pipeline and must agree to
// roughly f32 rounding.
inline Tensor wino_conv(const Tensor& x, const Tensor& w,
                        const TransformMatrices& t, const ConvShape& shape,
                        const WinoOptions& opt = {}, WinoTape* tape = nullptr) {
  shape.check_tensors(x, w);
  x.require_finite("wino_conv x");
  const WinoPlan plan(t, shape);
  const size_t n = plan.n, m = plan.m;
  const size_t P = plan.tile_count, C = shape.c_in, K = shape.c_out;
  const size_t taps = n * n;
  const bool quant = opt.mode != WinoMode::fp;
  const bool integer = opt.mode == WinoMode::int8;

  // Transform matrices as f32 (fp route) and per-row quantized (quant routes).
  float a_t_f[detail::kMaxN * detail::kMaxN];
  float b_t_f[detail::kMaxN * detail::kMaxN];
  detail::mat_to_f32(t.a_t, a_t_f);
  detail::mat_to_f32(t.b_t, b_t_f);
  const detail::QSmall qa = detail::qsmall_rows(a_t_f, m, n);
  const detail::QSmall qb = detail::qsmall_rows(b_t_f, n, n);

  if (tape) {
    tape->m = m;
    tape->r = plan.r;
    tape->n = n;
    tape->tiles = P;
    tape->c_in = C;
    tape->c_out = K;
    tape->x_tiles.resize(P * C * taps);
    tape->a_t_used = quant ? detail::qsmall_to_mat(qa) : t.a_t;
    tape->b_t_used = quant ? detail::qsmall_to_mat(qb) : t.b_t;
  }

  // Stage 1: weight transform (offline, fp64).
  std::vector<float> w_dom = weight_transform(w, t);

  // Stage 2: input transform, per (tile, channel): X = B^T x B.
  std::vector<float> x_dom(taps * P * C);
  parallel_for(P, opt.threads, [&](size_t p) {
    float tile[detail::kMaxN * detail::kMaxN];
    float t1[detail::kMaxN * detail::kMaxN];
    float xt[detail::kMaxN * detail::kMaxN];
    for (size_t c = 0; c < C; ++c) {
      detail::extract_tile(x, plan, p, c, tile);
      if (tape)
        std::memcpy(tape->x_tiles.data() + (p * C + c) * taps, tile,
                    taps * sizeof(float));
      if (!quant) {
        // X = (B^T x) B: second factor rows = rows of B^T.
        float bt_x[detail::kMaxN * detail::kMaxN];
        float tile_t[detail::kMaxN * detail::kMaxN];
        for (size_t i = 0; i < n; ++i)
          for (size_t j = 0; j < n; ++j) tile_t[j * n + i] = tile[i * n + j];
        detail::fsmall_mm(b_t_f, n, n, tile_t, n, bt_x);
        detail::fsmall_mm(bt_x, n, n, b_t_f, n, xt);
      } else {
        const detail::QSmall qx = detail::qsmall_cols(tile, n, n);
        detail::qsmall_mm(qb, qx, integer, t1);
        const detail::QSmall qt1 = detail::qsmall_rows(t1, n, n);
        detail::qsmall_mm(qt1, qb, integer, xt);
      }
      for (size_t tap = 0; tap < taps; ++tap)
        x_dom[tap * P * C + p * C + c] = xt[tap];
    }
  });

  // Stage 3: Hadamard as one [P,C]x[C,K] GEMM per tap.
  const size_t gs = detail::hadamard_group(opt.group_size, C);
  std::vector<float> y_dom(taps * P * K);
  std::vector<GroupQuantized> wq_taps;
  std::vector<PackedWeights> packed_taps;
  if (quant) {
    wq_taps.resize(taps);
    if (integer) packed_taps.resize(taps);
    parallel_for(taps, opt.threads, [&](size_t tap) {
      Tensor wmat({K, C});
      std::memcpy(wmat.data(), w_dom.data() + tap * K * C, K * C * sizeof(float));
      wq_taps[tap] = quantize_tensor(wmat, GroupSpec{gs, 1}, opt.weight_bits);
      if (integer)
        packed_taps[tap] = pack_weights(wq_taps[tap], opt.vector_width);
    });
  }
  parallel_for(taps, opt.threads, [&](size_t tap) {
    const float* xs = x_dom.data() + tap * P * C;
    float* ys = y_dom.data() + tap * P * K;
    if (!quant) {
      gemm_fp(xs, w_dom.data() + tap * K * C, P, K, C, ys);
      return;
    }
    Tensor xmat({P, C});
    std::memcpy(xmat.data(), xs, P * C * sizeof(float));
    const GroupQuantized xq = quantize_tensor(xmat, GroupSpec{gs, 1}, Bits::b8);
    if (integer) {
      const Tensor y = gemm_q8_fast(xq, packed_taps[tap]);
      std::memcpy(ys, y.data(), P * K * sizeof(float));
    } else {
      const Tensor xd = dequantize(xq);
      const Tensor wd = dequantize(wq_taps[tap]);
      gemm_fp(xd.data(), wd.data(), P, K, C, ys);
    }
  });

  if (tape) {
    tape->x_dom = x_dom;
    tape->w_dom = w_dom;
    tape->y_dom = y_dom;
  }

  // Stage 4: output transform y = A^T Y A per (tile, channel), then untile.
  const size_t oh = shape.out_h(), ow = shape.out_w();
  Tensor out({shape.n, K, oh, ow});
  const size_t per_img = plan.tiles_h * plan.tiles_w;
  parallel_for(P, opt.threads, [&](size_t p) {
    const size_t b = p / per_img;
    const size_t th = (p % per_img) / plan.tiles_w;
    const size_t tw = p % plan.tiles_w;
    float ytile[detail::kMaxN * detail::kMaxN];
    float t2[detail::kMaxN * detail::kMaxN];
    float yout[detail::kMaxN * detail::kMaxN];
    for (size_t k = 0; k < K; ++k) {
      for (size_t tap = 0; tap < taps; ++tap)
        ytile[tap] = y_dom[tap * P * K + p * K + k];
      if (!quant) {
        float yt_t[detail::kMaxN * detail::kMaxN];
        float at_y[detail::kMaxN * detail::kMaxN];
        for (size_t i = 0; i < n; ++i)
          for (size_t j = 0; j < n; ++j) yt_t[j * n + i] = ytile[i * n + j];
        detail::fsmall_mm(a_t_f, m, n, yt_t, n, at_y);
        detail::fsmall_mm(at_y, m, n, a_t_f, m, yout);
      } else {
        const detail::QSmall qy = detail::qsmall_cols(ytile, n, n);
        detail::qsmall_mm(qa, qy, integer, t2);
        const detail::QSmall qt2 = detail::qsmall_rows(t2, m, n);
        detail::qsmall_mm(qt2, qa, integer, yout);
      }
      for (size_t i = 0; i < m; ++i) {
        const size_t oi = th * m + i;
        if (oi >= oh) break;
        for (size_t j = 0; j < m; ++j) {
          const size_t oj = tw * m + j;
          if (oj >= ow) break;
          out.at4(b, k, oi, oj) = yout[i * m + j];
        }
      }
    }
  });
  return out;
}

inline Tensor wino_conv(const Tensor& x, const Tensor& w,
                        const WinogradTransform& t, const ConvShape& shape,
                        const WinoOptions& opt = {}, WinoTape* tape = nullptr) {
  return wino_conv(x, w, TransformMatrices::from(t), shape, opt, tape);
}

// Relative standard deviation per tap of the Winograd-domain output Y:
// std over (tiles x channels), normalized by the mean of all tap stds.
inline Mat tap_range_stats(const std::vector<float>& y_dom, size_t n,
                           size_t samples_per_tap) {
  if (samples_per_tap < 2) throw UndefinedMetric("tap_range_stats: need >= 2 samples");
  const size_t taps = n * n;
  if (y_dom.size() != taps * samples_per_tap)
    throw InvalidShape("tap_range_stats: size mismatch");
  std::vector<double> stds(taps);
  double mean_std = 0.0;
  for (size_t tap = 0; tap < taps; ++tap) {
    const float* s = y_dom.data() + tap * samples_per_tap;
    double mean = 0.0;
    for (size_t i = 0; i < samples_per_tap; ++i) mean += s[i];
    mean /= static_cast<double>(samples_per_tap);
    double var = 0.0;
    for (size_t i = 0; i < samples_per_tap; ++i) {
      const double d = s[i] - mean;
      var += d * d;
    }
    stds[tap] = std::sqrt(var / static_cast<double>(samples_per_tap - 1));
    mean_std += stds[tap];
  }
  mean_std /= static_cast<double>(taps);
  Mat out(n, n);
  for (size_t tap = 0; tap < taps; ++tap)
    out(tap / n, tap % n) = mean_std > 0.0 ? stds[tap] / mean_std : 0.0;
  return out;
}

// Convenience: run the pipeline and return the tap diagnostic of Y.
inline Mat tap_range_stats(const Tensor& x, const Tensor& w,
                           const TransformMatrices& t, const ConvShape& shape,
                           const WinoOptions& opt = {}) {
  WinoTape tape;
  wino_conv(x, w, t, shape, opt, &tape);
  return tap_range_stats(tape.y_dom, tape.n, tape.tiles * tape.c_out);
}

}  // namespace winoq
