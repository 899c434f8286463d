#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "winoq/conv_ref.hpp"
#include "winoq/errors.hpp"
#include "winoq/quantize.hpp"
#include "winoq/rng.hpp"
#include "winoq/tensor.hpp"
#include "winoq/transforms.hpp"
#include "winoq/wino.hpp"

namespace winoq {

// One convolution layer of the data-free catalog: a geometry plus fixed
// "pretrained" weights (seeded Kaiming-style gaussian fills).
struct LayerEntry {
  ConvShape shape;
  Tensor weights;
};

using LayerCatalog = std::vector<LayerEntry>;

inline LayerEntry make_layer(ConvShape shape, uint64_t seed) {
  shape.validate();
  const double std = std::sqrt(2.0 / (static_cast<double>(shape.c_in) * 9.0));
  return {shape,
          Tensor::random({shape.c_out, shape.c_in, 3, 3},
                         RngSpec::gaussian(seed, 0.0, std))};
}

// UNet-flavoured desk-scale shape menu.
inline LayerCatalog default_catalog(uint64_t seed, size_t spatial = 16) {
  const size_t menu[][2] = {{32, 32},  {64, 64},   {128, 128}, {32, 64},
                            {64, 128}, {128, 64},  {64, 32},   {96, 96}};
  LayerCatalog cat;
  uint64_t s = seed;
  for (const auto& [c, k] : menu) {
    cat.push_back(make_layer(ConvShape{1, c, spatial, spatial, k, 3, 1}, s));
    s += 1;
  }
  return cat;
}

struct TuneConfig {
  size_t epochs = 10;
  size_t batches = 200;
  size_t layers_per_iter = 2;
  double lr = 1e-3;
  double grad_clip = 1.0;
  size_t spatial = 16;
  RngSpec::Kind noise_kind = RngSpec::Kind::gaussian;
  double noise_mean = 0.0, noise_std = 1.0;
  double noise_lo = -1.0, noise_hi = 1.0;
  Tile tile = Tile::F63;
  uint64_t seed = 1;
  size_t group_size = 64;

  size_t steps() const { return epochs * batches; }

  void validate(size_t catalog_size) const {
    if (epochs < 1 || batches < 1 || layers_per_iter < 1)
      throw InvalidSpec("TuneConfig: counts must be >= 1");
    if (layers_per_iter > catalog_size)
      throw InvalidSpec("TuneConfig: layers_per_iter exceeds catalog");
  }
};

inline void to_json(nlohmann::json& j, const TuneConfig& c) {
  j = nlohmann::json{
      {"tile", tile_name(c.tile)},
      {"epochs", c.epochs},
      {"batches", c.batches},
      {"layers_per_iter", c.layers_per_iter},
      {"lr", c.lr},
      {"grad_clip", c.grad_clip},
      {"spatial", c.spatial},
      {"seed", c.seed},
      {"group_size", c.group_size},
      {"noise",
       c.noise_kind == RngSpec::Kind::gaussian
           ? nlohmann::json{{"kind", "gaussian"}, {"mean", c.noise_mean}, {"std", c.noise_std}}
           : nlohmann::json{{"kind", "uniform"}, {"lo", c.noise_lo}, {"hi", c.noise_hi}}}};
}

inline void from_json(const nlohmann::json& j, TuneConfig& c) {
  TuneConfig d;
  c.tile = tile_from_name(j.value("tile", std::string(tile_name(d.tile))));
  c.epochs = j.value("epochs", d.epochs);
  c.batches = j.value("batches", d.batches);
  c.layers_per_iter = j.value("layers_per_iter", d.layers_per_iter);
  c.lr = j.value("lr", d.lr);
  c.grad_clip = j.value("grad_clip", d.grad_clip);
  c.spatial = j.value("spatial", d.spatial);
  c.seed = j.value("seed", d.seed);
  c.group_size = j.value("group_size", d.group_size);
  if (j.contains("noise")) {
    const auto& nj = j.at("noise");
    const std::string kind = nj.value("kind", "gaussian");
    if (kind == "gaussian") {
      c.noise_kind = RngSpec::Kind::gaussian;
      c.noise_mean = nj.value("mean", 0.0);
      c.noise_std = nj.value("std", 1.0);
    } else {
      c.noise_kind = RngSpec::Kind::uniform;
      c.noise_lo = nj.value("lo", -1.0);
      c.noise_hi = nj.value("hi", 1.0);
    }
  }
}

struct TuneReport {
  std::vector<double> loss_trace;           // one entry per optimizer step
  std::vector<double> initial_sqnr, final_sqnr;  // per layer, held-out noise
  double wall_seconds = 0.0;
  size_t learned_parameters = 0;
  bool diverged = false;

  double mean(const std::vector<double>& v) const {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
  }
  double mean_initial() const { return mean(initial_sqnr); }
  double mean_final() const { return mean(final_sqnr); }
};

inline nlohmann::json report_to_json(const TuneReport& r) {
  return nlohmann::json{{"loss_trace", r.loss_trace},
                        {"initial_sqnr", r.initial_sqnr},
                        {"final_sqnr", r.final_sqnr},
                        {"mean_initial_sqnr", r.mean_initial()},
                        {"mean_final_sqnr", r.mean_final()},
                        {"wall_seconds", r.wall_seconds},
                        {"learned_parameters", r.learned_parameters},
                        {"diverged", r.diverged}};
}

// Build engine matrices from a base transform's Vandermonde factors and
// explicit scale vectors. s_a may be supplied independently (decoupled mode,
// used by the finite-difference gradient check); by default it is derived
// from the product constraint.
inline TransformMatrices scaled_matrices(const WinogradTransform& base,
                                         const std::vector<double>& s_b,
                                         const std::vector<double>& s_g,
                                         const std::vector<double>* s_a_fixed = nullptr) {
  std::vector<double> s_a(base.n);
  if (s_a_fixed) {
    s_a = *s_a_fixed;
  } else {
    for (size_t i = 0; i < base.n; ++i) {
      const double p = s_b[i] * s_g[i];
      if (p == 0.0 || !std::isfinite(p))
        throw InvalidScale("scaled_matrices: degenerate scale product");
      s_a[i] = 1.0 / p;
    }
  }
  TransformMatrices t;
  t.m = base.m;
  t.r = base.r;
  t.n = base.n;
  t.a_t = base.v_a.col_scaled(s_a);
  t.b_t = base.v_b_int.row_scaled(s_b);
  t.g = base.v_g.row_scaled(s_g);
  return t;
}

// Gradients of the three transform matrices, straight-through: every
// quantize/dequantize on the forward value path is treated as identity, and
// dynamic min-max scales never clip, so the clamp mask is all-pass.
struct MatrixGrads {
  Mat d_a_t, d_b_t, d_g;
  double loss = 0.0;
};

namespace detail {

// dL/dy for loss = -SQNR(ref, out) = -10*log10(sum ref^2 / sum (ref-out)^2).
inline std::vector<double> sqnr_loss_grad(const Tensor& ref, const Tensor& out,
                                          double* loss) {
  double sig = 0.0, err = 0.0;
  std::vector<double> g(ref.size());
  for (size_t i = 0; i < ref.size(); ++i) {
    const double r = ref[i], d = static_cast<double>(out[i]) - r;
    sig += r * r;
    err += d * d;
    g[i] = d;
  }
  if (sig == 0.0) throw UndefinedMetric("loss: all-zero reference");
  const double floor = 1e-30;
  err = std::max(err, floor);
  *loss = -10.0 * std::log10(sig / err);
  const double k = 20.0 / (std::log(10.0) * err);
  for (auto& v : g) v *= k;
  return g;
}

}  // namespace detail

// Backward pass through the recorded fake-quant pipeline. `t` must be the
// matrices the forward ran with; `grad_out` is dL/d(output tensor).
inline MatrixGrads wino_backward(const WinoTape& tape, const TransformMatrices& t,
                                 const Tensor& w_spatial, const ConvShape& shape,
                                 const std::vector<double>& grad_out) {
  const size_t n = tape.n, m = tape.m, r = tape.r;
  const size_t P = tape.tiles, C = tape.c_in, K = tape.c_out;
  const size_t taps = n * n;
  const Mat& at_used = tape.a_t_used;
  const Mat& bt_used = tape.b_t_used;

  MatrixGrads g;
  g.d_a_t = Mat(m, n);
  g.d_b_t = Mat(n, n);
  g.d_g = Mat(n, r);

  const size_t oh = shape.out_h(), ow = shape.out_w();
  const size_t tiles_w = (ow + m - 1) / m;
  const size_t per_img = ((oh + m - 1) / m) * tiles_w;

  // Output transform: y = At Y At^T per (tile, channel).
  std::vector<double> dy_dom(taps * P * K, 0.0);
  Mat pt(m, m), yt(n, n);
  for (size_t p = 0; p < P; ++p) {
    const size_t b = p / per_img;
    const size_t th = (p % per_img) / tiles_w;
    const size_t tw = p % tiles_w;
    for (size_t k = 0; k < K; ++k) {
      for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < m; ++j) {
          const size_t oi = th * m + i, oj = tw * m + j;
          pt(i, j) = (oi < oh && oj < ow)
                         ? grad_out[((b * K + k) * oh + oi) * ow + oj]
                         : 0.0;
        }
      for (size_t tap = 0; tap < taps; ++tap)
        yt(tap / n, tap % n) = tape.y_dom[tap * P * K + p * K + k];
      const Mat pa = pt * at_used;          // m x n
      const Mat pta = pt.transposed() * at_used;
      // dAt += P At Y^T + P^T At Y
      const Mat d1 = pa * yt.transposed();
      const Mat d2 = pta * yt;
      for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) g.d_a_t(i, j) += d1(i, j) + d2(i, j);
      // dY = At^T P At
      const Mat dyt = at_used.transposed() * pa;
      for (size_t tap = 0; tap < taps; ++tap)
        dy_dom[tap * P * K + p * K + k] = dyt(tap / n, tap % n);
    }
  }

  // Hadamard: Y[p,k] = sum_c W[k,c] * X[p,c] per tap.
  std::vector<double> dx_dom(taps * P * C, 0.0);
  std::vector<double> dw_dom(taps * K * C, 0.0);
  for (size_t tap = 0; tap < taps; ++tap) {
    const float* xs = tape.x_dom.data() + tap * P * C;
    const float* ws = tape.w_dom.data() + tap * K * C;
    const double* dys = dy_dom.data() + tap * P * K;
    double* dxs = dx_dom.data() + tap * P * C;
    double* dws = dw_dom.data() + tap * K * C;
    for (size_t p = 0; p < P; ++p)
      for (size_t k = 0; k < K; ++k) {
        const double dv = dys[p * K + k];
        if (dv == 0.0) continue;
        const float* wrow = ws + k * C;
        const float* xrow = xs + p * C;
        double* dxrow = dxs + p * C;
        double* dwrow = dws + k * C;
        for (size_t c = 0; c < C; ++c) {
          dxrow[c] += dv * wrow[c];
          dwrow[c] += dv * xrow[c];
        }
      }
  }

  // Input transform: X = Bt x Bt^T per (tile, channel).
  Mat nx(n, n), xsp(n, n);
  for (size_t p = 0; p < P; ++p)
    for (size_t c = 0; c < C; ++c) {
      for (size_t tap = 0; tap < taps; ++tap) {
        nx(tap / n, tap % n) = dx_dom[tap * P * C + p * C + c];
        xsp(tap / n, tap % n) = tape.x_tiles[(p * C + c) * taps + tap];
      }
      const Mat nb = nx * bt_used;
      const Mat ntb = nx.transposed() * bt_used;
      const Mat d1 = nb * xsp.transposed();
      const Mat d2 = ntb * xsp;
      for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j) g.d_b_t(i, j) += d1(i, j) + d2(i, j);
    }

  // Weight transform: W = G w G^T per (k, c).
  Mat mw(n, n), wsp(r, r);
  for (size_t k = 0; k < K; ++k)
    for (size_t c = 0; c < C; ++c) {
      for (size_t tap = 0; tap < taps; ++tap)
        mw(tap / n, tap % n) = dw_dom[tap * K * C + k * C + c];
      for (size_t u = 0; u < r; ++u)
        for (size_t v = 0; v < r; ++v) wsp(u, v) = w_spatial.at4(k, c, u, v);
      const Mat mg = mw * t.g;
      const Mat mtg = mw.transposed() * t.g;
      const Mat d1 = mg * wsp.transposed();
      const Mat d2 = mtg * wsp;
      for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < r; ++j) g.d_g(i, j) += d1(i, j) + d2(i, j);
    }
  return g;
}

struct ScaleGradients {
  double loss = 0.0;
  std::vector<double> g_sb, g_sg;  // coupled through s_a = 1/(s_b s_g)
  std::vector<double> g_sb_raw, g_sg_raw, g_sa;  // decoupled pieces
};

// Reduce matrix gradients to scale gradients through the Vandermonde
// parameterization At = V_A^T diag(s_a), Bt = diag(s_b) V_B, G = diag(s_g) V_G.
inline ScaleGradients reduce_to_scales(const MatrixGrads& mg,
                                       const WinogradTransform& base,
                                       const std::vector<double>& s_b,
                                       const std::vector<double>& s_g,
                                       const std::vector<double>& s_a) {
  const size_t n = base.n, m = base.m, r = base.r;
  ScaleGradients out;
  out.loss = mg.loss;
  out.g_sb_raw.assign(n, 0.0);
  out.g_sg_raw.assign(n, 0.0);
  out.g_sa.assign(n, 0.0);
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < n; ++j)
      out.g_sb_raw[i] += mg.d_b_t(i, j) * base.v_b_int(i, j);
    for (size_t j = 0; j < r; ++j)
      out.g_sg_raw[i] += mg.d_g(i, j) * base.v_g(i, j);
    for (size_t a = 0; a < m; ++a)
      out.g_sa[i] += mg.d_a_t(a, i) * base.v_a(a, i);
  }
  out.g_sb = out.g_sb_raw;
  out.g_sg = out.g_sg_raw;
  for (size_t i = 0; i < n; ++i) {
    out.g_sb[i] -= out.g_sa[i] * s_a[i] / s_b[i];
    out.g_sg[i] -= out.g_sa[i] * s_a[i] / s_g[i];
  }
  return out;
}

// Loss and scale gradients for one layer and one input, through the
// fake-quant (or, with quantize=false, pure FP) Winograd path.
inline ScaleGradients ste_gradients(const LayerEntry& layer,
                                    const WinogradTransform& base,
                                    const std::vector<double>& s_b,
                                    const std::vector<double>& s_g,
                                    const Tensor& x, size_t group_size,
                                    bool quantize = true,
                                    const std::vector<double>* s_a_fixed = nullptr) {
  std::vector<double> s_a(base.n);
  if (s_a_fixed)
    s_a = *s_a_fixed;
  else
    for (size_t i = 0; i < base.n; ++i) s_a[i] = 1.0 / (s_b[i] * s_g[i]);
  const TransformMatrices t = scaled_matrices(base, s_b, s_g, &s_a);
  const Tensor y_ref = conv_direct_fp(x, layer.weights, layer.shape);
  WinoOptions opt;
  opt.mode = quantize ? WinoMode::fake_quant : WinoMode::fp;
  opt.group_size = group_size;
  WinoTape tape;
  const Tensor y = wino_conv(x, layer.weights, t, layer.shape, opt, &tape);
  double loss;
  const std::vector<double> grad_out = detail::sqnr_loss_grad(y_ref, y, &loss);
  MatrixGrads mg = wino_backward(tape, t, layer.weights, layer.shape, grad_out);
  mg.loss = loss;
  ScaleGradients sg = reduce_to_scales(mg, base, s_b, s_g, s_a);
  if (s_a_fixed) {  // decoupled: report raw partials as the gradient
    sg.g_sb = sg.g_sb_raw;
    sg.g_sg = sg.g_sg_raw;
  }
  return sg;
}

namespace detail {

inline Tensor make_noise(const TuneConfig& cfg, const ConvShape& s, uint64_t seed) {
  const RngSpec spec = cfg.noise_kind == RngSpec::Kind::gaussian
                           ? RngSpec::gaussian(seed, cfg.noise_mean, cfg.noise_std)
                           : RngSpec::uniform(seed, cfg.noise_lo, cfg.noise_hi);
  return Tensor::random({s.n, s.c_in, s.h, s.w}, spec);
}

inline double eval_layer_sqnr(const LayerEntry& layer, const TransformMatrices& t,
                              size_t group_size, uint64_t seed) {
  const Tensor x = Tensor::random({layer.shape.n, layer.shape.c_in, layer.shape.h,
                                   layer.shape.w},
                                  RngSpec::gaussian(seed));
  const Tensor y_ref = conv_direct_fp(x, layer.weights, layer.shape);
  WinoOptions opt;
  opt.mode = WinoMode::int8;
  opt.group_size = group_size;
  const Tensor y = wino_conv(x, layer.weights, t, layer.shape, opt);
  return sqnr(y_ref, y);
}

inline void clip_gradient(std::vector<double>& gb, std::vector<double>& gg,
                          double max_norm) {
  double sq = 0.0;
  for (double v : gb) sq += v * v;
  for (double v : gg) sq += v * v;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double f = max_norm / norm;
    for (auto& v : gb) v *= f;
    for (auto& v : gg) v *= f;
  }
}

}  // namespace detail

// Data-free scale learning: shared (S_B, S_G) across the whole catalog,
// fresh noise every iteration, SGD with gradient clipping, scales projected
// away from zero.
inline std::pair<ScaleSet, TuneReport> tune_scales(const LayerCatalog& catalog,
                                                   const TuneConfig& cfg,
                                                   const ScaleSet* resume = nullptr) {
  if (catalog.empty()) throw InvalidSpec("tune_scales: empty catalog");
  cfg.validate(catalog.size());
  const auto t0 = std::chrono::steady_clock::now();
  const WinogradTransform base = standard_transform(cfg.tile);
  const ScaleSet init = resume ? *resume : standard_scales(cfg.tile);
  std::vector<double> s_b = init.s_b, s_g = init.s_g;
  const size_t n = base.n;

  TuneReport report;
  report.learned_parameters = 2 * n;
  const uint64_t eval_seed = cfg.seed ^ 0x5eedfacecafe1234ULL;
  for (size_t li = 0; li < catalog.size(); ++li)
    report.initial_sqnr.push_back(detail::eval_layer_sqnr(
        catalog[li], scaled_matrices(base, s_b, s_g), cfg.group_size,
        eval_seed + li));

  Xoshiro256 rng(cfg.seed);
  std::vector<double> last_good_b = s_b, last_good_g = s_g;
  for (size_t step = 0; step < cfg.steps(); ++step) {
    std::vector<double> gb(n, 0.0), gg(n, 0.0);
    double loss_sum = 0.0;
    for (size_t pick = 0; pick < cfg.layers_per_iter; ++pick) {
      const size_t li = rng.next_u64() % catalog.size();
      const LayerEntry& layer = catalog[li];
      const Tensor x = detail::make_noise(cfg, layer.shape, rng.next_u64());
      const ScaleGradients sg =
          ste_gradients(layer, base, s_b, s_g, x, cfg.group_size);
      loss_sum += sg.loss;
      for (size_t i = 0; i < n; ++i) {
        gb[i] += sg.g_sb[i] / cfg.layers_per_iter;
        gg[i] += sg.g_sg[i] / cfg.layers_per_iter;
      }
    }
    const double loss = loss_sum / cfg.layers_per_iter;
    if (!std::isfinite(loss)) {
      report.diverged = true;
      s_b = last_good_b;
      s_g = last_good_g;
      break;
    }
    last_good_b = s_b;
    last_good_g = s_g;
    report.loss_trace.push_back(loss);
    detail::clip_gradient(gb, gg, cfg.grad_clip);
    for (size_t i = 0; i < n; ++i) {
      s_b[i] -= cfg.lr * gb[i];
      s_g[i] -= cfg.lr * gg[i];
      // Project away from zero; transforms are singular at s = 0.
      if (std::fabs(s_b[i]) < 1e-6) s_b[i] = s_b[i] < 0 ? -1e-6 : 1e-6;
      if (std::fabs(s_g[i]) < 1e-6) s_g[i] = s_g[i] < 0 ? -1e-6 : 1e-6;
    }
  }

  for (size_t li = 0; li < catalog.size(); ++li)
    report.final_sqnr.push_back(detail::eval_layer_sqnr(
        catalog[li], scaled_matrices(base, s_b, s_g), cfg.group_size,
        eval_seed + li));
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (report.diverged)
    throw TuneDiverged("tune_scales: non-finite loss at step " +
                       std::to_string(report.loss_trace.size()));
  return {ScaleSet(s_b, s_g), report};
}

// Negative baseline: learn all entries of (A^T, B^T, G) directly under the
// identical budget.
inline std::pair<TransformMatrices, TuneReport> tune_transforms(
    const LayerCatalog& catalog, const TuneConfig& cfg) {
  if (catalog.empty()) throw InvalidSpec("tune_transforms: empty catalog");
  cfg.validate(catalog.size());
  const auto t0 = std::chrono::steady_clock::now();
  const WinogradTransform base = standard_transform(cfg.tile);
  TransformMatrices t = TransformMatrices::from(base);
  const size_t n = base.n, m = base.m, r = base.r;

  TuneReport report;
  report.learned_parameters = n * (m + n + r);
  const uint64_t eval_seed = cfg.seed ^ 0x5eedfacecafe1234ULL;
  for (size_t li = 0; li < catalog.size(); ++li)
    report.initial_sqnr.push_back(
        detail::eval_layer_sqnr(catalog[li], t, cfg.group_size, eval_seed + li));

  Xoshiro256 rng(cfg.seed);
  TransformMatrices last_good = t;
  for (size_t step = 0; step < cfg.steps(); ++step) {
    Mat ga(m, n), gb(n, n), gg(n, r);
    double loss_sum = 0.0;
    for (size_t pick = 0; pick < cfg.layers_per_iter; ++pick) {
      const size_t li = rng.next_u64() % catalog.size();
      const LayerEntry& layer = catalog[li];
      const Tensor x = detail::make_noise(cfg, layer.shape, rng.next_u64());
      const Tensor y_ref = conv_direct_fp(x, layer.weights, layer.shape);
      WinoOptions opt;
      opt.mode = WinoMode::fake_quant;
      opt.group_size = cfg.group_size;
      WinoTape tape;
      const Tensor y = wino_conv(x, layer.weights, t, layer.shape, opt, &tape);
      double loss;
      const std::vector<double> grad_out =
          detail::sqnr_loss_grad(y_ref, y, &loss);
      const MatrixGrads mg =
          wino_backward(tape, t, layer.weights, layer.shape, grad_out);
      loss_sum += loss;
      const double inv_k = 1.0 / cfg.layers_per_iter;
      for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) ga(i, j) += mg.d_a_t(i, j) * inv_k;
      for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j) gb(i, j) += mg.d_b_t(i, j) * inv_k;
      for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < r; ++j) gg(i, j) += mg.d_g(i, j) * inv_k;
    }
    const double loss = loss_sum / cfg.layers_per_iter;
    if (!std::isfinite(loss)) {
      report.diverged = true;
      t = last_good;
      break;
    }
    last_good = t;
    report.loss_trace.push_back(loss);
    double sq = 0.0;
    for (const auto* g : {&ga, &gb, &gg})
      for (double v : g->data()) sq += v * v;
    const double norm = std::sqrt(sq);
    const double f = norm > cfg.grad_clip && norm > 0.0 ? cfg.grad_clip / norm : 1.0;
    for (size_t i = 0; i < m; ++i)
      for (size_t j = 0; j < n; ++j) t.a_t(i, j) -= cfg.lr * f * ga(i, j);
    for (size_t i = 0; i < n; ++i)
      for (size_t j = 0; j < n; ++j) t.b_t(i, j) -= cfg.lr * f * gb(i, j);
    for (size_t i = 0; i < n; ++i)
      for (size_t j = 0; j < r; ++j) t.g(i, j) -= cfg.lr * f * gg(i, j);
  }

  for (size_t li = 0; li < catalog.size(); ++li)
    report.final_sqnr.push_back(
        detail::eval_layer_sqnr(catalog[li], t, cfg.group_size, eval_seed + li));
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (report.diverged)
    throw TuneDiverged("tune_transforms: non-finite loss");
  return {t, report};
}

}  // namespace winoq
