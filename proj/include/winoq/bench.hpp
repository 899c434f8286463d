#pragma once

#include <algorithm>
#include <chrono>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "winoq/conv_ref.hpp"
#include "winoq/quantize.hpp"
#include "winoq/tensor.hpp"
#include "winoq/transforms.hpp"
#include "winoq/tuner.hpp"
#include "winoq/wino.hpp"

namespace winoq {

struct BenchTiming {
  double median_ms = 0.0;
  double min_ms = 0.0;
  size_t reps = 0;
  size_t warmup = 0;
};

template <typename Fn>
BenchTiming time_fn(Fn&& fn, size_t reps = 20, size_t warmup = 5) {
  using clock = std::chrono::steady_clock;
  for (size_t i = 0; i < warmup; ++i) fn();
  std::vector<double> ms(reps);
  for (size_t i = 0; i < reps; ++i) {
    const auto t0 = clock::now();
    fn();
    ms[i] = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
  }
  std::sort(ms.begin(), ms.end());
  BenchTiming t;
  t.median_ms = ms[reps / 2];
  t.min_ms = ms.front();
  t.reps = reps;
  t.warmup = warmup;
  return t;
}

inline nlohmann::json machine_descriptor() {
  std::ostringstream compiler;
#if defined(__clang__)
  compiler << "clang " << __clang_major__ << "." << __clang_minor__;
#elif defined(__GNUC__)
  compiler << "gcc " << __GNUC__ << "." << __GNUC_MINOR__;
#else
  compiler << "unknown";
#endif
  return nlohmann::json{{"compiler", compiler.str()},
                        {"pointer_bits", sizeof(void*) * 8},
                        {"hardware_threads", default_threads()}};
}

inline std::string shape_key(const ConvShape& s) {
  std::ostringstream os;
  os << "n" << s.n << "_c" << s.c_in << "_k" << s.c_out << "_h" << s.h << "x"
     << s.w << "_p" << s.pad;
  return os.str();
}

// Figure-6-style runtime comparison: direct int8 vs Winograd int8 per shape.
inline nlohmann::json run_conv_bench(const std::vector<ConvShape>& shapes,
                                     const std::vector<size_t>& thread_counts,
                                     Tile tile, size_t group_size = 64,
                                     uint64_t seed = 7, size_t reps = 20) {
  const WinogradTransform t = standard_transform(tile);
  nlohmann::json cases = nlohmann::json::array();
  for (const ConvShape& s : shapes) {
    for (size_t threads : thread_counts) {
      nlohmann::json c{{"shape", shape_key(s)},
                       {"tile", tile_name(tile)},
                       {"threads", threads},
                       {"group_size", group_size}};
      if (s.out_h() < t.m || s.out_w() < t.m) {
        c["skipped"] = "output smaller than one Winograd tile";
        cases.push_back(c);
        continue;
      }
      const Tensor x = Tensor::random({s.n, s.c_in, s.h, s.w}, RngSpec::gaussian(seed));
      const Tensor w = Tensor::random({s.c_out, s.c_in, s.r, s.r},
                                      RngSpec::gaussian(seed + 1, 0.0, 0.1));
      const Tensor y_fp = conv_direct_fp(x, w, s);
      WinoOptions opt;
      opt.mode = WinoMode::int8;
      opt.group_size = group_size;
      opt.threads = threads;

      Tensor y_direct, y_wino;
      const BenchTiming td = time_fn(
          [&] { y_direct = conv_direct_q8(x, w, s, group_size); }, reps);
      const BenchTiming tw =
          time_fn([&] { y_wino = wino_conv(x, w, t, s, opt); }, reps);
      c["direct_q8"] = {{"median_ms", td.median_ms},
                        {"min_ms", td.min_ms},
                        {"reps", td.reps},
                        {"warmup", td.warmup},
                        {"sqnr_db", sqnr(y_fp, y_direct)}};
      c["wino_q8"] = {{"median_ms", tw.median_ms},
                      {"min_ms", tw.min_ms},
                      {"reps", tw.reps},
                      {"warmup", tw.warmup},
                      {"sqnr_db", sqnr(y_fp, y_wino)}};
      c["wino_vs_direct_ratio"] = td.median_ms / tw.median_ms;
      cases.push_back(c);
    }
  }
  return nlohmann::json{{"machine", machine_descriptor()},
                        {"suite", "conv"},
                        {"cases", cases}};
}

// SQNR comparison per layer shape: standard scales vs (optionally) learned
// scales, plus the tap-range diagnostic ratio for each.
inline nlohmann::json run_fidelity_suite(Tile tile, const ScaleSet* learned,
                                         size_t group_size = 64,
                                         uint64_t seed = 11) {
  const WinogradTransform std_t = standard_transform(tile);
  const TransformMatrices std_m = TransformMatrices::from(std_t);
  TransformMatrices learned_m;
  if (learned)
    learned_m = scaled_matrices(std_t, learned->s_b, learned->s_g);

  const std::vector<ConvShape> shapes = {
      {1, 32, 16, 16, 32, 3, 1},  {1, 64, 16, 16, 64, 3, 1},
      {1, 128, 16, 16, 128, 3, 1}, {1, 64, 32, 32, 64, 3, 1},
      {1, 96, 16, 16, 96, 3, 1}};

  auto tap_ratio = [](const Mat& stats) {
    double lo = 1e300, hi = 0.0;
    for (size_t i = 0; i < stats.rows(); ++i)
      for (size_t j = 0; j < stats.cols(); ++j) {
        lo = std::min(lo, stats(i, j));
        hi = std::max(hi, stats(i, j));
      }
    return lo > 0.0 ? hi / lo : 0.0;
  };

  nlohmann::json cases = nlohmann::json::array();
  uint64_t s = seed;
  for (const ConvShape& shape : shapes) {
    const Tensor x = Tensor::random({shape.n, shape.c_in, shape.h, shape.w},
                                    RngSpec::gaussian(s));
    const LayerEntry layer = make_layer(shape, s + 1);
    s += 2;
    const Tensor y_fp = conv_direct_fp(x, layer.weights, shape);
    WinoOptions opt;
    opt.mode = WinoMode::int8;
    opt.group_size = group_size;
    nlohmann::json c{{"shape", shape_key(shape)}, {"tile", tile_name(tile)}};
    const Tensor y_std = wino_conv(x, layer.weights, std_m, shape, opt);
    c["standard"] = {
        {"sqnr_db", sqnr(y_fp, y_std)},
        {"tap_ratio", tap_ratio(tap_range_stats(x, layer.weights, std_m, shape, opt))}};
    if (learned) {
      const Tensor y_l = wino_conv(x, layer.weights, learned_m, shape, opt);
      c["learned"] = {
          {"sqnr_db", sqnr(y_fp, y_l)},
          {"tap_ratio",
           tap_ratio(tap_range_stats(x, layer.weights, learned_m, shape, opt))}};
    }
    cases.push_back(c);
  }
  return nlohmann::json{{"machine", machine_descriptor()},
                        {"suite", "fidelity"},
                        {"cases", cases}};
}

// Flattened CSV export of a report's cases: one line per (case, field).
inline std::string report_to_csv(const nlohmann::json& report) {
  std::ostringstream os;
  os << "case,field,value\n";
  for (const auto& c : report.at("cases")) {
    const std::string key = c.value("shape", "?");
    std::function<void(const std::string&, const nlohmann::json&)> walk =
        [&](const std::string& prefix, const nlohmann::json& v) {
          if (v.is_object()) {
            for (auto it = v.begin(); it != v.end(); ++it)
              walk(prefix.empty() ? it.key() : prefix + "." + it.key(), it.value());
          } else if (v.is_number()) {
            os << key << "," << prefix << "," << v.dump() << "\n";
          }
        };
    walk("", c);
  }
  return os.str();
}

}  // namespace winoq
