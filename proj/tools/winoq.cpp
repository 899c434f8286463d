// winoq: command-line frontend for the quantized Winograd convolution engine.
//
// Subcommands: transforms, conv, learn-scales, bench, verify.
// Exit codes: 0 success, 1 check failure, 2 usage / IO error.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "winoq/bench.hpp"
#include "winoq/conv_ref.hpp"
#include "winoq/quantize.hpp"
#include "winoq/tensor.hpp"
#include "winoq/transforms.hpp"
#include "winoq/tuner.hpp"
#include "winoq/wino.hpp"

using namespace winoq;

namespace {

constexpr int kUsageError = 2;
constexpr int kCheckFailure = 1;

struct GlobalFlags {
  uint64_t seed = 1;
  size_t threads = 0;  // 0 = hardware default
  std::string tile = "f63";
  size_t group_size = 64;
  std::string bits = "w8a8";
  std::string out;
};

Tile parse_tile(const std::string& s) {
  if (s == "f43" || s == "F43") return Tile::F43;
  if (s == "f63" || s == "F63") return Tile::F63;
  throw InvalidSpec("unknown tile: " + s);
}

Bits parse_bits(const std::string& s) {
  if (s == "w8a8") return Bits::b8;
  if (s == "w4a8") return Bits::b4;
  throw InvalidSpec("unknown bits: " + s);
}

size_t effective_threads(const GlobalFlags& g) {
  return g.threads == 0 ? default_threads() : g.threads;
}

void print_mat(std::ostream& os, const std::string& name, const Mat& m) {
  os << name << " (" << m.rows() << "x" << m.cols() << "):\n";
  for (size_t i = 0; i < m.rows(); ++i) {
    for (size_t j = 0; j < m.cols(); ++j)
      os << (j ? " " : "  ") << std::setprecision(9) << m(i, j);
    os << "\n";
  }
}

int cmd_transforms(const GlobalFlags& g, const std::string& scales_path) {
  const Tile tile = parse_tile(g.tile);
  WinogradTransform t = standard_transform(tile);
  if (!scales_path.empty()) {
    const auto [file_tile, s] = load_scales(scales_path);
    if (file_tile != tile)
      throw InvalidSpec("scales file is for " + std::string(tile_name(file_tile)));
    t = rescale_transform(t, s.s_b, s.s_g);
  }
  std::cout << "tile " << tile_name(tile) << "  F(" << t.m << "," << t.r
            << ")  n=" << t.n << "\n";
  print_mat(std::cout, "A^T", t.a_t);
  print_mat(std::cout, "B^T", t.b_t);
  print_mat(std::cout, "G", t.g);
  const double residual = t.scales.max_condition_residual();
  std::cout << "scale condition |s_a*s_b*s_g - 1| max = "
            << std::setprecision(9) << residual << "\n";
  if (residual > 1e-9) {
    std::cerr << "FAIL: scale condition violated\n";
    return kCheckFailure;
  }
  if (!g.out.empty()) save_scales(g.out, tile, t.scales);
  return 0;
}

int cmd_conv(const GlobalFlags& g, const std::string& x_path,
             const std::string& w_path, const std::string& mode, size_t pad) {
  const Tensor x = Tensor::load(x_path);
  const Tensor w = Tensor::load(w_path);
  if (x.rank() != 4 || w.rank() != 4)
    throw InvalidShape("conv: expected rank-4 x and w tensors");
  if (parse_bits(g.bits) != Bits::b8)
    throw InvalidSpec("conv: only w8a8 is wired to the CLI path");
  const ConvShape shape{x.dim(0), x.dim(1), x.dim(2), x.dim(3),
                        w.dim(0),  w.dim(2), pad};
  shape.check_tensors(x, w);

  const Tensor y_ref = conv_direct_fp(x, w, shape);
  Tensor y;
  if (mode == "fp") {
    y = y_ref;
  } else if (mode == "direct-q8") {
    y = conv_direct_q8(x, w, shape, g.group_size);
  } else if (mode == "wino-fp" || mode == "wino-q8") {
    WinoOptions opt;
    opt.mode = mode == "wino-fp" ? WinoMode::fp : WinoMode::int8;
    opt.group_size = g.group_size;
    opt.threads = effective_threads(g);
    y = wino_conv(x, w, standard_transform(parse_tile(g.tile)), shape, opt);
  } else {
    throw InvalidSpec("unknown mode: " + mode);
  }
  std::cout << "mode " << mode << "  out " << shape.n << "x" << shape.c_out
            << "x" << shape.out_h() << "x" << shape.out_w() << "\n";
  if (mode != "fp")
    std::cout << "sqnr_db " << std::setprecision(9) << sqnr(y_ref, y) << "\n";
  if (!g.out.empty()) y.save(g.out);
  return 0;
}

int cmd_learn_scales(const GlobalFlags& g, const std::string& config_path,
                     const std::string& resume_path) {
  TuneConfig cfg;
  cfg.tile = parse_tile(g.tile);
  cfg.seed = g.seed;
  cfg.group_size = g.group_size;
  if (!config_path.empty()) {
    std::ifstream f(config_path);
    if (!f) throw FormatError("cannot open " + config_path);
    nlohmann::json j;
    f >> j;
    cfg = j.get<TuneConfig>();
  }
  const LayerCatalog catalog = default_catalog(cfg.seed + 1000, cfg.spatial);

  ScaleSet resume = standard_scales(cfg.tile);
  const ScaleSet* resume_ptr = nullptr;
  if (!resume_path.empty()) {
    const auto [file_tile, s] = load_scales(resume_path);
    if (file_tile != cfg.tile)
      throw InvalidSpec("resume scales are for " +
                        std::string(tile_name(file_tile)));
    resume = s;
    resume_ptr = &resume;
  }

  const auto [scales, report] = tune_scales(catalog, cfg, resume_ptr);
  nlohmann::json out = report_to_json(report);
  out["scales"] = scales_to_json(cfg.tile, scales);
  std::cout << out.dump(2) << "\n";
  if (!g.out.empty()) save_scales(g.out, cfg.tile, scales);
  return 0;
}

int cmd_bench(const GlobalFlags& g, const std::string& suite,
              const std::string& scales_path, const std::string& csv_path,
              size_t reps) {
  const Tile tile = parse_tile(g.tile);
  nlohmann::json report;
  int rc = 0;
  if (suite == "conv") {
    const std::vector<ConvShape> shapes = {
        {1, 32, 16, 16, 32, 3, 1}, {1, 64, 16, 16, 64, 3, 1},
        {1, 128, 16, 16, 128, 3, 1}, {1, 32, 32, 32, 64, 3, 1},
        {1, 64, 32, 32, 64, 3, 1}, {1, 96, 16, 16, 96, 3, 1}};
    report = run_conv_bench(shapes, {effective_threads(g)}, tile, g.group_size,
                            g.seed, reps);
  } else if (suite == "fidelity") {
    ScaleSet learned = standard_scales(tile);
    const ScaleSet* ptr = nullptr;
    if (!scales_path.empty()) {
      const auto [file_tile, s] = load_scales(scales_path);
      if (file_tile != tile)
        throw InvalidSpec("scales file is for " +
                          std::string(tile_name(file_tile)));
      learned = s;
      ptr = &learned;
    }
    report = run_fidelity_suite(tile, ptr, g.group_size, g.seed);
    if (ptr) {
      for (const auto& c : report.at("cases"))
        if (c.at("learned").at("sqnr_db").get<double>() <=
            c.at("standard").at("sqnr_db").get<double>())
          rc = kCheckFailure;
    }
  } else {
    throw InvalidSpec("unknown suite: " + suite);
  }
  std::cout << report.dump(2) << "\n";
  if (!g.out.empty()) {
    std::ofstream f(g.out);
    if (!f) throw FormatError("cannot open " + g.out);
    f << report.dump(2) << "\n";
  }
  if (!csv_path.empty()) {
    std::ofstream f(csv_path);
    if (!f) throw FormatError("cannot open " + csv_path);
    f << report_to_csv(report);
  }
  return rc;
}

struct VerifyResult {
  std::string name;
  bool pass;
  std::string detail;
};

int cmd_verify(const GlobalFlags& g, bool as_json) {
  std::vector<VerifyResult> results;
  auto check = [&](const std::string& name, bool ok, const std::string& detail) {
    results.push_back({name, ok, detail});
  };

  // Golden spot values of the constructed standard transforms.
  {
    const WinogradTransform t = standard_transform(Tile::F43);
    const double want_row0[6] = {4, 0, -5, 0, 1, 0};
    double err = 0.0;
    for (size_t j = 0; j < 6; ++j)
      err = std::max(err, std::fabs(t.b_t(0, j) - want_row0[j]));
    err = std::max(err, std::fabs(t.g(0, 0) - 0.25));
    err = std::max(err, std::fabs(t.a_t(0, 0) - 1.0));
    std::ostringstream d;
    d << "max dev " << std::setprecision(9) << err;
    check("golden_f43", err <= 1e-12, d.str());
    const WinogradTransform t6 = standard_transform(Tile::F63);
    const double e6 = std::fabs(t6.b_t(0, 0) - 1.0) +
                      std::fabs(t6.g(3, 0) - 1.0 / 90.0);
    check("golden_f63", e6 <= 1e-12, "spot entries");
  }

  // Scale condition over random rescales.
  {
    Xoshiro256 rng(g.seed);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      const Tile tile = i % 2 ? Tile::F43 : Tile::F63;
      ScaleSet s = standard_scales(tile);
      for (auto& v : s.s_b) v *= rng.next_uniform(0.1, 10.0);
      for (auto& v : s.s_g) v *= rng.next_uniform(0.1, 10.0);
      worst = std::max(worst, ScaleSet(s.s_b, s.s_g).max_condition_residual());
    }
    std::ostringstream d;
    d << "max residual " << std::setprecision(9) << worst;
    check("scale_condition", worst <= 1e-9, d.str());
  }

  // FP Winograd vs direct conv, both tiles.
  {
    double worst = 0.0;
    uint64_t seed = g.seed + 50;
    for (Tile tile : {Tile::F43, Tile::F63}) {
      const WinogradTransform t = standard_transform(tile);
      for (int i = 0; i < 5; ++i) {
        const ConvShape s{1, 3, 12, 12, 2, 3, 1};
        const Tensor x = Tensor::random({1, 3, 12, 12}, RngSpec::gaussian(seed));
        const Tensor w =
            Tensor::random({2, 3, 3, 3}, RngSpec::gaussian(seed + 1, 0.0, 0.3));
        seed += 2;
        const Tensor ref = conv_direct_fp(x, w, s);
        const Tensor got = wino_conv(x, w, t, s);
        double peak = 0.0, dev = 0.0;
        for (size_t e = 0; e < ref.size(); ++e) {
          peak = std::max(peak, std::fabs(static_cast<double>(ref[e])));
          dev = std::max(dev, std::fabs(static_cast<double>(ref[e]) - got[e]));
        }
        worst = std::max(worst, dev / peak);
      }
    }
    std::ostringstream d;
    d << "max rel err " << std::setprecision(9) << worst;
    check("fp_oracle", worst <= 1e-4, d.str());
  }

  // int8 vs fake-quant duality.
  {
    double worst = 0.0;
    uint64_t seed = g.seed + 200;
    const WinogradTransform t = standard_transform(Tile::F63);
    for (int i = 0; i < 5; ++i) {
      const ConvShape s{1, 8, 12, 12, 4, 3, 1};
      const Tensor x = Tensor::random({1, 8, 12, 12}, RngSpec::gaussian(seed));
      const Tensor w =
          Tensor::random({4, 8, 3, 3}, RngSpec::gaussian(seed + 1, 0.0, 0.3));
      seed += 2;
      WinoOptions opt;
      opt.group_size = g.group_size;
      opt.mode = WinoMode::fake_quant;
      const Tensor fake = wino_conv(x, w, t, s, opt);
      opt.mode = WinoMode::int8;
      const Tensor integer = wino_conv(x, w, t, s, opt);
      double peak = 0.0, dev = 0.0;
      for (size_t e = 0; e < fake.size(); ++e) {
        peak = std::max(peak, std::fabs(static_cast<double>(fake[e])));
        dev = std::max(dev,
                       std::fabs(static_cast<double>(fake[e]) - integer[e]));
      }
      worst = std::max(worst, peak > 0 ? dev / peak : 0.0);
    }
    std::ostringstream d;
    d << "max rel err " << std::setprecision(9) << worst;
    check("int8_fake_duality", worst <= 1e-5, d.str());
  }

  // Fast GEMM bit-equality against the scalar kernel.
  {
    bool ok = true;
    Xoshiro256 rng(g.seed + 300);
    for (int trial = 0; trial < 10 && ok; ++trial) {
      const size_t M = 1 + rng.next_u64() % 17, N = 1 + rng.next_u64() % 17;
      const size_t K = 32, gs = 16;
      std::vector<int8_t> a(M * K), b(N * K);
      std::vector<float> sa(M * (K / gs)), sb(N * (K / gs));
      for (auto& v : a) v = static_cast<int8_t>(rng.next_u64() % 255) - 127;
      for (auto& v : b) v = static_cast<int8_t>(rng.next_u64() % 255) - 127;
      for (auto& v : sa) v = static_cast<float>(rng.next_uniform(0.001, 0.1));
      for (auto& v : sb) v = static_cast<float>(rng.next_uniform(0.001, 0.1));
      std::vector<float> c_s(M * N), c_f(M * N);
      gemm_q8_scalar(a.data(), sa.data(), b.data(), sb.data(), M, N, K, gs,
                     c_s.data());
      PackedWeights pw = pack_weights_raw(b.data(), sb.data(), N, K, gs, 8);
      gemm_q8_fast(a.data(), sa.data(), pw, M, c_f.data());
      for (size_t e = 0; e < M * N; ++e)
        if (c_s[e] != c_f[e]) ok = false;
    }
    check("gemm_bit_equality", ok, ok ? "bit-identical" : "mismatch");
  }

  int rc = 0;
  if (as_json) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : results) {
      j.push_back({{"name", r.name}, {"pass", r.pass}, {"detail", r.detail}});
      if (!r.pass) rc = kCheckFailure;
    }
    std::cout << j.dump(2) << "\n";
  } else {
    for (const auto& r : results) {
      std::cout << (r.pass ? "PASS" : "FAIL") << "  " << r.name << "  ("
                << r.detail << ")\n";
      if (!r.pass) rc = kCheckFailure;
    }
  }
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"winoq: quantized Winograd convolution engine"};
  app.require_subcommand(1);

  GlobalFlags g;
  app.add_option("--seed", g.seed, "RNG seed");
  app.add_option("--threads", g.threads, "worker threads (0 = hardware)");
  app.add_option("--tile", g.tile, "tile size: f43 or f63")
      ->check(CLI::IsMember({"f43", "f63"}));
  app.add_option("--group-size", g.group_size, "quantization group size");
  app.add_option("--bits", g.bits, "precision: w8a8 or w4a8")
      ->check(CLI::IsMember({"w8a8", "w4a8"}));
  app.add_option("--out", g.out, "output file");

  auto* t_cmd = app.add_subcommand("transforms", "print/verify transform matrices");
  std::string scales_path;
  t_cmd->add_option("--scales", scales_path, "learned scales JSON");

  auto* c_cmd = app.add_subcommand("conv", "run one convolution");
  std::string x_path, w_path, mode = "wino-q8";
  size_t pad = 1;
  c_cmd->add_option("--x", x_path, "input tensor (.wqt)")->required();
  c_cmd->add_option("--w", w_path, "weight tensor (.wqt)")->required();
  c_cmd->add_option("--mode", mode, "fp | direct-q8 | wino-fp | wino-q8")
      ->check(CLI::IsMember({"fp", "direct-q8", "wino-fp", "wino-q8"}));
  c_cmd->add_option("--pad", pad, "spatial zero padding");

  auto* l_cmd = app.add_subcommand("learn-scales", "data-free scale tuning");
  std::string config_path, resume_path;
  l_cmd->add_option("--config", config_path, "tune config JSON");
  l_cmd->add_option("--resume", resume_path, "scales JSON to resume from");

  auto* b_cmd = app.add_subcommand("bench", "timing / fidelity suites");
  std::string suite = "conv", bench_scales, csv_path;
  size_t reps = 20;
  b_cmd->add_option("--suite", suite, "conv | fidelity");
  b_cmd->add_option("--scales", bench_scales, "learned scales JSON (fidelity)");
  b_cmd->add_option("--csv", csv_path, "also write CSV");
  b_cmd->add_option("--reps", reps, "timing repetitions");

  auto* v_cmd = app.add_subcommand("verify", "golden/oracle battery");
  bool verify_json = false;
  v_cmd->add_flag("--json", verify_json, "machine-readable results");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kUsageError;
  }

  try {
    if (t_cmd->parsed()) return cmd_transforms(g, scales_path);
    if (c_cmd->parsed()) return cmd_conv(g, x_path, w_path, mode, pad);
    if (l_cmd->parsed()) return cmd_learn_scales(g, config_path, resume_path);
    if (b_cmd->parsed()) return cmd_bench(g, suite, bench_scales, csv_path, reps);
    if (v_cmd->parsed()) return cmd_verify(g, verify_json);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  }
  return kUsageError;
}
