#pragma once

#include <cmath>
#include <cstddef>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "winoq/errors.hpp"
#include "winoq/mat.hpp"

namespace winoq {

enum class Tile { F43, F63 };

inline const char* tile_name(Tile t) { return t == Tile::F43 ? "F43" : "F63"; }

inline Tile tile_from_name(const std::string& s) {
  if (s == "F43" || s == "f43") return Tile::F43;
  if (s == "F63" || s == "f63") return Tile::F63;
  throw InvalidSpec("unknown tile: " + s);
}

// Homogeneous interpolation points (f_i, g_i); (1, 0) is the point at
// infinity.
struct PolyPoints {
  std::vector<std::pair<double, double>> points;

  size_t size() const { return points.size(); }

  void validate() const {
    for (size_t i = 0; i < points.size(); ++i)
      for (size_t j = i + 1; j < points.size(); ++j) {
        // Projective equality: f_i * g_j == f_j * g_i.
        const auto& [fi, gi] = points[i];
        const auto& [fj, gj] = points[j];
        if (fi * gj == fj * gi)
          throw SingularTransform("PolyPoints: duplicate projective point");
      }
  }
};

// Diagonal scale triple with s_a derived so that s_a * s_b * s_g == 1.
struct ScaleSet {
  std::vector<double> s_a, s_b, s_g;

  ScaleSet() = default;
  ScaleSet(std::vector<double> sb, std::vector<double> sg)
      : s_b(std::move(sb)), s_g(std::move(sg)) {
    if (s_b.size() != s_g.size())
      throw InvalidScale("ScaleSet: s_b/s_g length mismatch");
    s_a.resize(s_b.size());
    for (size_t i = 0; i < s_b.size(); ++i) {
      const double p = s_b[i] * s_g[i];
      if (!std::isfinite(s_b[i]) || !std::isfinite(s_g[i]) || p == 0.0 ||
          !std::isfinite(p))
        throw InvalidScale("ScaleSet: zero or non-finite scale element");
      s_a[i] = 1.0 / p;
    }
  }

  size_t size() const { return s_b.size(); }

  double max_condition_residual() const {
    double m = 0.0;
    for (size_t i = 0; i < s_b.size(); ++i)
      m = std::max(m, std::fabs(s_a[i] * s_b[i] * s_g[i] - 1.0));
    return m;
  }
};

// Entry (i, j) = f_i^j * g_i^(cols-1-j), with the 0^0 = 1 convention so the
// point at infinity (1, 0) yields the row [0, ..., 0, 1].
inline Mat vandermonde(const PolyPoints& pts, size_t cols) {
  if (cols < 1) throw InvalidShape("vandermonde: cols must be >= 1");
  const size_t n = pts.size();
  Mat v(n, cols);
  for (size_t i = 0; i < n; ++i) {
    const auto& [f, g] = pts.points[i];
    double fp = 1.0;  // f^j
    std::vector<double> gp(cols);
    gp[cols - 1] = 1.0;  // g^0
    for (size_t j = cols - 1; j > 0; --j) gp[j - 1] = gp[j] * g;
    for (size_t j = 0; j < cols; ++j) {
      v(i, j) = fp * gp[j];
      fp *= f;
    }
  }
  return v;
}

struct WinogradTransform {
  size_t m = 0, r = 0, n = 0;
  Mat a_t;  // m x n
  Mat b_t;  // n x n
  Mat g;    // n x r
  PolyPoints points;
  ScaleSet scales;
  // Unscaled Vandermonde factors, kept so rescaling never re-derives them.
  Mat v_a;      // V_{n x m}^T   (m x n)
  Mat v_b_int;  // V_{n x n}^-T  (n x n)
  Mat v_g;      // V_{n x r}     (n x r)
};

inline WinogradTransform build_transform(size_t m, size_t r,
                                         const PolyPoints& points,
                                         const ScaleSet& scales) {
  const size_t n = m + r - 1;
  if (points.size() != n)
    throw InvalidShape("build_transform: need n = m + r - 1 points");
  if (scales.size() != n)
    throw InvalidShape("build_transform: scale length must be n");
  points.validate();

  WinogradTransform t;
  t.m = m;
  t.r = r;
  t.n = n;
  t.points = points;
  t.scales = scales;
  t.v_a = vandermonde(points, m).transposed();
  t.v_b_int = vandermonde(points, n).inverted().transposed();
  t.v_g = vandermonde(points, r);
  t.a_t = t.v_a.col_scaled(scales.s_a);
  t.b_t = t.v_b_int.row_scaled(scales.s_b);
  t.g = t.v_g.row_scaled(scales.s_g);
  return t;
}

inline PolyPoints standard_points(Tile tile) {
  if (tile == Tile::F43)
    return PolyPoints{{{0, 1}, {1, 1}, {-1, 1}, {2, 1}, {-2, 1}, {1, 0}}};
  return PolyPoints{
      {{0, 1}, {1, 1}, {-1, 1}, {2, 1}, {-2, 1}, {0.5, 1}, {-0.5, 1}, {1, 0}}};
}

inline ScaleSet standard_scales(Tile tile) {
  if (tile == Tile::F43)
    return ScaleSet({4, -6, -6, 24, 24, 1},
                    {1.0 / 4, -1.0 / 6, -1.0 / 6, 1.0 / 24, 1.0 / 24, 1});
  return ScaleSet({1, -4.5, -4.5, 90, 90, 45.0 / 32, 45.0 / 32, 1},
                  {1, -2.0 / 9, -2.0 / 9, 1.0 / 90, 1.0 / 90, 32.0 / 45,
                   32.0 / 45, 1});
}

inline WinogradTransform standard_transform(Tile tile) {
  const size_t m = tile == Tile::F43 ? 4 : 6;
  return build_transform(m, 3, standard_points(tile), standard_scales(tile));
}

inline WinogradTransform rescale_transform(const WinogradTransform& t,
                                           const std::vector<double>& new_sb,
                                           const std::vector<double>& new_sg) {
  if (new_sb.size() != t.n || new_sg.size() != t.n)
    throw InvalidScale("rescale_transform: scale length must be n");
  ScaleSet scales(new_sb, new_sg);  // validates and derives s_a
  WinogradTransform out = t;
  out.scales = scales;
  out.a_t = t.v_a.col_scaled(scales.s_a);
  out.b_t = t.v_b_int.row_scaled(scales.s_b);
  out.g = t.v_g.row_scaled(scales.s_g);
  return out;
}

// ---- ScaleSet JSON: {"tile": "F63", "s_b": [...], "s_g": [...]} ----
// s_a is always recomputed on load.

inline nlohmann::json scales_to_json(Tile tile, const ScaleSet& s) {
  return nlohmann::json{{"tile", tile_name(tile)}, {"s_b", s.s_b}, {"s_g", s.s_g}};
}

inline std::pair<Tile, ScaleSet> scales_from_json(const nlohmann::json& j) {
  Tile tile = tile_from_name(j.at("tile").get<std::string>());
  ScaleSet s(j.at("s_b").get<std::vector<double>>(),
             j.at("s_g").get<std::vector<double>>());
  return {tile, s};
}

inline void save_scales(const std::string& path, Tile tile, const ScaleSet& s) {
  std::ofstream f(path);
  if (!f) throw FormatError("save_scales: cannot open " + path);
  f << scales_to_json(tile, s).dump(2) << "\n";
}

inline std::pair<Tile, ScaleSet> load_scales(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw FormatError("load_scales: cannot open " + path);
  nlohmann::json j;
  try {
    f >> j;
    return scales_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("load_scales: ") + e.what());
  }
}

}  // namespace winoq
