#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "winoq/bench.hpp"

using namespace winoq;

TEST_CASE("bench report schema") {
  const std::vector<ConvShape> shapes = {{1, 4, 8, 8, 4, 3, 1}};
  const nlohmann::json r =
      run_conv_bench(shapes, {1}, Tile::F43, 32, 7, /*reps=*/3);
  CHECK(r.contains("machine"));
  CHECK(r.at("machine").contains("compiler"));
  CHECK(r.at("suite") == "conv");
  REQUIRE(r.at("cases").size() == 1);
  const auto& c = r.at("cases")[0];
  CHECK(c.at("shape") == "n1_c4_k4_h8x8_p1");
  CHECK(c.at("direct_q8").at("median_ms").get<double>() >= 0.0);
  CHECK(c.at("wino_q8").at("sqnr_db").get<double>() > 10.0);
  CHECK(c.at("wino_vs_direct_ratio").get<double>() > 0.0);
}

TEST_CASE("degenerate shape is skipped with a reason") {
  // 3x3 input with no padding -> 1x1 output, smaller than an F(4,3) tile.
  const std::vector<ConvShape> shapes = {{1, 2, 3, 3, 2, 3, 0}};
  const nlohmann::json r = run_conv_bench(shapes, {1}, Tile::F43, 32, 7, 2);
  REQUIRE(r.at("cases").size() == 1);
  CHECK(r.at("cases")[0].contains("skipped"));
  CHECK_FALSE(r.at("cases")[0].contains("wino_q8"));
}

TEST_CASE("fidelity suite with and without learned scales") {
  const nlohmann::json base = run_fidelity_suite(Tile::F43, nullptr, 32, 11);
  CHECK(base.at("suite") == "fidelity");
  REQUIRE(base.at("cases").size() == 5);
  for (const auto& c : base.at("cases")) {
    CHECK(c.contains("standard"));
    CHECK_FALSE(c.contains("learned"));
    CHECK(c.at("standard").at("sqnr_db").get<double>() > 0.0);
    CHECK(c.at("standard").at("tap_ratio").get<double>() >= 1.0);
  }

  ScaleSet s = standard_scales(Tile::F43);
  const nlohmann::json both = run_fidelity_suite(Tile::F43, &s, 32, 11);
  for (const auto& c : both.at("cases")) {
    REQUIRE(c.contains("learned"));
    // Identical scales must reproduce the standard numbers exactly.
    CHECK(c.at("learned").at("sqnr_db") == c.at("standard").at("sqnr_db"));
  }
}

TEST_CASE("csv export flattens numeric fields") {
  const std::vector<ConvShape> shapes = {{1, 4, 8, 8, 4, 3, 1}};
  const nlohmann::json r = run_conv_bench(shapes, {1}, Tile::F43, 32, 7, 2);
  const std::string csv = report_to_csv(r);
  std::istringstream is(csv);
  std::string line;
  std::getline(is, line);
  CHECK(line == "case,field,value");
  bool saw_median = false, saw_ratio = false;
  while (std::getline(is, line)) {
    if (line.find("direct_q8.median_ms") != std::string::npos) saw_median = true;
    if (line.find("wino_vs_direct_ratio") != std::string::npos) saw_ratio = true;
    CHECK(std::count(line.begin(), line.end(), ',') == 2);
  }
  CHECK(saw_median);
  CHECK(saw_ratio);
}

TEST_CASE("timing harness basics") {
  size_t calls = 0;
  const BenchTiming t = time_fn([&] { ++calls; }, 5, 2);
  CHECK(calls == 7);
  CHECK(t.reps == 5);
  CHECK(t.min_ms <= t.median_ms);
}
