#include <doctest.h>

#include "oracles.hpp"
#include "winoq/conv_ref.hpp"

using namespace winoq;

TEST_CASE("identity kernel is a passthrough") {
  const ConvShape s{1, 2, 6, 6, 2, 3, 1};
  const Tensor x = Tensor::random({1, 2, 6, 6}, RngSpec::gaussian(201));
  Tensor w = Tensor::zeros({2, 2, 3, 3});
  w.at4(0, 0, 1, 1) = 1.0f;
  w.at4(1, 1, 1, 1) = 1.0f;
  const Tensor y = conv_direct_fp(x, w, s);
  REQUIRE(y.dims() == x.dims());
  for (size_t i = 0; i < y.size(); ++i) CHECK(y[i] == doctest::Approx(x[i]));
}

TEST_CASE("all-ones kernel sums the window") {
  const ConvShape s{1, 3, 5, 5, 1, 3, 1};
  const Tensor x = Tensor::constant({1, 3, 5, 5}, 2.0f);
  const Tensor w = Tensor::constant({1, 3, 3, 3}, 1.0f);
  const Tensor y = conv_direct_fp(x, w, s);
  // Interior pixel: 9 * C_in * c.
  CHECK(y.at4(0, 0, 2, 2) == doctest::Approx(9.0 * 3 * 2.0));
}

TEST_CASE("matches naive triple-loop oracle") {
  Xoshiro256 rng(202);
  for (int trial = 0; trial < 10; ++trial) {
    const size_t C = 1 + rng.next_u64() % 4;
    const size_t K = 1 + rng.next_u64() % 4;
    const size_t H = 5 + rng.next_u64() % 6;
    const size_t pad = rng.next_u64() % 2;
    const ConvShape s{1, C, H, H, K, 3, pad};
    const Tensor x = Tensor::random({1, C, H, H}, RngSpec::gaussian(300 + trial));
    const Tensor w =
        Tensor::random({K, C, 3, 3}, RngSpec::gaussian(400 + trial, 0.0, 0.5));
    const Tensor got = conv_direct_fp(x, w, s);
    const Tensor want = oracles::conv_naive(x, w, pad);
    CHECK(oracles::max_rel_err(want, got) <= 1e-6);
  }
}

TEST_CASE("shape mismatch raises") {
  const ConvShape s{1, 2, 6, 6, 2, 3, 1};
  const Tensor x = Tensor::zeros({1, 3, 6, 6});
  const Tensor w = Tensor::zeros({2, 2, 3, 3});
  CHECK_THROWS_AS(conv_direct_fp(x, w, s), InvalidShape);
  const ConvShape tiny{1, 1, 2, 2, 1, 3, 0};
  CHECK_THROWS_AS(tiny.validate(), InvalidShape);
}

TEST_CASE("linearity in the FP path") {
  const ConvShape s{1, 2, 8, 8, 3, 3, 1};
  const Tensor x = Tensor::random({1, 2, 8, 8}, RngSpec::gaussian(203));
  const Tensor w = Tensor::random({3, 2, 3, 3}, RngSpec::gaussian(204, 0.0, 0.4));
  Tensor x2 = x;
  for (size_t i = 0; i < x2.size(); ++i) x2[i] *= 2.5f;
  const Tensor y = conv_direct_fp(x, w, s);
  const Tensor y2 = conv_direct_fp(x2, w, s);
  for (size_t i = 0; i < y.size(); ++i)
    CHECK(y2[i] == doctest::Approx(2.5f * y[i]).epsilon(1e-5));
}

TEST_CASE("quantized direct conv: fidelity and fake-quant equivalence") {
  const ConvShape s{1, 32, 10, 10, 16, 3, 1};
  const Tensor x = Tensor::random({1, 32, 10, 10}, RngSpec::gaussian(205));
  const Tensor w =
      Tensor::random({16, 32, 3, 3}, RngSpec::gaussian(206, 0.0, 0.1));
  const Tensor y_fp = conv_direct_fp(x, w, s);
  const Tensor y_q = conv_direct_q8(x, w, s, 64);
  const double db = sqnr(y_fp, y_q);
  CHECK(db >= 30.0);  // group-quantized direct conv stays close to FP

  // Fake-quant oracle: FP conv over dequantized im2col operands.
  const size_t kk = 32 * 9;
  const GroupSpec spec{64, 1};
  const GroupQuantized xq = quantize_tensor(im2col(x, s), spec, Bits::b8);
  Tensor wmat({16, kk});
  std::copy(w.data(), w.data() + w.size(), wmat.data());
  const GroupQuantized wq = quantize_tensor(wmat, spec, Bits::b8);
  const Tensor xd = dequantize(xq), wd = dequantize(wq);
  Tensor want({xd.dim(0), 16});
  gemm_fp(xd.data(), wd.data(), xd.dim(0), 16, kk, want.data());
  const Tensor want_nchw = cols_to_nchw(want, s);
  CHECK(oracles::max_rel_err(want_nchw, y_q) <= 1e-5);
}

TEST_CASE("quantized conv of zeros is zero") {
  const ConvShape s{1, 4, 6, 6, 2, 3, 1};
  const Tensor x = Tensor::zeros({1, 4, 6, 6});
  const Tensor w = Tensor::random({2, 4, 3, 3}, RngSpec::gaussian(207));
  const Tensor y = conv_direct_q8(x, w, s, 36);
  for (size_t i = 0; i < y.size(); ++i) CHECK(y[i] == 0.0f);
}

TEST_CASE("group layout mismatch raises") {
  const ConvShape s{1, 8, 6, 6, 2, 3, 0};
  const Tensor x = Tensor::random({1, 8, 6, 6}, RngSpec::gaussian(208));
  const Tensor w = Tensor::random({2, 8, 3, 3}, RngSpec::gaussian(209));
  const GroupQuantized xq = quantize_tensor(im2col(x, s), GroupSpec{72, 1}, Bits::b8);
  Tensor wmat({2, 72});
  std::copy(w.data(), w.data() + w.size(), wmat.data());
  const GroupQuantized wq = quantize_tensor(wmat, GroupSpec{32, 1}, Bits::b8);
  CHECK_THROWS_AS(conv_direct_q8(xq, wq, s), InvalidSpec);
}
