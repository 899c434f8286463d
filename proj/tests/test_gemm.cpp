#include <doctest.h>

#include <cstdint>
#include <vector>

#include "winoq/gemm.hpp"
#include "winoq/rng.hpp"

using namespace winoq;

namespace {

GroupQuantized random_q(Xoshiro256& rng, size_t rows, size_t k, size_t gs) {
  Tensor t({rows, k});
  for (size_t i = 0; i < t.size(); ++i)
    t[i] = static_cast<float>(rng.next_gaussian(0.0, 1.0));
  return quantize_tensor(t, GroupSpec{gs, 1}, Bits::b8);
}

}  // namespace

TEST_CASE("scalar gemm equals f64 gemm of dequantized operands") {
  Xoshiro256 rng(101);
  const GroupQuantized a = random_q(rng, 5, 64, 64);
  const GroupQuantized b = random_q(rng, 7, 64, 64);
  const Tensor out = gemm_q8_scalar(a, b);
  const Tensor ad = dequantize(a), bd = dequantize(b);
  Tensor want({5, 7});
  gemm_fp(ad.data(), bd.data(), 5, 7, 64, want.data());
  for (size_t i = 0; i < out.size(); ++i)
    CHECK(out[i] == doctest::Approx(want[i]).epsilon(1e-6));
}

TEST_CASE("multi-group equals sum of per-group gemms") {
  Xoshiro256 rng(102);
  const size_t K = 96, gs = 32;
  const GroupQuantized a = random_q(rng, 3, K, gs);
  const GroupQuantized b = random_q(rng, 4, K, gs);
  const Tensor whole = gemm_q8_scalar(a, b);
  Tensor sum({3, 4});
  for (size_t g = 0; g < K / gs; ++g) {
    std::vector<int8_t> ag(3 * gs), bg(4 * gs);
    std::vector<float> sa(3), sb(4);
    for (size_t m = 0; m < 3; ++m) {
      sa[m] = a.scales[m * 3 + g];
      for (size_t k = 0; k < gs; ++k) ag[m * gs + k] = a.ints[m * K + g * gs + k];
    }
    for (size_t n = 0; n < 4; ++n) {
      sb[n] = b.scales[n * 3 + g];
      for (size_t k = 0; k < gs; ++k) bg[n * gs + k] = b.ints[n * K + g * gs + k];
    }
    Tensor part({3, 4});
    gemm_q8_scalar(ag.data(), sa.data(), bg.data(), sb.data(), 3, 4, gs, gs,
                   part.data());
    for (size_t i = 0; i < part.size(); ++i) sum[i] += part[i];
  }
  for (size_t i = 0; i < whole.size(); ++i)
    CHECK(whole[i] == doctest::Approx(sum[i]).epsilon(1e-5));
}

TEST_CASE("identity operands") {
  // A = I scaled trivially: exact integer product recovery.
  const size_t n = 4;
  std::vector<int8_t> a(n * n, 0), b(n * n);
  std::vector<float> sa(n, 1.0f), sb(n, 1.0f);
  for (size_t i = 0; i < n; ++i) a[i * n + i] = 1;
  Xoshiro256 rng(103);
  for (auto& v : b) v = static_cast<int8_t>(rng.next_u64() % 255 - 127);
  Tensor out({n, n});
  gemm_q8_scalar(a.data(), sa.data(), b.data(), sb.data(), n, n, n, n, out.data());
  for (size_t m = 0; m < n; ++m)
    for (size_t j = 0; j < n; ++j) CHECK(out[m * n + j] == float(b[j * n + m]));
}

TEST_CASE("pack/unpack roundtrip and layout formula") {
  Xoshiro256 rng(104);
  const GroupQuantized w = random_q(rng, 13, 64, 32);
  const PackedWeights p = pack_weights(w, 8);
  const GroupQuantized u = unpack_weights(p, 64);
  CHECK(u.ints == w.ints);
  CHECK(u.scales == w.scales);

  // Element (n, k) at offset ((n/V)*K + k)*V + (n%V).
  for (auto [n, k] : std::vector<std::pair<size_t, size_t>>{
           {0, 0}, {1, 5}, {7, 63}, {8, 0}, {12, 33}, {9, 1}, {3, 40},
           {11, 62}, {5, 17}, {10, 9}}) {
    CHECK(p.ints[((n / 8) * 64 + k) * 8 + (n % 8)] == w.ints[n * 64 + k]);
  }

  // vector_width = 1 packs as the identity permutation.
  const PackedWeights p1 = pack_weights(w, 1);
  CHECK(p1.ints == w.ints);
}

TEST_CASE("fast kernel bit-equals scalar kernel") {
  Xoshiro256 rng(105);
  // Exhaustive small shapes, raw kernels so sub-minimum group sizes are
  // exercised too.
  for (size_t M : {1u, 2u, 5u, 9u, 17u})
    for (size_t N : {1u, 3u, 8u, 17u})
      for (size_t K : {8u, 16u}) {
        for (size_t gs : {K, size_t(8)}) {
          std::vector<int8_t> ai(M * K), bi(N * K);
          std::vector<float> sa(M * (K / gs)), sb(N * (K / gs));
          for (auto& v : ai) v = static_cast<int8_t>(rng.next_u64() % 255) - 127;
          for (auto& v : bi) v = static_cast<int8_t>(rng.next_u64() % 255) - 127;
          for (auto& v : sa) v = static_cast<float>(rng.next_uniform(1e-3, 0.1));
          for (auto& v : sb) v = static_cast<float>(rng.next_uniform(1e-3, 0.1));
          std::vector<float> s(M * N), f(M * N);
          gemm_q8_scalar(ai.data(), sa.data(), bi.data(), sb.data(), M, N, K,
                         gs, s.data());
          const PackedWeights p =
              pack_weights_raw(bi.data(), sb.data(), N, K, gs, 8);
          gemm_q8_fast(ai.data(), sa.data(), p, M, f.data());
          for (size_t i = 0; i < s.size(); ++i) CHECK(s[i] == f[i]);
        }
      }
  // Randomized larger shapes and widths.
  for (int trial = 0; trial < 20; ++trial) {
    const size_t M = 1 + rng.next_u64() % 40;
    const size_t N = 1 + rng.next_u64() % 70;
    const size_t K = 32 * (1 + rng.next_u64() % 4);
    const size_t V = 1 + rng.next_u64() % 16;
    const GroupQuantized a = random_q(rng, M, K, 32);
    const GroupQuantized b = random_q(rng, N, K, 32);
    const Tensor s = gemm_q8_scalar(a, b);
    const Tensor f = gemm_q8_fast(a, pack_weights(b, V));
    for (size_t i = 0; i < s.size(); ++i) CHECK(s[i] == f[i]);
  }
}

TEST_CASE("degenerate 1x1x1") {
  int8_t a = -3, b = 5;
  float sa = 0.5f, sb = 2.0f;
  Tensor out({1, 1});
  gemm_q8_scalar(&a, &sa, &b, &sb, 1, 1, 1, 1, out.data());
  CHECK(out[0] == -15.0f);
  const PackedWeights p = pack_weights_raw(&b, &sb, 1, 1, 1, 4);
  Tensor out2({1, 1});
  gemm_q8_fast(&a, &sa, p, 1, out2.data());
  CHECK(out2[0] == -15.0f);
}
