#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "winoq/errors.hpp"
#include "winoq/tensor.hpp"

namespace winoq {

enum class Bits : uint8_t { b8 = 8, b4 = 4 };

inline int quant_max(Bits bits) { return bits == Bits::b8 ? 127 : 7; }

// Round half to even. The default FP environment rounds to nearest-even, so
// nearbyint is the pinned behaviour on every mainstream platform.
inline float round_half_even(float v) { return std::nearbyintf(v); }

// Symmetric min-max quantization of one group. All-zero groups get scale 1.
// Returns the scale; writes ints through `out`.
inline float quantize_group(const float* x, size_t count, Bits bits,
                            int8_t* out) {
  const int cmax = quant_max(bits);
  float amax = 0.0f;
  for (size_t i = 0; i < count; ++i) {
    const float a = std::fabs(x[i]);
    if (!std::isfinite(a)) throw ComputeError("quantize_group: non-finite input");
    if (a > amax) amax = a;
  }
  const float scale = amax > 0.0f ? amax / static_cast<float>(cmax) : 1.0f;
  const float inv = 1.0f / scale;
  for (size_t i = 0; i < count; ++i) {
    float q = round_half_even(x[i] * inv);
    if (q > cmax) q = static_cast<float>(cmax);
    if (q < -cmax) q = static_cast<float>(-cmax);
    out[i] = static_cast<int8_t>(q);
  }
  return scale;
}

struct GroupSpec {
  size_t group_size = 64;
  size_t axis = 1;  // reduction axis of the consuming GEMM

  // full_extent: actual reduction extent; a group_size equal to it is always
  // lawful (small Winograd-domain matrices); otherwise it must come from the
  // vectorization-friendly menu.
  void validate(size_t full_extent) const {
    if (group_size == full_extent) return;
    if (group_size != 32 && group_size != 64 && group_size != 128 &&
        group_size != 256)
      throw InvalidSpec("GroupSpec: group_size must be 32/64/128/256 or the full extent");
  }
};

// Int8 (or int4-valued) payload grouped along one axis; padded along that
// axis to a multiple of group_size, padding quantizes to zero.
struct GroupQuantized {
  std::vector<size_t> dims;   // logical (unpadded) dims
  size_t axis = 0;
  size_t padded_extent = 0;   // axis extent after padding
  size_t group_size = 0;
  Bits bits = Bits::b8;
  std::vector<int8_t> ints;   // padded layout, row-major over dims with axis extended
  std::vector<float> scales;  // [outer][block][inner]

  size_t outer() const {
    size_t o = 1;
    for (size_t i = 0; i < axis; ++i) o *= dims[i];
    return o;
  }
  size_t inner() const {
    size_t in = 1;
    for (size_t i = axis + 1; i < dims.size(); ++i) in *= dims[i];
    return in;
  }
  size_t blocks() const { return padded_extent / group_size; }

  float scale_at(size_t o, size_t block, size_t in) const {
    return scales[(o * blocks() + block) * inner() + in];
  }
};

inline GroupQuantized quantize_tensor(const Tensor& t, const GroupSpec& spec,
                                      Bits bits) {
  if (spec.axis >= t.rank()) throw InvalidSpec("quantize_tensor: bad axis");
  const size_t extent = t.dim(spec.axis);
  spec.validate(extent);
  t.require_finite("quantize_tensor");

  GroupQuantized q;
  q.dims = t.dims();
  q.axis = spec.axis;
  q.group_size = spec.group_size;
  q.bits = bits;
  q.padded_extent = (extent + spec.group_size - 1) / spec.group_size * spec.group_size;

  const size_t outer = q.outer();
  const size_t inner = q.inner();
  const size_t blocks = q.blocks();
  q.ints.assign(outer * q.padded_extent * inner, 0);
  q.scales.assign(outer * blocks * inner, 1.0f);

  // A group is {x[o, b*gs .. (b+1)*gs, in]} for fixed (o, in): strided by
  // `inner` in memory, so gather/scatter through a scratch buffer.
  std::vector<float> buf(spec.group_size);
  std::vector<int8_t> ibuf(spec.group_size);
  for (size_t o = 0; o < outer; ++o)
    for (size_t b = 0; b < blocks; ++b)
      for (size_t in = 0; in < inner; ++in) {
        size_t live = 0;
        for (size_t k = 0; k < spec.group_size; ++k) {
          const size_t a = b * spec.group_size + k;
          buf[k] = a < extent ? t[(o * extent + a) * inner + in] : 0.0f;
          if (a < extent) live = k + 1;
        }
        const float s = quantize_group(buf.data(), spec.group_size, bits, ibuf.data());
        q.scales[(o * blocks + b) * inner + in] = s;
        for (size_t k = 0; k < live; ++k) {
          const size_t a = b * spec.group_size + k;
          q.ints[(o * q.padded_extent + a) * inner + in] = ibuf[k];
        }
      }
  return q;
}

inline Tensor dequantize(const GroupQuantized& q) {
  Tensor t(q.dims);
  const size_t outer = q.outer();
  const size_t inner = q.inner();
  const size_t extent = q.dims[q.axis];
  for (size_t o = 0; o < outer; ++o)
    for (size_t a = 0; a < extent; ++a) {
      const size_t block = a / q.group_size;
      for (size_t in = 0; in < inner; ++in) {
        t[(o * extent + a) * inner + in] =
            static_cast<float>(q.ints[(o * q.padded_extent + a) * inner + in]) *
            q.scale_at(o, block, in);
      }
    }
  return t;
}

// Signal-to-quantization-noise ratio in dB, capped at the +-300 dB sentinels.
inline double sqnr(const Tensor& reference, const Tensor& test) {
  if (!reference.same_shape(test)) throw InvalidShape("sqnr: shape mismatch");
  double sig = 0.0, noise = 0.0;
  for (size_t i = 0; i < reference.size(); ++i) {
    const double r = reference[i];
    const double d = r - static_cast<double>(test[i]);
    sig += r * r;
    noise += d * d;
  }
  if (sig == 0.0) throw UndefinedMetric("sqnr: all-zero reference");
  constexpr double kCap = 300.0;
  if (noise == 0.0) return kCap;
  const double db = 10.0 * std::log10(sig / noise);
  return std::min(std::max(db, -kCap), kCap);
}

// ---- binary serialization, magic "WINOQQ01" ----

inline void save_group_quantized(const GroupQuantized& q, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("save_group_quantized: cannot open " + path);
  f.write("WINOQQ01", 8);
  const uint8_t bits = static_cast<uint8_t>(q.bits);
  f.write(reinterpret_cast<const char*>(&bits), 1);
  auto put_u32 = [&f](uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    f.write(reinterpret_cast<const char*>(b), 4);
  };
  put_u32(static_cast<uint32_t>(q.group_size));
  put_u32(static_cast<uint32_t>(q.axis));
  put_u32(static_cast<uint32_t>(q.dims.size()));
  for (size_t d : q.dims) put_u32(static_cast<uint32_t>(d));
  f.write(reinterpret_cast<const char*>(q.ints.data()),
          static_cast<std::streamsize>(q.ints.size()));
  f.write(reinterpret_cast<const char*>(q.scales.data()),
          static_cast<std::streamsize>(q.scales.size() * 4));
  if (!f) throw FormatError("save_group_quantized: write failed");
}

inline GroupQuantized load_group_quantized(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("load_group_quantized: cannot open " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, "WINOQQ01", 8) != 0)
    throw FormatError("load_group_quantized: bad magic");
  uint8_t bits;
  f.read(reinterpret_cast<char*>(&bits), 1);
  auto get_u32 = [&f]() {
    unsigned char b[4];
    f.read(reinterpret_cast<char*>(b), 4);
    return uint32_t(b[0]) | (uint32_t(b[1]) << 8) | (uint32_t(b[2]) << 16) |
           (uint32_t(b[3]) << 24);
  };
  GroupQuantized q;
  q.bits = bits == 4 ? Bits::b4 : Bits::b8;
  q.group_size = get_u32();
  q.axis = get_u32();
  const uint32_t rank = get_u32();
  if (!f || rank == 0 || rank > 4 || q.group_size == 0)
    throw FormatError("load_group_quantized: bad header");
  q.dims.resize(rank);
  for (auto& d : q.dims) d = get_u32();
  if (q.axis >= rank) throw FormatError("load_group_quantized: bad axis");
  const size_t extent = q.dims[q.axis];
  q.padded_extent = (extent + q.group_size - 1) / q.group_size * q.group_size;
  q.ints.resize(q.outer() * q.padded_extent * q.inner());
  q.scales.resize(q.outer() * q.blocks() * q.inner());
  f.read(reinterpret_cast<char*>(q.ints.data()),
         static_cast<std::streamsize>(q.ints.size()));
  f.read(reinterpret_cast<char*>(q.scales.data()),
         static_cast<std::streamsize>(q.scales.size() * 4));
  if (!f) throw FormatError("load_group_quantized: truncated payload");
  return q;
}

}  // namespace winoq
