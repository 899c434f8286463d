#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <string>
#include <variant>
#include <vector>

#include "winoq/errors.hpp"
#include "winoq/rng.hpp"

namespace winoq {

struct RngSpec {
  enum class Kind { gaussian, uniform };
  Kind kind = Kind::gaussian;
  uint64_t seed = 0;
  double mean = 0.0, stddev = 1.0;  // gaussian
  double lo = -1.0, hi = 1.0;       // uniform

  static RngSpec gaussian(uint64_t seed, double mean = 0.0, double stddev = 1.0) {
    if (!(stddev > 0.0)) throw InvalidSpec("RngSpec: stddev must be > 0");
    RngSpec s;
    s.kind = Kind::gaussian;
    s.seed = seed;
    s.mean = mean;
    s.stddev = stddev;
    return s;
  }
  static RngSpec uniform(uint64_t seed, double lo, double hi) {
    if (!(lo < hi)) throw InvalidSpec("RngSpec: lo must be < hi");
    RngSpec s;
    s.kind = Kind::uniform;
    s.seed = seed;
    s.lo = lo;
    s.hi = hi;
    return s;
  }
};

// Dense row-major float tensor, NCHW order for 4-D shapes.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<size_t> dims, float fill_value = 0.0f)
      : dims_(std::move(dims)) {
    validate_dims();
    data_.assign(element_count(), fill_value);
  }

  static Tensor zeros(std::vector<size_t> dims) { return Tensor(std::move(dims)); }

  static Tensor constant(std::vector<size_t> dims, float v) {
    return Tensor(std::move(dims), v);
  }

  static Tensor random(std::vector<size_t> dims, const RngSpec& spec) {
    Tensor t(std::move(dims));
    Xoshiro256 rng(spec.seed);
    if (spec.kind == RngSpec::Kind::gaussian) {
      for (auto& v : t.data_)
        v = static_cast<float>(rng.next_gaussian(spec.mean, spec.stddev));
    } else {
      for (auto& v : t.data_)
        v = static_cast<float>(rng.next_uniform(spec.lo, spec.hi));
    }
    return t;
  }

  const std::vector<size_t>& dims() const { return dims_; }
  size_t rank() const { return dims_.size(); }
  size_t dim(size_t i) const { return dims_.at(i); }
  size_t size() const { return data_.size(); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  float& operator[](size_t i) { return data_[i]; }
  float operator[](size_t i) const { return data_[i]; }

  // 4-D accessor (N, C, H, W).
  float& at4(size_t n, size_t c, size_t h, size_t w) {
    return data_[((n * dims_[1] + c) * dims_[2] + h) * dims_[3] + w];
  }
  float at4(size_t n, size_t c, size_t h, size_t w) const {
    return data_[((n * dims_[1] + c) * dims_[2] + h) * dims_[3] + w];
  }

  bool all_finite() const {
    for (float v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  void require_finite(const char* what) const {
    if (!all_finite()) throw ComputeError(std::string(what) + ": non-finite values");
  }

  bool same_shape(const Tensor& o) const { return dims_ == o.dims_; }

  void save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw FormatError("tensor_save: cannot open " + path);
    f.write(kMagic, 8);
    const uint32_t rank32 = static_cast<uint32_t>(dims_.size());
    write_le(f, rank32);
    for (size_t d : dims_) write_le(f, static_cast<uint64_t>(d));
    static_assert(sizeof(float) == 4);
    f.write(reinterpret_cast<const char*>(data_.data()),
            static_cast<std::streamsize>(data_.size() * 4));
    if (!f) throw FormatError("tensor_save: write failed for " + path);
  }

  static Tensor load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("tensor_load: cannot open " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, kMagic, 8) != 0)
      throw FormatError("tensor_load: bad magic in " + path);
    uint32_t rank32 = read_le<uint32_t>(f);
    if (!f || rank32 == 0 || rank32 > 4)
      throw FormatError("tensor_load: bad rank in " + path);
    std::vector<size_t> dims(rank32);
    uint64_t count = 1;
    for (auto& d : dims) {
      uint64_t e = read_le<uint64_t>(f);
      if (!f || e == 0 || e > (uint64_t(1) << 32))
        throw FormatError("tensor_load: bad extent in " + path);
      if (count > (uint64_t(1) << 40) / e)
        throw FormatError("tensor_load: dims overflow in " + path);
      count *= e;
      d = static_cast<size_t>(e);
    }
    Tensor t;
    t.dims_ = std::move(dims);
    t.data_.resize(static_cast<size_t>(count));
    f.read(reinterpret_cast<char*>(t.data_.data()),
           static_cast<std::streamsize>(count * 4));
    if (!f || static_cast<uint64_t>(f.gcount()) != count * 4)
      throw FormatError("tensor_load: truncated payload in " + path);
    return t;
  }

 private:
  static constexpr const char kMagic[9] = "WINOQT01";

  void validate_dims() const {
    if (dims_.empty() || dims_.size() > 4)
      throw InvalidShape("Tensor: rank must be 1..4");
    for (size_t d : dims_)
      if (d == 0) throw InvalidShape("Tensor: zero extent");
  }

  size_t element_count() const {
    return std::accumulate(dims_.begin(), dims_.end(), size_t{1},
                           std::multiplies<size_t>());
  }

  template <typename T>
  static void write_le(std::ofstream& f, T v) {
    unsigned char buf[sizeof(T)];
    for (size_t i = 0; i < sizeof(T); ++i)
      buf[i] = static_cast<unsigned char>((static_cast<uint64_t>(v) >> (8 * i)) & 0xff);
    f.write(reinterpret_cast<const char*>(buf), sizeof(T));
  }

  template <typename T>
  static T read_le(std::ifstream& f) {
    unsigned char buf[sizeof(T)];
    f.read(reinterpret_cast<char*>(buf), sizeof(T));
    uint64_t v = 0;
    for (size_t i = 0; i < sizeof(T); ++i)
      v |= static_cast<uint64_t>(buf[i]) << (8 * i);
    return static_cast<T>(v);
  }

  std::vector<size_t> dims_;
  std::vector<float> data_;
};

}  // namespace winoq
