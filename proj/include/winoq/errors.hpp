#pragma once

#include <stdexcept>
#include <string>

namespace winoq {

struct InvalidShape : std::runtime_error {
  explicit InvalidShape(const std::string& msg) : std::runtime_error(msg) {}
};

struct FormatError : std::runtime_error {
  explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ComputeError : std::runtime_error {
  explicit ComputeError(const std::string& msg) : std::runtime_error(msg) {}
};

struct InvalidSpec : std::runtime_error {
  explicit InvalidSpec(const std::string& msg) : std::runtime_error(msg) {}
};

struct SingularTransform : std::runtime_error {
  explicit SingularTransform(const std::string& msg) : std::runtime_error(msg) {}
};

struct InvalidScale : std::runtime_error {
  explicit InvalidScale(const std::string& msg) : std::runtime_error(msg) {}
};

struct UndefinedMetric : std::runtime_error {
  explicit UndefinedMetric(const std::string& msg) : std::runtime_error(msg) {}
};

struct TuneDiverged : std::runtime_error {
  explicit TuneDiverged(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace winoq
