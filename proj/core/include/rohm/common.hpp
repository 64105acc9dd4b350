#pragma once

#include <torch/torch.h>

#include <stdexcept>
#include <string>

namespace rohm {

using Tensor = torch::Tensor;

// All thrown errors derive from Error so callers can map them to exit codes.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& msg) : Error(msg) {}
};

inline torch::TensorOptions f64() { return torch::dtype(torch::kFloat64); }
inline torch::TensorOptions f32() { return torch::dtype(torch::kFloat32); }

// Deterministic per-call generator. torch's global seed is left alone so
// independent components do not perturb each other.
inline torch::Generator make_generator(uint64_t seed) {
  auto gen = at::detail::createCPUGenerator(seed);
  return gen;
}

constexpr double kFps = 30.0;

}  // namespace rohm
