#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mvc/autodiff.hpp"
#include "mvc/tensor.hpp"

namespace mvc {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// First/second moment estimates for a fixed list of parameters.
struct AdamState {
  AdamOptions options;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t step = 0;

  AdamState() = default;
  AdamState(std::span<const Tensor> params, AdamOptions opts);
};

// One bias-corrected Adam update, in place.
void adam_step(std::span<Tensor> params, std::span<const Tensor> grads, AdamState& state);

// Convenience for tape gradients; parameters the map does not mention are
// treated as having zero gradient.
void adam_step(std::span<Tensor> params, const Gradients& grads, AdamState& state);

}  // namespace mvc
