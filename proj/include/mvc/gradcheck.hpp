#pragma once

#include <functional>
#include <span>
#include <vector>

#include "mvc/autodiff.hpp"

namespace mvc {

// Builds a scalar loss on `tape` from parameter nodes (one per tensor, in
// order). Must be deterministic.
using LossBuilder = std::function<Var(Tape& tape, std::span<const Var> params)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
  // Location of the worst coordinate.
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// Compares tape gradients with central differences (f(p+eps) - f(p-eps)) / 2eps
// for every coordinate. Relative error uses max(|analytic|, |numeric|, 1e-12)
// as denominator. Throws OracleError if two evaluations at the same point
// disagree.
GradCheckResult finite_difference_check(const LossBuilder& loss_fn, std::vector<Tensor> params, double eps);

}  // namespace mvc
