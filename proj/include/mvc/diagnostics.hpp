#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace mvc {

// Outcome of one verification suite. `max_residual` is the largest identity
// or error residual the suite measured and `min_margin` the smallest slack
// against its tolerance (negative means a violation).
struct SuiteReport {
  std::string suite;
  std::size_t cases = 0;
  double max_residual = 0.0;
  double min_margin = 0.0;
  bool pass = false;
  // Suite-specific detail lines (one per group of cases).
  std::vector<std::string> notes;

  nlohmann::json to_json() const;
};

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = {"gradients", "kl-mc", "infotheory", "infonce"};
  return names;
}

// Finite differences against reverse mode: `seeds` random two-layer nets and
// loss components (< 1e-6) plus the full tiny model with every term active
// (v=2, d=2, K=2, n=4; < 1e-5).
SuiteReport gradient_suite(std::size_t seeds);

// Worst relative error of the full tiny model (no supervisory view, every
// loss term on, lambda_nce > 0) for one random draw.
double full_model_gradient_error(std::uint64_t seed);

// Closed-form Gaussian KL against Monte Carlo on `seeds` random pairs and the
// two hand-derived anchors; every case within 3 standard errors.
SuiteReport kl_mc_suite(std::size_t seeds, std::size_t samples = 1000000);

// Chain rules, the decomposition identity, the redundancy bounds and the
// sufficiency corollary on `seeds` random joints of each kind.
SuiteReport infotheory_suite(std::size_t seeds);

// InfoNCE on paired 1-D Gaussians (rho = 0, 0.5, 0.9; n = 512) averaged over
// `batches` batches: bounded by ln n, increasing in rho, and not above the
// analytic mutual information by more than 3 standard errors.
SuiteReport infonce_suite(std::size_t batches, std::size_t n = 512);

// Dispatch by name; throws ConfigError for an unknown suite.
SuiteReport run_suite(const std::string& name, std::size_t seeds);

}  // namespace mvc
