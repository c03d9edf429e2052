#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mvc/tensor.hpp"

namespace mvc {

// Exact probability table over the product of small finite alphabets.
// At most 4 axes with at most 8 symbols each.
class DiscreteJoint {
 public:
  static constexpr std::size_t kMaxAxes = 4;
  static constexpr std::size_t kMaxAlphabet = 8;

  DiscreteJoint(std::vector<std::string> axes, std::vector<std::size_t> sizes, std::vector<double> probs);

  const std::vector<std::string>& axes() const noexcept { return axes_; }
  const std::vector<std::size_t>& sizes() const noexcept { return sizes_; }
  const std::vector<double>& table() const noexcept { return probs_; }
  std::size_t cells() const noexcept { return probs_.size(); }

  std::size_t axis(std::string_view name) const;
  bool has_axis(std::string_view name) const;
  // Linear index of a full multi-index (row-major, first axis slowest).
  std::size_t index(const std::vector<std::size_t>& symbols) const;
  double p(const std::vector<std::size_t>& symbols) const { return probs_[index(symbols)]; }

  // Marginal over the named axes, row-major in the order the names are given.
  std::vector<double> marginal(const std::vector<std::string>& names) const;

 private:
  std::vector<std::string> axes_;
  std::vector<std::size_t> sizes_;
  std::vector<double> probs_;
};

using AxisSet = std::vector<std::string>;

// H(axes) in nats; 0 log 0 = 0.
double entropy(const DiscreteJoint& joint, const AxisSet& axes);
// I(A; B | C) in nats by exact summation; C may be empty.
double mutual_info(const DiscreteJoint& joint, const AxisSet& a, const AxisSet& b, const AxisSet& c = {});
// Co-information I(x; y; z) by inclusion-exclusion over entropies.
double co_information(const DiscreteJoint& joint, const std::string& x, const std::string& y, const std::string& z);

struct ChainRuleResiduals {
  double chain = 0.0;         // |I(xy;z) - I(y;z) - I(x;z|y)|
  double multivariate = 0.0;  // |I(x;y;z) - (I(y;z) - I(y;z|x))|
  double min_mi = 0.0;        // smallest (conditional) MI evaluated, for positivity
};

// Needs axes "x", "y", "z".
ChainRuleResiduals verify_chain_rules(const DiscreteJoint& joint);

// Needs axes "xi", "xj", "z" with I(xj; z | xi) = 0. Returns
// |I(xi;z) - I(z;xi|xj) - I(xj;z)|.
double verify_decomposition(const DiscreteJoint& joint);

struct RedundancyReport {
  // rhs - lhs of I(xi;y|z) <= I(xi;xj|z) + I(xi;y|xj)
  double redundancy_margin = 0.0;
  // I(y;z) - [I(y;xi xj) - I(xi;xj|z) - I(xi;y|xj) - I(xj;y|xi)]
  double lower_bound_margin = 0.0;
  // Hypotheses of the sufficiency corollary hold (mutual redundancy and
  // I(xi;xj|z) = 0, within tolerance).
  bool corollary_applies = false;
  // |I(y;z) - I(y;xi xj)| (only meaningful when corollary_applies)
  double corollary_residual = 0.0;
  // I(xi;y|z), which must vanish when xi is redundant for y given xj and z
  // is sufficient for xj.
  double sufficiency_leak = 0.0;
};

// Needs axes "xi", "xj", "y", "z" with z depending on xi only.
RedundancyReport verify_redundancy_bounds(const DiscreteJoint& joint);

// Tolerance used for "exactly zero" hypotheses and identity residuals.
inline constexpr double kInfoTolerance = 1e-12;

// --- Random joints ----------------------------------------------------------

// Dirichlet(1) table over the given alphabet sizes.
DiscreteJoint random_joint(const std::vector<std::string>& axes, const std::vector<std::size_t>& sizes, Rng& rng);

// p(xi, xj, y) ~ Dirichlet(1) and z | xi with Dirichlet(1) rows, so z is a
// representation of xi by construction. Axes: xi, xj, y, z.
DiscreteJoint random_constrained_joint(std::size_t size_xi, std::size_t size_xj, std::size_t size_y,
                                       std::size_t size_z, Rng& rng);

// Mutually redundant views: xi = (a, noise_i), xj = (a, noise_j), y = g(a),
// z = a read off xi. Shared part a has `shared` symbols (<= 4), noise is a bit.
DiscreteJoint redundant_joint(std::size_t shared, std::size_t size_y, Rng& rng);

// --- Gaussian oracles -------------------------------------------------------

struct MonteCarloEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
};

// Monte-Carlo estimate of E_{z ~ N(mu_b, var_b)}[ln N(z; mu_b, var_b) - ln N(z; mu_a, var_a)]
// for diagonal Gaussians, i.e. the same direction as cross_view_kl with
// (mu_a, var_a) in the inverse position.
MonteCarloEstimate mc_gaussian_kl(const std::vector<double>& mu_a, const std::vector<double>& var_a,
                                  const std::vector<double>& mu_b, const std::vector<double>& var_b,
                                  std::size_t n_samples, std::uint64_t seed);

// Closed form of the same divergence.
double gaussian_kl_closed_form(const std::vector<double>& mu_a, const std::vector<double>& var_a,
                               const std::vector<double>& mu_b, const std::vector<double>& var_b);

// -1/2 ln(1 - rho^2): mutual information of a bivariate normal.
double gaussian_mi_reference(double rho);

}  // namespace mvc
