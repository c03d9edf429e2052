#include "mvc/infotheory.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>

#include "mvc/errors.hpp"

namespace mvc {

DiscreteJoint::DiscreteJoint(std::vector<std::string> axes, std::vector<std::size_t> sizes, std::vector<double> probs)
    : axes_(std::move(axes)), sizes_(std::move(sizes)), probs_(std::move(probs)) {
  if (axes_.empty() || axes_.size() > kMaxAxes) throw ContractError("joint needs 1 to 4 axes");
  if (axes_.size() != sizes_.size()) throw ContractError("one alphabet size per axis");
  std::set<std::string> unique(axes_.begin(), axes_.end());
  if (unique.size() != axes_.size()) throw ContractError("duplicate axis name");
  std::size_t cells = 1;
  for (auto s : sizes_) {
    if (s < 1 || s > kMaxAlphabet) throw ContractError("alphabet sizes must lie in [1, 8]");
    cells *= s;
  }
  if (probs_.size() != cells) throw ContractError("probability table has the wrong number of cells");
  double total = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw ContractError("probabilities must be finite and nonnegative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12) throw ContractError("probability table does not sum to 1");
}

std::size_t DiscreteJoint::axis(std::string_view name) const {
  for (std::size_t i = 0; i < axes_.size(); ++i) {
    if (axes_[i] == name) return i;
  }
  throw ContractError("joint has no axis '" + std::string(name) + "'");
}

bool DiscreteJoint::has_axis(std::string_view name) const {
  return std::find(axes_.begin(), axes_.end(), name) != axes_.end();
}

std::size_t DiscreteJoint::index(const std::vector<std::size_t>& symbols) const {
  if (symbols.size() != sizes_.size()) throw ContractError("multi-index rank mismatch");
  std::size_t idx = 0;
  for (std::size_t a = 0; a < sizes_.size(); ++a) {
    if (symbols[a] >= sizes_[a]) throw ContractError("symbol out of range");
    idx = idx * sizes_[a] + symbols[a];
  }
  return idx;
}

namespace {

// Projection of full-table cells onto a subset of axes.
struct Projection {
  std::vector<std::size_t> cell_to_sub;  // full index -> marginal index
  std::size_t sub_cells = 1;
};

Projection project(const DiscreteJoint& joint, const std::vector<std::size_t>& axes) {
  const auto& sizes = joint.sizes();
  const std::size_t rank = sizes.size();
  std::vector<std::size_t> strides(rank, 0);
  Projection proj;
  for (std::size_t k = axes.size(); k-- > 0;) {
    strides[axes[k]] = proj.sub_cells;
    proj.sub_cells *= sizes[axes[k]];
  }
  proj.cell_to_sub.resize(joint.cells());
  std::vector<std::size_t> symbols(rank, 0);
  for (std::size_t cell = 0; cell < joint.cells(); ++cell) {
    std::size_t sub = 0;
    for (std::size_t a = 0; a < rank; ++a) sub += symbols[a] * strides[a];
    proj.cell_to_sub[cell] = sub;
    for (std::size_t a = rank; a-- > 0;) {
      if (++symbols[a] < sizes[a]) break;
      symbols[a] = 0;
    }
  }
  return proj;
}

std::vector<std::size_t> resolve(const DiscreteJoint& joint, const AxisSet& names) {
  std::vector<std::size_t> out;
  for (const auto& n : names) out.push_back(joint.axis(n));
  std::set<std::size_t> unique(out.begin(), out.end());
  if (unique.size() != out.size()) throw ContractError("axis listed twice");
  return out;
}

std::vector<double> marginal_of(const DiscreteJoint& joint, const Projection& proj) {
  std::vector<double> m(proj.sub_cells, 0.0);
  for (std::size_t cell = 0; cell < joint.cells(); ++cell) m[proj.cell_to_sub[cell]] += joint.table()[cell];
  return m;
}

AxisSet join(const AxisSet& a, const AxisSet& b) {
  AxisSet out = a;
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

}  // namespace

std::vector<double> DiscreteJoint::marginal(const std::vector<std::string>& names) const {
  return marginal_of(*this, project(*this, resolve(*this, names)));
}

double entropy(const DiscreteJoint& joint, const AxisSet& axes) {
  if (axes.empty()) throw ContractError("entropy needs at least one axis");
  const auto m = joint.marginal(axes);
  double h = 0.0;
  for (double p : m) {
    if (p > 0) h -= p * std::log(p);
  }
  return h;
}

double mutual_info(const DiscreteJoint& joint, const AxisSet& a, const AxisSet& b, const AxisSet& c) {
  if (a.empty() || b.empty()) throw ContractError("mutual_info needs nonempty A and B");
  const auto ia = resolve(joint, a);
  const auto ib = resolve(joint, b);
  const auto ic = resolve(joint, c);
  {
    std::vector<std::size_t> all = ia;
    all.insert(all.end(), ib.begin(), ib.end());
    all.insert(all.end(), ic.begin(), ic.end());
    std::set<std::size_t> unique(all.begin(), all.end());
    if (unique.size() != all.size()) throw ContractError("mutual_info axis sets must be disjoint");
  }

  auto concat = [](std::vector<std::size_t> x, const std::vector<std::size_t>& y) {
    x.insert(x.end(), y.begin(), y.end());
    return x;
  };
  const Projection pabc = project(joint, concat(concat(ia, ib), ic));
  const Projection pac = project(joint, concat(ia, ic));
  const Projection pbc = project(joint, concat(ib, ic));
  const Projection pc = project(joint, ic);
  const auto mabc = marginal_of(joint, pabc);
  const auto mac = marginal_of(joint, pac);
  const auto mbc = marginal_of(joint, pbc);
  const auto mc = marginal_of(joint, pc);

  // Sum over (a, b, c) cells of the marginal, each once.
  std::vector<bool> seen(pabc.sub_cells, false);
  double mi = 0.0;
  for (std::size_t cell = 0; cell < joint.cells(); ++cell) {
    const std::size_t k = pabc.cell_to_sub[cell];
    if (seen[k]) continue;
    seen[k] = true;
    const double p = mabc[k];
    if (p <= 0) continue;
    mi += p * std::log(p * mc[pc.cell_to_sub[cell]] / (mac[pac.cell_to_sub[cell]] * mbc[pbc.cell_to_sub[cell]]));
  }
  return mi;
}

double co_information(const DiscreteJoint& joint, const std::string& x, const std::string& y, const std::string& z) {
  return entropy(joint, {x}) + entropy(joint, {y}) + entropy(joint, {z}) - entropy(joint, {x, y}) -
         entropy(joint, {x, z}) - entropy(joint, {y, z}) + entropy(joint, {x, y, z});
}

ChainRuleResiduals verify_chain_rules(const DiscreteJoint& joint) {
  for (const char* name : {"x", "y", "z"}) joint.axis(name);
  const double i_xy_z = mutual_info(joint, {"x", "y"}, {"z"});
  const double i_y_z = mutual_info(joint, {"y"}, {"z"});
  const double i_x_z_given_y = mutual_info(joint, {"x"}, {"z"}, {"y"});
  const double i_y_z_given_x = mutual_info(joint, {"y"}, {"z"}, {"x"});
  const double triple = co_information(joint, "x", "y", "z");

  ChainRuleResiduals r;
  r.chain = std::abs(i_xy_z - (i_y_z + i_x_z_given_y));
  r.multivariate = std::abs(triple - (i_y_z - i_y_z_given_x));
  r.min_mi = std::min({i_xy_z, i_y_z, i_x_z_given_y, i_y_z_given_x});
  return r;
}

double verify_decomposition(const DiscreteJoint& joint) {
  for (const char* name : {"xi", "xj", "z"}) joint.axis(name);
  const double leak = mutual_info(joint, {"xj"}, {"z"}, {"xi"});
  if (leak > kInfoTolerance) {
    throw ContractError("z is not a representation of xi: I(xj; z | xi) = " + std::to_string(leak));
  }
  const double total = mutual_info(joint, {"xi"}, {"z"});
  const double superfluous = mutual_info(joint, {"z"}, {"xi"}, {"xj"});
  const double relevant = mutual_info(joint, {"xj"}, {"z"});
  return std::abs(total - superfluous - relevant);
}

RedundancyReport verify_redundancy_bounds(const DiscreteJoint& joint) {
  for (const char* name : {"xi", "xj", "y", "z"}) joint.axis(name);
  const double leak = mutual_info(joint, {"z"}, {"xj", "y"}, {"xi"});
  if (leak > kInfoTolerance) {
    throw ContractError("z is not a representation of xi: I(z; xj y | xi) = " + std::to_string(leak));
  }
  const double xi_y_given_z = mutual_info(joint, {"xi"}, {"y"}, {"z"});
  const double xi_xj_given_z = mutual_info(joint, {"xi"}, {"xj"}, {"z"});
  const double xi_y_given_xj = mutual_info(joint, {"xi"}, {"y"}, {"xj"});
  const double xj_y_given_xi = mutual_info(joint, {"xj"}, {"y"}, {"xi"});
  const double y_z = mutual_info(joint, {"y"}, {"z"});
  const double y_views = mutual_info(joint, {"y"}, {"xi", "xj"});

  RedundancyReport r;
  r.redundancy_margin = xi_xj_given_z + xi_y_given_xj - xi_y_given_z;
  r.lower_bound_margin = y_z - (y_views - xi_xj_given_z - xi_y_given_xj - xj_y_given_xi);
  r.sufficiency_leak = xi_y_given_z;
  r.corollary_applies = (xi_y_given_xj + xj_y_given_xi) <= kInfoTolerance && xi_xj_given_z <= kInfoTolerance;
  r.corollary_residual = std::abs(y_z - y_views);
  return r;
}

// ---------------------------------------------------------------------------
// Random joints
// ---------------------------------------------------------------------------

namespace {

std::vector<double> dirichlet(std::size_t k, Rng& rng) {
  std::gamma_distribution<double> gamma(1.0, 1.0);
  std::vector<double> w(k);
  double total = 0.0;
  for (auto& x : w) {
    x = gamma(rng);
    total += x;
  }
  for (auto& x : w) x /= total;
  return w;
}

// Renormalizes so the table sums to 1 within rounding.
void normalize(std::vector<double>& p) {
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  for (auto& x : p) x /= total;
}

}  // namespace

DiscreteJoint random_joint(const std::vector<std::string>& axes, const std::vector<std::size_t>& sizes, Rng& rng) {
  std::size_t cells = 1;
  for (auto s : sizes) cells *= s;
  auto p = dirichlet(cells, rng);
  normalize(p);
  return DiscreteJoint(axes, sizes, std::move(p));
}

DiscreteJoint random_constrained_joint(std::size_t size_xi, std::size_t size_xj, std::size_t size_y,
                                       std::size_t size_z, Rng& rng) {
  const auto base = dirichlet(size_xi * size_xj * size_y, rng);
  std::vector<std::vector<double>> channel(size_xi);
  for (auto& row : channel) row = dirichlet(size_z, rng);

  std::vector<double> p(size_xi * size_xj * size_y * size_z);
  std::size_t cell = 0;
  for (std::size_t a = 0; a < size_xi; ++a) {
    for (std::size_t b = 0; b < size_xj; ++b) {
      for (std::size_t c = 0; c < size_y; ++c) {
        const double pabc = base[(a * size_xj + b) * size_y + c];
        for (std::size_t d = 0; d < size_z; ++d) p[cell++] = pabc * channel[a][d];
      }
    }
  }
  normalize(p);
  return DiscreteJoint({"xi", "xj", "y", "z"}, {size_xi, size_xj, size_y, size_z}, std::move(p));
}

DiscreteJoint redundant_joint(std::size_t shared, std::size_t size_y, Rng& rng) {
  if (shared < 1 || shared > 4 || size_y < 1 || size_y > DiscreteJoint::kMaxAlphabet) {
    throw ContractError("redundant_joint: shared in [1,4], size_y in [1,8]");
  }
  const auto p_shared = dirichlet(shared, rng);
  const auto noise_i = dirichlet(2, rng);
  const auto noise_j = dirichlet(2, rng);
  std::uniform_int_distribution<std::size_t> label(0, size_y - 1);
  std::vector<std::size_t> g(shared);
  for (auto& x : g) x = label(rng);

  const std::size_t views = shared * 2;
  std::vector<double> p(views * views * size_y * shared, 0.0);
  for (std::size_t a = 0; a < shared; ++a) {
    for (std::size_t ni = 0; ni < 2; ++ni) {
      for (std::size_t nj = 0; nj < 2; ++nj) {
        const std::size_t xi = a * 2 + ni;
        const std::size_t xj = a * 2 + nj;
        const std::size_t cell = ((xi * views + xj) * size_y + g[a]) * shared + a;
        p[cell] = p_shared[a] * noise_i[ni] * noise_j[nj];
      }
    }
  }
  normalize(p);
  return DiscreteJoint({"xi", "xj", "y", "z"}, {views, views, size_y, shared}, std::move(p));
}

// ---------------------------------------------------------------------------
// Gaussian oracles
// ---------------------------------------------------------------------------

namespace {

void check_gaussian_pair(const std::vector<double>& mu_a, const std::vector<double>& var_a,
                         const std::vector<double>& mu_b, const std::vector<double>& var_b) {
  const std::size_t d = mu_a.size();
  if (d == 0 || var_a.size() != d || mu_b.size() != d || var_b.size() != d) {
    throw DimensionError("gaussian parameters must share a positive dimension");
  }
  for (std::size_t t = 0; t < d; ++t) {
    if (!(var_a[t] > 0) || !(var_b[t] > 0)) throw ContractError("variances must be positive");
  }
}

}  // namespace

MonteCarloEstimate mc_gaussian_kl(const std::vector<double>& mu_a, const std::vector<double>& var_a,
                                  const std::vector<double>& mu_b, const std::vector<double>& var_b,
                                  std::size_t n_samples, std::uint64_t seed) {
  check_gaussian_pair(mu_a, var_a, mu_b, var_b);
  if (n_samples < 10000) throw ContractError("mc_gaussian_kl needs at least 1e4 samples");
  const std::size_t d = mu_a.size();
  std::vector<double> sd_b(d);
  double log_norm = 0.0;  // ln N_b - ln N_a normalizer part
  for (std::size_t t = 0; t < d; ++t) {
    sd_b[t] = std::sqrt(var_b[t]);
    log_norm += 0.5 * (std::log(var_a[t]) - std::log(var_b[t]));
  }
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  // Welford accumulation of the log-ratio samples.
  double mean = 0.0, m2 = 0.0;
  for (std::size_t s = 0; s < n_samples; ++s) {
    double ratio = log_norm;
    for (std::size_t t = 0; t < d; ++t) {
      const double eps = normal(rng);
      const double z = mu_b[t] + sd_b[t] * eps;
      const double da = z - mu_a[t];
      ratio += -0.5 * eps * eps + 0.5 * da * da / var_a[t];
    }
    const double delta = ratio - mean;
    mean += delta / static_cast<double>(s + 1);
    m2 += delta * (ratio - mean);
  }
  const double variance = m2 / static_cast<double>(n_samples - 1);
  return {mean, std::sqrt(variance / static_cast<double>(n_samples))};
}

double gaussian_kl_closed_form(const std::vector<double>& mu_a, const std::vector<double>& var_a,
                               const std::vector<double>& mu_b, const std::vector<double>& var_b) {
  check_gaussian_pair(mu_a, var_a, mu_b, var_b);
  double trace = 0.0, quad = 0.0, log_det = 0.0;
  for (std::size_t t = 0; t < mu_a.size(); ++t) {
    trace += var_b[t] / var_a[t];
    const double diff = mu_a[t] - mu_b[t];
    quad += diff * diff / var_a[t];
    log_det += std::log(var_a[t]) - std::log(var_b[t]);
  }
  return 0.5 * (trace + quad - static_cast<double>(mu_a.size()) + log_det);
}

double gaussian_mi_reference(double rho) {
  if (!(std::abs(rho) < 1.0)) throw NumericError("gaussian_mi_reference: |rho| must be < 1");
  return -0.5 * std::log1p(-rho * rho);
}

}  // namespace mvc
