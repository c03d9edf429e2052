#include "mvc/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "mvc/errors.hpp"
#include "mvc/gradcheck.hpp"
#include "mvc/infotheory.hpp"
#include "mvc/losses.hpp"
#include "mvc/model.hpp"

namespace mvc {

namespace {

Rng stream(std::uint64_t seed, std::uint64_t purpose) {
  std::seed_seq seq{seed, purpose};
  return Rng(seq);
}

Tensor uniform_tensor(std::size_t rows, std::size_t cols, double lo, double hi, Rng& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t = Tensor::zeros(rows, cols);
  for (auto& x : t.values()) x = u(rng);
  return t;
}

std::string fmt(const char* label, double value) {
  std::ostringstream os;
  os << label << value;
  return os.str();
}

struct Tracker {
  double max_residual = 0.0;
  double min_margin = std::numeric_limits<double>::infinity();
  std::size_t cases = 0;

  void residual(double r) { max_residual = std::max(max_residual, r); }
  void margin(double m) { min_margin = std::min(min_margin, m); }
};

}  // namespace

nlohmann::json SuiteReport::to_json() const {
  return {{"suite", suite}, {"cases", cases}, {"max_residual", max_residual}, {"min_margin", min_margin}, {"pass", pass}};
}

// ---------------------------------------------------------------------------
// gradients
// ---------------------------------------------------------------------------

namespace {

constexpr double kComponentTol = 1e-6;
constexpr double kModelTol = 1e-5;
constexpr double kEps = 1e-5;

double check_two_layer_net(std::uint64_t seed) {
  Rng rng = stream(seed, 101);
  const Tensor x = uniform_tensor(3, 4, -1, 1, rng);
  const Tensor target = uniform_tensor(3, 1, -1, 1, rng);
  std::vector<Tensor> params = {uniform_tensor(4, 3, -1, 1, rng), uniform_tensor(1, 3, -0.5, 0.5, rng),
                                uniform_tensor(3, 1, -1, 1, rng), uniform_tensor(1, 1, -0.5, 0.5, rng)};
  auto loss = [&](Tape& tape, std::span<const Var> p) {
    Var h = dense_forward(tape.constant(x), p[0], p[1], Activation::tanh);
    Var out = dense_forward(h, p[2], p[3], Activation::identity);
    return mean(square(sub(out, tape.constant(target))));
  };
  return finite_difference_check(loss, params, kEps).max_rel_error;
}

double check_loss_components(std::uint64_t seed) {
  Rng rng = stream(seed, 102);
  const std::size_t n = 3, d = 2, k = 3;
  double worst = 0.0;

  {
    const Tensor x = uniform_tensor(n, 4, -1, 1, rng);
    auto loss = [&](Tape& tape, std::span<const Var> p) { return recon_loss(tape.constant(x), p[0]); };
    worst = std::max(worst, finite_difference_check(loss, {uniform_tensor(n, 4, -1, 1, rng)}, kEps).max_rel_error);
  }
  {
    std::vector<Tensor> params = {uniform_tensor(n, 2 * d, -1, 1, rng), uniform_tensor(n, 2 * d, -1, 1, rng),
                                  uniform_tensor(n, k, -1, 1, rng), uniform_tensor(k, 2 * d, -1, 1, rng)};
    auto loss = [&](Tape&, std::span<const Var> p) {
      return cluster_kl_loss(p[0], p[1], softmax_rows(p[2]), p[3]);
    };
    worst = std::max(worst, finite_difference_check(loss, params, kEps).max_rel_error);
  }
  {
    std::vector<Tensor> params = {uniform_tensor(n, d, -1, 1, rng), uniform_tensor(n, d, -1, 1, rng),
                                  uniform_tensor(n, d, -1, 1, rng), uniform_tensor(n, d, -1, 1, rng)};
    auto loss = [&](Tape&, std::span<const Var> p) { return cross_view_kl(p[0], p[1], p[2], p[3]); };
    worst = std::max(worst, finite_difference_check(loss, params, kEps).max_rel_error);
  }
  {
    std::vector<Tensor> params = {uniform_tensor(n + 1, d + 1, 0.2, 1, rng),
                                  uniform_tensor(n + 1, d + 1, 0.2, 1, rng)};
    params[1][0] = -params[1][0];
    auto loss = [&](Tape&, std::span<const Var> p) { return infonce_mi(p[0], p[1], 0.5); };
    worst = std::max(worst, finite_difference_check(loss, params, kEps).max_rel_error);
  }
  return worst;
}

}  // namespace

double full_model_gradient_error(std::uint64_t seed) {
  Rng rng = stream(seed, 103);
  ModelConfig mc;
  mc.view_dims = {3, 3};
  mc.latent_dim = 2;
  mc.clusters = 2;
  mc.hidden = {4};
  MultiViewVae model(mc, rng);
  Tensor means = uniform_tensor(2, 4, -1, 1, rng);
  model.set_class_means(means);

  const std::size_t n = 4;
  std::vector<Tensor> xs = {uniform_tensor(n, 3, -1, 1, rng), uniform_tensor(n, 3, -1, 1, rng)};
  std::vector<Tensor> eps = {standard_normal(n, 2, rng), standard_normal(n, 2, rng)};
  LossWeights weights;
  weights.gamma = 0.7;
  weights.beta = 0.3;
  weights.lambda_nce = 0.5;

  auto loss = [&](Tape& tape, std::span<const Var> p) {
    std::vector<Var> inputs, noise;
    for (const auto& x : xs) inputs.push_back(tape.constant(x));
    for (const auto& e : eps) noise.push_back(tape.constant(e));
    return total_objective(model, inputs, p, noise, weights).minimized;
  };
  return finite_difference_check(loss, model.params().tensors(), kEps).max_rel_error;
}

SuiteReport gradient_suite(std::size_t seeds) {
  Tracker t;
  double component = 0.0, full = 0.0;
  for (std::size_t s = 0; s < seeds; ++s) {
    component = std::max({component, check_two_layer_net(s), check_loss_components(s)});
    t.cases += 2;
  }
  const std::size_t model_cases = std::max<std::size_t>(1, std::min<std::size_t>(seeds, 5));
  for (std::size_t s = 0; s < model_cases; ++s) {
    full = std::max(full, full_model_gradient_error(s));
    ++t.cases;
  }
  t.residual(std::max(component, full));
  t.margin(kComponentTol - component);
  t.margin(kModelTol - full);

  SuiteReport r{"gradients", t.cases, t.max_residual, t.min_margin, false, {}};
  r.notes = {fmt("component max rel error ", component), fmt("full model max rel error ", full)};
  r.pass = component < kComponentTol && full < kModelTol;
  return r;
}

// ---------------------------------------------------------------------------
// kl-mc
// ---------------------------------------------------------------------------

namespace {

struct GaussianPair {
  std::vector<double> mu_a, var_a, mu_b, var_b;
};

double loss_module_kl(const GaussianPair& g) {
  auto row = [](const std::vector<double>& v) { return Tensor({1, v.size()}, v); };
  auto logs = [](std::vector<double> v) {
    for (auto& x : v) x = std::log(x);
    return v;
  };
  // cross_view_kl(i, j) puts view i's covariance in the inverse position.
  return cross_view_kl(row(g.mu_a), row(logs(g.var_a)), row(g.mu_b), row(logs(g.var_b)));
}

}  // namespace

SuiteReport kl_mc_suite(std::size_t seeds, std::size_t samples) {
  Tracker t;
  std::vector<GaussianPair> cases = {
      {{0.0}, {1.0}, {1.0}, {1.0}},                   // 0.5 nats
      {{0.0, 0.0}, {1.0, 1.0}, {0.0, 0.0}, {4.0, 4.0}},  // 1/2 (8 - 2 + ln 1/16)
      {{0.3, -0.2}, {0.5, 2.0}, {0.3, -0.2}, {0.5, 2.0}},  // identical
  };
  for (std::size_t s = 0; s < seeds; ++s) {
    Rng rng = stream(s, 201);
    std::uniform_int_distribution<std::size_t> dim(1, 4);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> log_var(-1.0, 1.0);
    GaussianPair g;
    const std::size_t d = dim(rng);
    for (std::size_t k = 0; k < d; ++k) {
      g.mu_a.push_back(normal(rng));
      g.var_a.push_back(std::exp(log_var(rng)));
      g.mu_b.push_back(normal(rng));
      g.var_b.push_back(std::exp(log_var(rng)));
    }
    cases.push_back(std::move(g));
  }

  double worst_z = 0.0;
  for (std::size_t c = 0; c < cases.size(); ++c) {
    const auto& g = cases[c];
    const double closed = loss_module_kl(g);
    const double reference = gaussian_kl_closed_form(g.mu_a, g.var_a, g.mu_b, g.var_b);
    const auto mc = mc_gaussian_kl(g.mu_a, g.var_a, g.mu_b, g.var_b, samples, 1000 + c);
    const double gap = std::abs(closed - mc.estimate);
    // The absolute floor absorbs rounding when both Gaussians coincide and
    // every sample of the log ratio is zero up to the last bit.
    const double slack = 3.0 * mc.std_error + 1e-12 - gap;
    t.margin(slack);
    t.residual(std::abs(closed - reference));
    if (gap > 1e-12) worst_z = std::max(worst_z, gap / mc.std_error);
    ++t.cases;
  }
  SuiteReport r{"kl-mc", t.cases, t.max_residual, t.min_margin, false, {}};
  r.notes = {fmt("largest |closed - mc| in standard errors ", worst_z)};
  r.pass = t.min_margin >= 0 && t.max_residual < 1e-12;
  return r;
}

// ---------------------------------------------------------------------------
// infotheory
// ---------------------------------------------------------------------------

SuiteReport infotheory_suite(std::size_t seeds) {
  Tracker t;
  double positivity = std::numeric_limits<double>::infinity();
  double bounds = std::numeric_limits<double>::infinity();
  double identities = 0.0, corollary = 0.0;
  for (std::size_t s = 0; s < seeds; ++s) {
    Rng rng = stream(s, 301);
    std::uniform_int_distribution<std::size_t> size(2, 4);

    auto joint = random_joint({"x", "y", "z"}, {size(rng), size(rng), size(rng)}, rng);
    const auto chain = verify_chain_rules(joint);
    identities = std::max({identities, chain.chain, chain.multivariate});
    positivity = std::min(positivity, chain.min_mi);

    auto constrained = random_constrained_joint(size(rng), size(rng), size(rng), size(rng), rng);
    identities = std::max(identities, verify_decomposition(constrained));
    const auto red = verify_redundancy_bounds(constrained);
    bounds = std::min({bounds, red.redundancy_margin, red.lower_bound_margin});
    positivity = std::min(positivity, red.sufficiency_leak);

    auto redundant = redundant_joint(size(rng), size(rng), rng);
    const auto cor = verify_redundancy_bounds(redundant);
    if (!cor.corollary_applies) throw OracleError("redundant construction does not meet the corollary hypotheses");
    corollary = std::max(corollary, cor.corollary_residual);
    bounds = std::min({bounds, cor.redundancy_margin, cor.lower_bound_margin});
    t.cases += 3;
  }
  if (seeds == 0) positivity = bounds = 0.0;
  t.residual(identities);
  t.residual(corollary);
  t.margin(positivity);
  t.margin(bounds);

  SuiteReport r{"infotheory", t.cases, t.max_residual, t.min_margin, false, {}};
  r.notes = {fmt("identity residual ", identities), fmt("corollary residual ", corollary),
             fmt("min mutual information ", positivity), fmt("min inequality margin ", bounds)};
  r.pass = t.max_residual < kInfoTolerance && t.min_margin >= -kInfoTolerance;
  return r;
}

// ---------------------------------------------------------------------------
// infonce
// ---------------------------------------------------------------------------

SuiteReport infonce_suite(std::size_t batches, std::size_t n) {
  if (batches < 2) throw ConfigError("infonce suite needs at least two batches");
  const std::vector<double> rhos = {0.0, 0.5, 0.9};
  const double bound = std::log(static_cast<double>(n));
  Tracker t;
  std::vector<double> means;
  bool below_bound = true, below_reference = true;
  SuiteReport r{"infonce", 0, 0.0, 0.0, false, {}};

  for (std::size_t k = 0; k < rhos.size(); ++k) {
    const double rho = rhos[k];
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      Rng rng = stream(b, 401 + k);
      Tensor zi = standard_normal(n, 1, rng);
      Tensor noise = standard_normal(n, 1, rng);
      Tensor zj = Tensor::zeros(n, 1);
      for (std::size_t r2 = 0; r2 < n; ++r2) zj(r2, 0) = rho * zi(r2, 0) + std::sqrt(1 - rho * rho) * noise(r2, 0);
      const double est = infonce_mi(zi, zj, 1.0);
      below_bound = below_bound && est <= bound;
      t.margin(bound - est);
      sum += est;
      sum_sq += est * est;
      ++t.cases;
    }
    const double mean = sum / static_cast<double>(batches);
    const double var = std::max(0.0, (sum_sq - sum * mean) / static_cast<double>(batches - 1));
    const double se = std::sqrt(var / static_cast<double>(batches));
    const double reference = gaussian_mi_reference(rho);
    below_reference = below_reference && mean <= reference + 3.0 * se;
    t.residual(mean - reference);
    t.margin(reference + 3.0 * se - mean);
    means.push_back(mean);
    r.notes.push_back(fmt("rho ", rho) + fmt(" mean ", mean) + fmt(" se ", se) + fmt(" reference ", reference));
  }
  bool increasing = true;
  for (std::size_t k = 1; k < means.size(); ++k) {
    increasing = increasing && means[k] > means[k - 1];
    t.margin(means[k] - means[k - 1]);
  }
  r.cases = t.cases;
  r.max_residual = t.max_residual;
  r.min_margin = t.min_margin;
  r.pass = below_bound && below_reference && increasing;
  return r;
}

SuiteReport run_suite(const std::string& name, std::size_t seeds) {
  if (name == "gradients") return gradient_suite(seeds);
  if (name == "kl-mc") return kl_mc_suite(seeds);
  if (name == "infotheory") return infotheory_suite(seeds);
  if (name == "infonce") return infonce_suite(seeds);
  throw ConfigError("unknown suite '" + name + "'");
}

}  // namespace mvc
