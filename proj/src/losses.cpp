#include "mvc/losses.hpp"

#include <cmath>

#include "mvc/errors.hpp"

namespace mvc {

void LossWeights::validate() const {
  if (!(gamma >= 0) || !(beta >= 0) || !(lambda_nce >= 0)) {
    throw ConfigError("loss weights gamma, beta, lambda_nce must be nonnegative");
  }
  if (!(temperature > 0)) throw ConfigError("InfoNCE temperature must be positive");
}

LossBreakdown::LossBreakdown(std::size_t views)
    : rec(views, 0.0), kl(views, 0.0), suf(views, std::vector<double>(views, 0.0)) {}

double LossBreakdown::recombine() const {
  double value = 0.0;
  for (std::size_t i = 0; i < rec.size(); ++i) value += rec[i] - gamma * kl[i];
  double pairs = 0.0;
  for (std::size_t i = 0; i < suf.size(); ++i) {
    for (std::size_t j = 0; j < suf[i].size(); ++j) {
      if (i != j) pairs += suf[i][j];
    }
  }
  return value + beta * pairs;
}

// ---------------------------------------------------------------------------
// Individual terms
// ---------------------------------------------------------------------------

Var recon_loss(Var x, Var x_hat) {
  const Tensor& a = x.value();
  const Tensor& b = x_hat.value();
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError("recon_loss: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  return scale(sum(square(sub(x, x_hat))), 1.0 / static_cast<double>(a.rows()));
}

Var cluster_kl_loss(Var mu_global, Var logvar_global, Var y, Var class_means) {
  const Tensor& mu = mu_global.value();
  const Tensor& lv = logvar_global.value();
  const Tensor& yv = y.value();
  const Tensor& means = class_means.value();
  if (!mu.same_shape(lv)) throw DimensionError("cluster_kl_loss: mu and logvar shapes differ");
  if (means.cols() != mu.cols()) {
    throw DimensionError("cluster_kl_loss: class means have dimension " + std::to_string(means.cols()) +
                         ", latent has " + std::to_string(mu.cols()));
  }
  if (yv.rows() != mu.rows() || yv.cols() != means.rows()) {
    throw DimensionError("cluster_kl_loss: soft labels must be n x K");
  }
  for (std::size_t r = 0; r < yv.rows(); ++r) {
    double total = 0.0;
    for (std::size_t j = 0; j < yv.cols(); ++j) {
      if (yv(r, j) < -1e-6) throw ContractError("cluster_kl_loss: negative label probability");
      total += yv(r, j);
    }
    if (std::abs(total - 1.0) > 1e-6) throw ContractError("cluster_kl_loss: label row off the simplex");
  }

  const double n = static_cast<double>(mu.rows());
  const double k = static_cast<double>(means.rows());
  // 1/2 sum_t (sigma_t^2 - 1 - log sigma_t^2), shared by every component j.
  Var variance_part = scale(row_sum(sub(shift(exp(logvar_global), -1.0), logvar_global)), 0.5);
  Var per_component = add_col(scale(sq_dist(mu_global, class_means), 0.5), variance_part);
  Var gaussian = sum(mul(y, per_component));
  // KL(y || uniform) = sum_j y_j ln y_j + ln K
  Var categorical = shift(sum(xlogx(y)), n * std::log(k));
  return scale(add(gaussian, categorical), 1.0 / n);
}

Var cross_view_kl(Var mu_i, Var logvar_i, Var mu_j, Var logvar_j) {
  const Tensor& a = mu_i.value();
  for (Var v : {logvar_i, mu_j, logvar_j}) {
    if (!a.same_shape(v.value())) throw DimensionError("cross_view_kl: parameter shapes differ");
  }
  const double n = static_cast<double>(a.rows());
  Var inv_var_i = exp(scale(logvar_i, -1.0));
  Var trace = mul(exp(logvar_j), inv_var_i);
  Var mahalanobis = mul(square(sub(mu_i, mu_j)), inv_var_i);
  Var log_det = sub(logvar_i, logvar_j);
  Var per_coord = add(add(trace, mahalanobis), log_det);
  // the "- d" term, summed over rows
  Var total = shift(sum(per_coord), -n * static_cast<double>(a.cols()));
  return scale(total, 0.5 / n);
}

Var infonce_mi(Var z_i, Var z_j, double temperature) {
  if (!(temperature > 0)) throw ContractError("infonce_mi: temperature must be positive");
  const Tensor& a = z_i.value();
  if (!a.same_shape(z_j.value())) throw DimensionError("infonce_mi: embedding shapes differ");
  const std::size_t n = a.rows();
  Var scores = scale(matmul_nt(normalize_rows(z_i), normalize_rows(z_j)), 1.0 / temperature);
  Tensor eye = Tensor::zeros(n, n);
  for (std::size_t r = 0; r < n; ++r) eye(r, r) = 1.0;
  Var positive = row_sum(mul(scores, z_i.tape()->constant(std::move(eye))));
  Var per_row = sub(positive, logsumexp_rows(scores));
  return shift(scale(sum(per_row), 1.0 / static_cast<double>(n)), std::log(static_cast<double>(n)));
}

Var suf_loss(const EncodedView& view_i, Var z_i, const EncodedView& view_j, Var z_j, double lambda_nce,
             double temperature) {
  if (!(lambda_nce >= 0)) throw ContractError("suf_loss: lambda must be nonnegative");
  Var value = scale(cross_view_kl(view_i.mu, view_i.logvar, view_j.mu, view_j.logvar), -1.0);
  if (lambda_nce > 0) value = add(value, scale(infonce_mi(z_i, z_j, temperature), lambda_nce));
  return value;
}

// ---------------------------------------------------------------------------
// Tensor conveniences
// ---------------------------------------------------------------------------

double recon_loss(const Tensor& x, const Tensor& x_hat) {
  Tape tape;
  return recon_loss(tape.constant(x), tape.constant(x_hat)).value()[0];
}

double cluster_kl_loss(const Tensor& mu_global, const Tensor& logvar_global, const Tensor& y,
                       const Tensor& class_means) {
  Tape tape;
  return cluster_kl_loss(tape.constant(mu_global), tape.constant(logvar_global), tape.constant(y),
                         tape.constant(class_means))
      .value()[0];
}

double cross_view_kl(const Tensor& mu_i, const Tensor& logvar_i, const Tensor& mu_j, const Tensor& logvar_j) {
  Tape tape;
  return cross_view_kl(tape.constant(mu_i), tape.constant(logvar_i), tape.constant(mu_j),
                       tape.constant(logvar_j))
      .value()[0];
}

double infonce_mi(const Tensor& z_i, const Tensor& z_j, double temperature) {
  Tape tape;
  return infonce_mi(tape.constant(z_i), tape.constant(z_j), temperature).value()[0];
}

// ---------------------------------------------------------------------------
// Model-level objectives
// ---------------------------------------------------------------------------

namespace {

struct ConsistentPart {
  std::optional<Var> minimized;
  LatentPass latents;
};

ConsistentPart consistent_part(const MultiViewVae& model, std::span<const Var> inputs, std::span<const Var> params,
                               std::span<const Var> noise, double gamma, LossMask mask, LossBreakdown& out) {
  if (!(gamma >= 0)) throw ConfigError("gamma must be nonnegative");
  ConsistentPart part;
  part.latents = model.encode_views(inputs, params, noise);
  const auto& lat = part.latents;
  out.gamma = gamma;

  auto accumulate = [&](Var term) { part.minimized = part.minimized ? add(*part.minimized, term) : term; };
  for (std::size_t i = 0; i < model.views(); ++i) {
    if (mask.rec) {
      Var rec = recon_loss(inputs[i], decode(lat.z_global, model.decoder(i), params));
      out.rec[i] = -rec.value()[0];
      accumulate(rec);
    }
    if (mask.kl) {
      const ClusterHead& head = model.head(i);
      Var y = assign_soft_labels(lat.z[i], head, params);
      Var kl = cluster_kl_loss(lat.mu_global, lat.logvar_global, y, params[head.class_means]);
      out.kl[i] = kl.value()[0];
      accumulate(scale(kl, gamma));
    }
  }
  return part;
}

Var zero_scalar(std::span<const Var> params) { return params.front().tape()->constant(Tensor::scalar(0.0)); }

}  // namespace

Objective scmvc_loss(const MultiViewVae& model, std::span<const Var> inputs, std::span<const Var> params,
                     std::span<const Var> noise, double gamma, LossMask mask) {
  Objective obj{Var{}, LossBreakdown(model.views())};
  auto part = consistent_part(model, inputs, params, noise, gamma, mask, obj.breakdown);
  obj.minimized = part.minimized ? *part.minimized : zero_scalar(params);
  obj.breakdown.total = -obj.minimized.value()[0];
  return obj;
}

Objective total_objective(const MultiViewVae& model, std::span<const Var> inputs, std::span<const Var> params,
                          std::span<const Var> noise, const LossWeights& weights, LossMask mask,
                          std::optional<std::size_t> supervisory_view) {
  weights.validate();
  const std::size_t v = model.views();
  if (supervisory_view && *supervisory_view >= v) throw ContractError("supervisory view out of range");

  Objective obj{Var{}, LossBreakdown(v)};
  auto part = consistent_part(model, inputs, params, noise, weights.gamma, mask, obj.breakdown);
  obj.breakdown.beta = weights.beta;

  std::optional<Var> suf_total;
  if (mask.suf && v >= 2) {
    const auto& lat = part.latents;
    std::vector<EncodedView> views(v);
    std::vector<Var> samples(v);
    for (std::size_t i = 0; i < v; ++i) {
      if (supervisory_view && *supervisory_view == i) {
        views[i] = {detach(lat.mu[i]), detach(lat.logvar[i])};
        samples[i] = detach(lat.z[i]);
      } else {
        views[i] = {lat.mu[i], lat.logvar[i]};
        samples[i] = lat.z[i];
      }
    }
    for (std::size_t i = 0; i < v; ++i) {
      for (std::size_t j = 0; j < v; ++j) {
        if (i == j) continue;
        Var term = suf_loss(views[i], samples[i], views[j], samples[j], weights.lambda_nce, weights.temperature);
        obj.breakdown.suf[i][j] = term.value()[0];
        suf_total = suf_total ? add(*suf_total, term) : term;
      }
    }
  }

  if (suf_total) {
    Var suf_part = scale(*suf_total, -weights.beta);
    obj.minimized = part.minimized ? add(*part.minimized, suf_part) : suf_part;
  } else {
    obj.minimized = part.minimized ? *part.minimized : zero_scalar(params);
  }
  obj.breakdown.total = -obj.minimized.value()[0];
  return obj;
}

}  // namespace mvc
