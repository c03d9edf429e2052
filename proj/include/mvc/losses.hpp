#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "mvc/autodiff.hpp"
#include "mvc/model.hpp"

namespace mvc {

struct LossWeights {
  double gamma = 0.1;        // cluster-KL weight
  double beta = 0.1;         // sufficiency weight
  double lambda_nce = 0.0;   // InfoNCE weight inside the sufficiency term
  double temperature = 0.5;  // InfoNCE critic temperature

  void validate() const;
};

// Which objective components are switched on (ablation).
struct LossMask {
  bool rec = true;
  bool kl = true;
  bool suf = true;

  bool operator==(const LossMask&) const = default;
};

// Per-term values in maximization form: rec_i = -recon_loss_i (<= 0),
// kl_i = cluster KL (>= 0), suf[i][j] = -KL_ij + lambda * NCE_ij, and
//   total = sum_i (rec_i - gamma * kl_i) + beta * sum_{i != j} suf[i][j].
// Terms switched off by the mask are left at zero.
struct LossBreakdown {
  std::vector<double> rec;
  std::vector<double> kl;
  std::vector<std::vector<double>> suf;
  double total = 0.0;
  double gamma = 0.0;
  double beta = 0.0;

  explicit LossBreakdown(std::size_t views = 0);
  double recombine() const;
  // The scalar the optimizer minimizes.
  double minimized() const { return -total; }
};

// Mean over the batch of sum_features (x - x_hat)^2.
Var recon_loss(Var x, Var x_hat);

// Mean over the batch of
//   sum_j y_j KL(N(mu, diag exp(logvar)) || N(mean_j, I)) + KL(y || uniform_K),
// with mu/logvar/means living in the global latent space.
Var cluster_kl_loss(Var mu_global, Var logvar_global, Var y, Var class_means);

// Batch mean of
//   1/2 [tr(S_i^-1 S_j) + (mu_i - mu_j)^T S_i^-1 (mu_i - mu_j) - d + ln(|S_i| / |S_j|)]
// for diagonal S = diag(exp(logvar)); equals KL(N_j || N_i).
Var cross_view_kl(Var mu_i, Var logvar_i, Var mu_j, Var logvar_j);

// InfoNCE bound with cosine critic: mean_r [s_rr - ln sum_s exp(s_rs)] + ln n,
// s = cos / temperature. Never exceeds ln n.
Var infonce_mi(Var z_i, Var z_j, double temperature);

// Sufficiency lower bound (maximized): -cross_view_kl + lambda * infonce.
Var suf_loss(const EncodedView& view_i, Var z_i, const EncodedView& view_j, Var z_j, double lambda_nce,
             double temperature);

// Tensor-level conveniences (no gradient).
double recon_loss(const Tensor& x, const Tensor& x_hat);
double cluster_kl_loss(const Tensor& mu_global, const Tensor& logvar_global, const Tensor& y,
                       const Tensor& class_means);
double cross_view_kl(const Tensor& mu_i, const Tensor& logvar_i, const Tensor& mu_j, const Tensor& logvar_j);
double infonce_mi(const Tensor& z_i, const Tensor& z_j, double temperature);

struct Objective {
  Var minimized;  // scalar node to differentiate
  LossBreakdown breakdown;
};

// SCMVC: minimized scalar = sum_i (recon_i + gamma * cluster_kl_i).
Objective scmvc_loss(const MultiViewVae& model, std::span<const Var> inputs, std::span<const Var> params,
                     std::span<const Var> noise, double gamma, LossMask mask = {});

// SUMVC collaborative objective:
//   sum_i (recon_i + gamma * kl_i) + beta * sum_i sum_{j != i} (KL_ij - lambda * NCE_ij).
// When `supervisory_view` is set, that view's latents enter the sufficiency
// terms as detached targets.
Objective total_objective(const MultiViewVae& model, std::span<const Var> inputs, std::span<const Var> params,
                          std::span<const Var> noise, const LossWeights& weights, LossMask mask = {},
                          std::optional<std::size_t> supervisory_view = std::nullopt);

}  // namespace mvc
