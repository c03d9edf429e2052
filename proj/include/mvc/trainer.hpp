#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mvc/data.hpp"
#include "mvc/losses.hpp"
#include "mvc/model.hpp"
#include "mvc/optim.hpp"

namespace mvc {

enum class TrainMode { pretrain, scmvc, sumvc };

std::string_view to_string(TrainMode mode);
TrainMode parse_mode(std::string_view name);

struct TrainConfig {
  TrainMode mode = TrainMode::sumvc;
  LossWeights weights;
  LossMask mask;
  std::size_t clusters = 5;
  std::size_t latent_dim = 10;
  std::vector<std::size_t> hidden = {256, 256};
  Activation activation = Activation::tanh;
  bool shared_backbone = false;
  std::size_t epochs = 200;
  std::size_t batch = 256;
  double lr = 1e-3;
  std::uint64_t seed = 1;
  // Leading share of `epochs` spent on reconstruction only. Ignored in
  // pretrain mode and when the model starts from a checkpoint.
  double pretrain_fraction = 0.3;
  std::size_t kmeans_restarts = 10;

  std::size_t pretrain_epochs() const;
  // Throws ConfigError when the config cannot run on `data`.
  void validate(const MultiViewDataset& data) const;
  ModelConfig model_config(const MultiViewDataset& data) const;
};

struct EvalResult {
  std::vector<int> labels;
  double inertia = 0.0;
  std::size_t n = 0;
  std::size_t k = 0;
  // Present only when the data carries labels.
  std::optional<double> acc;
  std::optional<double> nmi;
  std::optional<double> ari;
};

struct EpochRecord {
  std::string phase;
  LossBreakdown losses;
};

struct TrainReport {
  TrainConfig config;
  std::vector<EpochRecord> epochs;
  std::optional<EvalResult> metrics;
  double wall_time_s = 0.0;
  std::uint64_t seed = 0;

  // Equality of everything except the wall time.
  bool same_losses(const TrainReport& other) const;
};

nlohmann::json to_json(const TrainConfig& config);
TrainConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const LossBreakdown& losses);
nlohmann::json to_json(const TrainReport& report);
// {acc, nmi, ari, inertia, n, k}; metric fields are null without labels.
nlohmann::json metrics_json(const EvalResult& eval);

// Supervisory view for collaborative step `step`.
inline std::size_t supervisory_view(std::uint64_t step, std::size_t views) { return step % views; }

// Optimizer, sampling streams and step counters of a run in progress.
// Copying a session forks the run deterministically.
struct TrainSession {
  MultiViewVae model;
  AdamState adam;
  Rng shuffle_rng;
  Rng noise_rng;
  std::uint64_t collaborative_steps = 0;
  TrainReport report;

  TrainSession(const MultiViewDataset& data, const TrainConfig& config);
  TrainSession(MultiViewVae model, const TrainConfig& config);
};

// Runs `epochs` epochs of one phase on the session. `collaborative` selects
// the supervisory-view objective; otherwise the SCMVC objective under `mask`.
void run_epochs(TrainSession& session, const MultiViewDataset& data, std::size_t epochs, LossMask mask,
                bool collaborative, const std::string& phase);

// Resets every view's class means to K-means centroids of the embedding.
void refresh_class_means(MultiViewVae& model, const MultiViewDataset& data, const TrainConfig& config);

// Reconstruction only for all epochs, then class-mean refresh.
TrainReport pretrain(MultiViewVae& model, const MultiViewDataset& data, const TrainConfig& config);
// Pretraining share, class-mean refresh, then the SCMVC objective.
TrainReport train_scmvc(MultiViewVae& model, const MultiViewDataset& data, const TrainConfig& config,
                        bool from_checkpoint = false);
// Pretraining share, class-mean refresh, then the collaborative objective.
TrainReport train_sumvc(MultiViewVae& model, const MultiViewDataset& data, const TrainConfig& config,
                        bool from_checkpoint = false);
// Dispatches on config.mode.
TrainReport train(MultiViewVae& model, const MultiViewDataset& data, const TrainConfig& config,
                  bool from_checkpoint = false);

// K-means (config restarts) on the noise-free global embedding.
EvalResult evaluate(const MultiViewVae& model, const MultiViewDataset& data, std::size_t k, std::uint64_t seed,
                    std::size_t restarts = 10);

struct AblationRow {
  std::string mask;
  TrainReport report;
};

// The four loss-component runs in fixed order: rec; rec+kl; suf; rec+kl+suf.
// Runs that contain rec share one pretraining prefix. `threads` > 1 runs the
// masks concurrently.
std::vector<AblationRow> ablate(const MultiViewDataset& data, const TrainConfig& base, std::size_t threads = 1);

std::string mask_name(LossMask mask);

// Projection onto the top two principal components (n x 2).
Tensor pca_project(const Tensor& points);

}  // namespace mvc
