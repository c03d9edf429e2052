#include "mvc/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>

#include <Eigen/Eigenvalues>

#include "mvc/errors.hpp"
#include "mvc/metrics.hpp"

namespace mvc {

using nlohmann::json;

namespace {

Rng stream(std::uint64_t seed, std::uint64_t purpose) {
  std::seed_seq seq{seed, purpose};
  return Rng(seq);
}

constexpr std::uint64_t kInitStream = 10;
constexpr std::uint64_t kShuffleStream = 20;
constexpr std::uint64_t kNoiseStream = 21;

constexpr LossMask kRecOnly{true, false, false};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

std::string_view to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::pretrain: return "pretrain";
    case TrainMode::scmvc: return "scmvc";
    case TrainMode::sumvc: return "sumvc";
  }
  return "?";
}

TrainMode parse_mode(std::string_view name) {
  if (name == "pretrain") return TrainMode::pretrain;
  if (name == "scmvc") return TrainMode::scmvc;
  if (name == "sumvc") return TrainMode::sumvc;
  throw ConfigError("unknown training mode '" + std::string(name) + "'");
}

std::string mask_name(LossMask mask) {
  std::string out;
  auto append = [&](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += '+';
    out += name;
  };
  append(mask.rec, "rec");
  append(mask.kl, "kl");
  append(mask.suf, "suf");
  return out.empty() ? "none" : out;
}

// ---------------------------------------------------------------------------
// TrainConfig
// ---------------------------------------------------------------------------

std::size_t TrainConfig::pretrain_epochs() const {
  if (mode == TrainMode::pretrain) return epochs;
  const auto share = static_cast<std::size_t>(std::floor(pretrain_fraction * static_cast<double>(epochs) + 0.5));
  return epochs == 0 ? 0 : std::min(share, epochs - 1);
}

void TrainConfig::validate(const MultiViewDataset& data) const {
  data.validate();
  weights.validate();
  const std::size_t n = data.size();
  if (clusters < 2) throw ConfigError("K must be >= 2");
  if (clusters > n) throw ConfigError("K = " + std::to_string(clusters) + " exceeds n = " + std::to_string(n));
  if (latent_dim < 1) throw ConfigError("latent dimension must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch < 1 || batch > n) throw ConfigError("batch size must be in [1, n]");
  if (!(lr > 0) || !std::isfinite(lr)) throw ConfigError("learning rate must be positive");
  if (!(pretrain_fraction >= 0 && pretrain_fraction < 1)) throw ConfigError("pretrain fraction must be in [0, 1)");
  if (kmeans_restarts < 1) throw ConfigError("K-means needs at least one restart");
  if (mode == TrainMode::sumvc && data.view_count() < 2) throw ConfigError("sumvc needs at least two views");
  model_config(data).validate();
}

ModelConfig TrainConfig::model_config(const MultiViewDataset& data) const {
  ModelConfig mc;
  mc.view_dims = data.dims();
  mc.latent_dim = latent_dim;
  mc.clusters = clusters;
  mc.hidden = hidden;
  mc.activation = activation;
  mc.shared_backbone = shared_backbone;
  return mc;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

json to_json(const TrainConfig& c) {
  return json{{"mode", to_string(c.mode)},
              {"gamma", c.weights.gamma},
              {"beta", c.weights.beta},
              {"lambda_nce", c.weights.lambda_nce},
              {"temperature", c.weights.temperature},
              {"mask", {{"rec", c.mask.rec}, {"kl", c.mask.kl}, {"suf", c.mask.suf}}},
              {"clusters", c.clusters},
              {"latent_dim", c.latent_dim},
              {"hidden", c.hidden},
              {"activation", to_string(c.activation)},
              {"shared_backbone", c.shared_backbone},
              {"epochs", c.epochs},
              {"batch", c.batch},
              {"lr", c.lr},
              {"seed", c.seed},
              {"pretrain_fraction", c.pretrain_fraction},
              {"kmeans_restarts", c.kmeans_restarts}};
}

TrainConfig config_from_json(const json& j) {
  try {
    TrainConfig c;
    c.mode = parse_mode(j.at("mode").get<std::string>());
    c.weights.gamma = j.at("gamma").get<double>();
    c.weights.beta = j.at("beta").get<double>();
    c.weights.lambda_nce = j.at("lambda_nce").get<double>();
    c.weights.temperature = j.at("temperature").get<double>();
    const auto& m = j.at("mask");
    c.mask = {m.at("rec").get<bool>(), m.at("kl").get<bool>(), m.at("suf").get<bool>()};
    c.clusters = j.at("clusters").get<std::size_t>();
    c.latent_dim = j.at("latent_dim").get<std::size_t>();
    c.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    c.activation = parse_activation(j.at("activation").get<std::string>());
    c.shared_backbone = j.at("shared_backbone").get<bool>();
    c.epochs = j.at("epochs").get<std::size_t>();
    c.batch = j.at("batch").get<std::size_t>();
    c.lr = j.at("lr").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.pretrain_fraction = j.at("pretrain_fraction").get<double>();
    c.kmeans_restarts = j.at("kmeans_restarts").get<std::size_t>();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
}

json to_json(const LossBreakdown& b) {
  return json{{"rec", b.rec}, {"kl", b.kl}, {"suf", b.suf}, {"total", b.total}};
}

json metrics_json(const EvalResult& eval) {
  auto opt = [](const std::optional<double>& x) { return x ? json(*x) : json(nullptr); };
  return json{{"acc", opt(eval.acc)},  {"nmi", opt(eval.nmi)}, {"ari", opt(eval.ari)},
              {"inertia", eval.inertia}, {"n", eval.n},         {"k", eval.k}};
}

json to_json(const TrainReport& report) {
  json epochs = json::array();
  for (const auto& e : report.epochs) {
    json entry = to_json(e.losses);
    entry["phase"] = e.phase;
    epochs.push_back(std::move(entry));
  }
  json metrics = nullptr;
  if (report.metrics) {
    auto opt = [](const std::optional<double>& x) { return x ? json(*x) : json(nullptr); };
    metrics = {{"acc", opt(report.metrics->acc)}, {"nmi", opt(report.metrics->nmi)}, {"ari", opt(report.metrics->ari)}};
  }
  return json{{"config", to_json(report.config)},
              {"epochs", std::move(epochs)},
              {"metrics", std::move(metrics)},
              {"wall_time_s", report.wall_time_s},
              {"seed", report.seed}};
}

bool TrainReport::same_losses(const TrainReport& other) const {
  if (epochs.size() != other.epochs.size()) return false;
  for (std::size_t e = 0; e < epochs.size(); ++e) {
    const auto& a = epochs[e].losses;
    const auto& b = other.epochs[e].losses;
    if (a.total != b.total || a.rec != b.rec || a.kl != b.kl || a.suf != b.suf) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Sessions
// ---------------------------------------------------------------------------

namespace {

MultiViewVae build_model(const MultiViewDataset& data, const TrainConfig& config) {
  config.validate(data);
  Rng rng = stream(config.seed, kInitStream);
  return MultiViewVae(config.model_config(data), rng);
}

}  // namespace

TrainSession::TrainSession(const MultiViewDataset& data, const TrainConfig& config)
    : TrainSession(build_model(data, config), config) {}

TrainSession::TrainSession(MultiViewVae m, const TrainConfig& config)
    : model(std::move(m)),
      adam(model.params().tensors(), AdamOptions{config.lr}),
      shuffle_rng(stream(config.seed, kShuffleStream)),
      noise_rng(stream(config.seed, kNoiseStream)) {
  report.config = config;
  report.seed = config.seed;
}

void run_epochs(TrainSession& s, const MultiViewDataset& data, std::size_t epochs, LossMask mask, bool collaborative,
                const std::string& phase) {
  const TrainConfig& config = s.report.config;
  const std::size_t n = data.size();
  const std::size_t v = s.model.views();
  const std::size_t d = s.model.config().latent_dim;
  const std::size_t batch = std::min(config.batch, n);
  std::vector<std::size_t> order(n);
  std::vector<Var> inputs, noise;

  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), s.shuffle_rng);
    LossBreakdown mean(v);
    mean.gamma = config.weights.gamma;
    mean.beta = collaborative ? config.weights.beta : 0.0;

    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t count = std::min(batch, n - start);
      std::span<const std::size_t> rows(order.data() + start, count);
      Tape tape;
      auto params = tape.parameters(s.model.params().tensors());
      inputs.clear();
      noise.clear();
      for (std::size_t i = 0; i < v; ++i) inputs.push_back(tape.constant(gather_rows(data.views[i], rows)));
      // Noise is drawn for every view whatever the mask, so all objectives
      // consume the stream identically.
      for (std::size_t i = 0; i < v; ++i) noise.push_back(tape.constant(standard_normal(count, d, s.noise_rng)));

      Objective obj = collaborative
                          ? total_objective(s.model, inputs, params, noise, config.weights, mask,
                                            supervisory_view(s.collaborative_steps++, v))
                          : scmvc_loss(s.model, inputs, params, noise, config.weights.gamma, mask);
      if (!std::isfinite(obj.breakdown.total)) {
        const int last = static_cast<int>(s.report.epochs.size()) - 1;
        throw NumericAbort(last, "non-finite objective in epoch " + std::to_string(s.report.epochs.size()) +
                                     " (" + phase + "); last finite epoch " + std::to_string(last));
      }
      Gradients grads = tape.backward(obj.minimized);
      adam_step(s.model.params().tensors(), grads, s.adam);

      const double w = static_cast<double>(count) / static_cast<double>(n);
      for (std::size_t i = 0; i < v; ++i) {
        mean.rec[i] += w * obj.breakdown.rec[i];
        mean.kl[i] += w * obj.breakdown.kl[i];
        for (std::size_t j = 0; j < v; ++j) mean.suf[i][j] += w * obj.breakdown.suf[i][j];
      }
      mean.total += w * obj.breakdown.total;
    }
    s.report.epochs.push_back({phase, std::move(mean)});
  }
}

void refresh_class_means(MultiViewVae& model, const MultiViewDataset& data, const TrainConfig& config) {
  KMeansOptions opts;
  opts.k = config.clusters;
  opts.restarts = config.kmeans_restarts;
  opts.seed = config.seed;
  model.set_class_means(kmeans(model.embed(data.views), opts).centroids);
}

EvalResult evaluate(const MultiViewVae& model, const MultiViewDataset& data, std::size_t k, std::uint64_t seed,
                    std::size_t restarts) {
  if (k > data.size()) {
    throw ConfigError("K = " + std::to_string(k) + " exceeds n = " + std::to_string(data.size()));
  }
  KMeansOptions opts;
  opts.k = k;
  opts.restarts = restarts;
  opts.seed = seed;
  KMeansResult km = kmeans(model.embed(data.views), opts);

  EvalResult out;
  out.labels = km.partition.labels;
  out.inertia = km.inertia;
  out.n = data.size();
  out.k = k;
  if (data.labels) {
    const auto truth = data.int_labels();
    out.acc = clustering_accuracy(out.labels, truth);
    out.nmi = nmi(out.labels, truth);
    out.ari = ari(out.labels, truth);
  }
  return out;
}

namespace {

TrainReport finish(TrainSession& s, MultiViewVae& model, const MultiViewDataset& data,
                   std::chrono::steady_clock::time_point start) {
  const TrainConfig& c = s.report.config;
  s.report.metrics = evaluate(s.model, data, c.clusters, c.seed, c.kmeans_restarts);
  s.report.wall_time_s = seconds_since(start);
  model = std::move(s.model);
  return std::move(s.report);
}

TrainReport train_with_prefix(MultiViewVae& model, const MultiViewDataset& data, const TrainConfig& config,
                              bool from_checkpoint, bool collaborative) {
  const auto start = std::chrono::steady_clock::now();
  config.validate(data);
  TrainSession s(model, config);
  const std::size_t warmup = from_checkpoint ? 0 : config.pretrain_epochs();
  if (warmup > 0) {
    run_epochs(s, data, warmup, kRecOnly, false, "pretrain");
    refresh_class_means(s.model, data, config);
  }
  run_epochs(s, data, config.epochs - warmup, config.mask, collaborative, collaborative ? "sumvc" : "scmvc");
  return finish(s, model, data, start);
}

}  // namespace

TrainReport pretrain(MultiViewVae& model, const MultiViewDataset& data, const TrainConfig& config) {
  if (config.mode != TrainMode::pretrain) throw ConfigError("pretrain expects mode=pretrain");
  const auto start = std::chrono::steady_clock::now();
  config.validate(data);
  TrainSession s(model, config);
  run_epochs(s, data, config.epochs, kRecOnly, false, "pretrain");
  refresh_class_means(s.model, data, config);
  return finish(s, model, data, start);
}

TrainReport train_scmvc(MultiViewVae& model, const MultiViewDataset& data, const TrainConfig& config,
                        bool from_checkpoint) {
  if (config.mode != TrainMode::scmvc) throw ConfigError("train_scmvc expects mode=scmvc");
  return train_with_prefix(model, data, config, from_checkpoint, false);
}

TrainReport train_sumvc(MultiViewVae& model, const MultiViewDataset& data, const TrainConfig& config,
                        bool from_checkpoint) {
  if (config.mode != TrainMode::sumvc) throw ConfigError("train_sumvc expects mode=sumvc");
  return train_with_prefix(model, data, config, from_checkpoint, true);
}

TrainReport train(MultiViewVae& model, const MultiViewDataset& data, const TrainConfig& config,
                  bool from_checkpoint) {
  switch (config.mode) {
    case TrainMode::pretrain: return pretrain(model, data, config);
    case TrainMode::scmvc: return train_scmvc(model, data, config, from_checkpoint);
    case TrainMode::sumvc: return train_sumvc(model, data, config, from_checkpoint);
  }
  throw ConfigError("unknown training mode");
}

// ---------------------------------------------------------------------------
// Ablation
// ---------------------------------------------------------------------------

std::vector<AblationRow> ablate(const MultiViewDataset& data, const TrainConfig& base, std::size_t threads) {
  if (!data.labels) throw DataError("ablation needs labels");
  TrainConfig config = base;
  config.mode = TrainMode::sumvc;
  config.validate(data);

  const std::vector<LossMask> masks = {{true, false, false}, {true, true, false}, {false, false, true}, {true, true, true}};
  const auto start = std::chrono::steady_clock::now();

  const std::size_t warmup = config.pretrain_epochs();
  TrainSession shared(data, config);
  if (warmup > 0) {
    run_epochs(shared, data, warmup, kRecOnly, false, "pretrain");
    refresh_class_means(shared.model, data, config);
  }
  const double shared_time = seconds_since(start);

  std::vector<AblationRow> rows(masks.size());
  std::vector<std::exception_ptr> errors(masks.size());
  auto run = [&](std::size_t idx) {
    try {
      const auto t0 = std::chrono::steady_clock::now();
      TrainConfig c = config;
      c.mask = masks[idx];
      std::optional<TrainSession> s;
      if (c.mask.rec) {
        s.emplace(shared);
        s->report.config = c;
        run_epochs(*s, data, c.epochs - warmup, c.mask, true, "sumvc");
      } else {
        // Without reconstruction there is nothing to pretrain: the run spends
        // its whole budget on the active terms from the initial weights.
        s.emplace(data, c);
        run_epochs(*s, data, c.epochs, c.mask, true, "sumvc");
      }
      s->report.metrics = evaluate(s->model, data, c.clusters, c.seed, c.kmeans_restarts);
      s->report.wall_time_s = seconds_since(t0) + (c.mask.rec ? shared_time : 0.0);
      rows[idx] = {mask_name(c.mask), std::move(s->report)};
    } catch (...) {
      errors[idx] = std::current_exception();
    }
  };

  const std::size_t workers = std::clamp<std::size_t>(threads, 1, masks.size());
  if (workers == 1) {
    for (std::size_t i = 0; i < masks.size(); ++i) run(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < masks.size(); i = next++) run(i);
      });
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Projection
// ---------------------------------------------------------------------------

Tensor pca_project(const Tensor& points) {
  const std::size_t n = points.rows();
  const std::size_t dim = points.cols();
  if (n == 0) throw ContractError("pca_project: no points");
  RowMatrix centered = points.matrix();
  centered.rowwise() -= centered.colwise().mean();
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(std::max<std::size_t>(n, 1));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw NumericError("pca_project: eigen decomposition failed");

  Tensor out = Tensor::zeros(n, 2);
  for (std::size_t c = 0; c < std::min<std::size_t>(2, dim); ++c) {
    Eigen::VectorXd axis = solver.eigenvectors().col(static_cast<Eigen::Index>(dim - 1 - c));
    Eigen::Index pivot = 0;
    axis.cwiseAbs().maxCoeff(&pivot);
    if (axis(pivot) < 0) axis = -axis;
    const Eigen::VectorXd proj = centered * axis;
    for (std::size_t r = 0; r < n; ++r) out(r, c) = proj(static_cast<Eigen::Index>(r));
  }
  return out;
}

}  // namespace mvc
