// mvc: generate multi-view datasets, train SCMVC/SUMVC models, evaluate,
// run the loss-component ablation and the verification suites.
//
// Machine-readable output goes to stdout as JSON lines; human summaries and
// warnings go to stderr.
//
// Exit codes: 0 ok, 1 failed check or unexpected error, 2 usage,
// 3 numeric abort, 4 format error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mvc/data.hpp"
#include "mvc/diagnostics.hpp"
#include "mvc/errors.hpp"
#include "mvc/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitFormat = 4;

constexpr const char* kSentinel = "INCOMPLETE";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read " + path.string());
  return json::parse(in);
}

// --- gen --------------------------------------------------------------------

struct GenArgs {
  std::string kind = "gmm";
  mvc::GmmSpec gmm;
  std::string features, labels;
  std::vector<std::string> view_files;
  std::size_t views = 2;
  std::uint64_t seed = 1;
  std::string out;
};

int cmd_gen(const GenArgs& a) {
  mvc::MultiViewDataset ds;
  if (a.kind == "gmm") {
    mvc::GmmSpec spec = a.gmm;
    spec.seed = a.seed;
    spec.views = a.views;
    ds = mvc::gen_synthetic_gmm(spec);
  } else if (a.kind == "pair") {
    if (a.features.empty() || a.labels.empty()) throw UsageError("--kind pair needs --features and --labels");
    const mvc::Tensor features = mvc::read_csv_matrix(a.features);
    const mvc::Tensor labels = mvc::read_csv_matrix(a.labels);
    std::vector<std::int64_t> ids;
    for (double x : labels.values()) ids.push_back(static_cast<std::int64_t>(x));
    ds = mvc::pair_by_class(features, ids, a.views, a.seed);
  } else {
    if (a.view_files.empty()) throw UsageError("--kind csv needs at least one --view");
    ds = mvc::import_csv(a.view_files, a.labels.empty() ? std::nullopt : std::optional<std::string>(a.labels));
  }
  mvc::save_mvds(ds, a.out);
  json summary = {{"out", a.out}, {"n", ds.size()}, {"v", ds.view_count()}, {"dims", ds.dims()},
                  {"k", ds.labels ? json(ds.classes()) : json(nullptr)}};
  std::cout << summary.dump() << "\n";
  std::cerr << "wrote " << a.out << ": n=" << ds.size() << " v=" << ds.view_count() << " K=" << ds.classes()
            << "\n";
  return kExitOk;
}

// --- shared training flags ----------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string model = "sumvc";
  mvc::TrainConfig config;
  std::string activation = "tanh";
  std::optional<std::size_t> clusters;
  std::optional<std::size_t> batch;
  bool standardize = false;
  std::string out;
  CLI::Option* beta_opt = nullptr;
};

void add_train_flags(CLI::App* cmd, TrainArgs& a) {
  cmd->add_option("--data", a.data, "Input MVDS file")->required();
  cmd->add_option("--gamma", a.config.weights.gamma, "Cluster-KL weight")->capture_default_str();
  a.beta_opt = cmd->add_option("--beta", a.config.weights.beta, "Sufficiency weight")->capture_default_str();
  cmd->add_option("--lambda-nce", a.config.weights.lambda_nce, "InfoNCE weight")->capture_default_str();
  cmd->add_option("--temperature", a.config.weights.temperature, "InfoNCE temperature")->capture_default_str();
  cmd->add_option("--latent-dim", a.config.latent_dim, "Latent dimension per view")->capture_default_str();
  cmd->add_option("--clusters", a.clusters, "K (defaults to the number of label classes)");
  cmd->add_option("--hidden", a.config.hidden, "Hidden widths")->delimiter(',')->capture_default_str();
  cmd->add_option("--activation", a.activation, "identity|relu|tanh|softplus")->capture_default_str();
  cmd->add_option("--epochs", a.config.epochs, "Total epochs")->capture_default_str();
  cmd->add_option("--pretrain-fraction", a.config.pretrain_fraction, "Reconstruction-only share of the epochs")
      ->capture_default_str();
  cmd->add_option("--batch", a.batch, "Batch size (default min(256, n))");
  cmd->add_option("--lr", a.config.lr, "Adam learning rate")->capture_default_str();
  cmd->add_option("--seed", a.config.seed, "Random seed")->capture_default_str();
  cmd->add_flag("--shared-backbone", a.config.shared_backbone, "One encoder/decoder for all views");
  cmd->add_flag("--standardize", a.standardize, "Z-score every view column at load");
  cmd->add_option("--out", a.out, "Output directory")->required();
}

mvc::MultiViewDataset load_data(const std::string& path, bool standardize) {
  auto ds = mvc::load_mvds(path);
  if (standardize) mvc::standardize(ds);
  return ds;
}

mvc::TrainConfig resolve_config(TrainArgs& a, const mvc::MultiViewDataset& ds) {
  mvc::TrainConfig c = a.config;
  c.mode = mvc::parse_mode(a.model);
  c.activation = mvc::parse_activation(a.activation);
  if (a.clusters) {
    c.clusters = *a.clusters;
  } else if (ds.labels) {
    c.clusters = ds.classes();
  } else {
    throw UsageError("--clusters is required for unlabeled data");
  }
  c.batch = a.batch ? *a.batch : std::min<std::size_t>(256, ds.size());
  return c;
}

// --- train --------------------------------------------------------------------

struct RunArgs {
  TrainArgs train;
  std::string init_from;
};

int cmd_train(RunArgs& r) {
  TrainArgs& a = r.train;
  auto ds = load_data(a.data, a.standardize);
  mvc::TrainConfig config = resolve_config(a, ds);
  if (config.mode != mvc::TrainMode::sumvc && a.beta_opt->count() > 0) {
    std::cerr << "warning: --beta is ignored by --model " << a.model << "\n";
  }
  config.validate(ds);

  const fs::path dir(a.out);
  fs::create_directories(dir);
  write_text(dir / kSentinel, "run in progress\n");
  json run_config = {{"train", mvc::to_json(config)},
                     {"data", a.data},
                     {"standardize", a.standardize},
                     {"init_from", r.init_from.empty() ? json(nullptr) : json(r.init_from)}};
  write_text(dir / "config.json", run_config.dump(2) + "\n");

  std::seed_seq seq{config.seed, std::uint64_t{10}};
  mvc::Rng rng(seq);
  mvc::MultiViewVae model(config.model_config(ds), rng);
  const bool from_checkpoint = !r.init_from.empty();
  if (from_checkpoint) {
    fs::path ck(r.init_from);
    if (fs::is_directory(ck)) ck /= "model.mvck";
    model.load(ck.string());
  }

  std::cerr << "training " << a.model << " on " << a.data << " (n=" << ds.size() << ", v=" << ds.view_count()
            << ", K=" << config.clusters << ", epochs=" << config.epochs << ")\n";
  const mvc::TrainReport report = mvc::train(model, ds, config, from_checkpoint);

  model.save((dir / "model.mvck").string());
  write_text(dir / "report.json", mvc::to_json(report).dump(2) + "\n");
  const json metrics = mvc::metrics_json(*report.metrics);
  write_text(dir / "metrics.json", metrics.dump() + "\n");
  fs::remove(dir / kSentinel);

  std::cout << metrics.dump() << "\n";
  std::cerr << "done in " << report.wall_time_s << " s; run directory " << dir.string() << "\n";
  return kExitOk;
}

// --- eval ---------------------------------------------------------------------

struct EvalArgs {
  std::string run;
  std::string data;
  bool export_embeddings = false;
  bool project2d = false;
};

int cmd_eval(const EvalArgs& e) {
  const fs::path dir(e.run);
  if (fs::exists(dir / kSentinel)) throw UsageError("run " + e.run + " is incomplete (sentinel file present)");
  for (const char* name : {"config.json", "model.mvck", "report.json"}) {
    if (!fs::exists(dir / name)) throw UsageError("run " + e.run + " is incomplete: missing " + name);
  }
  const json run_config = read_json(dir / "config.json");
  const mvc::TrainConfig config = mvc::config_from_json(run_config.at("train"));
  auto ds = load_data(e.data, run_config.value("standardize", false));

  std::seed_seq seq{config.seed, std::uint64_t{10}};
  mvc::Rng rng(seq);
  mvc::MultiViewVae model(config.model_config(ds), rng);
  model.load((dir / "model.mvck").string());

  const mvc::EvalResult result = mvc::evaluate(model, ds, config.clusters, config.seed, config.kmeans_restarts);

  if (e.export_embeddings || e.project2d) {
    const mvc::Tensor z = model.embed(ds.views);
    if (e.export_embeddings) {
      mvc::MultiViewDataset emb;
      emb.views.push_back(z);
      emb.labels = ds.labels;
      mvc::save_mvds(emb, (dir / "embeddings.mvds").string());
    }
    if (e.project2d) {
      const mvc::Tensor p = mvc::pca_project(z);
      std::ofstream csv(dir / "projection.csv");
      csv.precision(17);
      csv << "p1,p2,label\n";
      for (std::size_t r = 0; r < p.rows(); ++r) {
        csv << p(r, 0) << ',' << p(r, 1) << ',';
        if (ds.labels) csv << (*ds.labels)[r];
        csv << '\n';
      }
    }
  }
  std::cout << mvc::metrics_json(result).dump() << "\n";
  return kExitOk;
}

// --- ablate -------------------------------------------------------------------

struct AblateArgs {
  TrainArgs train;
  bool parallel = false;
};

std::size_t worker_cap() {
  std::size_t cap = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("MVC_THREADS")) {
    try {
      cap = std::max<std::size_t>(1, std::stoul(env));
    } catch (const std::exception&) {
      throw UsageError("MVC_THREADS must be a positive integer");
    }
  }
  return cap;
}

int cmd_ablate(AblateArgs& ab) {
  TrainArgs& a = ab.train;
  auto ds = load_data(a.data, a.standardize);
  mvc::TrainConfig config = resolve_config(a, ds);
  config.mode = mvc::TrainMode::sumvc;

  const fs::path dir(a.out);
  fs::create_directories(dir);
  const std::size_t threads = ab.parallel ? worker_cap() : 1;
  const auto rows = mvc::ablate(ds, config, threads);

  std::ofstream csv(dir / "ablation.csv");
  csv.precision(17);
  csv << "mask,acc,nmi,ari\n";
  json grid = json::array();
  for (const auto& row : rows) {
    const auto& m = *row.report.metrics;
    csv << row.mask << ',' << *m.acc << ',' << *m.nmi << ',' << *m.ari << '\n';
    json entry = {{"mask", row.mask}, {"acc", *m.acc}, {"nmi", *m.nmi}, {"ari", *m.ari}};
    std::cout << entry.dump() << "\n";
    grid.push_back(std::move(entry));
  }
  write_text(dir / "ablation.json", json{{"config", mvc::to_json(config)}, {"rows", grid}}.dump(2) + "\n");
  return kExitOk;
}

// --- diagnose -----------------------------------------------------------------

struct DiagnoseArgs {
  std::string suite;
  std::optional<std::size_t> seeds;
};

int cmd_diagnose(const DiagnoseArgs& d) {
  std::size_t seeds = 0;
  if (d.seeds) {
    seeds = *d.seeds;
  } else if (d.suite == "gradients") {
    seeds = 100;
  } else if (d.suite == "kl-mc") {
    seeds = 50;
  } else if (d.suite == "infotheory") {
    seeds = 500;
  } else {
    seeds = 20;
  }
  const mvc::SuiteReport report = mvc::run_suite(d.suite, seeds);
  for (const auto& note : report.notes) std::cerr << d.suite << ": " << note << "\n";
  std::cout << report.to_json().dump() << "\n";
  return report.pass ? kExitOk : kExitFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variational multi-view clustering (SCMVC / SUMVC)"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Write a multi-view dataset as MVDS");
  gen_cmd->add_option("--kind", gen.kind, "gmm|pair|csv")
      ->check(CLI::IsMember({"gmm", "pair", "csv"}))
      ->capture_default_str();
  gen_cmd->add_option("--k", gen.gmm.k, "Classes (gmm)")->capture_default_str();
  gen_cmd->add_option("--views", gen.views, "Views (gmm, pair)")->capture_default_str();
  gen_cmd->add_option("--dims", gen.gmm.dims, "Per-view dimensions (gmm)")->delimiter(',')->capture_default_str();
  gen_cmd->add_option("--n", gen.gmm.n, "Samples (gmm)")->capture_default_str();
  gen_cmd->add_option("--sep", gen.gmm.separation, "Class-mean radius (gmm)")->capture_default_str();
  gen_cmd->add_option("--noise", gen.gmm.noise, "Noise standard deviation (gmm)")->capture_default_str();
  gen_cmd->add_option("--features", gen.features, "Feature CSV (pair)");
  gen_cmd->add_option("--labels", gen.labels, "Label CSV (pair, csv)");
  gen_cmd->add_option("--view", gen.view_files, "One CSV per view (csv)");
  gen_cmd->add_option("--seed", gen.seed, "Random seed")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Output MVDS path")->required();

  RunArgs run;
  auto* train_cmd = app.add_subcommand("train", "Train a model into a run directory");
  add_train_flags(train_cmd, run.train);
  train_cmd->add_option("--model", run.train.model, "pretrain|scmvc|sumvc")
      ->check(CLI::IsMember({"pretrain", "scmvc", "sumvc"}))
      ->capture_default_str();
  train_cmd->add_option("--init-from", run.init_from, "Checkpoint file or run directory to start from");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a completed run");
  eval_cmd->add_option("--run", eval.run, "Run directory")->required();
  eval_cmd->add_option("--data", eval.data, "MVDS file")->required();
  eval_cmd->add_flag("--export-embeddings", eval.export_embeddings, "Write embeddings.mvds into the run");
  eval_cmd->add_flag("--project2d", eval.project2d, "Write projection.csv (top two principal components)");

  AblateArgs ablate;
  auto* ablate_cmd = app.add_subcommand("ablate", "Loss-component ablation grid");
  add_train_flags(ablate_cmd, ablate.train);
  ablate_cmd->add_flag("--parallel", ablate.parallel, "Run the four masks concurrently (MVC_THREADS caps workers)");

  DiagnoseArgs diag;
  auto* diag_cmd = app.add_subcommand("diagnose", "Run a verification suite");
  diag_cmd->add_option("--suite", diag.suite, "gradients|kl-mc|infotheory|infonce")
      ->required()
      ->check(CLI::IsMember(mvc::suite_names()));
  diag_cmd->add_option("--seeds", diag.seeds, "Number of random cases");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*gen_cmd) return cmd_gen(gen);
    if (*train_cmd) return cmd_train(run);
    if (*eval_cmd) return cmd_eval(eval);
    if (*ablate_cmd) return cmd_ablate(ablate);
    if (*diag_cmd) return cmd_diagnose(diag);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const mvc::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const mvc::NumericAbort& e) {
    std::cerr << "numeric abort: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const mvc::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFormat;
  } catch (const mvc::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFormat;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailed;
  }
  return kExitUsage;
}
