// Acceptance run: one PASS/FAIL line per criterion, indented detail lines
// underneath. Pass criterion numbers as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "mvc/data.hpp"
#include "mvc/diagnostics.hpp"
#include "mvc/infotheory.hpp"
#include "mvc/metrics.hpp"
#include "mvc/trainer.hpp"

using namespace mvc;

namespace {

struct Outcome {
  bool pass = false;
  std::vector<std::string> details;
};

template <typename... Args>
std::string cat(Args&&... args) {
  std::ostringstream os;
  os << std::setprecision(6);
  (os << ... << args);
  return os.str();
}

double elapsed(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

Outcome suite_outcome(const SuiteReport& r, double seconds, double budget) {
  Outcome o;
  o.pass = r.pass && seconds < budget;
  for (const auto& note : r.notes) o.details.push_back(note);
  o.details.push_back(cat("cases ", r.cases, ", runtime ", seconds, " s (limit ", budget, " s)"));
  return o;
}

// --- 1-3, 8: verification suites -------------------------------------------

Outcome gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  auto r = gradient_suite(100);
  return suite_outcome(r, elapsed(t0), 30.0);
}

Outcome kl_monte_carlo() {
  const auto t0 = std::chrono::steady_clock::now();
  auto r = kl_mc_suite(50, 1000000);
  return suite_outcome(r, elapsed(t0), 120.0);
}

Outcome infotheory() {
  const auto t0 = std::chrono::steady_clock::now();
  auto r = infotheory_suite(500);
  return suite_outcome(r, elapsed(t0), 60.0);
}

Outcome infonce() {
  auto r = infonce_suite(20, 512);
  Outcome o;
  o.pass = r.pass;
  o.details = r.notes;
  return o;
}

// --- 4: metric oracles -------------------------------------------------------

// Every labeling of n items into at most 3 blocks, as restricted growth strings.
void set_partitions(std::size_t n, std::vector<std::vector<int>>& out) {
  std::vector<int> cur(n, 0);
  std::function<void(std::size_t, int)> rec = [&](std::size_t i, int used) {
    if (i == n) {
      out.push_back(cur);
      return;
    }
    for (int l = 0; l <= std::min(used, 2); ++l) {
      cur[i] = l;
      rec(i + 1, std::max(used, l + 1));
    }
  };
  rec(0, 0);
}

double oracle_accuracy(const std::vector<int>& p, const std::vector<int>& t) {
  int perm[3] = {0, 1, 2};
  std::size_t best = 0;
  do {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < p.size(); ++i) hits += perm[p[i]] == t[i];
    best = std::max(best, hits);
  } while (std::next_permutation(perm, perm + 3));
  return static_cast<double>(best) / static_cast<double>(p.size());
}

double oracle_ari(const std::vector<int>& a, const std::vector<int>& b) {
  double both = 0, same_a = 0, same_b = 0;
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      both += a[i] == a[j] && b[i] == b[j];
      same_a += a[i] == a[j];
      same_b += b[i] == b[j];
    }
  }
  const double pairs = static_cast<double>(n * (n - 1)) / 2.0;
  const double expected = same_a * same_b / pairs;
  const double max_index = 0.5 * (same_a + same_b);
  if (max_index == expected) return a == b ? 1.0 : 0.0;
  return (both - expected) / (max_index - expected);
}

double oracle_nmi(const std::vector<int>& p, const std::vector<int>& t) {
  const double n = static_cast<double>(p.size());
  std::vector<double> table(9, 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) table[static_cast<std::size_t>(p[i] * 3 + t[i])] += 1.0;
  for (double& x : table) x /= n;
  DiscreteJoint joint({"p", "t"}, {3, 3}, table);
  const double denom = 0.5 * (entropy(joint, {"p"}) + entropy(joint, {"t"}));
  if (denom <= 0.0) return p == t ? 1.0 : 0.0;
  return mutual_info(joint, {"p"}, {"t"}) / denom;
}

Outcome metric_oracles() {
  Outcome o;
  double worst = 0.0;
  std::size_t pairs = 0;
  for (std::size_t n = 1; n <= 8; ++n) {
    std::vector<std::vector<int>> parts;
    set_partitions(n, parts);
    for (const auto& p : parts) {
      for (const auto& t : parts) {
        worst = std::max(worst, std::abs(clustering_accuracy(p, t) - oracle_accuracy(p, t)));
        worst = std::max(worst, std::abs(nmi(p, t) - oracle_nmi(p, t)));
        if (n >= 2) worst = std::max(worst, std::abs(ari(p, t) - oracle_ari(p, t)));
        ++pairs;
      }
    }
  }
  Rng rng(20240601);
  std::uniform_int_distribution<int> label(0, 4);
  double total = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> a(1000), b(1000);
    for (auto& x : a) x = label(rng);
    for (auto& x : b) x = label(rng);
    total += ari(a, b);
  }
  const double mean_ari = total / 200.0;
  o.pass = worst < 1e-10 && std::abs(mean_ari) <= 0.02;
  o.details.push_back(cat("exhaustive partition pairs ", pairs, ", worst deviation ", worst));
  o.details.push_back(cat("random-partition mean ARI ", mean_ari, " over 200 trials (n=1000, K=5)"));
  return o;
}

// --- 5-7: end-to-end runs ----------------------------------------------------

MultiViewDataset acceptance_dataset() {
  GmmSpec spec;
  spec.k = 5;
  spec.views = 2;
  spec.dims = {50, 50};
  spec.n = 2000;
  spec.separation = 8;
  spec.noise = 1;
  spec.seed = 1;
  return gen_synthetic_gmm(spec);
}

TrainConfig acceptance_config(std::uint64_t seed) {
  TrainConfig c;
  c.mode = TrainMode::sumvc;
  c.weights.gamma = 0.1;
  c.weights.beta = 0.1;
  c.weights.lambda_nce = 0.0;
  c.latent_dim = 10;
  c.clusters = 5;
  c.epochs = 200;
  c.seed = seed;
  return c;
}

std::size_t worker_count() {
  std::size_t threads = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("MVC_THREADS")) threads = std::max<long>(1, std::atol(env));
  return threads;
}

struct SeedRun {
  std::uint64_t seed = 0;
  std::vector<AblationRow> rows;
  double seconds = 0.0;
};

const std::vector<SeedRun>& ablation_runs() {
  static const std::vector<SeedRun> runs = [] {
    const auto data = acceptance_dataset();
    std::vector<SeedRun> out;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto t0 = std::chrono::steady_clock::now();
      SeedRun run;
      run.seed = seed;
      run.rows = ablate(data, acceptance_config(seed), worker_count());
      run.seconds = elapsed(t0);
      std::cerr << "  seed " << seed << " ablation done in " << run.seconds << " s\n";
      out.push_back(std::move(run));
    }
    return out;
  }();
  return runs;
}

Outcome end_to_end() {
  Outcome o;
  int good = 0;
  for (const auto& run : ablation_runs()) {
    const auto& report = run.rows[3].report;
    const auto& m = *report.metrics;
    const bool ok = *m.acc >= 0.95 && *m.nmi >= 0.90 && *m.ari >= 0.90 && report.wall_time_s < 600.0;
    good += ok;
    o.details.push_back(cat("seed ", run.seed, ": ACC ", *m.acc, " NMI ", *m.nmi, " ARI ", *m.ari, ", run ",
                            report.wall_time_s, " s", ok ? "" : " (below threshold)"));
  }
  o.pass = good >= 4;
  o.details.push_back(cat(good, " of 5 seeds meet ACC >= 0.95, NMI >= 0.90, ARI >= 0.90 within 10 min"));
  return o;
}

Outcome ablation_ordering() {
  Outcome o;
  int good = 0;
  for (const auto& run : ablation_runs()) {
    const double rec = *run.rows[0].report.metrics->acc;
    const double rec_kl = *run.rows[1].report.metrics->acc;
    const double suf = *run.rows[2].report.metrics->acc;
    const double full = *run.rows[3].report.metrics->acc;
    const bool ordered = full >= rec_kl && rec_kl >= rec;
    const bool suf_low = suf <= 0.30;
    good += ordered && suf_low;
    o.details.push_back(cat("seed ", run.seed, ": ACC rec ", rec, ", rec+kl ", rec_kl, ", suf ", suf,
                            ", rec+kl+suf ", full, ordered ? "" : " (order violated)",
                            suf_low ? "" : " (suf-only above 0.30)"));
  }
  o.pass = good >= 4;
  o.details.push_back(cat(good, " of 5 seeds satisfy the ordering and the suf-only ceiling"));
  return o;
}

Outcome beta_zero_equivalence() {
  const auto data = acceptance_dataset();
  TrainConfig sumvc = acceptance_config(1);
  sumvc.weights.beta = 0.0;
  TrainConfig scmvc = sumvc;
  scmvc.mode = TrainMode::scmvc;

  MultiViewVae m_sumvc = TrainSession(data, sumvc).model;
  MultiViewVae m_scmvc = TrainSession(data, scmvc).model;
  const auto a = train_sumvc(m_sumvc, data, sumvc);
  const auto b = train_scmvc(m_scmvc, data, scmvc);

  std::size_t mismatched = 0;
  for (std::size_t e = 0; e < a.epochs.size(); ++e) {
    const auto& x = a.epochs[e].losses;
    const auto& y = b.epochs[e].losses;
    if (x.total != y.total || x.rec != y.rec || x.kl != y.kl) ++mismatched;
  }
  bool same_params = true;
  for (std::size_t i = 0; i < m_sumvc.params().size(); ++i) same_params = same_params && m_sumvc.params()[i] == m_scmvc.params()[i];

  Outcome o;
  o.pass = a.epochs.size() == b.epochs.size() && mismatched == 0 && same_params;
  o.details.push_back(cat(a.epochs.size(), " epochs compared, ", mismatched, " with differing losses; final parameters ",
                          same_params ? "identical" : "differ"));
  return o;
}

struct Criterion {
  int id;
  const char* name;
  Outcome (*run)();
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "gradient suite", gradients},
      {2, "closed-form KL vs Monte Carlo", kl_monte_carlo},
      {3, "information-theory identities", infotheory},
      {4, "metric oracles", metric_oracles},
      {5, "end-to-end synthetic clustering", end_to_end},
      {6, "ablation ordering", ablation_ordering},
      {7, "beta = 0 equivalence", beta_zero_equivalence},
      {8, "InfoNCE sanity", infonce},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.details.push_back(std::string("exception: ") + e.what());
    }
    std::cout << "criterion " << c.id << " [" << (o.pass ? "PASS" : "FAIL") << "] " << c.name << " ("
              << std::fixed << std::setprecision(1) << elapsed(t0) << " s)\n";
    std::cout.unsetf(std::ios::fixed);
    for (const auto& d : o.details) std::cout << "    " << d << "\n";
    std::cout.flush();
    failures += !o.pass;
  }
  return failures == 0 ? 0 : 1;
}
