#include "mvc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "mvc/errors.hpp"

namespace mvc {

Partition::Partition(std::vector<int> labels_in, std::size_t k_in) : labels(std::move(labels_in)), k(k_in) {
  if (labels.empty()) throw ContractError("partition needs at least one sample");
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= k) throw ContractError("partition label out of range");
  }
}

Partition Partition::from_labels(std::vector<int> labels) {
  if (labels.empty()) throw ContractError("partition needs at least one sample");
  const int mx = *std::max_element(labels.begin(), labels.end());
  return Partition(std::move(labels), static_cast<std::size_t>(std::max(mx, 0)) + 1);
}

// ---------------------------------------------------------------------------
// K-means
// ---------------------------------------------------------------------------

namespace {

double sq_distance(const Tensor& a, std::size_t r, const Tensor& b, std::size_t c) {
  double acc = 0.0;
  for (std::size_t t = 0; t < a.cols(); ++t) {
    const double diff = a(r, t) - b(c, t);
    acc += diff * diff;
  }
  return acc;
}

Tensor kmeanspp_seeds(const Tensor& points, std::size_t k, Rng& rng) {
  const std::size_t n = points.rows(), dim = points.cols();
  Tensor centroids = Tensor::zeros(k, dim);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  auto copy_row = [&](std::size_t dst, std::size_t src) {
    for (std::size_t t = 0; t < dim; ++t) centroids(dst, t) = points(src, t);
  };
  copy_row(0, pick(rng));
  std::vector<double> nearest(n);
  for (std::size_t i = 0; i < n; ++i) nearest[i] = sq_distance(points, i, centroids, 0);
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double d : nearest) total += d;
    std::size_t chosen = 0;
    if (total > 0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng);
      chosen = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        target -= nearest[i];
        if (target < 0) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = pick(rng);
    }
    copy_row(c, chosen);
    for (std::size_t i = 0; i < n; ++i) nearest[i] = std::min(nearest[i], sq_distance(points, i, centroids, c));
  }
  return centroids;
}

struct LloydRun {
  std::vector<int> labels;
  Tensor centroids;
  double inertia = 0.0;
  std::vector<double> trace;
};

LloydRun lloyd(const Tensor& points, Tensor centroids, const KMeansOptions& options) {
  const std::size_t n = points.rows(), dim = points.cols(), k = options.k;
  LloydRun run;
  run.labels.assign(n, -1);
  std::vector<double> dist(n);
  double previous = 0.0;

  for (std::size_t iter = 0; iter < options.max_iter; ++iter) {
    bool changed = false;
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = sq_distance(points, i, centroids, 0);
      for (std::size_t c = 1; c < k; ++c) {
        const double d = sq_distance(points, i, centroids, c);
        if (d < best_d) {
          best_d = d;
          best = static_cast<int>(c);
        }
      }
      changed = changed || run.labels[i] != best;
      run.labels[i] = best;
      dist[i] = best_d;
      inertia += best_d;
    }
    run.trace.push_back(inertia);
    run.inertia = inertia;
    if (!changed || (iter > 0 && (previous - inertia) <= options.tol * std::max(previous, 1e-300))) {
      break;
    }
    previous = inertia;

    // Update step.
    Tensor sums = Tensor::zeros(k, dim);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(run.labels[i]);
      ++counts[c];
      for (std::size_t t = 0; t < dim; ++t) sums(c, t) += points(i, t);
    }
    std::vector<bool> taken(n, false);
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        for (std::size_t t = 0; t < dim; ++t) centroids(c, t) = sums(c, t) / static_cast<double>(counts[c]);
        continue;
      }
      // Empty cluster: move it onto the worst-served point.
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (!taken[i] && dist[i] > far_d) {
          far_d = dist[i];
          far = i;
        }
      }
      taken[far] = true;
      dist[far] = 0.0;
      for (std::size_t t = 0; t < dim; ++t) centroids(c, t) = points(far, t);
    }
  }
  run.centroids = std::move(centroids);
  return run;
}

}  // namespace

KMeansResult kmeans(const Tensor& points, const KMeansOptions& options) {
  const std::size_t n = points.rows();
  if (options.k < 1) throw ConfigError("kmeans: k must be >= 1");
  if (n == 0 || options.k > n) {
    throw ConfigError("kmeans: K = " + std::to_string(options.k) + " exceeds sample count " + std::to_string(n));
  }
  if (!(options.tol > 0)) throw ConfigError("kmeans: tol must be positive");
  if (options.restarts < 1 || options.max_iter < 1) throw ConfigError("kmeans: restarts and max_iter must be >= 1");
  require_finite(points, "kmeans input");

  KMeansResult best;
  bool have_best = false;
  for (std::size_t restart = 0; restart < options.restarts; ++restart) {
    std::seed_seq seq{options.seed, static_cast<std::uint64_t>(restart), std::uint64_t{0x6b6d65616e73}};
    Rng rng(seq);
    LloydRun run = lloyd(points, kmeanspp_seeds(points, options.k, rng), options);
    if (!have_best || run.inertia < best.inertia) {
      best.partition = Partition(std::move(run.labels), options.k);
      best.centroids = std::move(run.centroids);
      best.inertia = run.inertia;
      best.best_restart = restart;
      best.inertia_trace = std::move(run.trace);
      have_best = true;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Assignment (Hungarian algorithm with potentials, O(n^3))
// ---------------------------------------------------------------------------

std::vector<std::size_t> solve_assignment(std::span<const double> cost, std::size_t n) {
  if (cost.size() != n * n) throw DimensionError("solve_assignment: cost must be n x n");
  if (n == 0) return {};
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based arrays; column 0 is a virtual start.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  for (std::size_t row = 1; row <= n; ++row) {
    match[0] = row;
    std::size_t col0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[col0] = true;
      const std::size_t i0 = match[col0];
      double delta = inf;
      std::size_t col1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = col0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          col1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      col0 = col1;
    } while (match[col0] != 0);
    do {
      const std::size_t col1 = way[col0];
      match[col0] = match[col1];
      col0 = col1;
    } while (col0 != 0);
  }
  std::vector<std::size_t> assignment(n);
  for (std::size_t j = 1; j <= n; ++j) assignment[match[j] - 1] = j - 1;
  return assignment;
}

// ---------------------------------------------------------------------------
// External indices
// ---------------------------------------------------------------------------

namespace {

std::vector<std::size_t> compact(std::span<const int> labels, std::size_t& k) {
  std::map<int, std::size_t> index;
  for (int l : labels) index.emplace(l, 0);
  std::size_t next = 0;
  for (auto& [label, idx] : index) idx = next++;
  k = next;
  std::vector<std::size_t> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = index.at(labels[i]);
  return out;
}

double comb2(std::int64_t x) { return 0.5 * static_cast<double>(x) * static_cast<double>(x - 1); }

// Both labelings induce the same partition (up to renaming).
bool identical(const Contingency& c) {
  if (c.pred_sizes.size() != c.truth_sizes.size()) return false;
  for (const auto& row : c.counts) {
    std::size_t nonzero = 0;
    for (auto x : row) nonzero += x != 0;
    if (nonzero != 1) return false;
  }
  return true;
}

}  // namespace

Contingency contingency(std::span<const int> pred, std::span<const int> truth) {
  if (pred.size() != truth.size()) {
    throw ContractError("label vectors differ in length: " + std::to_string(pred.size()) + " vs " +
                        std::to_string(truth.size()));
  }
  if (pred.empty()) throw ContractError("metrics need at least one sample");
  std::size_t kp = 0, kt = 0;
  const auto p = compact(pred, kp);
  const auto t = compact(truth, kt);
  Contingency c;
  c.counts.assign(kp, std::vector<std::int64_t>(kt, 0));
  c.pred_sizes.assign(kp, 0);
  c.truth_sizes.assign(kt, 0);
  c.n = static_cast<std::int64_t>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    ++c.counts[p[i]][t[i]];
    ++c.pred_sizes[p[i]];
    ++c.truth_sizes[t[i]];
  }
  return c;
}

double clustering_accuracy(std::span<const int> pred, std::span<const int> truth) {
  const Contingency c = contingency(pred, truth);
  const std::size_t size = std::max(c.pred_sizes.size(), c.truth_sizes.size());
  std::vector<double> cost(size * size, 0.0);
  for (std::size_t i = 0; i < c.pred_sizes.size(); ++i) {
    for (std::size_t j = 0; j < c.truth_sizes.size(); ++j) cost[i * size + j] = -static_cast<double>(c.counts[i][j]);
  }
  const auto assignment = solve_assignment(cost, size);
  std::int64_t matched = 0;
  for (std::size_t i = 0; i < c.pred_sizes.size(); ++i) {
    if (assignment[i] < c.truth_sizes.size()) matched += c.counts[i][assignment[i]];
  }
  return static_cast<double>(matched) / static_cast<double>(c.n);
}

double nmi(std::span<const int> pred, std::span<const int> truth) {
  const Contingency c = contingency(pred, truth);
  const double n = static_cast<double>(c.n);
  auto entropy = [n](const std::vector<std::int64_t>& sizes) {
    double h = 0.0;
    for (auto s : sizes) {
      if (s > 0) {
        const double p = static_cast<double>(s) / n;
        h -= p * std::log(p);
      }
    }
    return h;
  };
  const double hp = entropy(c.pred_sizes);
  const double ht = entropy(c.truth_sizes);
  double mi = 0.0;
  for (std::size_t i = 0; i < c.pred_sizes.size(); ++i) {
    for (std::size_t j = 0; j < c.truth_sizes.size(); ++j) {
      const auto nij = c.counts[i][j];
      if (nij == 0) continue;
      const double pij = static_cast<double>(nij) / n;
      mi += pij * std::log(static_cast<double>(nij) * n /
                           (static_cast<double>(c.pred_sizes[i]) * static_cast<double>(c.truth_sizes[j])));
    }
  }
  const double denom = 0.5 * (hp + ht);
  if (denom <= 0.0) return identical(c) ? 1.0 : 0.0;
  return std::clamp(mi / denom, 0.0, 1.0);
}

double ari(std::span<const int> pred, std::span<const int> truth) {
  const Contingency c = contingency(pred, truth);
  if (c.n < 2) throw ContractError("ari needs at least two samples");
  double index = 0.0;
  for (const auto& row : c.counts) {
    for (auto x : row) index += comb2(x);
  }
  double a = 0.0, b = 0.0;
  for (auto s : c.pred_sizes) a += comb2(s);
  for (auto s : c.truth_sizes) b += comb2(s);
  const double expected = a * b / comb2(c.n);
  const double maximum = 0.5 * (a + b);
  if (maximum - expected == 0.0) return identical(c) ? 1.0 : 0.0;
  return (index - expected) / (maximum - expected);
}

}  // namespace mvc
