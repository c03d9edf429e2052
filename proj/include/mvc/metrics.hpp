#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mvc/tensor.hpp"

namespace mvc {

// Hard assignment of n samples to clusters [0, k).
struct Partition {
  std::vector<int> labels;
  std::size_t k = 0;

  Partition() = default;
  Partition(std::vector<int> labels, std::size_t k);
  // Infers k as max(label) + 1.
  static Partition from_labels(std::vector<int> labels);

  std::size_t size() const noexcept { return labels.size(); }
};

struct KMeansOptions {
  std::size_t k = 2;
  std::size_t restarts = 10;
  std::uint64_t seed = 0;
  double tol = 1e-8;       // relative inertia change that counts as converged
  std::size_t max_iter = 300;
};

struct KMeansResult {
  Partition partition;
  Tensor centroids;                  // k x D
  double inertia = 0.0;              // sum of squared distances to centroids
  std::size_t best_restart = 0;
  std::vector<double> inertia_trace; // per Lloyd iteration, best restart
};

// Lloyd iterations from k-means++ seeds; best restart by inertia (ties go to
// the lowest restart index). Empty clusters are reseeded to the point
// farthest from its centroid.
KMeansResult kmeans(const Tensor& points, const KMeansOptions& options);

// Minimum-cost perfect matching on a square cost matrix (row-major, n x n).
// Returns the column assigned to each row.
std::vector<std::size_t> solve_assignment(std::span<const double> cost, std::size_t n);

// Best one-to-one matching accuracy between two labelings.
double clustering_accuracy(std::span<const int> pred, std::span<const int> truth);
// I(pred; truth) / ((H(pred) + H(truth)) / 2), natural logs.
double nmi(std::span<const int> pred, std::span<const int> truth);
// Adjusted Rand index via pair counting.
double ari(std::span<const int> pred, std::span<const int> truth);

inline double clustering_accuracy(const Partition& pred, const Partition& truth) {
  return clustering_accuracy(pred.labels, truth.labels);
}
inline double nmi(const Partition& pred, const Partition& truth) { return nmi(pred.labels, truth.labels); }
inline double ari(const Partition& pred, const Partition& truth) { return ari(pred.labels, truth.labels); }

// Contingency table: rows index pred clusters, columns truth clusters (both
// after compacting labels to 0..k-1 in order of first appearance of value).
struct Contingency {
  std::vector<std::vector<std::int64_t>> counts;
  std::vector<std::int64_t> pred_sizes;
  std::vector<std::int64_t> truth_sizes;
  std::int64_t n = 0;
};

Contingency contingency(std::span<const int> pred, std::span<const int> truth);

}  // namespace mvc
