#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mvc/tensor.hpp"

namespace mvc {

// v aligned feature matrices (n x d_i) with optional labels in [0, K).
struct MultiViewDataset {
  std::vector<Tensor> views;
  std::optional<std::vector<std::int64_t>> labels;
  std::string provenance;

  std::size_t size() const noexcept { return views.empty() ? 0 : views.front().rows(); }
  std::size_t view_count() const noexcept { return views.size(); }
  std::vector<std::size_t> dims() const;
  // max(label) + 1, or 0 without labels.
  std::size_t classes() const;
  std::vector<int> int_labels() const;

  // Throws DataError if views disagree on n, labels have the wrong length,
  // a label is negative, or some class in [0, K) is empty.
  void validate() const;

  // Bitwise equality of views and labels (provenance ignored).
  bool same_content(const MultiViewDataset& other) const;
};

struct GmmSpec {
  std::size_t k = 5;
  std::size_t views = 2;
  std::vector<std::size_t> dims = {50, 50};
  std::size_t n = 2000;
  double separation = 8.0;
  double noise = 1.0;
  std::uint64_t seed = 1;
};

// Shared labels, per-view class means on a sphere of radius `separation`,
// isotropic Gaussian noise. Feature values are rounded to float so that the
// MVDS round trip is exact.
MultiViewDataset gen_synthetic_gmm(const GmmSpec& spec);

// Builds multi-view instances whose views are distinct rows of the same class.
MultiViewDataset pair_by_class(const Tensor& features, const std::vector<std::int64_t>& labels, std::size_t views,
                               std::uint64_t seed);

// Per-view z-scoring of every column (columns with zero spread are centred).
void standardize(MultiViewDataset& ds);

// --- MVDS container -------------------------------------------------------
// "MVDS", u32 version=1, u32 v, u64 n, u8 has_labels, v x u32 dims,
// [n x i64 labels], then each view as n x dim little-endian f32, row-major.

std::vector<char> encode_mvds(const MultiViewDataset& ds);
MultiViewDataset decode_mvds(std::string_view bytes);
void save_mvds(const MultiViewDataset& ds, const std::string& path);
MultiViewDataset load_mvds(const std::string& path);

// One CSV per view (numeric, comma separated, optional non-numeric header
// row) and an optional single-column labels CSV.
MultiViewDataset import_csv(const std::vector<std::string>& view_paths, const std::optional<std::string>& labels_path);

Tensor read_csv_matrix(const std::string& path);

}  // namespace mvc
