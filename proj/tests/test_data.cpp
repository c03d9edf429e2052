#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "mvc/data.hpp"
#include "mvc/errors.hpp"
#include "mvc/metrics.hpp"

using namespace mvc;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  auto dir = fs::temp_directory_path() / "mvc_test_data";
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

MultiViewDataset small_dataset() {
  MultiViewDataset ds;
  ds.views = {Tensor::from_rows({{1, 2}, {3, 4}, {5.5, -6}}),
              Tensor::from_rows({{0.25, 0, 1, 2}, {3, 4, 5, 6}, {-7, 8, 9, 10}})};
  ds.labels = std::vector<std::int64_t>{0, 1, 1};
  return ds;
}

}  // namespace

TEST_CASE("synthetic GMM shapes and balance") {
  GmmSpec spec;
  spec.k = 4;
  spec.views = 3;
  spec.dims = {5, 7, 2};
  spec.n = 400;
  auto ds = gen_synthetic_gmm(spec);
  REQUIRE(ds.view_count() == 3);
  CHECK(ds.views[0].shape() == std::vector<std::size_t>{400, 5});
  CHECK(ds.views[1].shape() == std::vector<std::size_t>{400, 7});
  CHECK(ds.views[2].shape() == std::vector<std::size_t>{400, 2});
  REQUIRE(ds.labels);
  CHECK(ds.labels->size() == 400);
  CHECK(ds.classes() == 4);
  std::vector<int> counts(4, 0);
  for (auto l : *ds.labels) ++counts[static_cast<std::size_t>(l)];
  for (int c : counts) {
    CHECK(c >= 50);
    CHECK(c <= 150);
  }
  CHECK_NOTHROW(ds.validate());
  CHECK(gen_synthetic_gmm(spec).same_content(ds));
  spec.seed = 2;
  CHECK_FALSE(gen_synthetic_gmm(spec).same_content(ds));
}

TEST_CASE("synthetic GMM rejects invalid sizes") {
  GmmSpec spec;
  spec.k = 1;
  CHECK_THROWS_AS(gen_synthetic_gmm(spec), ConfigError);
  spec = {};
  spec.n = 5;
  CHECK_THROWS_AS(gen_synthetic_gmm(spec), ConfigError);
  spec = {};
  spec.separation = 0;
  CHECK_THROWS_AS(gen_synthetic_gmm(spec), ConfigError);
  spec = {};
  spec.noise = -1;
  CHECK_THROWS_AS(gen_synthetic_gmm(spec), ConfigError);
  spec = {};
  spec.dims = {50};
  CHECK_THROWS_AS(gen_synthetic_gmm(spec), ConfigError);
}

TEST_CASE("well separated GMM is recovered by K-means on one view") {
  GmmSpec spec;
  spec.k = 5;
  spec.views = 2;
  spec.dims = {20, 20};
  spec.n = 1000;
  spec.separation = 10;
  spec.noise = 0.1;
  auto ds = gen_synthetic_gmm(spec);
  KMeansOptions opt;
  opt.k = 5;
  opt.seed = 3;
  auto res = kmeans(ds.views[0], opt);
  CHECK(clustering_accuracy(res.partition.labels, ds.int_labels()) >= 0.99);
}

TEST_CASE("pair_by_class draws distinct same-class rows") {
  const std::size_t m = 60;
  Tensor feats = Tensor::zeros(m, 2);
  std::vector<std::int64_t> labels(m);
  for (std::size_t r = 0; r < m; ++r) {
    labels[r] = static_cast<std::int64_t>(r % 4);
    feats(r, 0) = static_cast<double>(r);
    feats(r, 1) = static_cast<double>(labels[r]);
  }
  auto ds = pair_by_class(feats, labels, 3, 7);
  REQUIRE(ds.view_count() == 3);
  REQUIRE(ds.labels);
  CHECK(ds.size() == m);
  for (std::size_t r = 0; r < ds.size(); ++r) {
    std::set<double> sources;
    for (const auto& view : ds.views) {
      CHECK(view(r, 1) == static_cast<double>((*ds.labels)[r]));
      sources.insert(view(r, 0));
    }
    CHECK(sources.size() == 3);
  }
  CHECK(pair_by_class(feats, labels, 3, 7).same_content(ds));
  CHECK_FALSE(pair_by_class(feats, labels, 3, 8).same_content(ds));

  auto single = pair_by_class(feats, labels, 1, 7);
  std::multiset<double> rows;
  for (std::size_t r = 0; r < m; ++r) rows.insert(single.views[0](r, 0));
  std::multiset<double> expected;
  for (std::size_t r = 0; r < m; ++r) expected.insert(static_cast<double>(r));
  CHECK(rows == expected);

  std::vector<std::int64_t> skewed = labels;
  skewed[0] = 9;
  for (std::size_t r = 1; r < m; ++r) skewed[r] = static_cast<std::int64_t>(r % 2);
  CHECK_THROWS_AS(pair_by_class(feats, skewed, 2, 1), DataError);
}

TEST_CASE("standardize gives zero mean and unit variance columns") {
  GmmSpec spec;
  spec.n = 300;
  spec.dims = {4, 6};
  auto ds = gen_synthetic_gmm(spec);
  ds.views[1].matrix().col(2).setConstant(3.0);
  standardize(ds);
  for (const auto& view : ds.views) {
    for (std::size_t c = 0; c < view.cols(); ++c) {
      double mean = 0.0, sq = 0.0;
      for (std::size_t r = 0; r < view.rows(); ++r) mean += view(r, c);
      mean /= static_cast<double>(view.rows());
      for (std::size_t r = 0; r < view.rows(); ++r) sq += (view(r, c) - mean) * (view(r, c) - mean);
      CHECK(std::abs(mean) < 1e-10);
      const double var = sq / static_cast<double>(view.rows());
      if (&view == &ds.views[1] && c == 2) {
        CHECK(var == 0.0);
      } else {
        CHECK(var == doctest::Approx(1.0).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("MVDS round trip and size") {
  auto ds = small_dataset();
  auto bytes = encode_mvds(ds);
  CHECK(bytes.size() == 29 + 3 * 8 + (3 * 2 + 3 * 4) * 4);
  CHECK(bytes.size() == 125);
  CHECK(decode_mvds(std::string_view(bytes.data(), bytes.size())).same_content(ds));

  const auto path = (temp_dir() / "round.mvds").string();
  GmmSpec spec;
  spec.n = 200;
  auto big = gen_synthetic_gmm(spec);
  save_mvds(big, path);
  CHECK(load_mvds(path).same_content(big));

  MultiViewDataset unlabeled = small_dataset();
  unlabeled.labels.reset();
  auto ub = encode_mvds(unlabeled);
  CHECK(ub.size() == 29 + 72);
  auto back = decode_mvds(std::string_view(ub.data(), ub.size()));
  CHECK_FALSE(back.labels.has_value());
  CHECK(back.same_content(unlabeled));
}

TEST_CASE("MVDS corruption is reported with offsets") {
  auto bytes = encode_mvds(small_dataset());
  auto decode = [](const std::vector<char>& b) { return decode_mvds(std::string_view(b.data(), b.size())); };
  auto offset_of = [&](const std::vector<char>& b) -> std::int64_t {
    try {
      decode(b);
    } catch (const FormatError& e) {
      return static_cast<std::int64_t>(e.offset());
    }
    return -1;
  };
  auto bad = bytes;
  bad[0] = 'N';
  CHECK(offset_of(bad) == 0);
  bad = bytes;
  bad[4] = 7;
  CHECK(offset_of(bad) == 4);
  bad = bytes;
  bad.resize(bytes.size() - 1);
  CHECK(offset_of(bad) >= 0);
  bad = bytes;
  bad.push_back(0);
  CHECK(offset_of(bad) >= 0);
  bad = bytes;
  bad.resize(10);
  CHECK(offset_of(bad) >= 0);
  // Dimension claiming more data than the file holds.
  bad = bytes;
  bad[21] = static_cast<char>(0xff);
  bad[22] = static_cast<char>(0xff);
  CHECK(offset_of(bad) >= 0);
  CHECK_THROWS_AS(load_mvds((temp_dir() / "missing.mvds").string()), Error);
}

TEST_CASE("CSV import") {
  const auto dir = temp_dir();
  write_text(dir / "a.csv", "f1,f2\n1,2\n3,4.5\n-1,0\n");
  write_text(dir / "b.csv", "0.5\n1\n2\n");
  write_text(dir / "y.csv", "label\n0\n1\n1\n");
  auto ds = import_csv({(dir / "a.csv").string(), (dir / "b.csv").string()}, (dir / "y.csv").string());
  CHECK(ds.views[0] == Tensor::from_rows({{1, 2}, {3, 4.5}, {-1, 0}}));
  CHECK(ds.views[1] == Tensor::from_rows({{0.5}, {1}, {2}}));
  CHECK(*ds.labels == std::vector<std::int64_t>{0, 1, 1});

  write_text(dir / "ragged.csv", "1,2\n3\n");
  CHECK_THROWS_AS(read_csv_matrix((dir / "ragged.csv").string()), FormatError);
  write_text(dir / "short.csv", "1\n2\n");
  CHECK_THROWS_AS(import_csv({(dir / "a.csv").string(), (dir / "short.csv").string()}, std::nullopt), DataError);
  write_text(dir / "gap.csv", "0\n2\n2\n");
  CHECK_THROWS_AS(import_csv({(dir / "a.csv").string()}, (dir / "gap.csv").string()), DataError);
}

TEST_CASE("dataset validation") {
  auto ds = small_dataset();
  CHECK_NOTHROW(ds.validate());
  CHECK(ds.dims() == std::vector<std::size_t>{2, 4});
  ds.labels = std::vector<std::int64_t>{0, 2, 2};
  CHECK_THROWS_AS(ds.validate(), DataError);
  ds.labels = std::vector<std::int64_t>{0, -1, 1};
  CHECK_THROWS_AS(ds.validate(), DataError);
  ds = small_dataset();
  ds.views[1] = Tensor::zeros(2, 4);
  CHECK_THROWS_AS(ds.validate(), DataError);
}
