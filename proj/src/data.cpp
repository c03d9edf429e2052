#include "mvc/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "mvc/binary_io.hpp"
#include "mvc/errors.hpp"

namespace mvc {

namespace {

constexpr char kMagic[4] = {'M', 'V', 'D', 'S'};
constexpr std::uint32_t kVersion = 1;

double to_float_precision(double x) { return static_cast<double>(static_cast<float>(x)); }

Rng stream(std::uint64_t seed, std::uint64_t purpose, std::uint64_t index = 0) {
  std::seed_seq seq{seed, purpose, index};
  return Rng(seq);
}

}  // namespace

// ---------------------------------------------------------------------------
// MultiViewDataset
// ---------------------------------------------------------------------------

std::vector<std::size_t> MultiViewDataset::dims() const {
  std::vector<std::size_t> out;
  for (const auto& v : views) out.push_back(v.cols());
  return out;
}

std::size_t MultiViewDataset::classes() const {
  if (!labels || labels->empty()) return 0;
  return static_cast<std::size_t>(*std::max_element(labels->begin(), labels->end())) + 1;
}

std::vector<int> MultiViewDataset::int_labels() const {
  if (!labels) throw DataError("dataset has no labels");
  return std::vector<int>(labels->begin(), labels->end());
}

void MultiViewDataset::validate() const {
  if (views.empty()) throw DataError("dataset has no views");
  const std::size_t n = views.front().rows();
  if (n == 0) throw DataError("dataset has no samples");
  for (const auto& v : views) {
    if (v.rank() != 2 || v.rows() != n) throw DataError("views disagree on the sample count");
  }
  if (labels) {
    if (labels->size() != n) throw DataError("label count does not match sample count");
    std::vector<std::size_t> counts;
    for (auto l : *labels) {
      if (l < 0) throw DataError("negative label");
      if (static_cast<std::size_t>(l) >= counts.size()) counts.resize(static_cast<std::size_t>(l) + 1, 0);
      ++counts[static_cast<std::size_t>(l)];
    }
    for (std::size_t c = 0; c < counts.size(); ++c) {
      if (counts[c] == 0) throw DataError("class " + std::to_string(c) + " has no samples");
    }
  }
}

bool MultiViewDataset::same_content(const MultiViewDataset& other) const {
  if (views.size() != other.views.size() || labels != other.labels) return false;
  for (std::size_t i = 0; i < views.size(); ++i) {
    if (!(views[i] == other.views[i])) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

MultiViewDataset gen_synthetic_gmm(const GmmSpec& spec) {
  if (spec.k < 2) throw ConfigError("gmm: K must be >= 2");
  if (spec.views < 1 || spec.dims.size() != spec.views) throw ConfigError("gmm: need one dimension per view");
  if (spec.n < spec.k * spec.views) throw ConfigError("gmm: n must be at least K * v");
  if (!(spec.separation > 0) || !(spec.noise > 0)) throw ConfigError("gmm: separation and noise must be positive");
  for (auto d : spec.dims) {
    if (d == 0) throw ConfigError("gmm: view dimensions must be positive");
  }

  // Every class appears at least once; the remaining labels are uniform.
  std::vector<std::int64_t> labels(spec.n);
  Rng label_rng = stream(spec.seed, 0);
  std::uniform_int_distribution<std::int64_t> uniform(0, static_cast<std::int64_t>(spec.k) - 1);
  for (std::size_t i = 0; i < spec.n; ++i) {
    labels[i] = i < spec.k ? static_cast<std::int64_t>(i) : uniform(label_rng);
  }
  std::shuffle(labels.begin(), labels.end(), label_rng);

  MultiViewDataset ds;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t v = 0; v < spec.views; ++v) {
    const std::size_t d = spec.dims[v];
    Rng mean_rng = stream(spec.seed, 1, v);
    Tensor means = Tensor::zeros(spec.k, d);
    for (std::size_t c = 0; c < spec.k; ++c) {
      double norm = 0.0;
      do {
        norm = 0.0;
        for (std::size_t t = 0; t < d; ++t) {
          means(c, t) = normal(mean_rng);
          norm += means(c, t) * means(c, t);
        }
      } while (norm == 0.0);
      const double factor = spec.separation / std::sqrt(norm);
      for (std::size_t t = 0; t < d; ++t) means(c, t) *= factor;
    }

    Rng noise_rng = stream(spec.seed, 2, v);
    Tensor x = Tensor::zeros(spec.n, d);
    for (std::size_t i = 0; i < spec.n; ++i) {
      const auto c = static_cast<std::size_t>(labels[i]);
      for (std::size_t t = 0; t < d; ++t) {
        x(i, t) = to_float_precision(means(c, t) + spec.noise * normal(noise_rng));
      }
    }
    ds.views.push_back(std::move(x));
  }
  ds.labels = std::move(labels);
  std::ostringstream prov;
  prov << "gmm k=" << spec.k << " v=" << spec.views << " n=" << spec.n << " sep=" << spec.separation
       << " noise=" << spec.noise << " seed=" << spec.seed;
  ds.provenance = prov.str();
  return ds;
}

MultiViewDataset pair_by_class(const Tensor& features, const std::vector<std::int64_t>& labels, std::size_t views,
                               std::uint64_t seed) {
  if (views < 1) throw ConfigError("pair_by_class: need at least one view");
  const std::size_t m = features.rows();
  if (labels.size() != m) throw DataError("pair_by_class: label count does not match feature rows");

  std::map<std::int64_t, std::vector<std::size_t>> members;
  for (std::size_t r = 0; r < m; ++r) members[labels[r]].push_back(r);
  for (const auto& [label, rows] : members) {
    if (rows.size() < views) {
      throw DataError("pair_by_class: class " + std::to_string(label) + " has " + std::to_string(rows.size()) +
                      " samples, fewer than " + std::to_string(views) + " views");
    }
  }

  Rng rng = stream(seed, 3);
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  MultiViewDataset ds;
  ds.views.assign(views, Tensor::zeros(m, features.cols()));
  ds.labels = std::vector<std::int64_t>(m);
  std::vector<std::size_t> chosen;
  for (std::size_t out = 0; out < m; ++out) {
    const std::size_t anchor = order[out];
    const auto& pool = members.at(labels[anchor]);
    chosen.assign(1, anchor);
    // Remaining views: distinct rows of the same class.
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    while (chosen.size() < views) {
      const std::size_t candidate = pool[pick(rng)];
      if (std::find(chosen.begin(), chosen.end(), candidate) == chosen.end()) chosen.push_back(candidate);
    }
    for (std::size_t v = 0; v < views; ++v) {
      for (std::size_t t = 0; t < features.cols(); ++t) ds.views[v](out, t) = features(chosen[v], t);
    }
    (*ds.labels)[out] = labels[anchor];
  }
  ds.provenance = "pair_by_class v=" + std::to_string(views) + " seed=" + std::to_string(seed);
  return ds;
}

void standardize(MultiViewDataset& ds) {
  for (auto& view : ds.views) {
    const std::size_t n = view.rows();
    for (std::size_t t = 0; t < view.cols(); ++t) {
      double mean = 0.0;
      for (std::size_t r = 0; r < n; ++r) mean += view(r, t);
      mean /= static_cast<double>(n);
      double var = 0.0;
      for (std::size_t r = 0; r < n; ++r) var += (view(r, t) - mean) * (view(r, t) - mean);
      const double sd = std::sqrt(var / static_cast<double>(n));
      for (std::size_t r = 0; r < n; ++r) view(r, t) = sd > 0 ? (view(r, t) - mean) / sd : view(r, t) - mean;
    }
  }
}

// ---------------------------------------------------------------------------
// MVDS
// ---------------------------------------------------------------------------

std::vector<char> encode_mvds(const MultiViewDataset& ds) {
  ds.validate();
  ByteWriter w;
  w.put_bytes(std::string_view(kMagic, 4));
  w.put<std::uint32_t>(kVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ds.views.size()));
  w.put<std::uint64_t>(ds.size());
  w.put<std::uint8_t>(ds.labels ? 1 : 0);
  for (const auto& v : ds.views) w.put<std::uint32_t>(static_cast<std::uint32_t>(v.cols()));
  if (ds.labels) {
    for (auto l : *ds.labels) w.put<std::int64_t>(l);
  }
  for (const auto& v : ds.views) {
    for (double x : v.values()) w.put<float>(static_cast<float>(x));
  }
  return w.bytes();
}

MultiViewDataset decode_mvds(std::string_view bytes) {
  ByteReader r(bytes);
  if (bytes.size() < 4 || bytes.substr(0, 4) != std::string_view(kMagic, 4)) {
    throw FormatError(0, "bad magic, expected \"MVDS\"");
  }
  r.get_bytes(4, "magic");
  const auto version_at = r.offset();
  if (auto version = r.get<std::uint32_t>("version"); version != kVersion) {
    throw FormatError(version_at, "unsupported MVDS version " + std::to_string(version));
  }
  const auto views_at = r.offset();
  const auto v = r.get<std::uint32_t>("view count");
  if (v == 0) throw FormatError(views_at, "view count must be >= 1");
  const auto n_at = r.offset();
  const auto n = r.get<std::uint64_t>("sample count");
  if (n == 0) throw FormatError(n_at, "sample count must be >= 1");
  const auto flag_at = r.offset();
  const auto has_labels = r.get<std::uint8_t>("label flag");
  if (has_labels > 1) throw FormatError(flag_at, "label flag must be 0 or 1");

  r.require(std::uint64_t{4} * v, "view dimensions");
  std::vector<std::uint32_t> dims(v);
  std::uint64_t payload = 0;
  for (auto& d : dims) {
    const auto dim_at = r.offset();
    d = r.get<std::uint32_t>("view dimension");
    if (d == 0) throw FormatError(dim_at, "view dimension must be >= 1");
    // n * d * 4 must fit in what is left of the file.
    if (n > r.remaining() / (std::uint64_t{4} * d)) throw FormatError(dim_at, "view size exceeds file length");
    payload += n * d * 4;
  }
  if (has_labels && n > r.remaining() / 8) throw FormatError(r.offset(), "label block exceeds file length");
  if (payload + (has_labels ? n * 8 : 0) > r.remaining()) {
    throw FormatError(r.offset(), "file is shorter than its declared payload");
  }

  MultiViewDataset ds;
  if (has_labels) {
    const auto labels_at = r.offset();
    std::vector<std::int64_t> labels(n);
    for (auto& l : labels) {
      const auto at = r.offset();
      l = r.get<std::int64_t>("label");
      if (l < 0) throw FormatError(at, "negative label");
    }
    ds.labels = std::move(labels);
    try {
      MultiViewDataset probe;
      probe.views.push_back(Tensor::zeros(n, 1));
      probe.labels = ds.labels;
      probe.validate();
    } catch (const DataError& e) {
      throw FormatError(labels_at, e.what());
    }
  }
  for (std::uint32_t i = 0; i < v; ++i) {
    Tensor x = Tensor::zeros(n, dims[i]);
    for (auto& value : x.values()) {
      const auto at = r.offset();
      const float f = r.get<float>("feature");
      if (!std::isfinite(f)) throw FormatError(at, "non-finite feature value");
      value = static_cast<double>(f);
    }
    ds.views.push_back(std::move(x));
  }
  if (r.remaining() != 0) throw FormatError(r.offset(), "trailing bytes after payload");
  ds.provenance = "mvds";
  return ds;
}

void save_mvds(const MultiViewDataset& ds, const std::string& path) { write_file(path, encode_mvds(ds)); }

MultiViewDataset load_mvds(const std::string& path) {
  MultiViewDataset ds = decode_mvds(read_file(path));
  ds.provenance = "mvds:" + path;
  return ds;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

namespace {

bool parse_row(const std::string& line, std::vector<double>& out) {
  out.clear();
  std::size_t start = 0;
  while (start <= line.size()) {
    std::size_t end = line.find(',', start);
    if (end == std::string::npos) end = line.size();
    std::string_view cell(line.data() + start, end - start);
    while (!cell.empty() && std::isspace(static_cast<unsigned char>(cell.front()))) cell.remove_prefix(1);
    while (!cell.empty() && std::isspace(static_cast<unsigned char>(cell.back()))) cell.remove_suffix(1);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size()) return false;
    out.push_back(value);
    start = end + 1;
  }
  return true;
}

}  // namespace

Tensor read_csv_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(0, "cannot open '" + path + "'");
  std::vector<double> data;
  std::vector<double> row;
  std::size_t cols = 0, rows = 0, line_no = 0;
  std::uint64_t offset = 0;
  std::string line;
  while (std::getline(in, line)) {
    const std::uint64_t line_start = offset;
    offset += line.size() + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!parse_row(line, row)) {
      if (rows == 0 && line_no == 1) continue;  // header
      throw FormatError(line_start, path + ": non-numeric value on line " + std::to_string(line_no));
    }
    if (rows == 0) cols = row.size();
    if (row.size() != cols) throw FormatError(line_start, path + ": ragged row on line " + std::to_string(line_no));
    for (double x : row) {
      if (!std::isfinite(x)) throw FormatError(line_start, path + ": non-finite value");
      data.push_back(to_float_precision(x));
    }
    ++rows;
  }
  if (rows == 0) throw FormatError(0, path + ": no data rows");
  return Tensor({rows, cols}, std::move(data));
}

MultiViewDataset import_csv(const std::vector<std::string>& view_paths, const std::optional<std::string>& labels_path) {
  if (view_paths.empty()) throw ConfigError("csv import needs at least one view file");
  MultiViewDataset ds;
  for (const auto& p : view_paths) ds.views.push_back(read_csv_matrix(p));
  if (labels_path) {
    Tensor l = read_csv_matrix(*labels_path);
    if (l.cols() != 1) throw FormatError(0, *labels_path + ": labels file must have one column");
    std::vector<std::int64_t> labels;
    for (double x : l.values()) {
      if (x != std::floor(x)) throw FormatError(0, *labels_path + ": labels must be integers");
      labels.push_back(static_cast<std::int64_t>(x));
    }
    ds.labels = std::move(labels);
  }
  ds.validate();
  ds.provenance = "csv";
  return ds;
}

}  // namespace mvc
