#include "mvc/model.hpp"

#include <cmath>
#include <numeric>

#include "mvc/binary_io.hpp"
#include "mvc/errors.hpp"

namespace mvc {

namespace {

constexpr char kCheckpointMagic[4] = {'M', 'V', 'C', 'K'};
constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace

void ModelConfig::validate() const {
  if (view_dims.empty()) throw ConfigError("model needs at least one view");
  for (auto d : view_dims) {
    if (d == 0) throw ConfigError("view dimensions must be positive");
  }
  if (latent_dim < 1) throw ConfigError("latent dimension must be >= 1");
  if (clusters < 2) throw ConfigError("cluster count K must be >= 2");
  for (auto h : hidden) {
    if (h == 0) throw ConfigError("hidden widths must be positive");
  }
  if (!(logvar_limit > 0)) throw ConfigError("logvar limit must be positive");
  if (shared_backbone) {
    for (auto d : view_dims) {
      if (d != view_dims.front()) throw ConfigError("shared backbone requires equal view dimensions");
    }
  }
}

// ---------------------------------------------------------------------------
// ParameterStore
// ---------------------------------------------------------------------------

std::size_t ParameterStore::add(std::string name, Tensor value) {
  if (find(name)) throw ContractError("duplicate parameter name '" + name + "'");
  require_finite(value, "parameter '" + name + "'");
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
  return values_.size() - 1;
}

std::optional<std::size_t> ParameterStore::find(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  return std::nullopt;
}

std::size_t ParameterStore::scalar_count() const noexcept {
  std::size_t total = 0;
  for (const auto& t : values_) total += t.size();
  return total;
}

// ---------------------------------------------------------------------------
// Building blocks
// ---------------------------------------------------------------------------

Var apply_layer(const DenseLayer& layer, Var input, std::span<const Var> params) {
  return dense_forward(input, params[layer.weight], params[layer.bias], layer.activation);
}

EncodedView encode(Var x, const ViewEncoder& enc, std::span<const Var> params) {
  if (x.cols() != enc.input_dim) {
    throw DimensionError("encode: input has " + std::to_string(x.cols()) + " columns, encoder expects " +
                         std::to_string(enc.input_dim));
  }
  Var h = x;
  for (const auto& layer : enc.trunk) h = apply_layer(layer, h, params);
  Var mu = apply_layer(enc.mu_head, h, params);
  Var logvar = clamp(apply_layer(enc.logvar_head, h, params), -enc.logvar_limit, enc.logvar_limit);
  return {mu, logvar};
}

Var reparameterize(Var mu, Var logvar, Var eps) {
  const Tensor& m = mu.value();
  if (!m.same_shape(logvar.value()) || !m.same_shape(eps.value())) {
    throw DimensionError("reparameterize: mu " + shape_string(m.shape()) + ", logvar " +
                         shape_string(logvar.value().shape()) + ", eps " + shape_string(eps.value().shape()));
  }
  return add(mu, mul(exp(scale(logvar, 0.5)), eps));
}

Var concat_latents(std::span<const Var> latents) {
  if (latents.empty()) throw DimensionError("concat_latents: no views");
  const std::size_t d = latents.front().cols();
  for (Var z : latents) {
    if (z.cols() != d) throw DimensionError("concat_latents: latent dimensions differ");
  }
  return concat_cols(latents);
}

Var cluster_logits(Var z, const ClusterHead& head, std::span<const Var> params) {
  if (head.clusters < 2) throw ConfigError("cluster head needs K >= 2");
  return apply_layer(head.logits, z, params);
}

Var assign_soft_labels(Var z, const ClusterHead& head, std::span<const Var> params) {
  return softmax_rows(cluster_logits(z, head, params));
}

Var decode(Var z_global, const ViewDecoder& dec, std::span<const Var> params) {
  if (z_global.cols() != dec.input_dim) {
    throw DimensionError("decode: latent has " + std::to_string(z_global.cols()) +
                         " columns, decoder expects " + std::to_string(dec.input_dim));
  }
  Var h = z_global;
  for (const auto& layer : dec.layers) h = apply_layer(layer, h, params);
  return h;
}

// ---------------------------------------------------------------------------
// MultiViewVae
// ---------------------------------------------------------------------------

DenseLayer MultiViewVae::make_layer(const std::string& prefix, std::size_t in, std::size_t out,
                                    Activation act, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> uniform(-limit, limit);
  Tensor w = Tensor::zeros(in, out);
  for (auto& x : w.values()) x = uniform(rng);
  DenseLayer layer;
  layer.weight = params_.add(prefix + ".W", std::move(w));
  layer.bias = params_.add(prefix + ".b", Tensor({out}, 0.0));
  layer.activation = act;
  return layer;
}

MultiViewVae::MultiViewVae(ModelConfig config, Rng& rng) : config_(std::move(config)) {
  config_.validate();
  const std::size_t v = config_.views();
  const std::size_t d = config_.latent_dim;
  const std::size_t global = config_.global_dim();

  auto build_encoder = [&](const std::string& prefix, std::size_t input_dim) {
    ViewEncoder enc;
    enc.input_dim = input_dim;
    enc.latent_dim = d;
    enc.logvar_limit = config_.logvar_limit;
    std::size_t width = input_dim;
    for (std::size_t l = 0; l < config_.hidden.size(); ++l) {
      enc.trunk.push_back(make_layer(prefix + ".l" + std::to_string(l), width, config_.hidden[l],
                                     config_.activation, rng));
      width = config_.hidden[l];
    }
    enc.mu_head = make_layer(prefix + ".mu", width, d, Activation::identity, rng);
    enc.logvar_head = make_layer(prefix + ".logvar", width, d, Activation::identity, rng);
    return enc;
  };

  auto build_decoder = [&](const std::string& prefix, std::size_t output_dim) {
    ViewDecoder dec;
    dec.input_dim = global;
    dec.output_dim = output_dim;
    std::size_t width = global;
    for (std::size_t l = config_.hidden.size(); l-- > 0;) {
      const std::size_t idx = config_.hidden.size() - 1 - l;
      dec.layers.push_back(make_layer(prefix + ".l" + std::to_string(idx), width, config_.hidden[l],
                                      config_.activation, rng));
      width = config_.hidden[l];
    }
    dec.layers.push_back(make_layer(prefix + ".out", width, output_dim, Activation::identity, rng));
    return dec;
  };

  if (config_.shared_backbone) {
    ViewEncoder enc = build_encoder("enc", config_.view_dims.front());
    ViewDecoder dec = build_decoder("dec", config_.view_dims.front());
    encoders_.assign(v, enc);
    decoders_.assign(v, dec);
  } else {
    for (std::size_t i = 0; i < v; ++i) encoders_.push_back(build_encoder("enc" + std::to_string(i), config_.view_dims[i]));
    for (std::size_t i = 0; i < v; ++i) decoders_.push_back(build_decoder("dec" + std::to_string(i), config_.view_dims[i]));
  }

  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < v; ++i) {
    const std::string prefix = "head" + std::to_string(i);
    ClusterHead head;
    head.clusters = config_.clusters;
    head.logits = make_layer(prefix, d, config_.clusters, Activation::identity, rng);
    Tensor means = Tensor::zeros(config_.clusters, global);
    for (auto& x : means.values()) x = 0.1 * normal(rng);
    head.class_means = params_.add(prefix + ".means", std::move(means));
    heads_.push_back(head);
  }
}

LatentPass MultiViewVae::encode_views(std::span<const Var> inputs, std::span<const Var> params,
                                      std::span<const Var> noise) const {
  const std::size_t v = views();
  if (inputs.size() != v || noise.size() != v) {
    throw DimensionError("encode_views: expected " + std::to_string(v) + " views and noise tensors");
  }
  LatentPass pass;
  for (std::size_t i = 0; i < v; ++i) {
    auto [mu, logvar] = encode(inputs[i], encoders_[i], params);
    pass.mu.push_back(mu);
    pass.logvar.push_back(logvar);
    pass.z.push_back(reparameterize(mu, logvar, noise[i]));
  }
  pass.z_global = concat_latents(pass.z);
  pass.mu_global = concat_latents(pass.mu);
  pass.logvar_global = concat_latents(pass.logvar);
  return pass;
}

Tensor MultiViewVae::embed(std::span<const Tensor> views, std::size_t batch) const {
  if (views.size() != this->views()) throw DimensionError("embed: wrong number of views");
  const std::size_t n = views.front().rows();
  for (const auto& x : views) {
    if (x.rows() != n) throw DimensionError("embed: views have different sample counts");
  }
  const std::size_t global = config_.global_dim();
  Tensor out = Tensor::zeros(n, global);
  std::vector<std::size_t> rows;
  for (std::size_t start = 0; start < n; start += batch) {
    const std::size_t count = std::min(batch, n - start);
    rows.resize(count);
    std::iota(rows.begin(), rows.end(), start);
    Tape tape;
    std::vector<Var> params;
    params.reserve(params_.size());
    for (const auto& p : params_.tensors()) params.push_back(tape.constant(p));
    std::vector<Var> mus;
    for (std::size_t i = 0; i < views.size(); ++i) {
      mus.push_back(encode(tape.constant(gather_rows(views[i], rows)), encoders_[i], params).mu);
    }
    const Tensor& mu = concat_latents(mus).value();
    out.matrix().middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(count)) = mu.matrix();
  }
  return out;
}

void MultiViewVae::set_class_means(const Tensor& centroids) {
  if (centroids.rows() != config_.clusters || centroids.cols() != config_.global_dim()) {
    throw DimensionError("class means must be K x v*d");
  }
  for (const auto& head : heads_) params_[head.class_means] = centroids;
}

void MultiViewVae::save(const std::string& path) const { write_file(path, encode_checkpoint(params_)); }

void MultiViewVae::load(const std::string& path) {
  const std::string bytes = read_file(path);
  auto tensors = decode_checkpoint(bytes);
  if (tensors.size() != params_.size()) {
    throw FormatError(0, "checkpoint has " + std::to_string(tensors.size()) + " tensors, model has " +
                             std::to_string(params_.size()));
  }
  for (auto& named : tensors) {
    auto idx = params_.find(named.name);
    if (!idx) throw FormatError(0, "checkpoint tensor '" + named.name + "' is not a model parameter");
    if (!params_[*idx].same_shape(named.value)) {
      throw FormatError(0, "checkpoint tensor '" + named.name + "' has shape " +
                               shape_string(named.value.shape()) + ", expected " +
                               shape_string(params_[*idx].shape()));
    }
    require_finite(named.value, "checkpoint tensor '" + named.name + "'");
    params_[*idx] = std::move(named.value);
  }
}

// ---------------------------------------------------------------------------
// Checkpoint codec
// ---------------------------------------------------------------------------

std::vector<char> encode_checkpoint(const ParameterStore& params) {
  ByteWriter w;
  w.put_bytes(std::string_view(kCheckpointMagic, 4));
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string& name = params.name(i);
    if (name.size() > 0xFFFF) throw ContractError("parameter name too long");
    w.put<std::uint16_t>(static_cast<std::uint16_t>(name.size()));
    w.put_bytes(name);
    const Tensor& t = params[i];
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
    for (auto dim : t.shape()) w.put<std::uint32_t>(static_cast<std::uint32_t>(dim));
    for (double x : t.values()) w.put<double>(x);
  }
  return w.bytes();
}

std::vector<NamedTensor> decode_checkpoint(std::string_view bytes) {
  ByteReader r(bytes);
  if (r.remaining() < 4 || bytes.substr(0, 4) != std::string_view(kCheckpointMagic, 4)) {
    throw FormatError(0, "bad checkpoint magic");
  }
  r.get_bytes(4, "magic");
  const auto version_offset = r.offset();
  if (auto version = r.get<std::uint32_t>("version"); version != kCheckpointVersion) {
    throw FormatError(version_offset, "unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = r.get<std::uint32_t>("tensor count");
  std::vector<NamedTensor> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = r.get<std::uint16_t>("name length");
    std::string name(r.get_bytes(name_len, "name"));
    const auto rank_offset = r.offset();
    const auto rank = r.get<std::uint32_t>("rank");
    if (rank > 8) throw FormatError(rank_offset, "implausible tensor rank " + std::to_string(rank));
    std::vector<std::size_t> shape;
    std::uint64_t elements = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      const auto dim_offset = r.offset();
      const auto dim = r.get<std::uint32_t>("dimension");
      if (dim == 0) throw FormatError(dim_offset, "zero dimension");
      if (elements > r.remaining() / dim) throw FormatError(dim_offset, "tensor larger than file");
      elements *= dim;
      shape.push_back(dim);
    }
    r.require(elements * 8, "tensor data");
    std::vector<double> data(elements);
    for (auto& x : data) x = r.get<double>("tensor data");
    out.push_back({std::move(name), Tensor(std::move(shape), std::move(data))});
  }
  if (r.remaining() != 0) throw FormatError(r.offset(), "trailing bytes after checkpoint");
  return out;
}

}  // namespace mvc
