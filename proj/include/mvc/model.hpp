#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mvc/autodiff.hpp"
#include "mvc/tensor.hpp"

namespace mvc {

struct ModelConfig {
  std::vector<std::size_t> view_dims;      // d_i per view
  std::size_t latent_dim = 10;             // d, per view
  std::size_t clusters = 10;               // K
  std::vector<std::size_t> hidden = {256, 256};
  Activation activation = Activation::tanh;
  // One encoder and one decoder for all views (requires equal view dims).
  bool shared_backbone = false;
  double logvar_limit = 10.0;

  std::size_t views() const noexcept { return view_dims.size(); }
  std::size_t global_dim() const noexcept { return views() * latent_dim; }
  void validate() const;
};

// Named, ordered parameter list. Indices are stable and double as tape
// parameter ids.
class ParameterStore {
 public:
  std::size_t add(std::string name, Tensor value);

  std::size_t size() const noexcept { return values_.size(); }
  Tensor& operator[](std::size_t i) { return values_[i]; }
  const Tensor& operator[](std::size_t i) const { return values_[i]; }
  const std::string& name(std::size_t i) const { return names_[i]; }
  std::optional<std::size_t> find(const std::string& name) const;

  std::vector<Tensor>& tensors() noexcept { return values_; }
  const std::vector<Tensor>& tensors() const noexcept { return values_; }
  std::size_t scalar_count() const noexcept;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
};

struct DenseLayer {
  std::size_t weight = 0;
  std::size_t bias = 0;
  Activation activation = Activation::identity;
};

Var apply_layer(const DenseLayer& layer, Var input, std::span<const Var> params);

// Trunk followed by mean and log-variance heads of width latent_dim.
struct ViewEncoder {
  std::vector<DenseLayer> trunk;
  DenseLayer mu_head;
  DenseLayer logvar_head;
  std::size_t input_dim = 0;
  std::size_t latent_dim = 0;
  double logvar_limit = 10.0;
};

// Maps the global latent (v * d) back to one view's features.
struct ViewDecoder {
  std::vector<DenseLayer> layers;
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;
};

// Per-view soft-label head (z^i -> K logits) and class means in global
// latent space (K x v*d).
struct ClusterHead {
  DenseLayer logits;
  std::size_t class_means = 0;
  std::size_t clusters = 0;
};

struct EncodedView {
  Var mu;
  Var logvar;
};

EncodedView encode(Var x, const ViewEncoder& enc, std::span<const Var> params);

// z = mu + exp(logvar / 2) * eps
Var reparameterize(Var mu, Var logvar, Var eps);

// Row r of the result is [z^1_r | z^2_r | ... | z^v_r].
Var concat_latents(std::span<const Var> latents);

Var cluster_logits(Var z, const ClusterHead& head, std::span<const Var> params);
// Row-wise softmax of the head's logits.
Var assign_soft_labels(Var z, const ClusterHead& head, std::span<const Var> params);

Var decode(Var z_global, const ViewDecoder& dec, std::span<const Var> params);

// Everything the losses need from one forward pass over a batch.
struct LatentPass {
  std::vector<Var> mu;
  std::vector<Var> logvar;
  std::vector<Var> z;
  Var z_global;
  Var mu_global;
  Var logvar_global;
};

class MultiViewVae {
 public:
  // Random initialization: Glorot-uniform weights, zero biases, class means
  // drawn from N(0, 0.1^2).
  MultiViewVae(ModelConfig config, Rng& rng);

  const ModelConfig& config() const noexcept { return config_; }
  std::size_t views() const noexcept { return config_.views(); }

  ParameterStore& params() noexcept { return params_; }
  const ParameterStore& params() const noexcept { return params_; }

  const ViewEncoder& encoder(std::size_t view) const { return encoders_.at(view); }
  const ViewDecoder& decoder(std::size_t view) const { return decoders_.at(view); }
  const ClusterHead& head(std::size_t view) const { return heads_.at(view); }

  // Encodes each view and samples z with the given noise (one n x d tensor
  // per view). `inputs` must already be constants/parameters on `tape`.
  LatentPass encode_views(std::span<const Var> inputs, std::span<const Var> params,
                          std::span<const Var> noise) const;

  // Noise-free global embedding (concatenated means), n x v*d.
  Tensor embed(std::span<const Tensor> views, std::size_t batch = 1024) const;

  // Overwrites every view's class means with `centroids` (K x v*d).
  void set_class_means(const Tensor& centroids);

  void save(const std::string& path) const;
  // Loads parameters by name; names and shapes must match this model.
  void load(const std::string& path);

 private:
  DenseLayer make_layer(const std::string& prefix, std::size_t in, std::size_t out, Activation act, Rng& rng);

  ModelConfig config_;
  ParameterStore params_;
  std::vector<ViewEncoder> encoders_;
  std::vector<ViewDecoder> decoders_;
  std::vector<ClusterHead> heads_;
};

// MVCK checkpoint: "MVCK", u32 version, u32 count, then per tensor a u16
// length-prefixed UTF-8 name, u32 rank, u32 dims and little-endian f64 data.
struct NamedTensor {
  std::string name;
  Tensor value;
};

std::vector<char> encode_checkpoint(const ParameterStore& params);
std::vector<NamedTensor> decode_checkpoint(std::string_view bytes);

}  // namespace mvc
