#include "mvc/optim.hpp"

#include <cmath>

#include "mvc/errors.hpp"

namespace mvc {

AdamState::AdamState(std::span<const Tensor> params, AdamOptions opts) : options(opts) {
  if (!(opts.beta1 > 0 && opts.beta1 < 1 && opts.beta2 > 0 && opts.beta2 < 1)) {
    throw ConfigError("Adam decay rates must lie in (0, 1)");
  }
  if (!(opts.epsilon > 0)) throw ConfigError("Adam epsilon must be positive");
  if (!(opts.learning_rate > 0)) throw ConfigError("learning rate must be positive");
  m.reserve(params.size());
  v.reserve(params.size());
  for (const Tensor& p : params) {
    m.emplace_back(p.shape(), 0.0);
    v.emplace_back(p.shape(), 0.0);
  }
}

void adam_step(std::span<Tensor> params, std::span<const Tensor> grads, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw DimensionError("adam_step: parameter, gradient and state counts differ");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].same_shape(grads[i]) || !params[i].same_shape(state.m[i])) {
      throw DimensionError("adam_step: shape mismatch for parameter " + std::to_string(i));
    }
  }

  const auto& o = state.options;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(o.beta1, t);
  const double correction2 = 1.0 - std::pow(o.beta2, t);

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].values();
    const auto g = grads[i].values();
    auto m = state.m[i].values();
    auto v = state.v[i].values();
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = o.beta1 * m[k] + (1.0 - o.beta1) * g[k];
      v[k] = o.beta2 * v[k] + (1.0 - o.beta2) * g[k] * g[k];
      const double m_hat = m[k] / correction1;
      const double v_hat = v[k] / correction2;
      p[k] -= o.learning_rate * m_hat / (std::sqrt(v_hat) + o.epsilon);
    }
  }
}

void adam_step(std::span<Tensor> params, const Gradients& grads, AdamState& state) {
  std::vector<Tensor> dense;
  dense.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto it = grads.find(i);
    dense.push_back(it != grads.end() ? it->second : Tensor(params[i].shape(), 0.0));
  }
  adam_step(params, std::span<const Tensor>(dense), state);
}

}  // namespace mvc
