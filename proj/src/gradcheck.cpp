#include "mvc/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "mvc/errors.hpp"

namespace mvc {

namespace {

double evaluate(const LossBuilder& loss_fn, const std::vector<Tensor>& params) {
  Tape tape;
  auto vars = tape.parameters(params);
  Var loss = loss_fn(tape, vars);
  if (loss.value().size() != 1) throw ContractError("gradient check needs a scalar loss");
  return loss.value()[0];
}

}  // namespace

GradCheckResult finite_difference_check(const LossBuilder& loss_fn, std::vector<Tensor> params, double eps) {
  if (!(eps > 0)) throw ContractError("finite difference step must be positive");

  Tape tape;
  auto vars = tape.parameters(params);
  Var loss = loss_fn(tape, vars);
  const Gradients analytic = tape.backward(loss);

  const double base = loss.value()[0];
  if (evaluate(loss_fn, params) != base) {
    throw OracleError("loss function is not deterministic");
  }

  GradCheckResult result;
  for (std::size_t p = 0; p < params.size(); ++p) {
    const Tensor& grad = analytic.at(p);
    for (std::size_t k = 0; k < params[p].size(); ++k) {
      const double saved = params[p][k];
      params[p][k] = saved + eps;
      const double up = evaluate(loss_fn, params);
      params[p][k] = saved - eps;
      const double down = evaluate(loss_fn, params);
      params[p][k] = saved;

      const double numeric = (up - down) / (2.0 * eps);
      const double a = grad[k];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-12});
      const double rel = std::abs(a - numeric) / denom;
      ++result.coordinates;
      if (rel > result.max_rel_error || result.coordinates == 1) {
        result.max_rel_error = rel;
        result.worst_param = p;
        result.worst_index = k;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace mvc
