#include "betadet/adam.hpp"

#include <cmath>

#include "betadet/errors.hpp"

namespace betadet::ag {

double adam_step(std::span<Tensor> params, AdamState& state, double lr, const AdamOptions& options) {
  if (state.m.empty()) {
    for (const Tensor& p : params) {
      state.m.emplace_back(p.size(), 0.0);
      state.v.emplace_back(p.size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) {
    throw InputError("adam_step: optimizer state tracks a different parameter list");
  }
  double sq = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].has_grad() || params[i].grad().size() != params[i].size()) {
      throw InputError("adam_step: parameter " + std::to_string(i) + " has no gradient");
    }
    for (double g : params[i].grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  const double scale = norm > options.clip_norm ? options.clip_norm / norm : 1.0;

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(options.beta1, t);
  const double bc2 = 1.0 - std::pow(options.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto value = params[i].mutable_values();
    const auto grad = params[i].grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < value.size(); ++j) {
      const double g = grad[j] * scale;
      m[j] = options.beta1 * m[j] + (1.0 - options.beta1) * g;
      v[j] = options.beta2 * v[j] + (1.0 - options.beta2) * g * g;
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      value[j] -= lr * mhat / (std::sqrt(vhat) + options.eps);
    }
  }
  return norm;
}

}  // namespace betadet::ag
