#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "betadet/autograd.hpp"

namespace betadet::ag {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Global L2 norm cap applied to all gradients together before the update.
  double clip_norm = 1.0;
};

/// Per-parameter first/second moment estimates and the step counter.
struct AdamState {
  std::uint64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

/// One Adam update in place. Returns the gradient norm measured before
/// clipping. Throws InputError if any parameter has no gradient.
double adam_step(std::span<Tensor> params, AdamState& state, double lr,
                 const AdamOptions& options = {});

}  // namespace betadet::ag
