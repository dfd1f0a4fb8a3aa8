#pragma once

#include "betadet/beta.hpp"
#include "betadet/geometry.hpp"

namespace betadet {

/// One query's prediction: box, objectness probability and maturity shapes.
struct Detection {
  BoxCXCYWH box;
  double p_obj = 0.0;
  BetaParams maturity{1.0, 1.0};
};

/// Annotated object. `stage` is 0 (unripe), 1 (half-ripe) or 2 (ripe);
/// `y_target` is the continuous training target mapped from the stage;
/// `y_true` is the generative maturity and is only read by evaluation.
struct GroundTruthObject {
  BoxCXCYWH box;
  int stage = 0;
  double y_target = 0.5;
  double y_true = 0.5;
};

}  // namespace betadet
