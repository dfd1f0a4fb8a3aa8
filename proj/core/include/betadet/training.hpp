#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "betadet/adam.hpp"
#include "betadet/config.hpp"
#include "betadet/errors.hpp"
#include "betadet/evalkit.hpp"
#include "betadet/losses.hpp"
#include "betadet/model.hpp"
#include "betadet/synthdata.hpp"

namespace betadet {

/// Raised when a training step produces a non-finite value.
class TrainingDiverged : public NumericError {
 public:
  TrainingDiverged(std::size_t step, const std::string& what)
      : NumericError("training diverged at step " + std::to_string(step) + ": " + what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

struct StepRecord {
  std::size_t step = 0;  // 1-based
  LossBreakdown loss;    // batch mean, summed over decoder layers
  double grad_norm = 0.0;
};

/// Per-layer Hungarian assignment of every image in the batch, computed on
/// detached predictions. Result is indexed [layer][image].
std::vector<std::vector<MatchResult>> match_batch(std::span<const LayerTensors> layers,
                                                  std::span<const std::vector<GroundTruthObject>> gts,
                                                  const CostWeights& weights);

/// Forward, match, composite loss, backward and one clipped Adam step.
StepRecord train_step(Detector& model, ag::AdamState& optimizer, std::span<const Scene* const> batch,
                      const RunConfig& config, std::size_t step);

using StepCallback = std::function<void(const StepRecord&)>;

/// Full training loop: the model is initialized from config.seed and batches
/// are drawn from per-epoch permutations of the scenes (shuffle stream derived
/// from the same seed). Throws TrainingDiverged on NaN/Inf.
Detector train(const RunConfig& config, std::span<const Scene> scenes, const StepCallback& on_step = {});

/// Final-layer detections for every scene, paired with its ground truths.
std::vector<ImageResult> run_inference(const Detector& model, std::span<const Scene> scenes,
                                       std::size_t batch_size = 16);

struct GradcheckOptions {
  std::uint64_t seed = 1;
  std::size_t batch = 2;
  /// Central-difference step relative to max(1, |θ|).
  double relative_step = 1e-5;
  /// Denominator floor for the relative error |a - n| / max(|a|, |n|, floor).
  double error_floor = 1e-4;
};

struct GradcheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
};

/// Reduced model used by gradient checks: 16x16 input, one 2x2 patch grid.
ModelConfig gradcheck_model_config();
SceneConfig gradcheck_scene_config();

/// Compares the backpropagated gradient of the full composite loss (all
/// decoder layers, assignments held fixed) with central differences for every
/// parameter element of the reduced model.
GradcheckReport gradcheck(const GradcheckOptions& options);

}  // namespace betadet
