#pragma once

#include <span>
#include <vector>

#include "betadet/assignment.hpp"
#include "betadet/autograd.hpp"
#include "betadet/detection.hpp"

namespace betadet {

struct LossWeights {
  double lambda_vfl = 1.0;
  double lambda_bbox = 5.0;
  double lambda_giou = 2.0;
  double lambda_maturity = 1.0;
  /// Weight of the (α + β) concentration penalty inside the maturity loss.
  double lambda_reg = 1e-3;

  /// Throws DomainError if any weight is negative or non-finite.
  void validate() const;
};

/// Unweighted loss components plus the weighted total.
struct LossTerms {
  double vfl = 0.0;
  double bbox_l1 = 0.0;
  double giou = 0.0;
  double maturity = 0.0;
  double total = 0.0;

  LossTerms& operator+=(const LossTerms& o) {
    vfl += o.vfl;
    bbox_l1 += o.bbox_l1;
    giou += o.giou;
    maturity += o.maturity;
    total += o.total;
    return *this;
  }
};

/// Sums over decoder layers; per_layer keeps each layer's own terms.
struct LossBreakdown : LossTerms {
  std::vector<LossTerms> per_layer;
};

inline constexpr double kProbabilityClamp = 1e-8;
inline constexpr double kVflAlpha = 0.75;
inline constexpr double kVflGamma = 2.0;

/// -log_pdf(p, y) + lambda_reg * (α + β).
double maturity_loss(const BetaParams& p, double y_target, double lambda_reg);

/// Varifocal objectness loss. Positives are weighted by their IoU target q;
/// negatives by 0.75 p^2. Throws DomainError if q is outside [0, 1].
double vfl(double p_obj, double q, bool is_positive);

/// 1 - GIoU.
double giou_loss(const BoxCXCYWH& a, const BoxCXCYWH& b);

/// Reference (non-differentiable) objective for a single image. layers[l] are
/// the detections of decoder layer l and matches[l] their assignment against
/// gts. Each layer's loss is divided by max(1, gts.size()); layers are summed.
LossBreakdown composite_loss(std::span<const std::vector<Detection>> layers,
                             std::span<const GroundTruthObject> gts, std::span<const MatchResult> matches,
                             const LossWeights& lw);

/// Differentiable head outputs of one decoder layer for a batch.
struct LayerTensors {
  ag::Tensor logits;  // [B, Q] objectness pre-activations
  ag::Tensor boxes;   // [B, Q, 4] (cx, cy, w, h) after sigmoid
  ag::Tensor shapes;  // [B, Q, 2] (α, β) after softplus + 0.5
};

/// Reads image b of a layer's outputs back into plain detections.
std::vector<Detection> to_detections(const LayerTensors& layer, std::size_t image);

struct GraphLoss {
  ag::Tensor total;  // scalar, differentiable
  LossBreakdown breakdown;
};

/// Constant per-query quantities of one layer under a fixed assignment,
/// flattened over [B, Q]. The IoU target q is frozen here, so it carries no
/// gradient.
struct LayerTargets {
  std::size_t batch = 0;
  std::size_t queries = 0;
  std::vector<double> weight;    // 1 / (B * max(1, G)) of the query's image
  std::vector<double> positive;  // 1 if matched
  std::vector<double> q_sq;      // q^2 on positives
  std::vector<double> q_rest;    // q (1 - q) on positives
  std::vector<double> log_y;     // ln y_target on positives
  std::vector<double> log_1my;   // ln(1 - y_target) on positives
  std::vector<double> gt_box;    // [B*Q*4] matched gt (cx, cy, w, h)
};

std::vector<LayerTargets> loss_targets(std::span<const LayerTensors> layers,
                                       std::span<const std::vector<GroundTruthObject>> gts,
                                       std::span<const std::vector<MatchResult>> matches);

/// Batch objective on the autograd tape: the image-mean of composite_loss with
/// assignments held fixed. matches[l][b] is layer l's assignment for image b.
GraphLoss composite_loss(std::span<const LayerTensors> layers,
                         std::span<const std::vector<GroundTruthObject>> gts,
                         std::span<const std::vector<MatchResult>> matches, const LossWeights& lw);

/// Same objective against precomputed targets.
GraphLoss composite_loss(std::span<const LayerTensors> layers, std::span<const LayerTargets> targets,
                         const LossWeights& lw);

}  // namespace betadet
