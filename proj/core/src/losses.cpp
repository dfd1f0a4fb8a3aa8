#include "betadet/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "betadet/errors.hpp"

namespace betadet {

void LossWeights::validate() const {
  const double all[] = {lambda_vfl, lambda_bbox, lambda_giou, lambda_maturity, lambda_reg};
  for (double w : all) {
    if (!std::isfinite(w) || w < 0.0) throw DomainError("LossWeights: weights must be finite and >= 0");
  }
}

double maturity_loss(const BetaParams& p, double y_target, double lambda_reg) {
  return -log_pdf(p, y_target) + lambda_reg * p.concentration();
}

double vfl(double p_obj, double q, bool is_positive) {
  if (!(q >= 0.0 && q <= 1.0)) throw DomainError("vfl: IoU target must lie in [0, 1]");
  const double p = std::clamp(p_obj, kProbabilityClamp, 1.0 - kProbabilityClamp);
  if (is_positive) return -q * (q * std::log(p) + (1.0 - q) * std::log(1.0 - p));
  return kVflAlpha * std::pow(p, kVflGamma) * -std::log(1.0 - p);
}

double giou_loss(const BoxCXCYWH& a, const BoxCXCYWH& b) { return 1.0 - giou(a, b); }

LossBreakdown composite_loss(std::span<const std::vector<Detection>> layers,
                             std::span<const GroundTruthObject> gts, std::span<const MatchResult> matches,
                             const LossWeights& lw) {
  if (layers.size() != matches.size()) {
    throw InputError("composite_loss: " + std::to_string(layers.size()) + " layers but " +
                     std::to_string(matches.size()) + " match results");
  }
  const double norm = 1.0 / static_cast<double>(std::max<std::size_t>(1, gts.size()));
  LossBreakdown out;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& dets = layers[l];
    std::vector<int> matched_gt(dets.size(), -1);
    for (const auto& [pred, gt] : matches[l].pairs) {
      if (pred >= dets.size() || gt >= gts.size()) throw InputError("composite_loss: match index out of range");
      matched_gt[pred] = static_cast<int>(gt);
    }
    LossTerms t;
    for (std::size_t i = 0; i < dets.size(); ++i) {
      const Detection& d = dets[i];
      if (matched_gt[i] < 0) {
        t.vfl += vfl(d.p_obj, 0.0, false);
        continue;
      }
      const GroundTruthObject& g = gts[static_cast<std::size_t>(matched_gt[i])];
      t.vfl += vfl(d.p_obj, iou(d.box, g.box), true);
      t.bbox_l1 += l1_box(d.box, g.box);
      t.giou += giou_loss(d.box, g.box);
      t.maturity += maturity_loss(d.maturity, g.y_target, lw.lambda_reg);
    }
    t.vfl *= norm;
    t.bbox_l1 *= norm;
    t.giou *= norm;
    t.maturity *= norm;
    t.total = lw.lambda_vfl * t.vfl + lw.lambda_bbox * t.bbox_l1 + lw.lambda_giou * t.giou +
              lw.lambda_maturity * t.maturity;
    out += t;
    out.per_layer.push_back(t);
  }
  return out;
}

std::vector<Detection> to_detections(const LayerTensors& layer, std::size_t image) {
  const std::size_t q = layer.logits.dim(1);
  const auto logits = layer.logits.values();
  const auto boxes = layer.boxes.values();
  const auto shapes = layer.shapes.values();
  std::vector<Detection> dets;
  dets.reserve(q);
  for (std::size_t i = 0; i < q; ++i) {
    const std::size_t r = image * q + i;
    const double z = logits[r];
    const double p = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    dets.push_back(Detection{{boxes[4 * r], boxes[4 * r + 1], boxes[4 * r + 2], boxes[4 * r + 3]},
                             p,
                             BetaParams(shapes[2 * r], shapes[2 * r + 1])});
  }
  return dets;
}

namespace {

using ag::Shape;
using ag::Tensor;

std::vector<double> product(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

}  // namespace

static LayerTargets layer_targets(const LayerTensors& layer, std::span<const std::vector<GroundTruthObject>> gts,
                           std::span<const MatchResult> matches) {
  const std::size_t batch = layer.logits.dim(0);
  const std::size_t queries = layer.logits.dim(1);
  const std::size_t n = batch * queries;
  LayerTargets t;
  t.batch = batch;
  t.queries = queries;
  t.weight.assign(n, 0.0);
  t.positive.assign(n, 0.0);
  t.q_sq.assign(n, 0.0);
  t.q_rest.assign(n, 0.0);
  t.log_y.assign(n, 0.0);
  t.log_1my.assign(n, 0.0);
  t.gt_box.assign(4 * n, 0.0);
  const auto boxes = layer.boxes.values();
  for (std::size_t b = 0; b < batch; ++b) {
    const double w =
        1.0 / (static_cast<double>(batch) * static_cast<double>(std::max<std::size_t>(1, gts[b].size())));
    for (std::size_t i = 0; i < queries; ++i) t.weight[b * queries + i] = w;
    for (const auto& [pred, gt] : matches[b].pairs) {
      if (pred >= queries || gt >= gts[b].size()) throw InputError("composite_loss: match index out of range");
      const std::size_t r = b * queries + pred;
      const GroundTruthObject& g = gts[b][gt];
      const BoxCXCYWH pb{boxes[4 * r], boxes[4 * r + 1], boxes[4 * r + 2], boxes[4 * r + 3]};
      const double q = iou(pb, g.box);
      const double y = clamp_target(g.y_target);
      t.positive[r] = 1.0;
      t.q_sq[r] = q * q;
      t.q_rest[r] = q * (1.0 - q);
      t.log_y[r] = std::log(y);
      t.log_1my[r] = std::log1p(-y);
      t.gt_box[4 * r] = g.box.cx;
      t.gt_box[4 * r + 1] = g.box.cy;
      t.gt_box[4 * r + 2] = g.box.w;
      t.gt_box[4 * r + 3] = g.box.h;
    }
  }
  return t;
}

std::vector<LayerTargets> loss_targets(std::span<const LayerTensors> layers,
                                       std::span<const std::vector<GroundTruthObject>> gts,
                                       std::span<const std::vector<MatchResult>> matches) {
  if (layers.size() != matches.size()) {
    throw InputError("composite_loss: " + std::to_string(layers.size()) + " layers but " +
                     std::to_string(matches.size()) + " match sets");
  }
  std::vector<LayerTargets> out;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (gts.size() != layers[l].logits.dim(0) || matches[l].size() != gts.size()) {
      throw InputError("composite_loss: batch size disagrees with ground truths or matches");
    }
    out.push_back(layer_targets(layers[l], gts, matches[l]));
  }
  return out;
}

GraphLoss composite_loss(std::span<const LayerTensors> layers,
                         std::span<const std::vector<GroundTruthObject>> gts,
                         std::span<const std::vector<MatchResult>> matches, const LossWeights& lw) {
  return composite_loss(layers, loss_targets(layers, gts, matches), lw);
}

GraphLoss composite_loss(std::span<const LayerTensors> layers, std::span<const LayerTargets> targets,
                         const LossWeights& lw) {
  if (layers.size() != targets.size()) throw InputError("composite_loss: layer and target counts differ");
  if (layers.empty()) throw InputError("composite_loss: no layers");
  GraphLoss out;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const LayerTensors& layer = layers[l];
    const std::size_t batch = layer.logits.dim(0);
    const std::size_t queries = layer.logits.dim(1);
    const LayerTargets& t = targets[l];
    if (t.batch != batch || t.queries != queries) throw InputError("composite_loss: targets do not fit layer");
    const Shape flat{batch, queries};
    const Shape column{batch, queries, 1};

    // Objectness.
    const Tensor p = ag::clamp(ag::sigmoid(layer.logits), kProbabilityClamp, 1.0 - kProbabilityClamp);
    const Tensor log_p = ag::log(p);
    const Tensor log_1mp = ag::log(1.0 - p);
    const Tensor pos_term = -(Tensor(flat, t.q_sq) * log_p + Tensor(flat, t.q_rest) * log_1mp);
    const Tensor neg_term = kVflAlpha * (p * p) * -log_1mp;
    std::vector<double> negative(t.positive.size());
    for (std::size_t i = 0; i < negative.size(); ++i) negative[i] = 1.0 - t.positive[i];
    const Tensor vfl_sum = ag::sum(Tensor(flat, product(t.weight, t.positive)) * pos_term +
                                   Tensor(flat, product(t.weight, negative)) * neg_term);

    // Boxes, positives only.
    const std::vector<double> pos_weight = product(t.weight, t.positive);
    std::vector<double> pos_weight4(4 * pos_weight.size());
    for (std::size_t i = 0; i < pos_weight4.size(); ++i) pos_weight4[i] = pos_weight[i / 4];
    const Tensor gt_boxes(layer.boxes.shape(), t.gt_box);
    const Tensor l1_sum =
        ag::sum(Tensor(layer.boxes.shape(), pos_weight4) * ag::abs(layer.boxes - gt_boxes));

    const auto coord = [](const Tensor& boxes, std::size_t k) { return ag::slice(boxes, -1, k, k + 1); };
    const Tensor pcx = coord(layer.boxes, 0), pcy = coord(layer.boxes, 1);
    const Tensor pw = coord(layer.boxes, 2), ph = coord(layer.boxes, 3);
    const Tensor px0 = pcx - 0.5 * pw, px1 = pcx + 0.5 * pw;
    const Tensor py0 = pcy - 0.5 * ph, py1 = pcy + 0.5 * ph;
    std::vector<double> gx0(queries * batch), gx1(gx0.size()), gy0(gx0.size()), gy1(gx0.size()),
        garea(gx0.size());
    for (std::size_t r = 0; r < gx0.size(); ++r) {
      const BoxXYXY g = to_xyxy({t.gt_box[4 * r], t.gt_box[4 * r + 1], t.gt_box[4 * r + 2], t.gt_box[4 * r + 3]});
      gx0[r] = g.x0;
      gx1[r] = g.x1;
      gy0[r] = g.y0;
      gy1[r] = g.y1;
      garea[r] = g.area();
    }
    const Tensor tx0(column, gx0), tx1(column, gx1), ty0(column, gy0), ty1(column, gy1);
    const Tensor inter = ag::relu(ag::minimum(px1, tx1) - ag::maximum(px0, tx0)) *
                         ag::relu(ag::minimum(py1, ty1) - ag::maximum(py0, ty0));
    const Tensor uni = pw * ph + Tensor(column, garea) - inter;
    const Tensor hull = (ag::maximum(px1, tx1) - ag::minimum(px0, tx0)) *
                        (ag::maximum(py1, ty1) - ag::minimum(py0, ty0));
    const Tensor giou_value = inter / uni - (hull - uni) / hull;
    const Tensor giou_sum = ag::sum(Tensor(column, pos_weight) * (1.0 - giou_value));

    // Maturity NLL with the concentration penalty.
    const Tensor alpha = coord(layer.shapes, 0);
    const Tensor beta = coord(layer.shapes, 1);
    const Tensor nll = ag::lgamma(alpha) + ag::lgamma(beta) - ag::lgamma(alpha + beta) -
                       (alpha - 1.0) * Tensor(column, t.log_y) - (beta - 1.0) * Tensor(column, t.log_1my);
    const Tensor maturity_sum =
        ag::sum(Tensor(column, pos_weight) * (nll + lw.lambda_reg * (alpha + beta)));

    const Tensor layer_total = lw.lambda_vfl * vfl_sum + lw.lambda_bbox * l1_sum +
                               lw.lambda_giou * giou_sum + lw.lambda_maturity * maturity_sum;
    out.total = out.total.defined() ? out.total + layer_total : layer_total;

    LossTerms terms{vfl_sum.item(), l1_sum.item(), giou_sum.item(), maturity_sum.item(), layer_total.item()};
    out.breakdown += terms;
    out.breakdown.per_layer.push_back(terms);
  }
  return out;
}

}  // namespace betadet
