#include <gtest/gtest.h>

#include <cmath>

#include "betadet/errors.hpp"
#include "betadet/losses.hpp"
#include "betadet/rng.hpp"
#include "betadet/synthdata.hpp"

namespace {

using betadet::Detection;
using betadet::GroundTruthObject;
using betadet::LossWeights;
using betadet::MatchResult;

Detection random_detection(betadet::Rng& rng) {
  return {{rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), rng.uniform(0.05, 0.4), rng.uniform(0.05, 0.4)},
          rng.uniform(0.01, 0.99),
          {rng.uniform(0.5, 30), rng.uniform(0.5, 30)}};
}

GroundTruthObject random_gt(betadet::Rng& rng) {
  const double y = rng.uniform();
  const int stage = betadet::stage_of(y);
  return {{rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), rng.uniform(0.05, 0.4), rng.uniform(0.05, 0.4)},
          stage, betadet::stage_to_target(stage), y};
}

TEST(MaturityLoss, Examples) {
  EXPECT_NEAR(betadet::maturity_loss({1, 1}, 0.5, 0.0), 0.0, 1e-14);
  EXPECT_NEAR(betadet::maturity_loss({2, 2}, 0.5, 0.0), -0.405465108, 1e-9);
  EXPECT_NEAR(betadet::maturity_loss({2, 2}, 0.5, 1e-3), -0.401465108, 1e-9);
}

TEST(Vfl, Examples) {
  EXPECT_NEAR(betadet::vfl(1 - 1e-8, 1.0, true), 0.0, 1e-7);
  EXPECT_NEAR(betadet::vfl(0.5, 1.0, true), 0.693147181, 1e-9);
  EXPECT_NEAR(betadet::vfl(0.5, 0.0, false), 0.129965096, 1e-9);
}

TEST(Vfl, RejectsTargetOutsideUnitInterval) {
  EXPECT_THROW(betadet::vfl(0.5, 1.1, true), betadet::DomainError);
  EXPECT_THROW(betadet::vfl(0.5, -0.1, true), betadet::DomainError);
}

TEST(GiouLoss, Examples) {
  const betadet::BoxCXCYWH unit{0.5, 0.5, 1, 1};
  EXPECT_EQ(betadet::giou_loss(unit, unit), 0.0);
  EXPECT_DOUBLE_EQ(betadet::giou_loss(unit, {1.5, 1.5, 1, 1}), 1.5);
  EXPECT_NEAR(betadet::giou_loss(unit, {2.5, 2.5, 1, 1}), 1 + 7.0 / 9.0, 1e-15);
}

TEST(CompositeLoss, NoGroundTruthsAndTinyScores) {
  std::vector<Detection> dets(12);
  for (auto& d : dets) d.p_obj = 1e-8;
  const std::vector<std::vector<Detection>> layers{dets};
  const std::vector<MatchResult> matches(1);
  const auto b = betadet::composite_loss(layers, std::span<const GroundTruthObject>{}, matches, LossWeights{});
  EXPECT_NEAR(b.total, 0.0, 1e-12);
}

TEST(CompositeLoss, PerfectSinglePrediction) {
  const GroundTruthObject gt{{0.4, 0.6, 0.2, 0.3}, 1, 0.5, 0.45};
  const std::vector<std::vector<Detection>> layers{{Detection{gt.box, 1 - 1e-8, {1, 1}}}};
  const std::vector<GroundTruthObject> gts{gt};
  const std::vector<MatchResult> matches{{{{0, 0}}, 0.0}};
  LossWeights lw;
  lw.lambda_reg = 0.0;
  const auto b = betadet::composite_loss(layers, gts, matches, lw);
  EXPECT_EQ(b.bbox_l1, 0.0);
  EXPECT_EQ(b.giou, 0.0);
  EXPECT_NEAR(b.maturity, 0.0, 1e-14);
  EXPECT_NEAR(b.total, 0.0, 1e-7);
}

TEST(CompositeLoss, LayerAndMatchCountsMustAgree) {
  const std::vector<std::vector<Detection>> layers(2, std::vector<Detection>(3));
  const std::vector<MatchResult> matches(1);
  EXPECT_THROW(betadet::composite_loss(layers, std::span<const GroundTruthObject>{}, matches, LossWeights{}),
               betadet::InputError);
}

// Invariants

struct RandomCase {
  std::vector<std::vector<Detection>> layers;
  std::vector<GroundTruthObject> gts;
  std::vector<MatchResult> matches;
};

RandomCase random_case(betadet::Rng& rng, std::size_t n_layers) {
  RandomCase c;
  const std::size_t q = 6;
  const std::size_t g = rng.below(5);
  for (std::size_t j = 0; j < g; ++j) c.gts.push_back(random_gt(rng));
  for (std::size_t l = 0; l < n_layers; ++l) {
    std::vector<Detection> dets;
    for (std::size_t i = 0; i < q; ++i) dets.push_back(random_detection(rng));
    c.matches.push_back(betadet::match(dets, c.gts, {}));
    c.layers.push_back(std::move(dets));
  }
  return c;
}

TEST(LossInvariants, TotalIsWeightedSumOfBreakdown) {
  betadet::Rng rng(31);
  const LossWeights lw{1.3, 4.0, 2.5, 0.7, 1e-2};
  for (int t = 0; t < 200; ++t) {
    const RandomCase c = random_case(rng, 1 + rng.below(3));
    const auto b = betadet::composite_loss(c.layers, c.gts, c.matches, lw);
    const double resum = lw.lambda_vfl * b.vfl + lw.lambda_bbox * b.bbox_l1 + lw.lambda_giou * b.giou +
                         lw.lambda_maturity * b.maturity;
    EXPECT_NEAR(b.total, resum, 1e-10);
    double per_layer = 0.0;
    for (const auto& t2 : b.per_layer) per_layer += t2.total;
    EXPECT_NEAR(b.total, per_layer, 1e-10);
  }
}

TEST(LossInvariants, NonNegativeTermsAndFiniteMaturity) {
  betadet::Rng rng(37);
  for (int t = 0; t < 1000; ++t) {
    const Detection d = random_detection(rng);
    const GroundTruthObject g = random_gt(rng);
    EXPECT_GE(betadet::vfl(d.p_obj, betadet::iou(d.box, g.box), true), 0.0);
    EXPECT_GE(betadet::vfl(d.p_obj, 0.0, false), 0.0);
    EXPECT_GE(betadet::giou_loss(d.box, g.box), 0.0);
    EXPECT_GE(betadet::l1_box(d.box, g.box), 0.0);
    EXPECT_TRUE(std::isfinite(betadet::maturity_loss(d.maturity, g.y_target, 1e-3)));
    EXPECT_TRUE(std::isfinite(betadet::maturity_loss(d.maturity, rng.below(2) ? 0.0 : 1.0, 1e-3)));
  }
}

TEST(LossInvariants, DeepSupervisionIsAdditive) {
  betadet::Rng rng(41);
  for (int t = 0; t < 200; ++t) {
    const RandomCase c = random_case(rng, 3);
    const auto all = betadet::composite_loss(c.layers, c.gts, c.matches, LossWeights{});
    double sum = 0.0;
    for (std::size_t l = 0; l < 3; ++l) {
      const std::vector<std::vector<Detection>> one{c.layers[l]};
      const std::vector<MatchResult> m{c.matches[l]};
      sum += betadet::composite_loss(one, c.gts, m, LossWeights{}).total;
    }
    EXPECT_NEAR(all.total, sum, 1e-10);
  }
}

TEST(LossInvariants, RegularizerMonotone) {
  betadet::Rng rng(43);
  for (int t = 0; t < 1000; ++t) {
    const betadet::BetaParams p(rng.uniform(0.5, 40), rng.uniform(0.5, 40));
    const double y = rng.uniform();
    const double r1 = rng.uniform(0, 0.1), r2 = r1 + rng.uniform(1e-4, 0.1);
    EXPECT_LT(betadet::maturity_loss(p, y, r1), betadet::maturity_loss(p, y, r2));
  }
}

TEST(LossInvariants, SwapSymmetry) {
  betadet::Rng rng(47);
  for (int t = 0; t < 1000; ++t) {
    const betadet::BetaParams p(rng.uniform(0.5, 40), rng.uniform(0.5, 40));
    const double y = rng.uniform(0.001, 0.999), r = rng.uniform(0, 0.1);
    EXPECT_NEAR(betadet::maturity_loss(p, y, r), betadet::maturity_loss(p.swapped(), 1 - y, r), 1e-12);
  }
}

TEST(GraphLoss, AgreesWithScalarReference) {
  // The tape objective for a batch equals the image mean of the scalar one.
  betadet::Rng rng(53);
  const std::size_t batch = 3, q = 5, n_layers = 2;
  std::vector<std::vector<GroundTruthObject>> gts(batch);
  for (auto& g : gts) {
    const std::size_t n = rng.below(4);
    for (std::size_t j = 0; j < n; ++j) g.push_back(random_gt(rng));
  }
  std::vector<betadet::LayerTensors> layers;
  std::vector<std::vector<MatchResult>> matches(n_layers);
  std::vector<std::vector<std::vector<Detection>>> dets(batch, std::vector<std::vector<Detection>>(n_layers));
  for (std::size_t l = 0; l < n_layers; ++l) {
    std::vector<double> logits, boxes, shapes;
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t i = 0; i < q; ++i) {
        const Detection d = random_detection(rng);
        logits.push_back(std::log(d.p_obj / (1 - d.p_obj)));
        boxes.insert(boxes.end(), {d.box.cx, d.box.cy, d.box.w, d.box.h});
        shapes.insert(shapes.end(), {d.maturity.alpha(), d.maturity.beta()});
      }
    }
    betadet::LayerTensors t{betadet::ag::Tensor({batch, q}, logits), betadet::ag::Tensor({batch, q, 4}, boxes),
                            betadet::ag::Tensor({batch, q, 2}, shapes)};
    for (std::size_t b = 0; b < batch; ++b) {
      dets[b][l] = betadet::to_detections(t, b);
      matches[l].push_back(betadet::match(dets[b][l], gts[b], {}));
    }
    layers.push_back(t);
  }
  const LossWeights lw{1.0, 5.0, 2.0, 1.0, 1e-2};
  const auto graph = betadet::composite_loss(layers, gts, matches, lw);
  double want = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    std::vector<MatchResult> m{matches[0][b], matches[1][b]};
    want += betadet::composite_loss(dets[b], gts[b], m, lw).total / batch;
  }
  EXPECT_NEAR(graph.total.item(), want, 1e-10);
  EXPECT_NEAR(graph.breakdown.total, want, 1e-10);
}

}  // namespace
