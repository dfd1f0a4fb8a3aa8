#include "betadet/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace betadet {

std::vector<std::vector<MatchResult>> match_batch(std::span<const LayerTensors> layers,
                                                  std::span<const std::vector<GroundTruthObject>> gts,
                                                  const CostWeights& weights) {
  std::vector<std::vector<MatchResult>> matches(layers.size());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    matches[l].reserve(gts.size());
    for (std::size_t b = 0; b < gts.size(); ++b) {
      const std::vector<Detection> dets = to_detections(layers[l], b);
      matches[l].push_back(match(dets, gts[b], weights));
    }
  }
  return matches;
}

namespace {

std::vector<const Image*> images_of(std::span<const Scene* const> batch) {
  std::vector<const Image*> images;
  images.reserve(batch.size());
  for (const Scene* s : batch) images.push_back(&s->image);
  return images;
}

std::vector<std::vector<GroundTruthObject>> objects_of(std::span<const Scene* const> batch) {
  std::vector<std::vector<GroundTruthObject>> gts;
  gts.reserve(batch.size());
  for (const Scene* s : batch) gts.push_back(s->objects);
  return gts;
}

}  // namespace

StepRecord train_step(Detector& model, ag::AdamState& optimizer, std::span<const Scene* const> batch,
                      const RunConfig& config, std::size_t step) {
  try {
    const std::vector<const Image*> images = images_of(batch);
    const auto gts = objects_of(batch);
    const std::vector<LayerTensors> layers = model.forward(images);
    const auto matches = match_batch(layers, gts, config.cost);
    const GraphLoss loss = composite_loss(layers, gts, matches, config.loss);
    if (!std::isfinite(loss.total.item())) throw NumericError("non-finite loss");
    model.zero_grad();
    ag::backward(loss.total);
    std::vector<ag::Tensor> params = model.parameter_tensors();
    StepRecord record;
    record.step = step;
    record.loss = loss.breakdown;
    record.grad_norm = ag::adam_step(params, optimizer, config.lr);
    if (!std::isfinite(record.grad_norm)) throw NumericError("non-finite gradient norm");
    return record;
  } catch (const NumericError& e) {
    throw TrainingDiverged(step, e.what());
  }
}

Detector train(const RunConfig& config, std::span<const Scene> scenes, const StepCallback& on_step) {
  config.validate();
  if (scenes.empty()) throw InputError("train: no scenes");
  Detector model(config.model, config.seed);
  ag::AdamState optimizer;
  Rng shuffle = Rng::substream(config.seed, 0x5348554646ULL);

  std::vector<std::size_t> order(scenes.size());
  std::size_t cursor = order.size();
  std::vector<const Scene*> batch(config.batch_size);
  for (std::size_t step = 1; step <= config.steps; ++step) {
    for (auto& slot : batch) {
      if (cursor == order.size()) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);
        cursor = 0;
      }
      slot = &scenes[order[cursor++]];
    }
    const StepRecord record = train_step(model, optimizer, batch, config, step);
    if (on_step) on_step(record);
  }
  return model;
}

std::vector<ImageResult> run_inference(const Detector& model, std::span<const Scene> scenes,
                                       std::size_t batch_size) {
  std::vector<ImageResult> results;
  results.reserve(scenes.size());
  for (std::size_t start = 0; start < scenes.size(); start += batch_size) {
    const std::size_t stop = std::min(scenes.size(), start + batch_size);
    std::vector<const Image*> images;
    for (std::size_t i = start; i < stop; ++i) images.push_back(&scenes[i].image);
    auto dets = model.predict(images);
    for (std::size_t i = start; i < stop; ++i) {
      results.push_back({std::move(dets[i - start]), scenes[i].objects});
    }
  }
  return results;
}

ModelConfig gradcheck_model_config() {
  ModelConfig c;
  c.image_size = 16;
  c.patch = 8;
  c.embed_dim = 16;
  c.heads = 2;
  c.num_queries = 4;
  c.decoder_layers = 2;
  c.mlp_ratio = 2;
  return c;
}

SceneConfig gradcheck_scene_config() {
  SceneConfig c;
  c.image_size = 16;
  c.min_radius = 2.0;
  c.max_radius = 4.0;
  c.min_objects = 1;
  c.max_objects = 3;
  return c;
}

GradcheckReport gradcheck(const GradcheckOptions& options) {
  Detector model(gradcheck_model_config(), options.seed);
  const std::vector<Scene> scenes = generate(options.seed, options.batch, gradcheck_scene_config());
  std::vector<const Image*> images;
  std::vector<std::vector<GroundTruthObject>> gts;
  for (const Scene& s : scenes) {
    images.push_back(&s.image);
    gts.push_back(s.objects);
  }
  const LossWeights weights;
  const CostWeights costs;

  // Assignments and IoU targets stay at their base-point values.
  std::vector<LayerTargets> targets;
  {
    const std::vector<LayerTensors> layers = model.forward(images);
    targets = loss_targets(layers, gts, match_batch(layers, gts, costs));
    const GraphLoss loss = composite_loss(layers, targets, weights);
    model.zero_grad();
    ag::backward(loss.total);
  }
  const auto evaluate = [&]() {
    const ag::NoGradGuard no_grad;
    const std::vector<LayerTensors> layers = model.forward(images);
    return composite_loss(layers, targets, weights).total.item();
  };

  GradcheckReport report;
  for (auto& p : model.parameters()) {
    auto values = p.tensor.mutable_values();
    const auto grad = p.tensor.grad();
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double theta = values[j];
      const double h = options.relative_step * std::max(1.0, std::fabs(theta));
      values[j] = theta + h;
      const double up = evaluate();
      values[j] = theta - h;
      const double down = evaluate();
      values[j] = theta;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = grad[j];
      const double denom = std::max({std::fabs(analytic), std::fabs(numeric), options.error_floor});
      const double rel = std::fabs(analytic - numeric) / denom;
      ++report.checked;
      if (rel > report.max_relative_error || report.worst_parameter.empty()) {
        report.max_relative_error = rel;
        report.worst_parameter = p.name;
        report.worst_index = j;
        report.worst_analytic = analytic;
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace betadet
