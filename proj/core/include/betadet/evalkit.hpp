#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "betadet/detection.hpp"

namespace betadet {

/// Detections and ground truths of one image.
struct ImageResult {
  std::vector<Detection> detections;
  std::vector<GroundTruthObject> objects;
};

/// COCO-style AP at one IoU threshold with 101-point interpolation. Detections
/// are ranked by p_obj across all images (ties broken by image then query
/// order) and greedily matched to the best-overlapping unmatched ground truth.
/// Throws DomainError when there are no ground truths.
double average_precision(std::span<const ImageResult> images, double iou_threshold);

/// Mean AP over IoU thresholds 0.50, 0.55, ..., 0.95.
double average_precision_50_95(std::span<const ImageResult> images);

/// A detection paired with the ground truth it was matched to.
struct MaturityPair {
  BetaParams prediction;
  double y_true;
  double y_target;
};

/// Greedy score-ordered matching within each image at IoU ≥ iou_threshold,
/// considering only detections with p_obj ≥ score_threshold.
std::vector<MaturityPair> match_for_maturity(std::span<const ImageResult> images, double score_threshold,
                                             double iou_threshold = 0.5);

/// Mean |E[y] - y_true|; nullopt when there are no pairs.
std::optional<double> maturity_mae(std::span<const MaturityPair> pairs);

/// Mean -log_pdf at the mapped targets; nullopt when there are no pairs.
std::optional<double> mean_nll(std::span<const MaturityPair> pairs);

/// Mean -log_pdf at the hidden truths; nullopt when there are no pairs.
std::optional<double> mean_nll_true(std::span<const MaturityPair> pairs);

/// For each level q, the fraction of y_true inside the central interval
/// [quantile((1 - q) / 2), quantile((1 + q) / 2)].
std::map<double, double> coverage(std::span<const MaturityPair> pairs, std::span<const double> levels);

/// Kolmogorov-Smirnov distance between the sample and U(0, 1).
double ks_uniform(std::vector<double> values);

inline constexpr std::size_t kMinPitPairs = 100;

/// KS distance of the PIT values cdf(prediction, y_true) to uniform.
/// Throws InputError for fewer than kMinPitPairs pairs.
double pit_ks(std::span<const MaturityPair> pairs);

struct EvalReport {
  double ap50 = 0.0;
  double ap75 = 0.0;
  double ap_50_95 = 0.0;
  std::size_t matched = 0;
  std::optional<double> maturity_mae;
  std::optional<double> mean_nll;
  std::optional<double> mean_nll_true;
  std::map<double, std::optional<double>> coverage;  // every requested level, absent without matches
  std::optional<double> pit_ks_stat;
};

struct EvalOptions {
  double score_threshold = 0.30;
  std::vector<double> coverage_levels{0.5, 0.8, 0.9};
};

EvalReport evaluate(std::span<const ImageResult> images, const EvalOptions& options = {});

/// Two-line CSV: header and values. Absent metrics are written as "NA".
std::string to_csv(const EvalReport& report);
/// Aligned human-readable table.
std::string to_text(const EvalReport& report);

}  // namespace betadet
