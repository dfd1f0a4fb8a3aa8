#include "betadet/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <tuple>

#include "betadet/errors.hpp"

namespace betadet {
namespace {

struct Ranked {
  double score;
  std::size_t image;
  std::size_t query;
};

std::vector<Ranked> rank_detections(std::span<const ImageResult> images, double min_score) {
  std::vector<Ranked> ranked;
  for (std::size_t i = 0; i < images.size(); ++i) {
    for (std::size_t q = 0; q < images[i].detections.size(); ++q) {
      const double s = images[i].detections[q].p_obj;
      if (s >= min_score) ranked.push_back({s, i, q});
    }
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
    return std::tie(b.score, a.image, a.query) < std::tie(a.score, b.image, b.query);
  });
  return ranked;
}

// Index of the best unmatched gt with IoU ≥ threshold, or -1.
int best_gt(const ImageResult& img, const Detection& d, const std::vector<char>& taken, double threshold) {
  int best = -1;
  double best_iou = threshold;
  for (std::size_t g = 0; g < img.objects.size(); ++g) {
    if (taken[g]) continue;
    const double v = iou(d.box, img.objects[g].box);
    if (v >= best_iou) {
      if (best < 0 || v > best_iou) {
        best = static_cast<int>(g);
        best_iou = v;
      }
    }
  }
  return best;
}

}  // namespace

double average_precision(std::span<const ImageResult> images, double iou_threshold) {
  std::size_t total_gt = 0;
  for (const auto& img : images) total_gt += img.objects.size();
  if (total_gt == 0) throw DomainError("average_precision: no ground truths, recall undefined");

  const std::vector<Ranked> ranked = rank_detections(images, -1.0);
  std::vector<std::vector<char>> taken(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) taken[i].assign(images[i].objects.size(), 0);

  std::vector<double> precision;
  std::vector<double> recall;
  precision.reserve(ranked.size());
  recall.reserve(ranked.size());
  std::size_t tp = 0;
  for (std::size_t k = 0; k < ranked.size(); ++k) {
    const auto& r = ranked[k];
    const ImageResult& img = images[r.image];
    const int g = best_gt(img, img.detections[r.query], taken[r.image], iou_threshold);
    if (g >= 0) {
      taken[r.image][static_cast<std::size_t>(g)] = 1;
      ++tp;
    }
    precision.push_back(static_cast<double>(tp) / static_cast<double>(k + 1));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(total_gt));
  }
  // Precision envelope, non-increasing in rank.
  for (std::size_t k = precision.size(); k-- > 1;) {
    precision[k - 1] = std::max(precision[k - 1], precision[k]);
  }
  double ap = 0.0;
  for (int t = 0; t <= 100; ++t) {
    const double level = t / 100.0;
    const auto it = std::lower_bound(recall.begin(), recall.end(), level - 1e-12);
    if (it != recall.end()) ap += precision[static_cast<std::size_t>(it - recall.begin())];
  }
  return ap / 101.0;
}

double average_precision_50_95(std::span<const ImageResult> images) {
  double total = 0.0;
  for (int k = 0; k < 10; ++k) total += average_precision(images, 0.5 + 0.05 * k);
  return total / 10.0;
}

std::vector<MaturityPair> match_for_maturity(std::span<const ImageResult> images, double score_threshold,
                                             double iou_threshold) {
  std::vector<MaturityPair> pairs;
  const std::vector<Ranked> ranked = rank_detections(images, score_threshold);
  std::vector<std::vector<char>> taken(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) taken[i].assign(images[i].objects.size(), 0);
  for (const auto& r : ranked) {
    const ImageResult& img = images[r.image];
    const Detection& d = img.detections[r.query];
    const int g = best_gt(img, d, taken[r.image], iou_threshold);
    if (g < 0) continue;
    taken[r.image][static_cast<std::size_t>(g)] = 1;
    const GroundTruthObject& o = img.objects[static_cast<std::size_t>(g)];
    pairs.push_back({d.maturity, o.y_true, o.y_target});
  }
  return pairs;
}

std::optional<double> maturity_mae(std::span<const MaturityPair> pairs) {
  if (pairs.empty()) return std::nullopt;
  double total = 0.0;
  for (const auto& p : pairs) total += std::fabs(mean(p.prediction) - p.y_true);
  return total / static_cast<double>(pairs.size());
}

std::optional<double> mean_nll(std::span<const MaturityPair> pairs) {
  if (pairs.empty()) return std::nullopt;
  double total = 0.0;
  for (const auto& p : pairs) total -= log_pdf(p.prediction, p.y_target);
  return total / static_cast<double>(pairs.size());
}

std::optional<double> mean_nll_true(std::span<const MaturityPair> pairs) {
  if (pairs.empty()) return std::nullopt;
  double total = 0.0;
  for (const auto& p : pairs) total -= log_pdf(p.prediction, p.y_true);
  return total / static_cast<double>(pairs.size());
}

std::map<double, double> coverage(std::span<const MaturityPair> pairs, std::span<const double> levels) {
  std::map<double, double> out;
  for (double q : levels) {
    if (!(q > 0.0 && q < 1.0)) throw DomainError("coverage: level must lie in (0, 1)");
    std::size_t inside = 0;
    for (const auto& p : pairs) {
      const double lo = quantile(p.prediction, 0.5 * (1.0 - q));
      const double hi = quantile(p.prediction, 0.5 * (1.0 + q));
      if (p.y_true >= lo && p.y_true <= hi) ++inside;
    }
    out[q] = pairs.empty() ? 0.0 : static_cast<double>(inside) / static_cast<double>(pairs.size());
  }
  return out;
}

double ks_uniform(std::vector<double> values) {
  if (values.empty()) throw InputError("ks_uniform: empty sample");
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  double d = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double u = std::clamp(values[i], 0.0, 1.0);
    d = std::max({d, static_cast<double>(i + 1) / n - u, u - static_cast<double>(i) / n});
  }
  return d;
}

double pit_ks(std::span<const MaturityPair> pairs) {
  if (pairs.size() < kMinPitPairs) {
    throw InputError("pit_ks: need at least " + std::to_string(kMinPitPairs) + " pairs, got " +
                     std::to_string(pairs.size()));
  }
  std::vector<double> u;
  u.reserve(pairs.size());
  for (const auto& p : pairs) u.push_back(cdf(p.prediction, p.y_true));
  return ks_uniform(std::move(u));
}

EvalReport evaluate(std::span<const ImageResult> images, const EvalOptions& options) {
  EvalReport r;
  r.ap50 = average_precision(images, 0.5);
  r.ap75 = average_precision(images, 0.75);
  r.ap_50_95 = average_precision_50_95(images);
  const std::vector<MaturityPair> pairs = match_for_maturity(images, options.score_threshold);
  r.matched = pairs.size();
  r.mean_nll = mean_nll(pairs);
  const bool have_truth = std::all_of(pairs.begin(), pairs.end(),
                                      [](const MaturityPair& p) { return std::isfinite(p.y_true); });
  for (double q : options.coverage_levels) r.coverage[q] = std::nullopt;
  if (have_truth && !pairs.empty()) {
    r.maturity_mae = maturity_mae(pairs);
    r.mean_nll_true = mean_nll_true(pairs);
    for (const auto& [q, c] : coverage(pairs, options.coverage_levels)) r.coverage[q] = c;
    if (pairs.size() >= kMinPitPairs) r.pit_ks_stat = pit_ks(pairs);
  }
  return r;
}

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string num(const std::optional<double>& v) { return v ? num(*v) : "NA"; }

std::string level_name(double q) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "coverage_%02d", static_cast<int>(std::lround(q * 100)));
  return buf;
}

}  // namespace

std::string to_csv(const EvalReport& report) {
  std::string header = "ap50,ap75,ap_50_95,matched,maturity_mae,mean_nll,mean_nll_true";
  std::string row = num(report.ap50) + "," + num(report.ap75) + "," + num(report.ap_50_95) + "," +
                    std::to_string(report.matched) + "," + num(report.maturity_mae) + "," +
                    num(report.mean_nll) + "," + num(report.mean_nll_true);
  for (const auto& [q, c] : report.coverage) {
    header += "," + level_name(q);
    row += "," + num(c);
  }
  header += ",pit_ks";
  row += "," + num(report.pit_ks_stat);
  return header + "\n" + row + "\n";
}

std::string to_text(const EvalReport& report) {
  std::vector<std::pair<std::string, std::string>> rows = {
      {"AP50", num(report.ap50)},
      {"AP75", num(report.ap75)},
      {"AP50:95", num(report.ap_50_95)},
      {"matched pairs", std::to_string(report.matched)},
      {"maturity MAE", num(report.maturity_mae)},
      {"mean NLL (targets)", num(report.mean_nll)},
      {"mean NLL (truths)", num(report.mean_nll_true)},
  };
  for (const auto& [q, c] : report.coverage) rows.emplace_back(level_name(q), num(c));
  rows.emplace_back("PIT KS", num(report.pit_ks_stat));
  std::size_t width = 0;
  for (const auto& [k, v] : rows) width = std::max(width, k.size());
  std::string out;
  for (const auto& [k, v] : rows) out += k + std::string(width - k.size() + 2, ' ') + v + "\n";
  return out;
}

}  // namespace betadet
