#include "betadet/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "betadet/errors.hpp"

namespace betadet {

void CostWeights::validate() const {
  const double all[] = {lambda_cls, lambda_l1, lambda_giou, lambda_mat};
  bool any_positive = false;
  for (double w : all) {
    if (!std::isfinite(w) || w < 0.0) throw DomainError("CostWeights: weights must be finite and >= 0");
    any_positive = any_positive || w > 0.0;
  }
  if (!any_positive) throw DomainError("CostWeights: at least one weight must be positive");
}

CostMatrix CostMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
  const std::size_t cols = rows.empty() ? 0 : rows.front().size();
  CostMatrix m(rows.size(), cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != cols) throw InputError("CostMatrix: ragged rows");
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = rows[r][c];
  }
  return m;
}

double cls_cost(double p_obj) {
  constexpr double kAlpha = 0.25;
  const double p = std::clamp(p_obj, 1e-8, 1.0 - 1e-8);
  const double pos = kAlpha * (1.0 - p) * (1.0 - p) * -std::log(p);
  const double neg = (1.0 - kAlpha) * p * p * -std::log1p(-p);
  return pos - neg;
}

double maturity_cost(const BetaParams& p, double y_target) { return -log_pdf(p, y_target); }

CostMatrix build_cost_matrix(std::span<const Detection> preds, std::span<const GroundTruthObject> gts,
                             const CostWeights& w) {
  CostMatrix cost(preds.size(), gts.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const Detection& d = preds[i];
    const double cls = w.lambda_cls * cls_cost(d.p_obj);
    const BoxXYXY pb = to_xyxy(d.box);
    for (std::size_t j = 0; j < gts.size(); ++j) {
      const GroundTruthObject& g = gts[j];
      cost(i, j) = cls + w.lambda_l1 * l1_box(d.box, g.box) +
                   w.lambda_giou * -giou(pb, to_xyxy(g.box)) +
                   w.lambda_mat * maturity_cost(d.maturity, g.y_target);
    }
  }
  return cost;
}

MatchResult hungarian(const CostMatrix& cost) {
  const std::size_t n = cost.cols();  // ground truths, each assigned once
  const std::size_t m = cost.rows();  // predictions
  if (n > m) {
    throw InputError("hungarian: more ground truths (" + std::to_string(n) + ") than predictions (" +
                     std::to_string(m) + ")");
  }
  for (double v : cost.data()) {
    if (!std::isfinite(v)) throw InputError("hungarian: cost matrix has a non-finite entry");
  }
  MatchResult result;
  if (n == 0) return result;

  // 1-based potentials; a(i, j) = cost(j - 1, i - 1) is gt i against prediction j.
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0);
  std::vector<double> v(m + 1, 0.0);
  std::vector<std::size_t> owner(m + 1, 0);  // owner[j]: gt currently holding prediction j
  std::vector<std::size_t> way(m + 1, 0);
  std::vector<double> minv(m + 1);
  std::vector<char> used(m + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    owner[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = owner[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(j - 1, i0 - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[owner[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (owner[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      owner[j0] = owner[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  result.pairs.reserve(n);
  for (std::size_t j = 1; j <= m; ++j) {
    if (owner[j] != 0) result.pairs.emplace_back(j - 1, owner[j] - 1);
  }
  std::sort(result.pairs.begin(), result.pairs.end(),
            [](const auto& a, const auto& b) { return a.second < b.second; });
  for (const auto& [row, col] : result.pairs) result.total_cost += cost(row, col);
  return result;
}

MatchResult match(std::span<const Detection> preds, std::span<const GroundTruthObject> gts,
                  const CostWeights& w) {
  return hungarian(build_cost_matrix(preds, gts, w));
}

}  // namespace betadet
