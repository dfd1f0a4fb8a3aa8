#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "betadet/detection.hpp"

namespace betadet {

/// Weights of the four matching-cost terms.
struct CostWeights {
  double lambda_cls = 2.0;
  double lambda_l1 = 5.0;
  double lambda_giou = 2.0;
  double lambda_mat = 1.0;

  /// Throws DomainError if any weight is negative or non-finite, or all are 0.
  void validate() const;

  CostWeights scaled(double c) const {
    return {lambda_cls * c, lambda_l1 * c, lambda_giou * c, lambda_mat * c};
  }
};

/// Dense row-major matrix; rows are predictions, columns ground truths.
class CostMatrix {
 public:
  CostMatrix() = default;
  CostMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::span<const double> data() const noexcept { return data_; }

  static CostMatrix from_rows(const std::vector<std::vector<double>>& rows);

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct MatchResult {
  /// (prediction_index, gt_index), ordered by gt_index.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  double total_cost = 0.0;
};

/// Focal-style classification cost, α = 0.25, γ = 2. p is clamped to
/// [1e-8, 1 - 1e-8].
double cls_cost(double p_obj);

/// -log_pdf at the clamped target; no concentration penalty.
double maturity_cost(const BetaParams& p, double y_target);

CostMatrix build_cost_matrix(std::span<const Detection> preds, std::span<const GroundTruthObject> gts,
                             const CostWeights& w);

/// Minimum-cost assignment of every column to a distinct row (rows ≥ cols).
/// Shortest augmenting path with potentials, O(cols² · rows).
/// Throws InputError for cols > rows or non-finite entries.
MatchResult hungarian(const CostMatrix& cost);

/// build_cost_matrix followed by hungarian.
MatchResult match(std::span<const Detection> preds, std::span<const GroundTruthObject> gts,
                  const CostWeights& w);

}  // namespace betadet
