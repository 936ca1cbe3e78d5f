#pragma once

#include "oodlr/detector.hpp"

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace oodlr {

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  friend bool operator==(const RocPoint &, const RocPoint &) = default;
};

/// Mann-Whitney statistic with OOD as the positive class; ties count 1/2.
double auroc(std::span<const double> ood_scores,
             std::span<const double> in_scores);

/// Sweep of "score >= t" over every distinct observed score, from (0,0)
/// to (1,1).
std::vector<RocPoint> roc_points(std::span<const double> ood_scores,
                                 std::span<const double> in_scores);

/// Smallest FPR among ROC points with TPR >= tpr_level.
double fpr_at_tpr(std::span<const double> ood_scores,
                  std::span<const double> in_scores, double tpr_level = 0.95);

double trapezoid_area(std::span<const RocPoint> roc);

struct ErrorRates {
  double type1 = 0.0; // in-distribution scores classified out
  double type2 = 0.0; // ood scores classified in
};

ErrorRates error_rates(std::span<const double> ood_scores,
                       std::span<const double> in_scores,
                       const DecisionRule &rule);

struct EvalReport {
  double auroc = 0.0;
  std::vector<RocPoint> roc;
  double fpr_at_tpr95 = 0.0;
  double type1 = 0.0;
  double type2 = 0.0;
  double theta = 0.0;
  double level = 0.0;
  std::size_t n_in = 0;
  std::size_t n_out = 0;
  std::string convention;
};

/// Threshold is calibrated on in_scores at the given type-I level.
EvalReport evaluate(std::span<const double> ood_scores,
                    std::span<const double> in_scores, double level = 0.05);

std::string format_roc_csv(std::span<const RocPoint> roc);

} // namespace oodlr
