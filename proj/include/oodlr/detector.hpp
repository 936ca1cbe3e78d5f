#pragma once

#include "oodlr/core.hpp"
#include "oodlr/density.hpp"
#include "oodlr/proxy.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace oodlr {

/// log p_out^proxy(x) - log p_in(x). Higher means more out-of-distribution.
struct OodScore {
  double value = 0.0;
  friend auto operator<=>(const OodScore &, const OodScore &) = default;
};

enum class Decision { In = 0, Out = 1 };

struct DecisionRule {
  double theta = 0.0;
  /// Prior probability of the out class, for posterior reporting.
  std::optional<double> alpha;
};

OodScore ood_score(const DensityModel &in_model, const ProxyModel &proxy,
                   std::span<const double> x);

/// Scores every row of ds. Throws DataError naming both dims on mismatch.
std::vector<double> ood_scores(const DensityModel &in_model,
                               const ProxyModel &proxy, const Dataset &ds);

/// P(out | x) = 1 / (1 + (1 - alpha) / (alpha * LR)), LR = exp(score).
double posterior(OodScore score, double alpha);

/// Threshold at the nearest-rank upper (1 - level) quantile of
/// in-distribution validation scores.
DecisionRule calibrate_threshold(std::span<const double> in_val_scores,
                                 double level);

/// Out iff score > theta; a tie is in-distribution.
Decision classify(OodScore score, const DecisionRule &rule);

/// Score threshold equivalent to thresholding posterior at p_star.
double theta_for_posterior(double p_star, double alpha);

/// sample_index,score,decision
std::string format_scores_csv(std::span<const double> scores,
                              const DecisionRule &rule);
std::vector<double> parse_scores_csv(const std::string &text);

} // namespace oodlr
