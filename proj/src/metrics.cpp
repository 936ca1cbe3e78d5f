#include "oodlr/metrics.hpp"
#include "oodlr/error.hpp"

#include <algorithm>
#include <cstdint>
#include <functional>

namespace oodlr {

namespace {

void require_non_empty(std::span<const double> a, std::span<const double> b,
                       const char *what) {
  if (a.empty() || b.empty())
    throw InvalidArgument(std::string(what) + ": score lists must be non-empty");
}

} // namespace

double auroc(std::span<const double> ood_scores,
             std::span<const double> in_scores) {
  require_non_empty(ood_scores, in_scores, "auroc");
  std::vector<double> in_sorted(in_scores.begin(), in_scores.end());
  std::sort(in_sorted.begin(), in_sorted.end());
  // Twice the pairwise sum, kept in integers so the result is exact.
  std::uint64_t twice = 0;
  for (double s : ood_scores) {
    auto lo = std::lower_bound(in_sorted.begin(), in_sorted.end(), s);
    auto hi = std::upper_bound(lo, in_sorted.end(), s);
    twice += 2 * static_cast<std::uint64_t>(lo - in_sorted.begin()) +
             static_cast<std::uint64_t>(hi - lo);
  }
  const double denom = 2.0 * static_cast<double>(ood_scores.size()) *
                       static_cast<double>(in_scores.size());
  return static_cast<double>(twice) / denom;
}

std::vector<RocPoint> roc_points(std::span<const double> ood_scores,
                                 std::span<const double> in_scores) {
  require_non_empty(ood_scores, in_scores, "roc_points");
  std::vector<double> pos(ood_scores.begin(), ood_scores.end());
  std::vector<double> neg(in_scores.begin(), in_scores.end());
  std::sort(pos.begin(), pos.end(), std::greater<>());
  std::sort(neg.begin(), neg.end(), std::greater<>());
  const auto np = static_cast<double>(pos.size());
  const auto nn = static_cast<double>(neg.size());

  std::vector<RocPoint> roc{{0.0, 0.0}};
  std::size_t ip = 0, in = 0;
  while (ip < pos.size() || in < neg.size()) {
    double t = -std::numeric_limits<double>::infinity();
    if (ip < pos.size())
      t = pos[ip];
    if (in < neg.size())
      t = std::max(t, neg[in]);
    while (ip < pos.size() && pos[ip] >= t)
      ++ip;
    while (in < neg.size() && neg[in] >= t)
      ++in;
    roc.push_back({static_cast<double>(in) / nn, static_cast<double>(ip) / np});
  }
  return roc;
}

double trapezoid_area(std::span<const RocPoint> roc) {
  double area = 0.0;
  for (std::size_t i = 1; i < roc.size(); ++i)
    area += (roc[i].fpr - roc[i - 1].fpr) * (roc[i].tpr + roc[i - 1].tpr) * 0.5;
  return area;
}

double fpr_at_tpr(std::span<const double> ood_scores,
                  std::span<const double> in_scores, double tpr_level) {
  if (!(tpr_level >= 0.0 && tpr_level <= 1.0))
    throw InvalidArgument("fpr_at_tpr: level must be in [0, 1]");
  double best = 1.0;
  for (const auto &p : roc_points(ood_scores, in_scores))
    if (p.tpr >= tpr_level)
      best = std::min(best, p.fpr);
  return best;
}

ErrorRates error_rates(std::span<const double> ood_scores,
                       std::span<const double> in_scores,
                       const DecisionRule &rule) {
  require_non_empty(ood_scores, in_scores, "error_rates");
  std::size_t false_out = 0, false_in = 0;
  for (double s : in_scores)
    if (classify({s}, rule) == Decision::Out)
      ++false_out;
  for (double s : ood_scores)
    if (classify({s}, rule) == Decision::In)
      ++false_in;
  return {static_cast<double>(false_out) / static_cast<double>(in_scores.size()),
          static_cast<double>(false_in) / static_cast<double>(ood_scores.size())};
}

EvalReport evaluate(std::span<const double> ood_scores,
                    std::span<const double> in_scores, double level) {
  EvalReport r;
  r.auroc = auroc(ood_scores, in_scores);
  r.roc = roc_points(ood_scores, in_scores);
  r.fpr_at_tpr95 = fpr_at_tpr(ood_scores, in_scores, 0.95);
  const auto rule = calibrate_threshold(in_scores, level);
  const auto er = error_rates(ood_scores, in_scores, rule);
  r.type1 = er.type1;
  r.type2 = er.type2;
  r.theta = rule.theta;
  r.level = level;
  r.n_in = in_scores.size();
  r.n_out = ood_scores.size();
  r.convention =
      "score = log p_out_proxy(x) - log p_in(x), higher is more OOD; OOD is "
      "the positive class; AUROC ties count 1/2; fpr_at_tpr95 is the minimal "
      "FPR with TPR >= 0.95; decision is out iff score > theta, theta = "
      "nearest-rank upper (1 - level) quantile of in-distribution scores";
  return r;
}

std::string format_roc_csv(std::span<const RocPoint> roc) {
  std::string out = "fpr,tpr\n";
  for (const auto &p : roc)
    out += format_double(p.fpr) + ',' + format_double(p.tpr) + '\n';
  return out;
}

} // namespace oodlr
