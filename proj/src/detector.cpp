#include "oodlr/detector.hpp"
#include "oodlr/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

namespace oodlr {

namespace {

void check_dims(const DensityModel &in_model, const ProxyModel &proxy,
                std::size_t x_dim) {
  if (x_dim != in_model.dim())
    throw DataError("dimension mismatch: data dim " + std::to_string(x_dim) +
                    ", in-distribution model dim " +
                    std::to_string(in_model.dim()));
  if (auto pd = proxy.dim(); pd && *pd != x_dim)
    throw DataError("dimension mismatch: data dim " + std::to_string(x_dim) +
                    ", proxy dim " + std::to_string(*pd));
}

} // namespace

OodScore ood_score(const DensityModel &in_model, const ProxyModel &proxy,
                   std::span<const double> x) {
  check_dims(in_model, proxy, x.size());
  if (proxy.cancels_with(in_model))
    return {proxy.residual(x)};
  return {proxy.unnormalized_log_density(x) - in_model.log_density(x)};
}

std::vector<double> ood_scores(const DensityModel &in_model,
                               const ProxyModel &proxy, const Dataset &ds) {
  check_dims(in_model, proxy, ds.dim());
  const bool cancels = proxy.cancels_with(in_model);
  std::vector<double> out;
  out.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto x = ds.row(i);
    out.push_back(cancels ? proxy.residual(x)
                          : proxy.unnormalized_log_density(x) -
                                in_model.log_density(x));
  }
  return out;
}

double posterior(OodScore score, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw InvalidArgument("posterior: alpha must be in (0, 1), got " +
                          format_double(alpha));
  const double s = score.value;
  if (std::isnan(s))
    throw InvalidArgument("posterior: score is NaN");
  // For s <= 0, alpha * LR cannot overflow and LR = 1 gives alpha exactly.
  if (s <= 0.0) {
    const double w = alpha * std::exp(s);
    return w / (w + (1.0 - alpha));
  }
  return 1.0 / (1.0 + (1.0 - alpha) / alpha * std::exp(-s));
}

double theta_for_posterior(double p_star, double alpha) {
  if (!(p_star > 0.0 && p_star < 1.0) || !(alpha > 0.0 && alpha < 1.0))
    throw InvalidArgument("theta_for_posterior: probabilities must be in (0, 1)");
  return std::log(p_star / (1.0 - p_star)) - std::log(alpha / (1.0 - alpha));
}

DecisionRule calibrate_threshold(std::span<const double> in_val_scores,
                                 double level) {
  if (in_val_scores.empty())
    throw InvalidArgument("calibrate_threshold: empty score list");
  if (!(level > 0.0 && level < 1.0))
    throw InvalidArgument("calibrate_threshold: level must be in (0, 1)");
  std::vector<double> sorted(in_val_scores.begin(), in_val_scores.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  // The small relative slack keeps exact products such as 0.95 * 100 from
  // landing one rank low.
  auto idx = static_cast<std::size_t>(std::floor((1.0 - level) * n * (1.0 + 1e-12)));
  idx = std::min(idx, sorted.size() - 1);
  return {sorted[idx], std::nullopt};
}

Decision classify(OodScore score, const DecisionRule &rule) {
  return score.value > rule.theta ? Decision::Out : Decision::In;
}

std::string format_scores_csv(std::span<const double> scores,
                              const DecisionRule &rule) {
  std::string out = "sample_index,score,decision\n";
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out += std::to_string(i);
    out += ',';
    out += format_double(scores[i]);
    out += classify({scores[i]}, rule) == Decision::Out ? ",1\n" : ",0\n";
  }
  return out;
}

std::vector<double> parse_scores_csv(const std::string &text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line))
    throw DataError("score csv: missing header");
  if (!line.empty() && line.back() == '\r')
    line.pop_back();
  if (line != "sample_index,score,decision")
    throw DataError("score csv: header must be 'sample_index,score,decision'");
  std::vector<double> scores;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty())
      continue;
    auto c1 = line.find(',');
    auto c2 = c1 == std::string::npos ? c1 : line.find(',', c1 + 1);
    if (c2 == std::string::npos || line.find(',', c2 + 1) != std::string::npos)
      throw DataError("score csv: row " + std::to_string(row) +
                      " must have 3 cells");
    double v = 0.0;
    const char *b = line.data() + c1 + 1, *e = line.data() + c2;
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || p != e || !std::isfinite(v))
      throw DataError("score csv: row " + std::to_string(row) +
                      " score is not a finite number");
    scores.push_back(v);
    ++row;
  }
  return scores;
}

} // namespace oodlr
