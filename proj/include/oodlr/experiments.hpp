#pragma once

#include "oodlr/core.hpp"
#include "oodlr/density.hpp"
#include "oodlr/proxy.hpp"
#include "oodlr/serialize.hpp"

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace oodlr {

/// E[log N(X; 0, model_sigma^2)] for X ~ N(0, data_sigma^2), per dimension.
double analytic_expected_log_likelihood(double model_sigma, double data_sigma);

// ---------------------------------------------------------------------------
// Likelihood inversion on N(0,1) vs N(0, eps^2)

struct FalsehoodReport {
  double epsilon = 0.0;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  double fitted_mean = 0.0;
  double fitted_sigma = 0.0;
  double mean_log_p_in = 0.0;
  double mean_log_p_ood = 0.0;
  double se_in = 0.0;
  double se_ood = 0.0;
  /// Closed form under the fitted model, with the data's offset from the
  /// fitted mean folded into the data variance.
  double analytic_in = 0.0;
  double analytic_ood = 0.0;
  /// Closed form under the true N(0,1) model.
  double analytic_true_in = 0.0;
  double analytic_true_ood = 0.0;
  double naive_auroc = 0.0;
  double true_lr_auroc = 0.0;
};

FalsehoodReport run_gaussian_falsehood(double epsilon, std::size_t n, Seed seed);
Json to_json(const FalsehoodReport &r);

struct AnnulusReport {
  std::size_t dim = 0;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  double radius_lo = 0.0;
  double radius_hi = 0.0;
  double annulus_fraction = 0.0;
  double max_sample_log_density = 0.0;
  double origin_log_density = 0.0;
  bool origin_exceeds_samples = false;
};

AnnulusReport run_soap_bubble(std::size_t dim, std::size_t n, Seed seed);
Json to_json(const AnnulusReport &r);

struct SweepCell {
  double model_sigma = 0.0;
  double data_sigma = 0.0;
  double empirical = 0.0;
  double analytic = 0.0;
  double standard_error = 0.0;
};

/// Empirical mean log-likelihood of a fixed N(0, model_sigma^2) on n draws
/// of N(0, data_sigma^2), for every pair in the grid.
std::vector<SweepCell> run_expectation_sweep(const std::vector<double> &model_sigmas,
                                             const std::vector<double> &data_sigmas,
                                             std::size_t n, Seed seed);
Json to_json(const std::vector<SweepCell> &cells);

/// AUROC of the analytic log-LR and of each alternative statistic on the
/// falsehood test data (same seed derivation as run_gaussian_falsehood).
struct OptimalityReport {
  double log_lr_auroc = 0.0;
  std::vector<std::pair<std::string, double>> candidates;
};

OptimalityReport run_np_optimality(double epsilon, std::size_t n, Seed seed);
Json to_json(const OptimalityReport &r);

/// Domain classifier on 1-D N(0,1) (in) vs N(mean_out,1) (out).
struct ClassifierLrReport {
  std::size_t n = 0;
  std::uint64_t seed = 0;
  double mean_out = 1.0;
  double weight = 0.0;
  double bias = 0.0;
  double prior_log_ratio = 0.0;
  double auroc_classifier = 0.0;
  double auroc_analytic = 0.0;
};

ClassifierLrReport run_classifier_lr(std::size_t n_in, std::size_t n_out,
                                     const TrainOptions &opts, double mean_out = 1.0);
Json to_json(const ClassifierLrReport &r);

/// Outlier-exposure fine-tuning of a Gaussian fitted on N(0,1), with
/// auxiliary data from N(0, eps^2).
struct OutlierExposureReport {
  double epsilon = 0.0;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  double margin = 0.0;
  std::vector<double> loss_trace;
  std::size_t halvings = 0;
  double heldout_margin_before = 0.0;
  double heldout_margin_after = 0.0;
  double sigma_before = 0.0;
  double sigma_after = 0.0;
};

OutlierExposureReport run_outlier_exposure(double epsilon, std::size_t n,
                                           const FineTuneConfig &cfg);
Json to_json(const OutlierExposureReport &r);

// ---------------------------------------------------------------------------
// Synthetic task generators

struct SemanticBackgroundSpec {
  std::size_t semantic_dims = 2;
  std::size_t background_dims = 50;
  double in_semantic_mean = 0.0;
  double in_semantic_sigma = 1.0;
  double ood_semantic_mean = 0.0;
  double ood_semantic_sigma = 2.0;
  /// "uniform" on [-scale*sqrt(3), scale*sqrt(3)] or "gaussian" N(0, scale^2).
  std::string background = "uniform";
  double background_scale = 1.0;

  void validate() const;
};

/// Semantic block followed by background block; the background block is
/// drawn identically for both outputs.
std::pair<Dataset, Dataset> gen_semantic_background(const SemanticBackgroundSpec &spec,
                                                    std::size_t n, Seed seed);

/// Symbol sequences where each symbol is coarse * fine_levels + fine. The
/// coarse level keeps its previous value with probability stay (when
/// correlated) and is otherwise uniform; fine levels are i.i.d. with mass
/// fine_top_mass on level 0 and the rest spread evenly.
struct StickySequenceSpec {
  std::size_t length = 40;
  std::size_t coarse_levels = 8;
  std::size_t fine_levels = 16;
  double stay = 0.11;
  double fine_top_mass = 0.9;

  std::size_t alphabet() const { return coarse_levels * fine_levels; }
  void validate() const;
};

Dataset gen_sticky_sequences(const StickySequenceSpec &spec, std::size_t n,
                             bool correlated, Seed seed);

/// Labeled 1-D or multi-D clusters: class c centred at centres[c].
Dataset gen_labeled_clusters(const std::vector<double> &centres, std::size_t dim,
                             double sigma, std::size_t n_per_class, Seed seed);

// ---------------------------------------------------------------------------
// Proxy benchmark

struct BenchmarkCell {
  std::string task;
  std::string ood_set;
  std::string proxy;
  double auroc = 0.0;
  double fpr_at_tpr95 = 0.0;
};

struct BenchmarkTable {
  std::vector<BenchmarkCell> cells;
  Json metadata;

  const BenchmarkCell &at(const std::string &task, const std::string &ood_set,
                          const std::string &proxy) const;
};

/// Names of the built-in tasks: gaussian, complexity, correlation,
/// semantic_background, label.
std::vector<std::string> benchmark_task_names();

/// Default configuration: every built-in task with its default proxies.
Json default_benchmark_config(std::uint64_t seed = 0);

/// Runs the benchmark described by config. Unknown task, OOD-set or proxy
/// names are rejected with InvalidArgument. The resolved configuration is
/// returned in metadata.
BenchmarkTable run_proxy_benchmark(const Json &config);
Json to_json(const BenchmarkTable &t);
std::string format_benchmark_csv(const BenchmarkTable &t);

} // namespace oodlr
