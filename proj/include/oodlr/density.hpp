#pragma once

#include "oodlr/core.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace oodlr {

inline constexpr double kDefaultSigmaFloor = 1e-6;
inline constexpr double kDefaultSmoothing = 1.0;

struct DiagonalGaussian {
  std::vector<double> mean;
  std::vector<double> sigma;

  std::size_t dim() const { return mean.size(); }
  double log_density(std::span<const double> x) const;
  friend bool operator==(const DiagonalGaussian &,
                         const DiagonalGaussian &) = default;
};

struct GaussianMixture {
  std::vector<double> weights;
  std::vector<DiagonalGaussian> components;

  std::size_t dim() const { return components.front().dim(); }
  double log_density(std::span<const double> x) const;
  friend bool operator==(const GaussianMixture &,
                         const GaussianMixture &) = default;
};

/// Per-dimension histogram. Interior bins are equal-width over the training
/// range; below and above it sit exponential tails whose scale is one bin
/// width, so any finite point has a finite density.
struct Histogram {
  struct Axis {
    double lo = 0.0;
    double width = 1.0;
    std::vector<double> mass; // interior bins
    double lower_tail = 0.0;
    double upper_tail = 0.0;

    double hi() const { return lo + width * static_cast<double>(mass.size()); }
    double log_density(double x) const;
    friend bool operator==(const Axis &, const Axis &) = default;
  };
  std::vector<Axis> axes;

  std::size_t dim() const { return axes.size(); }
  double log_density(std::span<const double> x) const;
  friend bool operator==(const Histogram &, const Histogram &) = default;
};

/// Order-k chain over symbols 0..alphabet-1. tables[j] holds the order-j
/// conditional masses, indexed [context * alphabet + symbol]; position t of
/// a sequence uses order min(t, k).
struct MarkovChain {
  std::size_t order = 0;
  std::size_t alphabet = 2;
  std::size_t length = 1;
  std::vector<std::vector<double>> tables;

  std::size_t dim() const { return length; }
  double log_density(std::span<const double> x) const;
  /// Checks that every entry of x is an integer symbol in range.
  void check_symbols(std::span<const double> x) const;
  friend bool operator==(const MarkovChain &, const MarkovChain &) = default;
};

struct FitMeta {
  std::uint64_t seed = 0;
  std::size_t iters = 0;
  double tol = 0.0;
  std::vector<double> trace;
  friend bool operator==(const FitMeta &, const FitMeta &) = default;
};

class DensityModel {
public:
  using Params =
      std::variant<DiagonalGaussian, GaussianMixture, Histogram, MarkovChain>;

  DensityModel(Params params, FitMeta meta = {});

  const Params &params() const { return params_; }
  const FitMeta &meta() const { return meta_; }
  std::size_t dim() const;
  std::string kind() const;

  /// Natural-log density (or mass, for the chain) at x.
  double log_density(std::span<const double> x) const;
  Dataset sample(std::size_t n, Seed seed) const;

  template <class T> const T *get() const { return std::get_if<T>(&params_); }

  friend bool operator==(const DensityModel &,
                         const DensityModel &) = default;

private:
  Params params_;
  FitMeta meta_;
};

DensityModel fit_diag_gaussian(const Dataset &ds,
                               double sigma_floor = kDefaultSigmaFloor);

struct GmmOptions {
  std::size_t k = 2;
  std::size_t max_iters = 200;
  double tol = 1e-8;
  double sigma_floor = kDefaultSigmaFloor;
};

/// EM for a diagonal-covariance mixture. The mean log-likelihood after each
/// iteration is recorded in meta().trace.
DensityModel fit_gmm(const Dataset &ds, const GmmOptions &opts, Seed seed);

DensityModel fit_histogram(const Dataset &ds, std::size_t bins_per_dim,
                           double smoothing = kDefaultSmoothing);

DensityModel fit_markov(const Dataset &ds, std::size_t order,
                        std::size_t alphabet,
                        double smoothing = kDefaultSmoothing);

double log_density(const DensityModel &model, std::span<const double> x);
Dataset sample(const DensityModel &model, std::size_t n, Seed seed);

/// Backend name plus hyperparameters; what proxies and the CLI use to ask
/// for "a density fitted on this data".
struct ModelSpec {
  std::string kind = "diag_gaussian"; // diag_gaussian | gmm | histogram | markov
  double sigma_floor = kDefaultSigmaFloor;
  std::size_t k = 2;
  std::size_t max_iters = 200;
  double tol = 1e-8;
  std::size_t bins = 30;
  double smoothing = kDefaultSmoothing;
  std::size_t order = 1;
  std::size_t alphabet = 256;

  friend bool operator==(const ModelSpec &, const ModelSpec &) = default;
};

DensityModel fit_model(const ModelSpec &spec, const Dataset &ds, Seed seed);

// ---------------------------------------------------------------------------
// Classifiers

struct TrainOptions {
  std::size_t epochs = 500;
  double step = 0.5;
  Seed seed{};
  friend bool operator==(const TrainOptions &, const TrainOptions &) = default;
};

class SoftmaxClassifier {
public:
  SoftmaxClassifier(std::size_t classes, std::size_t dim,
                    std::vector<double> weights, std::vector<double> bias);

  std::size_t classes() const { return classes_; }
  std::size_t dim() const { return dim_; }
  /// Row-major classes x dim.
  const std::vector<double> &weights() const { return weights_; }
  const std::vector<double> &bias() const { return bias_; }

  std::vector<double> logits(std::span<const double> x) const;
  std::vector<double> predict_proba(std::span<const double> x) const;
  double entropy(std::span<const double> x) const;

  TrainOptions options;
  std::vector<double> loss_trace;

  friend bool operator==(const SoftmaxClassifier &,
                         const SoftmaxClassifier &) = default;

private:
  std::size_t classes_;
  std::size_t dim_;
  std::vector<double> weights_;
  std::vector<double> bias_;
};

/// Mean cross-entropy of (weights, bias) on ds, with its gradient.
double softmax_loss_gradient(std::size_t classes,
                             std::span<const double> weights,
                             std::span<const double> bias, const Dataset &ds,
                             std::vector<double> &grad_w,
                             std::vector<double> &grad_b);

/// Full-batch gradient descent on the mean cross-entropy. A step that
/// raises the loss is undone and the step size halved.
SoftmaxClassifier fit_softmax(const Dataset &ds, const TrainOptions &opts);

std::vector<double> predict_proba(const SoftmaxClassifier &c,
                                  std::span<const double> x);
double entropy(const SoftmaxClassifier &c, std::span<const double> x);
double entropy(std::span<const double> proba);

/// Logistic regression separating in-distribution (0) from out (1) data.
struct DomainClassifier {
  std::vector<double> weight;
  double bias = 0.0;
  /// log(n_out / n_in); the fitted logit estimates log LR plus this.
  double prior_log_ratio = 0.0;
  TrainOptions options;
  std::vector<double> loss_trace;

  std::size_t dim() const { return weight.size(); }
  double logit(std::span<const double> x) const;
  /// Estimate of log(p_out(x) / p_in(x)).
  double log_ratio(std::span<const double> x) const {
    return logit(x) - prior_log_ratio;
  }
  friend bool operator==(const DomainClassifier &,
                         const DomainClassifier &) = default;
};

DomainClassifier fit_domain_classifier(const Dataset &in_ds,
                                       const Dataset &out_ds,
                                       const TrainOptions &opts);

double logit(const DomainClassifier &c, std::span<const double> x);

/// log(sum(exp(v))) without overflow.
double log_sum_exp(std::span<const double> v);

} // namespace oodlr
