#pragma once

#include "oodlr/core.hpp"
#include "oodlr/density.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace oodlr {

enum class ProxyKind {
  Constant,
  Auxiliary,
  Background,
  Complexity,
  Local,
  LabelBased,
  ClassifierLR,
};

std::string to_string(ProxyKind kind);
ProxyKind proxy_kind_from_string(const std::string &name);

/// Maps [lo, hi] monotonically onto the integers 0 .. 2^bits - 1.
struct Quantizer {
  int bits = 8;
  double lo = 0.0;
  double hi = 255.0;

  void validate() const;
  std::uint32_t level(double x) const;
  /// One byte per value for bits <= 8, otherwise two bytes little-endian.
  std::vector<std::uint8_t> encode(std::span<const double> x) const;

  /// bits over the dataset-wide [min, max].
  static Quantizer fit(const Dataset &ds, int bits = 8);
  friend bool operator==(const Quantizer &, const Quantizer &) = default;
};

struct CompressorInfo {
  std::string name;
  std::string version;
  int level = 0;
  friend bool operator==(const CompressorInfo &,
                         const CompressorInfo &) = default;
};

/// The DEFLATE coder used for input complexity.
CompressorInfo compressor_info();

/// Bit length of bytes after lossless compression (8 x compressed size).
std::size_t compress_length(std::span<const std::uint8_t> bytes);

struct ConstantPayload {
  double level = 0.0;
  friend bool operator==(const ConstantPayload &,
                         const ConstantPayload &) = default;
};

/// A density fitted on some dataset; backs the auxiliary, background and
/// local proxies.
struct DensityPayload {
  DensityModel model;
  ModelSpec spec;
  double mu = 0.0;
  std::uint64_t seed = 0;
  friend bool operator==(const DensityPayload &,
                         const DensityPayload &) = default;
};

struct ComplexityPayload {
  Quantizer quantizer;
  CompressorInfo compressor;
  friend bool operator==(const ComplexityPayload &,
                         const ComplexityPayload &) = default;
};

struct LabelPayload {
  SoftmaxClassifier classifier;
  DensityModel in_model;
  friend bool operator==(const LabelPayload &, const LabelPayload &) = default;
};

struct ClassifierLrPayload {
  DomainClassifier classifier;
  DensityModel in_model;
  friend bool operator==(const ClassifierLrPayload &,
                         const ClassifierLrPayload &) = default;
};

/// Stand-in for the unknown out-distribution. Scoring functions are pure.
class ProxyModel {
public:
  using Payload = std::variant<ConstantPayload, DensityPayload,
                               ComplexityPayload, LabelPayload,
                               ClassifierLrPayload>;

  ProxyModel(ProxyKind kind, Payload payload);

  ProxyKind kind() const { return kind_; }
  const Payload &payload() const { return payload_; }
  bool normalized() const;
  /// Input dimension, if the proxy constrains it.
  std::optional<std::size_t> dim() const;

  double unnormalized_log_density(std::span<const double> x) const;

  /// For proxies defined as (term + log p_in), the term alone when in_model
  /// is the embedded p_in. The subtraction then cancels exactly.
  bool cancels_with(const DensityModel &in_model) const;
  double residual(std::span<const double> x) const;

  template <class T> const T *get() const { return std::get_if<T>(&payload_); }

  friend bool operator==(const ProxyModel &, const ProxyModel &) = default;

private:
  ProxyKind kind_;
  Payload payload_;
};

ProxyModel build_constant_proxy(double level);
ProxyModel build_auxiliary_proxy(const Dataset &aux, const ModelSpec &spec,
                                 Seed seed);
ProxyModel build_background_proxy(const Dataset &in_ds, double mu,
                                  const ModelSpec &spec, Seed seed);
ProxyModel build_complexity_proxy(const Quantizer &q);
ProxyModel build_local_proxy(const DensityModel &local_model);
ProxyModel build_label_proxy(const SoftmaxClassifier &c,
                             const DensityModel &in_model);
ProxyModel build_classifier_lr_proxy(const DomainClassifier &dc,
                                     const DensityModel &in_model);

struct FineTuneConfig {
  /// Hinge margin; defaults to the data dimension.
  std::optional<double> margin;
  std::size_t epochs = 20;
  double step = 0.01;
  std::size_t batch_size = 256;
  Seed seed{};
  double sigma_floor = kDefaultSigmaFloor;
};

struct FineTuneResult {
  DensityModel model;
  double margin = 0.0;
  /// Mean hinge loss over all training pairs; initial value first, then
  /// one entry per epoch.
  std::vector<double> loss_trace;
  double final_step = 0.0;
  std::size_t halvings = 0;
};

/// Mean hinge loss max(0, margin - log p(x_in) + log p(x_out)) over pairs.
double hinge_loss(const DensityModel &model, const Dataset &in_ds,
                  const Dataset &aux_ds, double margin);

/// Gradient descent on the hinge loss over seeded (x_in, x_out) pairs. An
/// epoch that raises the full training loss is rolled back and retried at
/// half the step. Only Gaussian-family models are accepted.
FineTuneResult finetune_outlier_exposure(const DensityModel &model,
                                         const Dataset &in_ds,
                                         const Dataset &aux_ds,
                                         const FineTuneConfig &cfg);

} // namespace oodlr
