#include "oodlr/proxy.hpp"
#include "oodlr/error.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace oodlr {

std::string to_string(ProxyKind kind) {
  switch (kind) {
  case ProxyKind::Constant:
    return "constant";
  case ProxyKind::Auxiliary:
    return "auxiliary";
  case ProxyKind::Background:
    return "background";
  case ProxyKind::Complexity:
    return "complexity";
  case ProxyKind::Local:
    return "local";
  case ProxyKind::LabelBased:
    return "label";
  case ProxyKind::ClassifierLR:
    return "classifier_lr";
  }
  return "unknown";
}

ProxyKind proxy_kind_from_string(const std::string &name) {
  for (auto k : {ProxyKind::Constant, ProxyKind::Auxiliary,
                 ProxyKind::Background, ProxyKind::Complexity,
                 ProxyKind::Local, ProxyKind::LabelBased,
                 ProxyKind::ClassifierLR})
    if (to_string(k) == name)
      return k;
  throw InvalidArgument("unknown proxy kind '" + name + "'");
}

// ---------------------------------------------------------------------------
// Quantizer and compressor

void Quantizer::validate() const {
  if (bits < 1 || bits > 16)
    throw InvalidArgument("quantizer: bits must be in [1, 16]");
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi))
    throw InvalidArgument("quantizer: need finite lo < hi");
}

std::uint32_t Quantizer::level(double x) const {
  if (!(x >= lo && x <= hi))
    throw DataError("quantizer: value " + format_double(x) +
                    " outside range [" + format_double(lo) + ", " +
                    format_double(hi) + "]");
  const double top = std::ldexp(1.0, bits) - 1.0;
  return static_cast<std::uint32_t>(std::lround((x - lo) / (hi - lo) * top));
}

std::vector<std::uint8_t> Quantizer::encode(std::span<const double> x) const {
  validate();
  std::vector<std::uint8_t> out;
  out.reserve(x.size() * (bits <= 8 ? 1 : 2));
  for (double v : x) {
    const auto q = level(v);
    out.push_back(static_cast<std::uint8_t>(q & 0xff));
    if (bits > 8)
      out.push_back(static_cast<std::uint8_t>(q >> 8));
  }
  return out;
}

Quantizer Quantizer::fit(const Dataset &ds, int bits) {
  if (ds.empty())
    throw InvalidArgument("quantizer: empty dataset");
  auto [mn, mx] = std::minmax_element(ds.values().begin(), ds.values().end());
  Quantizer q{bits, *mn, *mx};
  if (!(q.lo < q.hi))
    q.hi = q.lo + 1.0;
  q.validate();
  return q;
}

CompressorInfo compressor_info() {
  return {"zlib", zlibVersion(), Z_BEST_COMPRESSION};
}

std::size_t compress_length(std::span<const std::uint8_t> bytes) {
  uLongf cap = compressBound(static_cast<uLong>(bytes.size()));
  std::vector<Bytef> buf(cap);
  const int rc = compress2(buf.data(), &cap, bytes.data(),
                           static_cast<uLong>(bytes.size()), Z_BEST_COMPRESSION);
  if (rc != Z_OK)
    throw std::runtime_error("zlib compress2 failed with code " +
                             std::to_string(rc));
  return static_cast<std::size_t>(cap) * 8;
}

// ---------------------------------------------------------------------------
// ProxyModel

ProxyModel::ProxyModel(ProxyKind kind, Payload payload)
    : kind_(kind), payload_(std::move(payload)) {
  bool ok = false;
  switch (kind_) {
  case ProxyKind::Constant:
    ok = std::holds_alternative<ConstantPayload>(payload_);
    break;
  case ProxyKind::Auxiliary:
  case ProxyKind::Background:
  case ProxyKind::Local:
    ok = std::holds_alternative<DensityPayload>(payload_);
    break;
  case ProxyKind::Complexity:
    ok = std::holds_alternative<ComplexityPayload>(payload_);
    break;
  case ProxyKind::LabelBased:
    ok = std::holds_alternative<LabelPayload>(payload_);
    break;
  case ProxyKind::ClassifierLR:
    ok = std::holds_alternative<ClassifierLrPayload>(payload_);
    break;
  }
  if (!ok)
    throw InvalidArgument("proxy kind " + to_string(kind_) +
                          " does not match its payload");
}

bool ProxyModel::normalized() const {
  return std::holds_alternative<DensityPayload>(payload_);
}

std::optional<std::size_t> ProxyModel::dim() const {
  if (auto p = get<DensityPayload>())
    return p->model.dim();
  if (auto p = get<LabelPayload>())
    return p->in_model.dim();
  if (auto p = get<ClassifierLrPayload>())
    return p->in_model.dim();
  return std::nullopt;
}

double ProxyModel::unnormalized_log_density(std::span<const double> x) const {
  return std::visit(
      [&](const auto &p) -> double {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, ConstantPayload>) {
          return p.level;
        } else if constexpr (std::is_same_v<T, DensityPayload>) {
          return p.model.log_density(x);
        } else if constexpr (std::is_same_v<T, ComplexityPayload>) {
          const auto bits = compress_length(p.quantizer.encode(x));
          return -static_cast<double>(bits) * std::numbers::ln2;
        } else if constexpr (std::is_same_v<T, LabelPayload>) {
          return p.classifier.entropy(x) + p.in_model.log_density(x);
        } else {
          return p.classifier.log_ratio(x) + p.in_model.log_density(x);
        }
      },
      payload_);
}

bool ProxyModel::cancels_with(const DensityModel &in_model) const {
  if (auto p = get<LabelPayload>())
    return p->in_model == in_model;
  if (auto p = get<ClassifierLrPayload>())
    return p->in_model == in_model;
  return false;
}

double ProxyModel::residual(std::span<const double> x) const {
  if (auto p = get<LabelPayload>())
    return p->classifier.entropy(x);
  if (auto p = get<ClassifierLrPayload>())
    return p->classifier.log_ratio(x);
  throw InvalidArgument("proxy kind " + to_string(kind_) +
                        " has no residual term");
}

// ---------------------------------------------------------------------------
// Builders

ProxyModel build_constant_proxy(double level) {
  if (!std::isfinite(level))
    throw InvalidArgument("constant proxy: level must be finite");
  return ProxyModel(ProxyKind::Constant, ConstantPayload{level});
}

ProxyModel build_auxiliary_proxy(const Dataset &aux, const ModelSpec &spec,
                                 Seed seed) {
  if (aux.empty())
    throw InvalidArgument("auxiliary proxy: empty auxiliary dataset");
  return ProxyModel(ProxyKind::Auxiliary,
                    DensityPayload{fit_model(spec, aux, seed), spec, 0.0,
                                   seed.value});
}

ProxyModel build_background_proxy(const Dataset &in_ds, double mu,
                                  const ModelSpec &spec, Seed seed) {
  if (!(mu > 0.0 && mu < 1.0))
    throw InvalidArgument("background proxy: mu must be in (0, 1)");
  auto perturbed = perturb_dataset(in_ds, mu, derive_seed(seed, 1));
  auto model = fit_model(spec, perturbed, derive_seed(seed, 2));
  return ProxyModel(ProxyKind::Background,
                    DensityPayload{std::move(model), spec, mu, seed.value});
}

ProxyModel build_complexity_proxy(const Quantizer &q) {
  q.validate();
  return ProxyModel(ProxyKind::Complexity,
                    ComplexityPayload{q, compressor_info()});
}

ProxyModel build_local_proxy(const DensityModel &local_model) {
  return ProxyModel(ProxyKind::Local, DensityPayload{local_model, {}, 0.0, 0});
}

ProxyModel build_label_proxy(const SoftmaxClassifier &c,
                             const DensityModel &in_model) {
  if (c.dim() != in_model.dim())
    throw DataError("label proxy: classifier dim " + std::to_string(c.dim()) +
                    " differs from model dim " +
                    std::to_string(in_model.dim()));
  return ProxyModel(ProxyKind::LabelBased, LabelPayload{c, in_model});
}

ProxyModel build_classifier_lr_proxy(const DomainClassifier &dc,
                                     const DensityModel &in_model) {
  if (dc.dim() != in_model.dim())
    throw DataError("classifier-LR proxy: classifier dim " +
                    std::to_string(dc.dim()) + " differs from model dim " +
                    std::to_string(in_model.dim()));
  return ProxyModel(ProxyKind::ClassifierLR, ClassifierLrPayload{dc, in_model});
}

// ---------------------------------------------------------------------------
// Outlier-exposure fine-tuning

double hinge_loss(const DensityModel &model, const Dataset &in_ds,
                  const Dataset &aux_ds, double margin) {
  const std::size_t m = std::min(in_ds.size(), aux_ds.size());
  if (m == 0)
    throw InvalidArgument("hinge_loss: empty dataset");
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    total += std::max(0.0, margin - model.log_density(in_ds.row(i)) +
                               model.log_density(aux_ds.row(i)));
  return total / static_cast<double>(m);
}

namespace {

/// Parameters laid out as [mixture logits..., per component: mean, log sigma].
/// A plain Gaussian is a one-component mixture without logits.
struct GaussianFamily {
  bool mixture = false;
  std::vector<double> weights;
  std::vector<DiagonalGaussian> comps;

  explicit GaussianFamily(const DensityModel &m) {
    if (auto g = m.get<DiagonalGaussian>()) {
      comps = {*g};
      weights = {1.0};
    } else if (auto mix = m.get<GaussianMixture>()) {
      mixture = true;
      comps = mix->components;
      weights = mix->weights;
    } else {
      throw InvalidArgument("outlier exposure: backend '" + m.kind() +
                            "' is not differentiable (need diag_gaussian or gmm)");
    }
  }

  DensityModel to_model(const FitMeta &meta) const {
    if (!mixture)
      return DensityModel(comps.front(), meta);
    return DensityModel(GaussianMixture{weights, comps}, meta);
  }

  std::size_t dim() const { return comps.front().dim(); }

  /// Adds sign * d log p(x) / d params into grad.
  void add_gradient(std::span<const double> x, double sign,
                    std::vector<double> &grad) const {
    const std::size_t k = comps.size(), d = dim();
    std::vector<double> terms(k);
    for (std::size_t c = 0; c < k; ++c)
      terms[c] = weights[c] > 0.0
                     ? std::log(weights[c]) + comps[c].log_density(x)
                     : -std::numeric_limits<double>::infinity();
    const double lse = log_sum_exp(terms);
    std::size_t off = mixture ? k : 0;
    for (std::size_t c = 0; c < k; ++c) {
      const double r = std::exp(terms[c] - lse);
      if (mixture)
        grad[c] += sign * (r - weights[c]);
      const auto &g = comps[c];
      for (std::size_t j = 0; j < d; ++j) {
        const double z = (x[j] - g.mean[j]) / g.sigma[j];
        grad[off + j] += sign * r * z / g.sigma[j];
        grad[off + d + j] += sign * r * (z * z - 1.0);
      }
      off += 2 * d;
    }
  }

  std::size_t num_params() const {
    return (mixture ? comps.size() : 0) + comps.size() * 2 * dim();
  }

  void apply(const std::vector<double> &grad, double step, double floor) {
    const std::size_t k = comps.size(), d = dim();
    std::size_t off = 0;
    if (mixture) {
      double total = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        weights[c] *= std::exp(-step * grad[c]);
        total += weights[c];
      }
      for (double &w : weights)
        w /= total;
      off = k;
    }
    for (auto &g : comps) {
      for (std::size_t j = 0; j < d; ++j) {
        g.mean[j] -= step * grad[off + j];
        g.sigma[j] = std::max(g.sigma[j] * std::exp(-step * grad[off + d + j]),
                              floor);
      }
      off += 2 * d;
    }
  }
};

Dataset take_rows(const Dataset &ds, const std::vector<std::size_t> &idx) {
  Dataset out(ds.dim());
  for (auto i : idx)
    out.push_back(ds.row(i));
  return out;
}

} // namespace

FineTuneResult finetune_outlier_exposure(const DensityModel &model,
                                         const Dataset &in_ds,
                                         const Dataset &aux_ds,
                                         const FineTuneConfig &cfg) {
  GaussianFamily fam(model);
  if (in_ds.empty() || aux_ds.empty())
    throw InvalidArgument("outlier exposure: empty dataset");
  if (in_ds.dim() != aux_ds.dim() || in_ds.dim() != model.dim())
    throw DataError("outlier exposure: dimension mismatch (model " +
                    std::to_string(model.dim()) + ", in " +
                    std::to_string(in_ds.dim()) + ", aux " +
                    std::to_string(aux_ds.dim()) + ")");
  if (cfg.epochs == 0)
    throw InvalidArgument("outlier exposure: epochs must be at least 1");
  if (!(cfg.step > 0.0))
    throw InvalidArgument("outlier exposure: step must be positive");
  if (cfg.batch_size == 0)
    throw InvalidArgument("outlier exposure: batch_size must be positive");

  const double margin =
      cfg.margin.value_or(static_cast<double>(in_ds.dim()));
  const std::size_t m = std::min(in_ds.size(), aux_ds.size());

  // Fixed seeded pairing and order.
  auto shuffled = [&](std::size_t n, std::uint64_t stream) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(derive_seed(cfg.seed, stream));
    for (std::size_t i = n; i > 1; --i)
      std::swap(idx[i - 1], idx[rng.below(i)]);
    idx.resize(m);
    return idx;
  };
  const Dataset xin = take_rows(in_ds, shuffled(in_ds.size(), 1));
  const Dataset xout = take_rows(aux_ds, shuffled(aux_ds.size(), 2));

  FitMeta meta = model.meta();
  meta.seed = cfg.seed.value;
  auto current = model;
  double loss = hinge_loss(current, xin, xout, margin);
  FineTuneResult res{model, margin, {loss}, cfg.step, 0};
  double step = cfg.step;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (int attempt = 0;; ++attempt) {
      GaussianFamily trial = fam;
      for (std::size_t start = 0; start < m; start += cfg.batch_size) {
        const std::size_t end = std::min(m, start + cfg.batch_size);
        std::vector<double> grad(trial.num_params(), 0.0);
        bool active = false;
        const auto batch_model = trial.to_model(meta);
        for (std::size_t i = start; i < end; ++i) {
          const double h = margin - batch_model.log_density(xin.row(i)) +
                           batch_model.log_density(xout.row(i));
          if (h > 0.0) {
            active = true;
            trial.add_gradient(xin.row(i), -1.0, grad);
            trial.add_gradient(xout.row(i), 1.0, grad);
          }
        }
        if (!active)
          continue;
        for (double &g : grad)
          g /= static_cast<double>(end - start);
        trial.apply(grad, step, cfg.sigma_floor);
      }
      auto trial_model = trial.to_model(meta);
      const double trial_loss = hinge_loss(trial_model, xin, xout, margin);
      if (trial_loss <= loss) {
        fam = std::move(trial);
        current = std::move(trial_model);
        loss = trial_loss;
        break;
      }
      if (attempt >= 40)
        break; // keep the previous parameters for this epoch
      step *= 0.5;
      ++res.halvings;
    }
    res.loss_trace.push_back(loss);
  }
  meta.iters = cfg.epochs;
  meta.trace = res.loss_trace;
  res.model = fam.to_model(meta);
  res.final_step = step;
  return res;
}

} // namespace oodlr
