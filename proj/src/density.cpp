#include "oodlr/density.hpp"
#include "oodlr/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>

namespace oodlr {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178; // 0.5 * ln(2 pi)

void check_dim(std::size_t expected, std::size_t got) {
  if (expected != got)
    throw DataError("dimension mismatch: model dim " +
                    std::to_string(expected) + ", sample dim " +
                    std::to_string(got));
}

void require_non_empty(const Dataset &ds, const char *what) {
  if (ds.empty())
    throw InvalidArgument(std::string(what) + ": empty dataset");
}

std::size_t pick(std::span<const double> masses, double u) {
  double acc = 0.0;
  for (std::size_t i = 0; i < masses.size(); ++i) {
    acc += masses[i];
    if (u < acc)
      return i;
  }
  // Rounding left u above the accumulated total; take the last non-empty.
  for (std::size_t i = masses.size(); i-- > 0;)
    if (masses[i] > 0.0)
      return i;
  return masses.size() - 1;
}

} // namespace

double log_sum_exp(std::span<const double> v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v)
    m = std::max(m, x);
  if (!std::isfinite(m))
    return m;
  double s = 0.0;
  for (double x : v)
    s += std::exp(x - m);
  return m + std::log(s);
}

// ---------------------------------------------------------------------------
// Log densities

double DiagonalGaussian::log_density(std::span<const double> x) const {
  check_dim(dim(), x.size());
  double lp = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double z = (x[j] - mean[j]) / sigma[j];
    lp += -std::log(sigma[j]) - kHalfLog2Pi - 0.5 * z * z;
  }
  return lp;
}

double GaussianMixture::log_density(std::span<const double> x) const {
  check_dim(dim(), x.size());
  std::vector<double> terms;
  terms.reserve(components.size());
  for (std::size_t c = 0; c < components.size(); ++c)
    if (weights[c] > 0.0)
      terms.push_back(std::log(weights[c]) + components[c].log_density(x));
  return log_sum_exp(terms);
}

double Histogram::Axis::log_density(double x) const {
  const double top = hi();
  if (x < lo)
    return std::log(lower_tail / width) - (lo - x) / width;
  if (x > top)
    return std::log(upper_tail / width) - (x - top) / width;
  auto bin = static_cast<std::size_t>((x - lo) / width);
  bin = std::min(bin, mass.size() - 1);
  return std::log(mass[bin] / width);
}

double Histogram::log_density(std::span<const double> x) const {
  check_dim(dim(), x.size());
  double lp = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j)
    lp += axes[j].log_density(x[j]);
  return lp;
}

void MarkovChain::check_symbols(std::span<const double> x) const {
  check_dim(length, x.size());
  for (std::size_t t = 0; t < x.size(); ++t) {
    const double v = x[t];
    if (!(v >= 0.0) || v > static_cast<double>(alphabet - 1) ||
        v != std::floor(v))
      throw DataError("symbol " + format_double(v) + " at position " +
                      std::to_string(t) + " is outside alphabet [0, " +
                      std::to_string(alphabet - 1) + "]");
  }
}

double MarkovChain::log_density(std::span<const double> x) const {
  check_symbols(x);
  double lp = 0.0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    const std::size_t j = std::min(t, order);
    std::size_t ctx = 0;
    for (std::size_t s = t - j; s < t; ++s)
      ctx = ctx * alphabet + static_cast<std::size_t>(x[s]);
    lp += std::log(tables[j][ctx * alphabet + static_cast<std::size_t>(x[t])]);
  }
  return lp;
}

// ---------------------------------------------------------------------------
// DensityModel

DensityModel::DensityModel(Params params, FitMeta meta)
    : params_(std::move(params)), meta_(std::move(meta)) {
  std::visit(
      [](const auto &p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, DiagonalGaussian>) {
          if (p.mean.empty() || p.mean.size() != p.sigma.size())
            throw InvalidArgument("diagonal gaussian: bad shape");
          for (double s : p.sigma)
            if (!(s > 0.0))
              throw InvalidArgument("diagonal gaussian: sigma must be > 0");
        } else if constexpr (std::is_same_v<T, GaussianMixture>) {
          if (p.components.empty() ||
              p.components.size() != p.weights.size())
            throw InvalidArgument("mixture: weights/components mismatch");
          double total = 0.0;
          for (double w : p.weights) {
            if (!(w >= 0.0))
              throw InvalidArgument("mixture: negative weight");
            total += w;
          }
          if (std::abs(total - 1.0) > 1e-12)
            throw InvalidArgument("mixture: weights must sum to 1");
          for (const auto &c : p.components)
            if (c.dim() != p.components.front().dim() || c.dim() == 0 ||
                c.sigma.size() != c.dim())
              throw InvalidArgument("mixture: component shapes differ");
        } else if constexpr (std::is_same_v<T, Histogram>) {
          if (p.axes.empty())
            throw InvalidArgument("histogram: no axes");
          for (const auto &a : p.axes)
            if (a.mass.empty() || !(a.width > 0.0))
              throw InvalidArgument("histogram: bad axis");
        } else {
          if (p.alphabet < 2 || p.length == 0 || p.tables.size() != p.order + 1)
            throw InvalidArgument("markov chain: bad shape");
        }
      },
      params_);
}

std::size_t DensityModel::dim() const {
  return std::visit([](const auto &p) { return p.dim(); }, params_);
}

std::string DensityModel::kind() const {
  switch (params_.index()) {
  case 0:
    return "diag_gaussian";
  case 1:
    return "gmm";
  case 2:
    return "histogram";
  default:
    return "markov";
  }
}

double DensityModel::log_density(std::span<const double> x) const {
  return std::visit([&](const auto &p) { return p.log_density(x); }, params_);
}

namespace {

void draw_gaussian(const DiagonalGaussian &g, Rng &rng, std::vector<double> &out) {
  for (std::size_t j = 0; j < g.dim(); ++j)
    out.push_back(g.mean[j] + g.sigma[j] * rng.normal());
}

} // namespace

Dataset DensityModel::sample(std::size_t n, Seed seed) const {
  Rng rng(seed);
  const std::size_t d = dim();
  std::vector<double> values;
  values.reserve(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    std::visit(
        [&](const auto &p) {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, DiagonalGaussian>) {
            draw_gaussian(p, rng, values);
          } else if constexpr (std::is_same_v<T, GaussianMixture>) {
            const auto c = pick(p.weights, rng.uniform());
            draw_gaussian(p.components[c], rng, values);
          } else if constexpr (std::is_same_v<T, Histogram>) {
            for (const auto &a : p.axes) {
              std::vector<double> cats;
              cats.reserve(a.mass.size() + 2);
              cats.push_back(a.lower_tail);
              cats.insert(cats.end(), a.mass.begin(), a.mass.end());
              cats.push_back(a.upper_tail);
              const auto c = pick(cats, rng.uniform());
              if (c == 0)
                values.push_back(a.lo - a.width * rng.exponential());
              else if (c == cats.size() - 1)
                values.push_back(a.hi() + a.width * rng.exponential());
              else
                values.push_back(a.lo + a.width * (static_cast<double>(c - 1) +
                                                   rng.uniform()));
            }
          } else {
            const std::size_t base = values.size();
            const std::size_t A = p.alphabet;
            for (std::size_t t = 0; t < p.length; ++t) {
              const std::size_t j = std::min(t, p.order);
              std::size_t ctx = 0;
              for (std::size_t s = t - j; s < t; ++s)
                ctx = ctx * A + static_cast<std::size_t>(values[base + s]);
              std::span<const double> row(p.tables[j].data() + ctx * A, A);
              values.push_back(static_cast<double>(pick(row, rng.uniform())));
            }
          }
        },
        params_);
  }
  return Dataset(d, std::move(values));
}

double log_density(const DensityModel &model, std::span<const double> x) {
  return model.log_density(x);
}

Dataset sample(const DensityModel &model, std::size_t n, Seed seed) {
  return model.sample(n, seed);
}

// ---------------------------------------------------------------------------
// Fitting

DensityModel fit_diag_gaussian(const Dataset &ds, double sigma_floor) {
  require_non_empty(ds, "fit_diag_gaussian");
  if (!(sigma_floor > 0.0))
    throw InvalidArgument("fit_diag_gaussian: sigma_floor must be positive");
  const std::size_t n = ds.size(), d = ds.dim();
  DiagonalGaussian g{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
  for (std::size_t i = 0; i < n; ++i) {
    auto r = ds.row(i);
    for (std::size_t j = 0; j < d; ++j)
      g.mean[j] += r[j];
  }
  for (double &m : g.mean)
    m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto r = ds.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      const double e = r[j] - g.mean[j];
      g.sigma[j] += e * e;
    }
  }
  for (double &s : g.sigma)
    s = std::max(std::sqrt(s / static_cast<double>(n)), sigma_floor);
  return DensityModel(std::move(g));
}

DensityModel fit_gmm(const Dataset &ds, const GmmOptions &opts, Seed seed) {
  require_non_empty(ds, "fit_gmm");
  const std::size_t n = ds.size(), d = ds.dim(), k = opts.k;
  if (k == 0)
    throw InvalidArgument("fit_gmm: k must be at least 1");
  if (k > n)
    throw InvalidArgument("fit_gmm: k=" + std::to_string(k) +
                          " exceeds sample count " + std::to_string(n));
  if (!(opts.sigma_floor > 0.0))
    throw InvalidArgument("fit_gmm: sigma_floor must be positive");

  // Initial means: k distinct sample indices. Sigma: global per-dim sd.
  Rng rng(seed);
  std::vector<std::size_t> chosen;
  std::set<std::size_t> used;
  while (chosen.size() < k) {
    auto idx = static_cast<std::size_t>(rng.below(n));
    if (used.insert(idx).second)
      chosen.push_back(idx);
  }
  const auto global = *fit_diag_gaussian(ds, opts.sigma_floor).get<DiagonalGaussian>();
  GaussianMixture mix;
  mix.weights.assign(k, 1.0 / static_cast<double>(k));
  for (auto idx : chosen) {
    auto r = ds.row(idx);
    mix.components.push_back({std::vector<double>(r.begin(), r.end()), global.sigma});
  }

  std::vector<double> resp(n * k);
  std::vector<double> terms(k);
  auto e_step = [&]() {
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      auto x = ds.row(i);
      for (std::size_t c = 0; c < k; ++c)
        terms[c] = mix.weights[c] > 0.0
                       ? std::log(mix.weights[c]) + mix.components[c].log_density(x)
                       : -std::numeric_limits<double>::infinity();
      const double lse = log_sum_exp(terms);
      ll += lse;
      for (std::size_t c = 0; c < k; ++c)
        resp[i * k + c] = std::exp(terms[c] - lse);
    }
    return ll / static_cast<double>(n);
  };

  auto m_step = [&]() {
    for (std::size_t c = 0; c < k; ++c) {
      double nk = 0.0;
      std::vector<double> mean(d, 0.0), var(d, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const double r = resp[i * k + c];
        nk += r;
        auto x = ds.row(i);
        for (std::size_t j = 0; j < d; ++j)
          mean[j] += r * x[j];
      }
      // A component that lost all responsibility keeps its parameters.
      if (!(nk > 1e-300)) {
        mix.weights[c] = 0.0;
        continue;
      }
      for (double &m : mean)
        m /= nk;
      for (std::size_t i = 0; i < n; ++i) {
        const double r = resp[i * k + c];
        auto x = ds.row(i);
        for (std::size_t j = 0; j < d; ++j) {
          const double e = x[j] - mean[j];
          var[j] += r * e * e;
        }
      }
      auto &comp = mix.components[c];
      comp.mean = std::move(mean);
      for (std::size_t j = 0; j < d; ++j)
        comp.sigma[j] = std::max(std::sqrt(var[j] / nk), opts.sigma_floor);
      mix.weights[c] = nk / static_cast<double>(n);
    }
    const double total =
        std::accumulate(mix.weights.begin(), mix.weights.end(), 0.0);
    for (double &w : mix.weights)
      w /= total;
  };

  FitMeta meta{seed.value, 0, opts.tol, {}};
  double ll_prev = e_step();
  meta.trace.push_back(ll_prev);
  for (std::size_t it = 0; it < opts.max_iters; ++it) {
    m_step();
    const double ll = e_step();
    meta.trace.push_back(ll);
    ++meta.iters;
    if (ll - ll_prev < opts.tol)
      break;
    ll_prev = ll;
  }
  // Drop components that died; the remaining weights are all positive.
  GaussianMixture out;
  for (std::size_t c = 0; c < k; ++c)
    if (mix.weights[c] > 0.0) {
      out.weights.push_back(mix.weights[c]);
      out.components.push_back(std::move(mix.components[c]));
    }
  const double total = std::accumulate(out.weights.begin(), out.weights.end(), 0.0);
  for (double &w : out.weights)
    w /= total;
  return DensityModel(std::move(out), std::move(meta));
}

DensityModel fit_histogram(const Dataset &ds, std::size_t bins_per_dim,
                           double smoothing) {
  require_non_empty(ds, "fit_histogram");
  if (bins_per_dim == 0)
    throw InvalidArgument("fit_histogram: bins_per_dim must be positive");
  if (!(smoothing > 0.0))
    throw InvalidArgument("fit_histogram: smoothing must be positive");
  const std::size_t n = ds.size(), d = ds.dim();
  Histogram h;
  for (std::size_t j = 0; j < d; ++j) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i = 0; i < n; ++i) {
      lo = std::min(lo, ds.row(i)[j]);
      hi = std::max(hi, ds.row(i)[j]);
    }
    if (!(hi - lo > 1e-9)) {
      const double c = 0.5 * (lo + hi);
      lo = c - 0.5e-6 * static_cast<double>(bins_per_dim);
      hi = c + 0.5e-6 * static_cast<double>(bins_per_dim);
    }
    Histogram::Axis a;
    a.lo = lo;
    a.width = (hi - lo) / static_cast<double>(bins_per_dim);
    std::vector<double> counts(bins_per_dim, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      auto b = static_cast<std::size_t>((ds.row(i)[j] - lo) / a.width);
      counts[std::min(b, bins_per_dim - 1)] += 1.0;
    }
    const double total =
        static_cast<double>(n) + smoothing * static_cast<double>(bins_per_dim + 2);
    a.mass.resize(bins_per_dim);
    for (std::size_t b = 0; b < bins_per_dim; ++b)
      a.mass[b] = (counts[b] + smoothing) / total;
    a.lower_tail = smoothing / total;
    a.upper_tail = smoothing / total;
    h.axes.push_back(std::move(a));
  }
  FitMeta meta;
  meta.iters = 1;
  return DensityModel(std::move(h), meta);
}

DensityModel fit_markov(const Dataset &ds, std::size_t order,
                        std::size_t alphabet, double smoothing) {
  require_non_empty(ds, "fit_markov");
  if (alphabet < 2)
    throw InvalidArgument("fit_markov: alphabet must be at least 2");
  if (!(smoothing > 0.0))
    throw InvalidArgument("fit_markov: smoothing must be positive");
  double cells = 1.0;
  for (std::size_t j = 0; j <= order; ++j)
    cells *= static_cast<double>(alphabet);
  if (cells > static_cast<double>(1u << 24))
    throw InvalidArgument("fit_markov: alphabet^(order+1) exceeds 2^24 cells");

  MarkovChain mc;
  mc.order = order;
  mc.alphabet = alphabet;
  mc.length = ds.dim();
  mc.tables.resize(order + 1);
  std::size_t contexts = 1;
  for (std::size_t j = 0; j <= order; ++j) {
    mc.tables[j].assign(contexts * alphabet, 0.0);
    contexts *= alphabet;
  }
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto x = ds.row(i);
    mc.check_symbols(x);
    for (std::size_t j = 0; j <= order; ++j) {
      for (std::size_t t = j; t < x.size(); ++t) {
        std::size_t ctx = 0;
        for (std::size_t s = t - j; s < t; ++s)
          ctx = ctx * alphabet + static_cast<std::size_t>(x[s]);
        mc.tables[j][ctx * alphabet + static_cast<std::size_t>(x[t])] += 1.0;
      }
    }
  }
  for (auto &table : mc.tables) {
    for (std::size_t row = 0; row < table.size(); row += alphabet) {
      double total = 0.0;
      for (std::size_t a = 0; a < alphabet; ++a)
        total += table[row + a] + smoothing;
      for (std::size_t a = 0; a < alphabet; ++a)
        table[row + a] = (table[row + a] + smoothing) / total;
    }
  }
  FitMeta meta;
  meta.iters = 1;
  return DensityModel(std::move(mc), meta);
}

DensityModel fit_model(const ModelSpec &spec, const Dataset &ds, Seed seed) {
  if (spec.kind == "diag_gaussian")
    return fit_diag_gaussian(ds, spec.sigma_floor);
  if (spec.kind == "gmm")
    return fit_gmm(ds, {spec.k, spec.max_iters, spec.tol, spec.sigma_floor},
                   seed);
  if (spec.kind == "histogram")
    return fit_histogram(ds, spec.bins, spec.smoothing);
  if (spec.kind == "markov")
    return fit_markov(ds, spec.order, spec.alphabet, spec.smoothing);
  throw InvalidArgument("unknown density backend '" + spec.kind + "'");
}

// ---------------------------------------------------------------------------
// Softmax classifier

SoftmaxClassifier::SoftmaxClassifier(std::size_t classes, std::size_t dim,
                                     std::vector<double> weights,
                                     std::vector<double> bias)
    : classes_(classes), dim_(dim), weights_(std::move(weights)),
      bias_(std::move(bias)) {
  if (classes < 2 || dim == 0 || weights_.size() != classes * dim ||
      bias_.size() != classes)
    throw InvalidArgument("softmax classifier: bad parameter shapes");
}

namespace {

void softmax_logits(std::size_t classes, std::size_t dim,
                    std::span<const double> w, std::span<const double> b,
                    std::span<const double> x, std::vector<double> &out) {
  out.resize(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    double z = b[c];
    for (std::size_t j = 0; j < dim; ++j)
      z += w[c * dim + j] * x[j];
    out[c] = z;
  }
}

void normalize_softmax(std::vector<double> &z) {
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double &v : z) {
    v = std::exp(v - m);
    s += v;
  }
  for (double &v : z)
    v /= s;
}

} // namespace

std::vector<double> SoftmaxClassifier::logits(std::span<const double> x) const {
  check_dim(dim_, x.size());
  std::vector<double> z;
  softmax_logits(classes_, dim_, weights_, bias_, x, z);
  return z;
}

std::vector<double>
SoftmaxClassifier::predict_proba(std::span<const double> x) const {
  auto z = logits(x);
  normalize_softmax(z);
  return z;
}

double entropy(std::span<const double> proba) {
  double h = 0.0;
  for (double p : proba)
    if (p > 0.0)
      h -= p * std::log(p);
  return std::max(h, 0.0);
}

double SoftmaxClassifier::entropy(std::span<const double> x) const {
  return oodlr::entropy(predict_proba(x));
}

std::vector<double> predict_proba(const SoftmaxClassifier &c,
                                  std::span<const double> x) {
  return c.predict_proba(x);
}

double entropy(const SoftmaxClassifier &c, std::span<const double> x) {
  return c.entropy(x);
}

double softmax_loss_gradient(std::size_t classes,
                             std::span<const double> weights,
                             std::span<const double> bias, const Dataset &ds,
                             std::vector<double> &grad_w,
                             std::vector<double> &grad_b) {
  const std::size_t d = ds.dim(), n = ds.size();
  if (!ds.labeled())
    throw InvalidArgument("softmax: dataset must be labeled");
  grad_w.assign(classes * d, 0.0);
  grad_b.assign(classes, 0.0);
  std::vector<double> z;
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    auto x = ds.row(i);
    const std::size_t y = ds.label(i);
    softmax_logits(classes, d, weights, bias, x, z);
    const double lse = log_sum_exp(z);
    loss += lse - z[y];
    for (std::size_t c = 0; c < classes; ++c) {
      const double g = std::exp(z[c] - lse) - (c == y ? 1.0 : 0.0);
      grad_b[c] += g;
      for (std::size_t j = 0; j < d; ++j)
        grad_w[c * d + j] += g * x[j];
    }
  }
  const double inv = 1.0 / static_cast<double>(n);
  for (double &g : grad_w)
    g *= inv;
  for (double &g : grad_b)
    g *= inv;
  return loss * inv;
}

namespace {

/// Gradient descent with step halving on a loss increase. params is
/// updated in place; returns the per-epoch loss trace (initial loss first).
template <class LossGrad>
std::vector<double> descend(std::vector<double> &params, std::size_t epochs,
                            double step, LossGrad &&loss_grad) {
  std::vector<double> grad, cand_grad;
  double loss = loss_grad(params, grad);
  std::vector<double> trace{loss};
  std::vector<double> cand(params.size());
  for (std::size_t e = 0; e < epochs; ++e) {
    double cand_loss = 0.0;
    int halvings = 0;
    while (true) {
      for (std::size_t i = 0; i < params.size(); ++i)
        cand[i] = params[i] - step * grad[i];
      cand_loss = loss_grad(cand, cand_grad);
      if (cand_loss <= loss || halvings >= 60)
        break;
      step *= 0.5;
      ++halvings;
    }
    if (cand_loss <= loss) {
      params.swap(cand);
      grad.swap(cand_grad);
      loss = cand_loss;
    }
    trace.push_back(loss);
  }
  return trace;
}

} // namespace

SoftmaxClassifier fit_softmax(const Dataset &ds, const TrainOptions &opts) {
  require_non_empty(ds, "fit_softmax");
  if (!ds.labeled())
    throw InvalidArgument("fit_softmax: dataset must be labeled");
  if (!(opts.step > 0.0))
    throw InvalidArgument("fit_softmax: step must be positive");
  std::set<std::uint32_t> present(ds.labels()->begin(), ds.labels()->end());
  if (present.size() < 2)
    throw InvalidArgument("fit_softmax: need at least two classes, got " +
                          std::to_string(present.size()));
  const std::size_t classes = ds.num_classes(), d = ds.dim();
  // Layout: weights (classes x d) followed by bias (classes).
  std::vector<double> params(classes * d + classes, 0.0);
  Rng rng(opts.seed);
  for (std::size_t i = 0; i < classes * d; ++i)
    params[i] = 0.01 * rng.normal();
  std::vector<double> gw, gb;
  auto trace = descend(params, opts.epochs, opts.step,
                       [&](const std::vector<double> &p, std::vector<double> &g) {
                         std::span<const double> all(p);
                         const double loss = softmax_loss_gradient(
                             classes, all.first(classes * d),
                             all.subspan(classes * d), ds, gw, gb);
                         g = gw;
                         g.insert(g.end(), gb.begin(), gb.end());
                         return loss;
                       });
  SoftmaxClassifier c(classes, d,
                      std::vector<double>(params.begin(), params.begin() + classes * d),
                      std::vector<double>(params.begin() + classes * d, params.end()));
  c.options = opts;
  c.loss_trace = std::move(trace);
  return c;
}

// ---------------------------------------------------------------------------
// Domain classifier

double DomainClassifier::logit(std::span<const double> x) const {
  check_dim(dim(), x.size());
  double z = bias;
  for (std::size_t j = 0; j < x.size(); ++j)
    z += weight[j] * x[j];
  return z;
}

double logit(const DomainClassifier &c, std::span<const double> x) {
  return c.logit(x);
}

namespace {

/// log(1 + exp(z)) without overflow.
double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double sigmoid(double z) {
  if (z >= 0.0)
    return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

} // namespace

DomainClassifier fit_domain_classifier(const Dataset &in_ds,
                                       const Dataset &out_ds,
                                       const TrainOptions &opts) {
  require_non_empty(in_ds, "fit_domain_classifier (in)");
  require_non_empty(out_ds, "fit_domain_classifier (out)");
  if (in_ds.dim() != out_ds.dim())
    throw DataError("fit_domain_classifier: dimension mismatch, in dim " +
                    std::to_string(in_ds.dim()) + ", out dim " +
                    std::to_string(out_ds.dim()));
  if (!(opts.step > 0.0))
    throw InvalidArgument("fit_domain_classifier: step must be positive");
  const std::size_t d = in_ds.dim();
  const double total = static_cast<double>(in_ds.size() + out_ds.size());

  std::vector<double> params(d + 1, 0.0);
  Rng rng(opts.seed);
  for (std::size_t j = 0; j < d; ++j)
    params[j] = 0.01 * rng.normal();

  auto loss_grad = [&](const std::vector<double> &p, std::vector<double> &g) {
    g.assign(d + 1, 0.0);
    double loss = 0.0;
    auto accumulate = [&](const Dataset &ds, double target) {
      for (std::size_t i = 0; i < ds.size(); ++i) {
        auto x = ds.row(i);
        double z = p[d];
        for (std::size_t j = 0; j < d; ++j)
          z += p[j] * x[j];
        loss += target > 0.5 ? softplus(-z) : softplus(z);
        const double r = sigmoid(z) - target;
        for (std::size_t j = 0; j < d; ++j)
          g[j] += r * x[j];
        g[d] += r;
      }
    };
    accumulate(in_ds, 0.0);
    accumulate(out_ds, 1.0);
    for (double &v : g)
      v /= total;
    return loss / total;
  };

  DomainClassifier c;
  c.loss_trace = descend(params, opts.epochs, opts.step, loss_grad);
  c.weight.assign(params.begin(), params.begin() + static_cast<std::ptrdiff_t>(d));
  c.bias = params[d];
  c.prior_log_ratio = std::log(static_cast<double>(out_ds.size()) /
                               static_cast<double>(in_ds.size()));
  c.options = opts;
  return c;
}

} // namespace oodlr
