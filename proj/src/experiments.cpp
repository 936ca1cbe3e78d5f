#include "oodlr/experiments.hpp"
#include "oodlr/detector.hpp"
#include "oodlr/error.hpp"
#include "oodlr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <set>

namespace oodlr {

double analytic_expected_log_likelihood(double model_sigma, double data_sigma) {
  if (!(model_sigma > 0.0))
    throw InvalidArgument("model_sigma must be positive");
  if (!(data_sigma >= 0.0))
    throw InvalidArgument("data_sigma must be non-negative");
  return -0.5 * std::log(2.0 * std::numbers::pi * model_sigma * model_sigma) -
         data_sigma * data_sigma / (2.0 * model_sigma * model_sigma);
}

namespace {

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_se(std::span<const double> v) {
  const auto n = static_cast<double>(v.size());
  double m = 0.0;
  for (double x : v)
    m += x;
  m /= n;
  double ss = 0.0;
  for (double x : v)
    ss += (x - m) * (x - m);
  const double sd = v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  return {m, sd / std::sqrt(n)};
}

std::vector<double> log_densities(const DensityModel &m, const Dataset &ds) {
  std::vector<double> out;
  out.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i)
    out.push_back(m.log_density(ds.row(i)));
  return out;
}

// Seed streams shared by the falsehood and optimality experiments.
struct FalsehoodData {
  Dataset train, in_test, ood_test, aux;
};

FalsehoodData falsehood_data(double epsilon, std::size_t n, Seed seed) {
  const auto std_normal = GaussianSpec::isotropic(1, 0.0, 1.0);
  const auto narrow = GaussianSpec::isotropic(1, 0.0, epsilon);
  return {gen_gaussian(std_normal, n, derive_seed(seed, 1)),
          gen_gaussian(std_normal, n, derive_seed(seed, 2)),
          gen_gaussian(narrow, n, derive_seed(seed, 3)),
          gen_gaussian(narrow, n, derive_seed(seed, 4))};
}

} // namespace

FalsehoodReport run_gaussian_falsehood(double epsilon, std::size_t n, Seed seed) {
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw InvalidArgument("falsehood: epsilon must be in (0, 1)");
  if (n < 2)
    throw InvalidArgument("falsehood: n must be at least 2");
  const auto data = falsehood_data(epsilon, n, seed);
  const auto model = fit_diag_gaussian(data.train);
  const auto &g = *model.get<DiagonalGaussian>();

  FalsehoodReport r;
  r.epsilon = epsilon;
  r.n = n;
  r.seed = seed.value;
  r.fitted_mean = g.mean[0];
  r.fitted_sigma = g.sigma[0];

  const auto lp_in = log_densities(model, data.in_test);
  const auto lp_ood = log_densities(model, data.ood_test);
  const auto in_stats = mean_se(lp_in);
  const auto ood_stats = mean_se(lp_ood);
  r.mean_log_p_in = in_stats.mean;
  r.mean_log_p_ood = ood_stats.mean;
  r.se_in = in_stats.se;
  r.se_ood = ood_stats.se;

  const double mu2 = r.fitted_mean * r.fitted_mean;
  r.analytic_in = analytic_expected_log_likelihood(r.fitted_sigma, std::sqrt(1.0 + mu2));
  r.analytic_ood = analytic_expected_log_likelihood(
      r.fitted_sigma, std::sqrt(epsilon * epsilon + mu2));
  r.analytic_true_in = analytic_expected_log_likelihood(1.0, 1.0);
  r.analytic_true_ood = analytic_expected_log_likelihood(1.0, epsilon);

  const auto naive = build_constant_proxy(0.0);
  r.naive_auroc = auroc(ood_scores(model, naive, data.ood_test),
                        ood_scores(model, naive, data.in_test));
  const auto aux = build_auxiliary_proxy(data.aux, ModelSpec{}, derive_seed(seed, 5));
  r.true_lr_auroc = auroc(ood_scores(model, aux, data.ood_test),
                          ood_scores(model, aux, data.in_test));
  return r;
}

Json to_json(const FalsehoodReport &r) {
  return Json{
      {"experiment", "gaussian_falsehood"},
      {"config", {{"epsilon", r.epsilon}, {"n", r.n}, {"seed", r.seed},
                  {"model", "diag_gaussian fitted on N(0,1) draws"},
                  {"naive_proxy", "constant level 0"},
                  {"true_lr_proxy", "auxiliary diag_gaussian fitted on N(0,eps^2) draws"}}},
      {"fitted_mean", r.fitted_mean},
      {"fitted_sigma", r.fitted_sigma},
      {"mean_log_p_in", r.mean_log_p_in},
      {"mean_log_p_ood", r.mean_log_p_ood},
      {"se_in", r.se_in},
      {"se_ood", r.se_ood},
      {"analytic_in", r.analytic_in},
      {"analytic_ood", r.analytic_ood},
      {"analytic_true_model_in", r.analytic_true_in},
      {"analytic_true_model_ood", r.analytic_true_ood},
      {"naive_auroc", r.naive_auroc},
      {"true_lr_auroc", r.true_lr_auroc},
      {"convention", "log densities in nats; AUROC with OOD positive, score = "
                     "log p_out_proxy - log p_in"}};
}

AnnulusReport run_soap_bubble(std::size_t dim, std::size_t n, Seed seed) {
  if (dim < 2)
    throw InvalidArgument("soap bubble: dim must be at least 2");
  if (n == 0)
    throw InvalidArgument("soap bubble: n must be positive");
  const auto ds = gen_gaussian(GaussianSpec::isotropic(dim, 0.0, 1.0), n, seed);
  const DensityModel model(DiagonalGaussian{std::vector<double>(dim, 0.0),
                                            std::vector<double>(dim, 1.0)});
  AnnulusReport r;
  r.dim = dim;
  r.n = n;
  r.seed = seed.value;
  const double root = std::sqrt(static_cast<double>(dim));
  r.radius_lo = std::max(0.0, root - 3.0);
  r.radius_hi = root + 3.0;
  std::size_t inside = 0;
  r.max_sample_log_density = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    auto x = ds.row(i);
    double sq = 0.0;
    for (double v : x)
      sq += v * v;
    const double norm = std::sqrt(sq);
    if (norm >= r.radius_lo && norm <= r.radius_hi)
      ++inside;
    r.max_sample_log_density = std::max(r.max_sample_log_density, model.log_density(x));
  }
  r.annulus_fraction = static_cast<double>(inside) / static_cast<double>(n);
  r.origin_log_density = model.log_density(std::vector<double>(dim, 0.0));
  r.origin_exceeds_samples = r.origin_log_density > r.max_sample_log_density;
  return r;
}

Json to_json(const AnnulusReport &r) {
  return Json{{"experiment", "soap_bubble"},
              {"config", {{"dim", r.dim}, {"n", r.n}, {"seed", r.seed},
                          {"annulus_half_width", 3.0}}},
              {"radius_lo", r.radius_lo},
              {"radius_hi", r.radius_hi},
              {"annulus_fraction", r.annulus_fraction},
              {"max_sample_log_density", r.max_sample_log_density},
              {"origin_log_density", r.origin_log_density},
              {"origin_exceeds_samples", r.origin_exceeds_samples}};
}

std::vector<SweepCell> run_expectation_sweep(const std::vector<double> &model_sigmas,
                                             const std::vector<double> &data_sigmas,
                                             std::size_t n, Seed seed) {
  std::vector<SweepCell> cells;
  for (std::size_t a = 0; a < model_sigmas.size(); ++a) {
    const DensityModel model(DiagonalGaussian{{0.0}, {model_sigmas[a]}});
    for (std::size_t b = 0; b < data_sigmas.size(); ++b) {
      if (!(data_sigmas[b] > 0.0))
        throw InvalidArgument("sweep: data sigma must be positive");
      const auto ds = gen_gaussian(GaussianSpec::isotropic(1, 0.0, data_sigmas[b]),
                                   n, derive_seed(seed, a, b));
      const auto stats = mean_se(log_densities(model, ds));
      cells.push_back({model_sigmas[a], data_sigmas[b], stats.mean,
                       analytic_expected_log_likelihood(model_sigmas[a], data_sigmas[b]),
                       stats.se});
    }
  }
  return cells;
}

Json to_json(const std::vector<SweepCell> &cells) {
  Json arr = Json::array();
  for (const auto &c : cells)
    arr.push_back({{"model_sigma", c.model_sigma},
                   {"data_sigma", c.data_sigma},
                   {"empirical", c.empirical},
                   {"analytic", c.analytic},
                   {"standard_error", c.standard_error}});
  return Json{{"experiment", "expectation_sweep"}, {"cells", std::move(arr)}};
}

OptimalityReport run_np_optimality(double epsilon, std::size_t n, Seed seed) {
  const auto data = falsehood_data(epsilon, n, seed);
  const DensityModel p_in(DiagonalGaussian{{0.0}, {1.0}});
  const DensityModel p_out(DiagonalGaussian{{0.0}, {epsilon}});

  using Stat = double (*)(double, const DensityModel &);
  const std::vector<std::pair<std::string, Stat>> stats = {
      {"x", [](double x, const DensityModel &) { return x; }},
      {"-x", [](double x, const DensityModel &) { return -x; }},
      {"|x|", [](double x, const DensityModel &) { return std::abs(x); }},
      {"-|x|", [](double x, const DensityModel &) { return -std::abs(x); }},
      {"x^2", [](double x, const DensityModel &) { return x * x; }},
      {"log p_in", [](double x, const DensityModel &m) {
         return m.log_density(std::span<const double>(&x, 1));
       }},
      {"-log p_in", [](double x, const DensityModel &m) {
         return -m.log_density(std::span<const double>(&x, 1));
       }},
  };

  auto column = [](const Dataset &ds) {
    return std::vector<double>(ds.values().begin(), ds.values().end());
  };
  const auto xin = column(data.in_test), xood = column(data.ood_test);

  auto lr = [&](double x) {
    std::span<const double> s(&x, 1);
    return p_out.log_density(s) - p_in.log_density(s);
  };
  std::vector<double> s_in, s_ood;
  for (double x : xin)
    s_in.push_back(lr(x));
  for (double x : xood)
    s_ood.push_back(lr(x));

  OptimalityReport r;
  r.log_lr_auroc = auroc(s_ood, s_in);
  for (const auto &[name, f] : stats) {
    std::vector<double> a, b;
    for (double x : xood)
      a.push_back(f(x, p_in));
    for (double x : xin)
      b.push_back(f(x, p_in));
    r.candidates.emplace_back(name, auroc(a, b));
  }
  Rng rng(derive_seed(seed, 6));
  std::vector<double> a(xood.size()), b(xin.size());
  for (double &v : a)
    v = rng.uniform();
  for (double &v : b)
    v = rng.uniform();
  r.candidates.emplace_back("random", auroc(a, b));
  return r;
}

Json to_json(const OptimalityReport &r) {
  Json c = Json::object();
  for (const auto &[name, v] : r.candidates)
    c[name] = v;
  return Json{{"experiment", "np_optimality"},
              {"log_lr_auroc", r.log_lr_auroc},
              {"candidates", std::move(c)}};
}

ClassifierLrReport run_classifier_lr(std::size_t n_in, std::size_t n_out,
                                     const TrainOptions &opts, double mean_out) {
  const auto in_train = gen_gaussian(GaussianSpec::isotropic(1, 0.0, 1.0), n_in,
                                     derive_seed(opts.seed, 1));
  const auto out_train = gen_gaussian(GaussianSpec::isotropic(1, mean_out, 1.0),
                                      n_out, derive_seed(opts.seed, 2));
  const auto in_test = gen_gaussian(GaussianSpec::isotropic(1, 0.0, 1.0), n_in,
                                    derive_seed(opts.seed, 3));
  const auto out_test = gen_gaussian(GaussianSpec::isotropic(1, mean_out, 1.0),
                                     n_in, derive_seed(opts.seed, 4));
  const auto dc = fit_domain_classifier(in_train, out_train, opts);

  // Analytic log LR for unit-variance Gaussians: mean_out * x - mean_out^2 / 2.
  auto analytic = [&](const Dataset &ds) {
    std::vector<double> s;
    for (double x : ds.values())
      s.push_back(mean_out * x - 0.5 * mean_out * mean_out);
    return s;
  };
  auto learned = [&](const Dataset &ds) {
    std::vector<double> s;
    for (std::size_t i = 0; i < ds.size(); ++i)
      s.push_back(dc.log_ratio(ds.row(i)));
    return s;
  };

  ClassifierLrReport r;
  r.n = n_in;
  r.seed = opts.seed.value;
  r.mean_out = mean_out;
  r.weight = dc.weight[0];
  r.bias = dc.bias;
  r.prior_log_ratio = dc.prior_log_ratio;
  r.auroc_classifier = auroc(learned(out_test), learned(in_test));
  r.auroc_analytic = auroc(analytic(out_test), analytic(in_test));
  return r;
}

Json to_json(const ClassifierLrReport &r) {
  return Json{{"experiment", "classifier_lr"},
              {"config", {{"n", r.n}, {"seed", r.seed}, {"mean_out", r.mean_out}}},
              {"weight", r.weight},
              {"bias", r.bias},
              {"prior_log_ratio", r.prior_log_ratio},
              {"auroc_classifier", r.auroc_classifier},
              {"auroc_analytic", r.auroc_analytic}};
}

OutlierExposureReport run_outlier_exposure(double epsilon, std::size_t n,
                                           const FineTuneConfig &cfg) {
  const Seed seed = cfg.seed;
  const auto std_normal = GaussianSpec::isotropic(1, 0.0, 1.0);
  const auto narrow = GaussianSpec::isotropic(1, 0.0, epsilon);
  const auto in_train = gen_gaussian(std_normal, n, derive_seed(seed, 11));
  const auto aux_train = gen_gaussian(narrow, n, derive_seed(seed, 12));
  const auto in_held = gen_gaussian(std_normal, n, derive_seed(seed, 13));
  const auto aux_held = gen_gaussian(narrow, n, derive_seed(seed, 14));

  const auto model = fit_diag_gaussian(in_train);
  const auto res = finetune_outlier_exposure(model, in_train, aux_train, cfg);

  auto margin = [&](const DensityModel &m) {
    return mean_se(log_densities(m, in_held)).mean -
           mean_se(log_densities(m, aux_held)).mean;
  };
  OutlierExposureReport r;
  r.epsilon = epsilon;
  r.n = n;
  r.seed = seed.value;
  r.margin = res.margin;
  r.loss_trace = res.loss_trace;
  r.halvings = res.halvings;
  r.heldout_margin_before = margin(model);
  r.heldout_margin_after = margin(res.model);
  r.sigma_before = model.get<DiagonalGaussian>()->sigma[0];
  r.sigma_after = res.model.get<DiagonalGaussian>()->sigma[0];
  return r;
}

Json to_json(const OutlierExposureReport &r) {
  return Json{{"experiment", "outlier_exposure"},
              {"config", {{"epsilon", r.epsilon}, {"n", r.n}, {"seed", r.seed},
                          {"margin", r.margin}}},
              {"loss_trace", r.loss_trace},
              {"halvings", r.halvings},
              {"heldout_margin_before", r.heldout_margin_before},
              {"heldout_margin_after", r.heldout_margin_after},
              {"sigma_before", r.sigma_before},
              {"sigma_after", r.sigma_after}};
}

// ---------------------------------------------------------------------------
// Generators

void SemanticBackgroundSpec::validate() const {
  if (semantic_dims + background_dims == 0)
    throw InvalidArgument("semantic/background: need at least one dimension");
  if (!(in_semantic_sigma > 0.0) || !(ood_semantic_sigma > 0.0) ||
      !(background_scale > 0.0))
    throw InvalidArgument("semantic/background: scales must be positive");
  if (background != "uniform" && background != "gaussian")
    throw InvalidArgument("semantic/background: background must be 'uniform' "
                          "or 'gaussian'");
}

std::pair<Dataset, Dataset> gen_semantic_background(const SemanticBackgroundSpec &spec,
                                                    std::size_t n, Seed seed) {
  spec.validate();
  if (n == 0)
    throw InvalidArgument("semantic/background: n must be positive");
  const std::size_t d = spec.semantic_dims + spec.background_dims;
  const double half = spec.background_scale * std::sqrt(3.0);
  auto make = [&](double mean, double sigma, Seed sem_seed, Seed bg_seed) {
    Rng sem(sem_seed), bg(bg_seed);
    std::vector<double> v;
    v.reserve(n * d);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < spec.semantic_dims; ++j)
        v.push_back(mean + sigma * sem.normal());
      for (std::size_t j = 0; j < spec.background_dims; ++j)
        v.push_back(spec.background == "uniform"
                        ? bg.uniform(-half, half)
                        : spec.background_scale * bg.normal());
    }
    return Dataset(d, std::move(v));
  };
  return {make(spec.in_semantic_mean, spec.in_semantic_sigma, derive_seed(seed, 1),
               derive_seed(seed, 2)),
          make(spec.ood_semantic_mean, spec.ood_semantic_sigma,
               derive_seed(seed, 3), derive_seed(seed, 4))};
}

void StickySequenceSpec::validate() const {
  if (length == 0 || coarse_levels < 1 || fine_levels < 2 ||
      coarse_levels * fine_levels < 2)
    throw InvalidArgument("sticky sequences: bad shape");
  if (!(stay >= 0.0 && stay <= 1.0) ||
      !(fine_top_mass > 0.0 && fine_top_mass < 1.0))
    throw InvalidArgument("sticky sequences: probabilities out of range");
}

Dataset gen_sticky_sequences(const StickySequenceSpec &spec, std::size_t n,
                             bool correlated, Seed seed) {
  spec.validate();
  Rng rng(seed);
  std::vector<double> fine_mass(spec.fine_levels,
                                (1.0 - spec.fine_top_mass) /
                                    static_cast<double>(spec.fine_levels - 1));
  fine_mass[0] = spec.fine_top_mass;
  auto draw_fine = [&]() {
    double u = rng.uniform(), acc = 0.0;
    for (std::size_t f = 0; f < spec.fine_levels; ++f) {
      acc += fine_mass[f];
      if (u < acc)
        return f;
    }
    return spec.fine_levels - 1;
  };
  std::vector<double> v;
  v.reserve(n * spec.length);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t coarse = rng.below(spec.coarse_levels);
    for (std::size_t t = 0; t < spec.length; ++t) {
      if (t > 0) {
        const bool keep = rng.uniform() < (correlated ? spec.stay : 0.0);
        const auto fresh = static_cast<std::size_t>(rng.below(spec.coarse_levels));
        if (!keep)
          coarse = fresh;
      }
      v.push_back(static_cast<double>(coarse * spec.fine_levels + draw_fine()));
    }
  }
  return Dataset(spec.length, std::move(v));
}

Dataset gen_labeled_clusters(const std::vector<double> &centres, std::size_t dim,
                             double sigma, std::size_t n_per_class, Seed seed) {
  if (centres.empty() || dim == 0 || !(sigma > 0.0))
    throw InvalidArgument("labeled clusters: bad parameters");
  Rng rng(seed);
  Dataset ds(dim);
  std::vector<double> x(dim);
  for (std::size_t i = 0; i < n_per_class; ++i)
    for (std::size_t c = 0; c < centres.size(); ++c) {
      for (auto &v : x)
        v = centres[c] + sigma * rng.normal();
      ds.push_back(x, static_cast<std::uint32_t>(c));
    }
  return ds;
}

// ---------------------------------------------------------------------------
// Benchmark

const BenchmarkCell &BenchmarkTable::at(const std::string &task,
                                        const std::string &ood_set,
                                        const std::string &proxy) const {
  for (const auto &c : cells)
    if (c.task == task && c.ood_set == ood_set && c.proxy == proxy)
      return c;
  throw InvalidArgument("benchmark: no cell (" + task + ", " + ood_set + ", " +
                        proxy + ")");
}

namespace {

struct TaskDef {
  std::string name;
  std::uint64_t id;
  std::vector<std::string> ood_sets;
  std::vector<std::string> proxies;
  Json params;
};

std::vector<TaskDef> builtin_tasks() {
  return {
      {"gaussian", 1, {"narrow", "wide"}, {"constant", "auxiliary", "background", "true_lr"},
       Json{{"epsilon", 0.01}, {"wide_sigma", 3.0}, {"n_train", 10000},
            {"n_test", 10000}, {"n_aux", 10000}, {"background_mu", 0.5},
            {"model", to_json(ModelSpec{})}}},
      {"complexity", 2, {"constant", "noise"}, {"constant", "complexity"},
       Json{{"n_train", 10000}, {"n_test", 2000}, {"length", 64}, {"alphabet", 256},
            {"step_sigma", 3.0}, {"order", 1}, {"smoothing", 1.0}, {"bits", 8}}},
      {"correlation", 3, {"independent", "uniform"}, {"constant", "local"},
       Json{{"n_train", 20000}, {"n_test", 10000}, {"length", 40},
            {"coarse_levels", 8}, {"fine_levels", 16}, {"stay", 0.11},
            {"fine_top_mass", 0.9}, {"smoothing", 1.0}, {"full_order", 1},
            {"local_order", 0}}},
      {"semantic_background", 4, {"wide_semantic", "shifted_semantic"},
       {"constant", "background"},
       Json{{"n_train", 20000}, {"n_test", 10000}, {"semantic_dims", 2},
            {"background_dims", 50}, {"in_semantic_sigma", 1.0},
            {"wide_semantic_sigma", 2.0}, {"shifted_semantic_mean", 2.0},
            {"background", "uniform"}, {"background_scale", 1.0}, {"mu", 0.5},
            {"model", to_json(ModelSpec{})}}},
      {"label", 5, {"midpoint", "far"}, {"constant", "label", "raw_entropy"},
       Json{{"centres", {-3.0, 3.0}}, {"sigma", 1.0}, {"n_train_per_class", 5000},
            {"n_test", 10000}, {"midpoint_sigma", 0.5}, {"far_mean", 8.0},
            {"epochs", 300}, {"step", 0.5}, {"model", to_json(ModelSpec{"gmm"})}}},
  };
}

using ScoreFn = std::function<std::vector<double>(const Dataset &)>;

struct TaskRun {
  Dataset in_test;
  std::map<std::string, Dataset> ood;
  std::map<std::string, ScoreFn> scorers;
};

ScoreFn proxy_scorer(DensityModel in_model, ProxyModel proxy) {
  return [in_model = std::move(in_model), proxy = std::move(proxy)](const Dataset &ds) {
    return ood_scores(in_model, proxy, ds);
  };
}

template <class T> T param(const Json &p, const char *key) {
  try {
    return p.at(key).get<T>();
  } catch (const Json::exception &e) {
    throw InvalidArgument(std::string("benchmark: bad parameter '") + key + "': " + e.what());
  }
}

TaskRun run_gaussian(const Json &p, Seed s) {
  const double eps = param<double>(p, "epsilon");
  const auto n_test = param<std::size_t>(p, "n_test");
  const auto spec = model_spec_from_json(p.at("model"));
  const auto std_normal = GaussianSpec::isotropic(1, 0.0, 1.0);
  const auto train = gen_gaussian(std_normal, param<std::size_t>(p, "n_train"), derive_seed(s, 1));
  const auto in_model = fit_model(spec, train, derive_seed(s, 2));
  TaskRun run;
  run.in_test = gen_gaussian(std_normal, n_test, derive_seed(s, 3));
  run.ood["narrow"] = gen_gaussian(GaussianSpec::isotropic(1, 0.0, eps), n_test, derive_seed(s, 4));
  run.ood["wide"] = gen_gaussian(
      GaussianSpec::isotropic(1, 0.0, param<double>(p, "wide_sigma")), n_test, derive_seed(s, 5));
  const auto aux = gen_gaussian(GaussianSpec::isotropic(1, 0.0, eps),
                                param<std::size_t>(p, "n_aux"), derive_seed(s, 6));

  run.scorers["constant"] = proxy_scorer(in_model, build_constant_proxy(0.0));
  run.scorers["auxiliary"] =
      proxy_scorer(in_model, build_auxiliary_proxy(aux, spec, derive_seed(s, 7)));
  run.scorers["background"] = proxy_scorer(
      in_model, build_background_proxy(train, param<double>(p, "background_mu"), spec,
                                       derive_seed(s, 8)));
  // Analytic densities: the true p_out depends on which OOD set is scored,
  // so the reference scorer is chosen per column below.
  run.scorers["true_lr"] = nullptr;
  return run;
}

std::vector<double> true_lr_scores(const Json &p, const std::string &ood_set,
                                   const Dataset &ds) {
  const double out_sigma = ood_set == "narrow" ? param<double>(p, "epsilon")
                                               : param<double>(p, "wide_sigma");
  const DiagonalGaussian p_in{{0.0}, {1.0}}, p_out{{0.0}, {out_sigma}};
  std::vector<double> s;
  for (std::size_t i = 0; i < ds.size(); ++i)
    s.push_back(p_out.log_density(ds.row(i)) - p_in.log_density(ds.row(i)));
  return s;
}

TaskRun run_complexity(const Json &p, Seed s) {
  const auto length = param<std::size_t>(p, "length");
  const auto alphabet = param<std::size_t>(p, "alphabet");
  const double step = param<double>(p, "step_sigma");
  const auto n_test = param<std::size_t>(p, "n_test");
  const auto train = gen_random_walk_sequences(param<std::size_t>(p, "n_train"), length,
                                               step, alphabet, derive_seed(s, 1));
  const auto in_model = fit_markov(train, param<std::size_t>(p, "order"), alphabet,
                                   param<double>(p, "smoothing"));
  TaskRun run;
  run.in_test = gen_random_walk_sequences(n_test, length, step, alphabet, derive_seed(s, 2));
  Rng rng(derive_seed(s, 3));
  Dataset constant(length), noise(length);
  std::vector<double> row(length);
  for (std::size_t i = 0; i < n_test; ++i) {
    std::fill(row.begin(), row.end(), static_cast<double>(rng.below(alphabet)));
    constant.push_back(row);
  }
  for (std::size_t i = 0; i < n_test; ++i) {
    for (auto &v : row)
      v = static_cast<double>(rng.below(alphabet));
    noise.push_back(row);
  }
  run.ood["constant"] = std::move(constant);
  run.ood["noise"] = std::move(noise);
  const int bits = param<int>(p, "bits");
  run.scorers["constant"] = proxy_scorer(in_model, build_constant_proxy(0.0));
  run.scorers["complexity"] = proxy_scorer(
      in_model,
      build_complexity_proxy(Quantizer{bits, 0.0, static_cast<double>(alphabet - 1)}));
  return run;
}

TaskRun run_correlation(const Json &p, Seed s) {
  StickySequenceSpec spec;
  spec.length = param<std::size_t>(p, "length");
  spec.coarse_levels = param<std::size_t>(p, "coarse_levels");
  spec.fine_levels = param<std::size_t>(p, "fine_levels");
  spec.stay = param<double>(p, "stay");
  spec.fine_top_mass = param<double>(p, "fine_top_mass");
  const double smoothing = param<double>(p, "smoothing");
  const auto n_test = param<std::size_t>(p, "n_test");
  const auto train =
      gen_sticky_sequences(spec, param<std::size_t>(p, "n_train"), true, derive_seed(s, 1));
  const auto in_model =
      fit_markov(train, param<std::size_t>(p, "full_order"), spec.alphabet(), smoothing);
  const auto local =
      fit_markov(train, param<std::size_t>(p, "local_order"), spec.alphabet(), smoothing);
  TaskRun run;
  run.in_test = gen_sticky_sequences(spec, n_test, true, derive_seed(s, 2));
  run.ood["independent"] = gen_sticky_sequences(spec, n_test, false, derive_seed(s, 3));
  Rng rng(derive_seed(s, 4));
  Dataset uniform(spec.length);
  std::vector<double> row(spec.length);
  for (std::size_t i = 0; i < n_test; ++i) {
    for (auto &v : row)
      v = static_cast<double>(rng.below(spec.alphabet()));
    uniform.push_back(row);
  }
  run.ood["uniform"] = std::move(uniform);
  run.scorers["constant"] = proxy_scorer(in_model, build_constant_proxy(0.0));
  run.scorers["local"] = proxy_scorer(in_model, build_local_proxy(local));
  return run;
}

TaskRun run_semantic_background(const Json &p, Seed s) {
  SemanticBackgroundSpec spec;
  spec.semantic_dims = param<std::size_t>(p, "semantic_dims");
  spec.background_dims = param<std::size_t>(p, "background_dims");
  spec.in_semantic_sigma = param<double>(p, "in_semantic_sigma");
  spec.ood_semantic_sigma = param<double>(p, "wide_semantic_sigma");
  spec.background = param<std::string>(p, "background");
  spec.background_scale = param<double>(p, "background_scale");
  const auto n_test = param<std::size_t>(p, "n_test");
  const auto model_spec = model_spec_from_json(p.at("model"));

  const auto train =
      gen_semantic_background(spec, param<std::size_t>(p, "n_train"), derive_seed(s, 1)).first;
  const auto in_model = fit_model(model_spec, train, derive_seed(s, 2));
  auto wide = gen_semantic_background(spec, n_test, derive_seed(s, 3));
  auto shifted_spec = spec;
  shifted_spec.ood_semantic_sigma = spec.in_semantic_sigma;
  shifted_spec.ood_semantic_mean = param<double>(p, "shifted_semantic_mean");
  auto shifted = gen_semantic_background(shifted_spec, n_test, derive_seed(s, 4));

  TaskRun run;
  run.in_test = std::move(wide.first);
  run.ood["wide_semantic"] = std::move(wide.second);
  run.ood["shifted_semantic"] = std::move(shifted.second);
  run.scorers["constant"] = proxy_scorer(in_model, build_constant_proxy(0.0));
  run.scorers["background"] = proxy_scorer(
      in_model,
      build_background_proxy(train, param<double>(p, "mu"), model_spec, derive_seed(s, 5)));
  return run;
}

TaskRun run_label(const Json &p, Seed s) {
  const auto centres = param<std::vector<double>>(p, "centres");
  const double sigma = param<double>(p, "sigma");
  const auto n_test = param<std::size_t>(p, "n_test");
  const auto model_spec = model_spec_from_json(p.at("model"));
  const auto train = gen_labeled_clusters(
      centres, 1, sigma, param<std::size_t>(p, "n_train_per_class"), derive_seed(s, 1));
  const Dataset unlabeled(train.dim(),
                          std::vector<double>(train.values().begin(), train.values().end()));
  const auto in_model = fit_model(model_spec, unlabeled, derive_seed(s, 2));
  const auto clf = fit_softmax(train, {param<std::size_t>(p, "epochs"),
                                       param<double>(p, "step"), derive_seed(s, 3)});
  const auto test = gen_labeled_clusters(centres, 1, sigma,
                                         n_test / centres.size(), derive_seed(s, 4));
  TaskRun run;
  run.in_test = Dataset(1, std::vector<double>(test.values().begin(), test.values().end()));
  run.ood["midpoint"] = gen_gaussian(
      GaussianSpec::isotropic(1, 0.0, param<double>(p, "midpoint_sigma")), n_test,
      derive_seed(s, 5));
  run.ood["far"] = gen_gaussian(GaussianSpec::isotropic(1, param<double>(p, "far_mean"), 1.0),
                                n_test, derive_seed(s, 6));
  run.scorers["constant"] = proxy_scorer(in_model, build_constant_proxy(0.0));
  run.scorers["label"] = proxy_scorer(in_model, build_label_proxy(clf, in_model));
  run.scorers["raw_entropy"] = [clf](const Dataset &ds) {
    std::vector<double> h;
    for (std::size_t i = 0; i < ds.size(); ++i)
      h.push_back(clf.entropy(ds.row(i)));
    return h;
  };
  return run;
}

std::vector<std::string> string_list(const Json &j, const char *what) {
  if (!j.is_array())
    throw InvalidArgument(std::string("benchmark: '") + what + "' must be an array");
  std::vector<std::string> out;
  for (const auto &v : j) {
    if (!v.is_string())
      throw InvalidArgument(std::string("benchmark: '") + what + "' entries must be strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

} // namespace

std::vector<std::string> benchmark_task_names() {
  std::vector<std::string> names;
  for (const auto &t : builtin_tasks())
    names.push_back(t.name);
  return names;
}

Json default_benchmark_config(std::uint64_t seed) {
  Json tasks = Json::array();
  for (const auto &t : builtin_tasks())
    tasks.push_back(Json{{"name", t.name}, {"ood_sets", t.ood_sets},
                         {"proxies", t.proxies}, {"params", t.params}});
  return Json{{"seed", seed}, {"tasks", std::move(tasks)}};
}

BenchmarkTable run_proxy_benchmark(const Json &config) {
  if (!config.is_object())
    throw InvalidArgument("benchmark: config must be a JSON object");
  for (const auto &[key, _] : config.items())
    if (key != "seed" && key != "tasks")
      throw InvalidArgument("benchmark: unknown config field '" + key + "'");
  const Seed master{config.value("seed", std::uint64_t{0})};
  const auto builtins = builtin_tasks();
  Json requested = config.contains("tasks") ? config.at("tasks") : Json::array();
  if (!requested.is_array())
    throw InvalidArgument("benchmark: 'tasks' must be an array");
  if (requested.empty())
    for (const auto &t : builtins)
      requested.push_back(Json{{"name", t.name}});

  BenchmarkTable table;
  Json resolved_tasks = Json::array();
  Json task_seeds = Json::object();
  for (const auto &req : requested) {
    if (!req.is_object() || !req.contains("name") || !req.at("name").is_string())
      throw InvalidArgument("benchmark: each task needs a string 'name'");
    const auto name = req.at("name").get<std::string>();
    auto def_it = std::find_if(builtins.begin(), builtins.end(),
                               [&](const TaskDef &t) { return t.name == name; });
    if (def_it == builtins.end())
      throw InvalidArgument("benchmark: unknown task/generator '" + name + "'");
    for (const auto &[key, _] : req.items())
      if (key != "name" && key != "ood_sets" && key != "proxies" && key != "params")
        throw InvalidArgument("benchmark: unknown task field '" + key + "'");

    TaskDef task = *def_it;
    if (req.contains("params")) {
      for (const auto &[key, value] : req.at("params").items()) {
        if (!task.params.contains(key))
          throw InvalidArgument("benchmark: task '" + name + "' has no parameter '" + key + "'");
        task.params[key] = value;
      }
    }
    std::vector<std::string> ood_sets = task.ood_sets, proxies = task.proxies;
    if (req.contains("ood_sets"))
      ood_sets = string_list(req.at("ood_sets"), "ood_sets");
    if (req.contains("proxies"))
      proxies = string_list(req.at("proxies"), "proxies");
    for (const auto &o : ood_sets)
      if (std::find(task.ood_sets.begin(), task.ood_sets.end(), o) == task.ood_sets.end())
        throw InvalidArgument("benchmark: task '" + name + "' has no OOD generator '" + o + "'");
    for (const auto &pr : proxies)
      if (std::find(task.proxies.begin(), task.proxies.end(), pr) == task.proxies.end())
        throw InvalidArgument("benchmark: task '" + name + "' does not support proxy '" + pr + "'");

    const Seed task_seed = derive_seed(master, task.id);
    TaskRun run;
    if (name == "gaussian")
      run = run_gaussian(task.params, task_seed);
    else if (name == "complexity")
      run = run_complexity(task.params, task_seed);
    else if (name == "correlation")
      run = run_correlation(task.params, task_seed);
    else if (name == "semantic_background")
      run = run_semantic_background(task.params, task_seed);
    else
      run = run_label(task.params, task_seed);

    for (const auto &pr : proxies) {
      const bool analytic = pr == "true_lr";
      std::vector<double> in_scores;
      if (!analytic)
        in_scores = run.scorers.at(pr)(run.in_test);
      for (const auto &o : ood_sets) {
        const auto &ood = run.ood.at(o);
        std::vector<double> out_scores;
        if (analytic) {
          in_scores = true_lr_scores(task.params, o, run.in_test);
          out_scores = true_lr_scores(task.params, o, ood);
        } else {
          out_scores = run.scorers.at(pr)(ood);
        }
        table.cells.push_back({name, o, pr, auroc(out_scores, in_scores),
                               fpr_at_tpr(out_scores, in_scores, 0.95)});
      }
    }
    resolved_tasks.push_back(Json{{"name", name}, {"ood_sets", ood_sets},
                                  {"proxies", proxies}, {"params", task.params}});
    task_seeds[name] = task_seed.value;
  }
  table.metadata = Json{{"config", {{"seed", master.value}, {"tasks", std::move(resolved_tasks)}}},
                        {"task_seeds", std::move(task_seeds)},
                        {"compressor", {{"name", compressor_info().name},
                                        {"version", compressor_info().version},
                                        {"level", compressor_info().level}}}};
  return table;
}

Json to_json(const BenchmarkTable &t) {
  Json cells = Json::array();
  std::vector<std::string> rows, cols;
  for (const auto &c : t.cells) {
    cells.push_back({{"task", c.task}, {"ood_set", c.ood_set}, {"proxy", c.proxy},
                     {"auroc", c.auroc}, {"fpr_at_tpr95", c.fpr_at_tpr95}});
    if (std::find(rows.begin(), rows.end(), c.proxy) == rows.end())
      rows.push_back(c.proxy);
    const auto col = c.task + "/" + c.ood_set;
    if (std::find(cols.begin(), cols.end(), col) == cols.end())
      cols.push_back(col);
  }
  Json out = Json::object();
  out["experiment"] = "proxy_benchmark";
  for (const auto &[key, value] : t.metadata.items())
    out[key] = value;
  out["rows"] = rows;
  out["columns"] = cols;
  out["cells"] = std::move(cells);
  out["convention"] = "AUROC with OOD positive; score = log p_out_proxy - log p_in; "
                      "fpr_at_tpr95 = minimal FPR with TPR >= 0.95";
  return out;
}

std::string format_benchmark_csv(const BenchmarkTable &t) {
  std::string out = "task,ood_set,proxy,auroc,fpr_at_tpr95\n";
  for (const auto &c : t.cells)
    out += c.task + ',' + c.ood_set + ',' + c.proxy + ',' + format_double(c.auroc) +
           ',' + format_double(c.fpr_at_tpr95) + '\n';
  return out;
}

} // namespace oodlr
