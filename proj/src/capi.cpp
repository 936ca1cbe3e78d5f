#include "oodlr.h"

#include "oodlr/core.hpp"
#include "oodlr/density.hpp"
#include "oodlr/detector.hpp"
#include "oodlr/error.hpp"
#include "oodlr/experiments.hpp"
#include "oodlr/metrics.hpp"
#include "oodlr/proxy.hpp"
#include "oodlr/serialize.hpp"

#include <cstdlib>
#include <cstring>
#include <new>
#include <set>
#include <string>

using namespace oodlr;

struct ood_dataset {
  Dataset ds;
};
struct ood_model {
  DensityModel model;
};
struct ood_proxy {
  ProxyModel proxy;
};

namespace {

thread_local std::string g_last_error;

template <class F> ood_status guard(F &&f) {
  g_last_error.clear();
  try {
    f();
    return OOD_OK;
  } catch (const InvalidArgument &e) {
    g_last_error = e.what();
    return OOD_ERR_INVALID_ARGUMENT;
  } catch (const DataError &e) {
    g_last_error = e.what();
    return OOD_ERR_DATA;
  } catch (const IoError &e) {
    g_last_error = e.what();
    return OOD_ERR_IO;
  } catch (const Json::exception &e) {
    g_last_error = std::string("json: ") + e.what();
    return OOD_ERR_INVALID_ARGUMENT;
  } catch (const std::bad_alloc &) {
    g_last_error = "out of memory";
    return OOD_ERR_INTERNAL;
  } catch (const std::exception &e) {
    g_last_error = e.what();
    return OOD_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return OOD_ERR_INTERNAL;
  }
}

void need(const void *p, const char *what) {
  if (p == nullptr)
    throw InvalidArgument(std::string(what) + " must not be null");
}

char *copy_string(const std::string &s) {
  char *out = static_cast<char *>(std::malloc(s.size() + 1));
  if (out == nullptr)
    throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void put_string(char **out, const std::string &s) {
  if (out != nullptr)
    *out = copy_string(s);
}

Json parse_optional(const char *text) {
  if (text == nullptr || *text == '\0')
    return Json::object();
  Json j = parse_json(text);
  if (!j.is_object())
    throw InvalidArgument("expected a JSON object");
  return j;
}

// Reads fields with defaults, records the resolved values and rejects keys
// that were never read.
class Params {
public:
  Params(Json j, std::string ctx) : in_(std::move(j)), ctx_(std::move(ctx)) {}

  template <class T> T get(const std::string &key, T fallback) {
    used_.insert(key);
    T v = fallback;
    if (in_.contains(key)) {
      try {
        v = in_.at(key).get<T>();
      } catch (const Json::exception &) {
        throw InvalidArgument(ctx_ + ": bad value for '" + key + "'");
      }
    }
    resolved_[key] = v;
    return v;
  }

  Json get_json(const std::string &key, const Json &fallback) {
    used_.insert(key);
    Json v = in_.contains(key) ? in_.at(key) : fallback;
    resolved_[key] = v;
    return v;
  }

  bool has(const std::string &key) const { return in_.contains(key); }

  Json finish() const {
    for (const auto &[key, _] : in_.items())
      if (!used_.count(key))
        throw InvalidArgument(ctx_ + ": unknown field '" + key + "'");
    return resolved_;
  }

private:
  Json in_;
  std::string ctx_;
  Json resolved_ = Json::object();
  std::set<std::string> used_;
};

ModelSpec spec_from(const Json &j) { return model_spec_from_json(j); }

TrainOptions train_options(Params &p) {
  TrainOptions o;
  o.epochs = p.get<std::size_t>("epochs", o.epochs);
  o.step = p.get<double>("step", o.step);
  o.seed = Seed{p.get<std::uint64_t>("seed", 0)};
  return o;
}

FineTuneConfig finetune_config(Params &p) {
  FineTuneConfig c;
  if (p.has("margin"))
    c.margin = p.get<double>("margin", 0.0);
  c.epochs = p.get<std::size_t>("epochs", c.epochs);
  c.step = p.get<double>("step", c.step);
  c.batch_size = p.get<std::size_t>("batch_size", c.batch_size);
  c.seed = Seed{p.get<std::uint64_t>("seed", 0)};
  c.sigma_floor = p.get<double>("sigma_floor", c.sigma_floor);
  return c;
}

Dataset generate(Params &p) {
  const auto gen = p.get<std::string>("generator", "gaussian");
  const auto n = p.get<std::size_t>("n", 1000);
  const Seed seed{p.get<std::uint64_t>("seed", 0)};
  if (gen == "gaussian") {
    const auto dim = p.get<std::size_t>("dim", 1);
    const auto mean = p.get<double>("mean", 0.0);
    const auto sigma = p.get<double>("sigma", 1.0);
    return gen_gaussian(GaussianSpec::isotropic(dim, mean, sigma), n, seed);
  }
  if (gen == "random_walk") {
    const auto length = p.get<std::size_t>("length", 64);
    const auto step = p.get<double>("step_sigma", 3.0);
    const auto alphabet = p.get<std::size_t>("alphabet", 256);
    return gen_random_walk_sequences(n, length, step, alphabet, seed);
  }
  if (gen == "sticky") {
    StickySequenceSpec s;
    s.length = p.get<std::size_t>("length", s.length);
    s.coarse_levels = p.get<std::size_t>("coarse_levels", s.coarse_levels);
    s.fine_levels = p.get<std::size_t>("fine_levels", s.fine_levels);
    s.stay = p.get<double>("stay", s.stay);
    s.fine_top_mass = p.get<double>("fine_top_mass", s.fine_top_mass);
    const bool correlated = p.get<bool>("correlated", true);
    return gen_sticky_sequences(s, n, correlated, seed);
  }
  if (gen == "semantic_background") {
    SemanticBackgroundSpec s;
    s.semantic_dims = p.get<std::size_t>("semantic_dims", s.semantic_dims);
    s.background_dims = p.get<std::size_t>("background_dims", s.background_dims);
    s.in_semantic_mean = p.get<double>("in_semantic_mean", s.in_semantic_mean);
    s.in_semantic_sigma = p.get<double>("in_semantic_sigma", s.in_semantic_sigma);
    s.ood_semantic_mean = p.get<double>("ood_semantic_mean", s.ood_semantic_mean);
    s.ood_semantic_sigma = p.get<double>("ood_semantic_sigma", s.ood_semantic_sigma);
    s.background = p.get<std::string>("background", s.background);
    s.background_scale = p.get<double>("background_scale", s.background_scale);
    const auto part = p.get<std::string>("part", "in");
    if (part != "in" && part != "ood")
      throw InvalidArgument("semantic_background: part must be 'in' or 'ood'");
    auto pair = gen_semantic_background(s, n, seed);
    return part == "in" ? std::move(pair.first) : std::move(pair.second);
  }
  if (gen == "labeled_clusters") {
    const auto centres = p.get<std::vector<double>>("centres", {-3.0, 3.0});
    const auto dim = p.get<std::size_t>("dim", 1);
    const auto sigma = p.get<double>("sigma", 1.0);
    if (centres.empty() || n % centres.size() != 0)
      throw InvalidArgument("labeled_clusters: n must be a multiple of the class count");
    return gen_labeled_clusters(centres, dim, sigma, n / centres.size(), seed);
  }
  throw InvalidArgument("unknown generator '" + gen + "'");
}

const Dataset &need_ds(const ood_dataset *d, const char *what) {
  if (d == nullptr)
    throw InvalidArgument(std::string(what) + " requires a dataset");
  return d->ds;
}

ProxyModel build_proxy(Params &p, const ood_dataset *data, const ood_dataset *data2,
                       const ood_model *model) {
  const auto kind = proxy_kind_from_string(p.get<std::string>("kind", "constant"));
  switch (kind) {
  case ProxyKind::Constant:
    return build_constant_proxy(p.get<double>("level", 0.0));
  case ProxyKind::Auxiliary: {
    const auto spec = spec_from(p.get_json("model", to_json(ModelSpec{})));
    const Seed seed{p.get<std::uint64_t>("seed", 0)};
    return build_auxiliary_proxy(need_ds(data, "auxiliary proxy"), spec, seed);
  }
  case ProxyKind::Background: {
    const auto spec = spec_from(p.get_json("model", to_json(ModelSpec{})));
    const double mu = p.get<double>("mu", 0.5);
    const Seed seed{p.get<std::uint64_t>("seed", 0)};
    return build_background_proxy(need_ds(data, "background proxy"), mu, spec, seed);
  }
  case ProxyKind::Complexity: {
    const int bits = p.get<int>("bits", 8);
    if (data != nullptr && !p.has("lo") && !p.has("hi")) {
      const auto q = Quantizer::fit(data->ds, bits);
      p.get<double>("lo", q.lo);
      p.get<double>("hi", q.hi);
      return build_complexity_proxy(q);
    }
    const double lo = p.get<double>("lo", 0.0);
    const double hi = p.get<double>("hi", 255.0);
    return build_complexity_proxy(Quantizer{bits, lo, hi});
  }
  case ProxyKind::Local: {
    if (model != nullptr && data == nullptr)
      return build_local_proxy(model->model);
    const auto spec = spec_from(p.get_json("model", to_json(ModelSpec{"markov"})));
    const Seed seed{p.get<std::uint64_t>("seed", 0)};
    return build_local_proxy(fit_model(spec, need_ds(data, "local proxy"), seed));
  }
  case ProxyKind::LabelBased: {
    if (model == nullptr)
      throw InvalidArgument("label proxy requires the in-distribution model");
    const auto opts = train_options(p);
    return build_label_proxy(fit_softmax(need_ds(data, "label proxy"), opts), model->model);
  }
  case ProxyKind::ClassifierLR: {
    if (model == nullptr)
      throw InvalidArgument("classifier_lr proxy requires the in-distribution model");
    const auto opts = train_options(p);
    const auto dc = fit_domain_classifier(need_ds(data, "classifier_lr proxy"),
                                          need_ds(data2, "classifier_lr proxy"), opts);
    return build_classifier_lr_proxy(dc, model->model);
  }
  }
  throw InvalidArgument("unsupported proxy kind");
}

Json run_experiment(const std::string &name, Params &p) {
  if (name == "gaussian_falsehood") {
    const double eps = p.get<double>("epsilon", 0.01);
    const auto n = p.get<std::size_t>("n", 10000);
    return to_json(run_gaussian_falsehood(eps, n, Seed{p.get<std::uint64_t>("seed", 0)}));
  }
  if (name == "soap_bubble") {
    const auto dim = p.get<std::size_t>("dim", 256);
    const auto n = p.get<std::size_t>("n", 10000);
    return to_json(run_soap_bubble(dim, n, Seed{p.get<std::uint64_t>("seed", 0)}));
  }
  if (name == "expectation_sweep") {
    const auto ms = p.get<std::vector<double>>("model_sigmas", {0.5, 1.0, 2.0, 3.0, 5.0});
    const auto ds = p.get<std::vector<double>>("data_sigmas", {0.01, 0.5, 1.0, 2.0, 4.0});
    const auto n = p.get<std::size_t>("n", 10000);
    Json j = to_json(run_expectation_sweep(ms, ds, n, Seed{p.get<std::uint64_t>("seed", 0)}));
    j["config"] = {{"model_sigmas", ms}, {"data_sigmas", ds}, {"n", n},
                   {"seed", p.get<std::uint64_t>("seed", 0)}};
    return j;
  }
  if (name == "np_optimality") {
    const double eps = p.get<double>("epsilon", 0.01);
    const auto n = p.get<std::size_t>("n", 10000);
    const auto seed = p.get<std::uint64_t>("seed", 0);
    Json j = to_json(run_np_optimality(eps, n, Seed{seed}));
    j["config"] = {{"epsilon", eps}, {"n", n}, {"seed", seed}};
    return j;
  }
  if (name == "classifier_lr") {
    const auto n_in = p.get<std::size_t>("n_in", 50000);
    const auto n_out = p.get<std::size_t>("n_out", 50000);
    const double mean_out = p.get<double>("mean_out", 1.0);
    const auto opts = train_options(p);
    Json j = to_json(run_classifier_lr(n_in, n_out, opts, mean_out));
    j["config"] = {{"n_in", n_in}, {"n_out", n_out}, {"mean_out", mean_out},
                   {"epochs", opts.epochs}, {"step", opts.step}, {"seed", opts.seed.value}};
    return j;
  }
  if (name == "outlier_exposure") {
    const double eps = p.get<double>("epsilon", 0.01);
    const auto n = p.get<std::size_t>("n", 10000);
    const auto cfg = finetune_config(p);
    Json j = to_json(run_outlier_exposure(eps, n, cfg));
    j["config"] = {{"epsilon", eps}, {"n", n}, {"margin", j["config"]["margin"]},
                   {"epochs", cfg.epochs}, {"step", cfg.step},
                   {"batch_size", cfg.batch_size}, {"seed", cfg.seed.value},
                   {"sigma_floor", cfg.sigma_floor}};
    return j;
  }
  throw InvalidArgument("unknown experiment '" + name + "'");
}

} // namespace

extern "C" {

const char *ood_last_error(void) { return g_last_error.c_str(); }
const char *ood_version(void) { return "0.1.0"; }
void ood_string_free(char *s) { std::free(s); }
void ood_scores_free(double *scores) { std::free(scores); }

ood_status ood_dataset_from_array(const double *values, size_t n, size_t dim,
                                  const uint32_t *labels, ood_dataset **out) {
  return guard([&] {
    need(out, "out");
    if (dim == 0)
      throw InvalidArgument("dim must be positive");
    if (n > 0)
      need(values, "values");
    std::vector<double> v(values, values + n * dim);
    std::optional<std::vector<std::uint32_t>> l;
    if (labels != nullptr)
      l.emplace(labels, labels + n);
    *out = new ood_dataset{Dataset(dim, std::move(v), std::move(l))};
  });
}

ood_status ood_dataset_load_csv(const char *path, ood_dataset **out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new ood_dataset{load_csv(path)};
  });
}

ood_status ood_dataset_save_csv(const ood_dataset *ds, const char *path) {
  return guard([&] {
    need(ds, "dataset");
    need(path, "path");
    save_csv(ds->ds, path);
  });
}

ood_status ood_dataset_generate(const char *spec_json, ood_dataset **out,
                                char **resolved_json) {
  return guard([&] {
    need(out, "out");
    Params p(parse_optional(spec_json), "generator spec");
    Dataset ds = generate(p);
    const Json resolved = p.finish();
    *out = new ood_dataset{std::move(ds)};
    put_string(resolved_json, dump(resolved));
  });
}

size_t ood_dataset_size(const ood_dataset *ds) { return ds ? ds->ds.size() : 0; }
size_t ood_dataset_dim(const ood_dataset *ds) { return ds ? ds->ds.dim() : 0; }
int ood_dataset_labeled(const ood_dataset *ds) { return ds && ds->ds.labeled() ? 1 : 0; }

ood_status ood_dataset_row(const ood_dataset *ds, size_t i, double *buf, size_t buf_len) {
  return guard([&] {
    need(ds, "dataset");
    need(buf, "buf");
    if (i >= ds->ds.size())
      throw InvalidArgument("row index " + std::to_string(i) + " out of range");
    if (buf_len < ds->ds.dim())
      throw InvalidArgument("buffer holds " + std::to_string(buf_len) + " values, row has " +
                            std::to_string(ds->ds.dim()));
    auto r = ds->ds.row(i);
    std::copy(r.begin(), r.end(), buf);
  });
}

void ood_dataset_free(ood_dataset *ds) { delete ds; }

ood_status ood_model_fit(const char *spec_json, const ood_dataset *ds, uint64_t seed,
                         ood_model **out) {
  return guard([&] {
    need(ds, "dataset");
    need(out, "out");
    const auto spec = spec_from(parse_optional(spec_json));
    *out = new ood_model{fit_model(spec, ds->ds, Seed{seed})};
  });
}

ood_status ood_model_from_json(const char *json, ood_model **out) {
  return guard([&] {
    need(json, "json");
    need(out, "out");
    *out = new ood_model{density_model_from_json(parse_json(json))};
  });
}

ood_status ood_model_to_json(const ood_model *m, char **out) {
  return guard([&] {
    need(m, "model");
    need(out, "out");
    *out = copy_string(dump(to_json(m->model)));
  });
}

ood_status ood_model_load(const char *path, ood_model **out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new ood_model{density_model_from_json(load_json(path))};
  });
}

ood_status ood_model_save(const ood_model *m, const char *path) {
  return guard([&] {
    need(m, "model");
    need(path, "path");
    save_json(to_json(m->model), path);
  });
}

ood_status ood_model_log_density(const ood_model *m, const double *x, size_t dim,
                                 double *out) {
  return guard([&] {
    need(m, "model");
    need(x, "x");
    need(out, "out");
    *out = m->model.log_density(std::span<const double>(x, dim));
  });
}

ood_status ood_model_finetune(const ood_model *m, const ood_dataset *in_ds,
                              const ood_dataset *aux_ds, const char *config_json,
                              ood_model **out, char **report_json) {
  return guard([&] {
    need(m, "model");
    need(in_ds, "in dataset");
    need(aux_ds, "auxiliary dataset");
    need(out, "out");
    Params p(parse_optional(config_json), "fine-tune config");
    const auto cfg = finetune_config(p);
    Json resolved = p.finish();
    auto res = finetune_outlier_exposure(m->model, in_ds->ds, aux_ds->ds, cfg);
    resolved["margin"] = res.margin;
    const Json report{{"config", resolved},
                      {"loss_trace", res.loss_trace},
                      {"final_step", res.final_step},
                      {"halvings", res.halvings}};
    *out = new ood_model{std::move(res.model)};
    put_string(report_json, dump(report));
  });
}

void ood_model_free(ood_model *m) { delete m; }

ood_status ood_proxy_build(const char *spec_json, const ood_dataset *data,
                           const ood_dataset *data2, const ood_model *model,
                           ood_proxy **out) {
  return guard([&] {
    need(out, "out");
    Params p(parse_optional(spec_json), "proxy spec");
    auto proxy = build_proxy(p, data, data2, model);
    p.finish();
    *out = new ood_proxy{std::move(proxy)};
  });
}

ood_status ood_proxy_from_json(const char *json, ood_proxy **out) {
  return guard([&] {
    need(json, "json");
    need(out, "out");
    *out = new ood_proxy{proxy_from_json(parse_json(json))};
  });
}

ood_status ood_proxy_to_json(const ood_proxy *p, char **out) {
  return guard([&] {
    need(p, "proxy");
    need(out, "out");
    *out = copy_string(dump(to_json(p->proxy)));
  });
}

ood_status ood_proxy_load(const char *path, ood_proxy **out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new ood_proxy{proxy_from_json(load_json(path))};
  });
}

ood_status ood_proxy_save(const ood_proxy *p, const char *path) {
  return guard([&] {
    need(p, "proxy");
    need(path, "path");
    save_json(to_json(p->proxy), path);
  });
}

ood_status ood_proxy_log_density(const ood_proxy *p, const double *x, size_t dim,
                                 double *out) {
  return guard([&] {
    need(p, "proxy");
    need(x, "x");
    need(out, "out");
    *out = p->proxy.unnormalized_log_density(std::span<const double>(x, dim));
  });
}

int ood_proxy_normalized(const ood_proxy *p) { return p && p->proxy.normalized() ? 1 : 0; }

void ood_proxy_free(ood_proxy *p) { delete p; }

ood_status ood_score_dataset(const ood_model *in_model, const ood_proxy *proxy,
                             const ood_dataset *ds, double *scores, size_t len) {
  return guard([&] {
    need(in_model, "model");
    need(proxy, "proxy");
    need(ds, "dataset");
    if (len < ds->ds.size())
      throw InvalidArgument("score buffer holds " + std::to_string(len) + " values, need " +
                            std::to_string(ds->ds.size()));
    if (ds->ds.size() > 0)
      need(scores, "scores");
    const auto s = ood_scores(in_model->model, proxy->proxy, ds->ds);
    std::copy(s.begin(), s.end(), scores);
  });
}

ood_status ood_posterior(double score, double alpha, double *out) {
  return guard([&] {
    need(out, "out");
    *out = posterior(OodScore{score}, alpha);
  });
}

ood_status ood_calibrate_threshold(const double *in_scores, size_t n, double level,
                                   double *theta) {
  return guard([&] {
    need(theta, "theta");
    if (n > 0)
      need(in_scores, "scores");
    *theta = calibrate_threshold(std::span<const double>(in_scores, n), level).theta;
  });
}

ood_status ood_scores_save_csv(const char *path, const double *scores, size_t n,
                               double theta) {
  return guard([&] {
    need(path, "path");
    if (n > 0)
      need(scores, "scores");
    write_file_atomic(path, format_scores_csv(std::span<const double>(scores, n),
                                              DecisionRule{theta, std::nullopt}));
  });
}

ood_status ood_scores_load_csv(const char *path, double **scores, size_t *n) {
  return guard([&] {
    need(path, "path");
    need(scores, "scores");
    need(n, "n");
    const auto v = parse_scores_csv(read_file(path));
    auto *buf = static_cast<double *>(std::malloc(std::max<std::size_t>(1, v.size()) *
                                                  sizeof(double)));
    if (buf == nullptr)
      throw std::bad_alloc();
    std::copy(v.begin(), v.end(), buf);
    *scores = buf;
    *n = v.size();
  });
}

ood_status ood_auroc(const double *ood, size_t n_ood, const double *in, size_t n_in,
                     double *out) {
  return guard([&] {
    need(out, "out");
    need(ood, "ood scores");
    need(in, "in scores");
    *out = auroc(std::span<const double>(ood, n_ood), std::span<const double>(in, n_in));
  });
}

ood_status ood_evaluate(const double *ood, size_t n_ood, const double *in, size_t n_in,
                        double level, char **report_json, char **roc_csv) {
  return guard([&] {
    need(ood, "ood scores");
    need(in, "in scores");
    const auto r = evaluate(std::span<const double>(ood, n_ood),
                            std::span<const double>(in, n_in), level);
    const std::string json = dump(to_json(r));
    const std::string csv = format_roc_csv(r.roc);
    put_string(report_json, json);
    put_string(roc_csv, csv);
  });
}

ood_status ood_run_experiment(const char *name, const char *params_json,
                              char **report_json) {
  return guard([&] {
    need(name, "name");
    need(report_json, "report_json");
    Params p(parse_optional(params_json), std::string(name) + " params");
    const Json report = run_experiment(name, p);
    p.finish();
    *report_json = copy_string(dump(report));
  });
}

ood_status ood_default_benchmark_config(uint64_t seed, char **out) {
  return guard([&] {
    need(out, "out");
    *out = copy_string(dump(default_benchmark_config(seed)));
  });
}

ood_status ood_run_benchmark(const char *config_json, char **report_json,
                             char **table_csv) {
  return guard([&] {
    const auto table = run_proxy_benchmark(parse_optional(config_json));
    const std::string json = dump(to_json(table));
    const std::string csv = format_benchmark_csv(table);
    put_string(report_json, json);
    put_string(table_csv, csv);
  });
}

ood_status ood_write_file_atomic(const char *path, const char *contents) {
  return guard([&] {
    need(path, "path");
    need(contents, "contents");
    write_file_atomic(path, contents);
  });
}

ood_status ood_read_file(const char *path, char **out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = copy_string(read_file(path));
  });
}

} // extern "C"
