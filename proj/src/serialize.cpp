#include "oodlr/serialize.hpp"
#include "oodlr/error.hpp"

namespace oodlr {

namespace {

Json meta_json(const FitMeta &m) {
  Json j;
  j["seed"] = m.seed;
  j["iters"] = m.iters;
  j["tol"] = m.tol;
  if (!m.trace.empty())
    j["trace"] = m.trace;
  return j;
}

FitMeta meta_from_json(const Json &j) {
  FitMeta m;
  m.seed = j.at("seed").get<std::uint64_t>();
  m.iters = j.at("iters").get<std::size_t>();
  m.tol = j.at("tol").get<double>();
  if (j.contains("trace"))
    m.trace = j.at("trace").get<std::vector<double>>();
  return m;
}

Json gaussian_json(const DiagonalGaussian &g) {
  return Json{{"mean", g.mean}, {"sigma", g.sigma}};
}

DiagonalGaussian gaussian_from(const Json &j) {
  return {j.at("mean").get<std::vector<double>>(),
          j.at("sigma").get<std::vector<double>>()};
}

template <class F> auto guarded(const char *what, F &&f) {
  try {
    return f();
  } catch (const Json::exception &e) {
    throw DataError(std::string(what) + ": malformed document: " + e.what());
  }
}

} // namespace

Json to_json(const DensityModel &model) {
  Json params;
  std::visit(
      [&](const auto &p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, DiagonalGaussian>) {
          params = gaussian_json(p);
        } else if constexpr (std::is_same_v<T, GaussianMixture>) {
          params["weights"] = p.weights;
          params["components"] = Json::array();
          for (const auto &c : p.components)
            params["components"].push_back(gaussian_json(c));
        } else if constexpr (std::is_same_v<T, Histogram>) {
          params["axes"] = Json::array();
          for (const auto &a : p.axes)
            params["axes"].push_back({{"lo", a.lo},
                                      {"width", a.width},
                                      {"mass", a.mass},
                                      {"lower_tail", a.lower_tail},
                                      {"upper_tail", a.upper_tail}});
        } else {
          params["order"] = p.order;
          params["alphabet"] = p.alphabet;
          params["length"] = p.length;
          params["tables"] = p.tables;
        }
      },
      model.params());
  return Json{{"kind", model.kind()},
              {"params", std::move(params)},
              {"fit_meta", meta_json(model.meta())}};
}

DensityModel density_model_from_json(const Json &doc) {
  return guarded("density model", [&] {
    const auto kind = doc.at("kind").get<std::string>();
    const auto &p = doc.at("params");
    const auto meta = meta_from_json(doc.at("fit_meta"));
    if (kind == "diag_gaussian")
      return DensityModel(gaussian_from(p), meta);
    if (kind == "gmm") {
      GaussianMixture m;
      m.weights = p.at("weights").get<std::vector<double>>();
      for (const auto &c : p.at("components"))
        m.components.push_back(gaussian_from(c));
      return DensityModel(std::move(m), meta);
    }
    if (kind == "histogram") {
      Histogram h;
      for (const auto &a : p.at("axes"))
        h.axes.push_back({a.at("lo").get<double>(), a.at("width").get<double>(),
                          a.at("mass").get<std::vector<double>>(),
                          a.at("lower_tail").get<double>(),
                          a.at("upper_tail").get<double>()});
      return DensityModel(std::move(h), meta);
    }
    if (kind == "markov") {
      MarkovChain mc;
      mc.order = p.at("order").get<std::size_t>();
      mc.alphabet = p.at("alphabet").get<std::size_t>();
      mc.length = p.at("length").get<std::size_t>();
      mc.tables = p.at("tables").get<std::vector<std::vector<double>>>();
      return DensityModel(std::move(mc), meta);
    }
    throw DataError("density model: unknown kind '" + kind + "'");
  });
}

Json to_json(const ModelSpec &s) {
  Json j{{"kind", s.kind}};
  if (s.kind == "diag_gaussian") {
    j["sigma_floor"] = s.sigma_floor;
  } else if (s.kind == "gmm") {
    j["k"] = s.k;
    j["max_iters"] = s.max_iters;
    j["tol"] = s.tol;
    j["sigma_floor"] = s.sigma_floor;
  } else if (s.kind == "histogram") {
    j["bins"] = s.bins;
    j["smoothing"] = s.smoothing;
  } else {
    j["order"] = s.order;
    j["alphabet"] = s.alphabet;
    j["smoothing"] = s.smoothing;
  }
  return j;
}

ModelSpec model_spec_from_json(const Json &j) {
  return guarded("model spec", [&] {
    ModelSpec s;
    s.kind = j.value("kind", s.kind);
    s.sigma_floor = j.value("sigma_floor", s.sigma_floor);
    s.k = j.value("k", s.k);
    s.max_iters = j.value("max_iters", s.max_iters);
    s.tol = j.value("tol", s.tol);
    s.bins = j.value("bins", s.bins);
    s.smoothing = j.value("smoothing", s.smoothing);
    s.order = j.value("order", s.order);
    s.alphabet = j.value("alphabet", s.alphabet);
    for (const auto &[key, _] : j.items())
      if (key != "kind" && key != "sigma_floor" && key != "k" &&
          key != "max_iters" && key != "tol" && key != "bins" &&
          key != "smoothing" && key != "order" && key != "alphabet")
        throw InvalidArgument("model spec: unknown field '" + key + "'");
    if (s.kind != "diag_gaussian" && s.kind != "gmm" && s.kind != "histogram" &&
        s.kind != "markov")
      throw InvalidArgument("model spec: unknown backend '" + s.kind + "'");
    return s;
  });
}

namespace {

Json train_json(const TrainOptions &o) {
  return Json{{"epochs", o.epochs}, {"step", o.step}, {"seed", o.seed.value}};
}

TrainOptions train_from(const Json &j) {
  return {j.at("epochs").get<std::size_t>(), j.at("step").get<double>(),
          Seed{j.at("seed").get<std::uint64_t>()}};
}

} // namespace

Json to_json(const SoftmaxClassifier &c) {
  return Json{{"classes", c.classes()}, {"dim", c.dim()},
              {"weights", c.weights()}, {"bias", c.bias()},
              {"train", train_json(c.options)}, {"loss_trace", c.loss_trace}};
}

SoftmaxClassifier softmax_from_json(const Json &j) {
  return guarded("softmax classifier", [&] {
    SoftmaxClassifier c(j.at("classes").get<std::size_t>(),
                        j.at("dim").get<std::size_t>(),
                        j.at("weights").get<std::vector<double>>(),
                        j.at("bias").get<std::vector<double>>());
    c.options = train_from(j.at("train"));
    c.loss_trace = j.at("loss_trace").get<std::vector<double>>();
    return c;
  });
}

Json to_json(const DomainClassifier &c) {
  return Json{{"weight", c.weight},
              {"bias", c.bias},
              {"prior_log_ratio", c.prior_log_ratio},
              {"train", train_json(c.options)},
              {"loss_trace", c.loss_trace}};
}

DomainClassifier domain_classifier_from_json(const Json &j) {
  return guarded("domain classifier", [&] {
    DomainClassifier c;
    c.weight = j.at("weight").get<std::vector<double>>();
    c.bias = j.at("bias").get<double>();
    c.prior_log_ratio = j.at("prior_log_ratio").get<double>();
    c.options = train_from(j.at("train"));
    c.loss_trace = j.at("loss_trace").get<std::vector<double>>();
    return c;
  });
}

Json to_json(const ProxyModel &proxy) {
  Json params{{"proxy_kind", to_string(proxy.kind())},
              {"normalized", proxy.normalized()}};
  std::uint64_t seed = 0;
  std::visit(
      [&](const auto &p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, ConstantPayload>) {
          params["level"] = p.level;
        } else if constexpr (std::is_same_v<T, DensityPayload>) {
          params["model"] = to_json(p.model);
          if (proxy.kind() != ProxyKind::Local)
            params["model_spec"] = to_json(p.spec);
          if (proxy.kind() == ProxyKind::Background)
            params["mu"] = p.mu;
          seed = p.seed;
        } else if constexpr (std::is_same_v<T, ComplexityPayload>) {
          params["quantizer"] = {{"bits", p.quantizer.bits},
                                 {"lo", p.quantizer.lo},
                                 {"hi", p.quantizer.hi}};
          params["compressor"] = {{"name", p.compressor.name},
                                  {"version", p.compressor.version},
                                  {"level", p.compressor.level}};
          params["length_units"] = "bits = 8 * compressed bytes";
        } else if constexpr (std::is_same_v<T, LabelPayload>) {
          params["classifier"] = to_json(p.classifier);
          params["in_model"] = to_json(p.in_model);
          seed = p.classifier.options.seed.value;
        } else {
          params["classifier"] = to_json(p.classifier);
          params["in_model"] = to_json(p.in_model);
          seed = p.classifier.options.seed.value;
        }
      },
      proxy.payload());
  return Json{{"kind", "proxy"},
              {"params", std::move(params)},
              {"fit_meta", {{"seed", seed}, {"iters", 0}, {"tol", 0.0}}}};
}

ProxyModel proxy_from_json(const Json &doc) {
  return guarded("proxy", [&] {
    if (doc.at("kind").get<std::string>() != "proxy")
      throw DataError("proxy: document kind is '" +
                      doc.at("kind").get<std::string>() + "', expected 'proxy'");
    const auto &p = doc.at("params");
    const auto kind = proxy_kind_from_string(p.at("proxy_kind").get<std::string>());
    const auto seed = doc.at("fit_meta").at("seed").get<std::uint64_t>();
    switch (kind) {
    case ProxyKind::Constant:
      return ProxyModel(kind, ConstantPayload{p.at("level").get<double>()});
    case ProxyKind::Auxiliary:
    case ProxyKind::Background:
    case ProxyKind::Local: {
      DensityPayload d{density_model_from_json(p.at("model")), {}, 0.0, seed};
      if (p.contains("model_spec"))
        d.spec = model_spec_from_json(p.at("model_spec"));
      d.mu = p.value("mu", 0.0);
      return ProxyModel(kind, std::move(d));
    }
    case ProxyKind::Complexity: {
      const auto &q = p.at("quantizer");
      const auto &c = p.at("compressor");
      ComplexityPayload cp{{q.at("bits").get<int>(), q.at("lo").get<double>(),
                            q.at("hi").get<double>()},
                           {c.at("name").get<std::string>(),
                            c.at("version").get<std::string>(),
                            c.at("level").get<int>()}};
      cp.quantizer.validate();
      return ProxyModel(kind, std::move(cp));
    }
    case ProxyKind::LabelBased:
      return ProxyModel(kind, LabelPayload{softmax_from_json(p.at("classifier")),
                                           density_model_from_json(p.at("in_model"))});
    case ProxyKind::ClassifierLR:
      return ProxyModel(kind, ClassifierLrPayload{
                                  domain_classifier_from_json(p.at("classifier")),
                                  density_model_from_json(p.at("in_model"))});
    }
    throw DataError("proxy: unknown kind");
  });
}

Json to_json(const EvalReport &r) {
  Json roc = Json::array();
  for (const auto &p : r.roc)
    roc.push_back({p.fpr, p.tpr});
  return Json{{"auroc", r.auroc},
              {"fpr_at_tpr95", r.fpr_at_tpr95},
              {"type1", r.type1},
              {"type2", r.type2},
              {"theta", r.theta},
              {"level", r.level},
              {"n_in", r.n_in},
              {"n_out", r.n_out},
              {"convention", r.convention},
              {"roc", std::move(roc)}};
}

std::string dump(const Json &j) { return j.dump(2) + "\n"; }

Json parse_json(const std::string &text) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error &e) {
    throw DataError(std::string("invalid JSON: ") + e.what());
  }
}

Json load_json(const std::filesystem::path &path) {
  return parse_json(read_file(path));
}

void save_json(const Json &j, const std::filesystem::path &path) {
  write_file_atomic(path, dump(j));
}

} // namespace oodlr
