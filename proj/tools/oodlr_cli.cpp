#include "oodlr.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

using Json = nlohmann::ordered_json;

namespace {

constexpr int kUsageError = 1;
constexpr int kDataError = 2;

struct Failure {
  std::string message;
};

void check(ood_status s, const std::string &what) {
  if (s != OOD_OK)
    throw Failure{what + ": " + ood_last_error()};
}

struct StringDeleter {
  void operator()(char *p) const { ood_string_free(p); }
};
using OwnedString = std::unique_ptr<char, StringDeleter>;

std::string take(char *p) { return std::string(OwnedString(p).get()); }

template <class T, void (*Free)(T *)> struct HandleDeleter {
  void operator()(T *p) const { Free(p); }
};
using DatasetPtr = std::unique_ptr<ood_dataset, HandleDeleter<ood_dataset, ood_dataset_free>>;
using ModelPtr = std::unique_ptr<ood_model, HandleDeleter<ood_model, ood_model_free>>;
using ProxyPtr = std::unique_ptr<ood_proxy, HandleDeleter<ood_proxy, ood_proxy_free>>;

DatasetPtr load_dataset(const std::string &path) {
  ood_dataset *d = nullptr;
  check(ood_dataset_load_csv(path.c_str(), &d), "loading " + path);
  return DatasetPtr(d);
}

ModelPtr load_model(const std::string &path) {
  ood_model *m = nullptr;
  check(ood_model_load(path.c_str(), &m), "loading " + path);
  return ModelPtr(m);
}

ProxyPtr load_proxy(const std::string &path) {
  ood_proxy *p = nullptr;
  check(ood_proxy_load(path.c_str(), &p), "loading " + path);
  return ProxyPtr(p);
}

std::vector<double> load_scores(const std::string &path) {
  double *buf = nullptr;
  std::size_t n = 0;
  check(ood_scores_load_csv(path.c_str(), &buf, &n), "loading " + path);
  std::vector<double> v(buf, buf + n);
  ood_scores_free(buf);
  return v;
}

void write(const std::string &path, const std::string &text) {
  check(ood_write_file_atomic(path.c_str(), text.c_str()), "writing " + path);
}

std::string dump(const Json &j) { return j.dump(2) + "\n"; }

Json parse_object(const std::string &text, const std::string &what) {
  Json j = Json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw Failure{what + ": expected a JSON object"};
  return j;
}

// key=value; value is read as JSON when it parses, otherwise as a string.
Json parse_params(const std::vector<std::string> &pairs) {
  Json j = Json::object();
  for (const auto &kv : pairs) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0)
      throw Failure{"--param expects key=value, got '" + kv + "'"};
    const auto key = kv.substr(0, eq), value = kv.substr(eq + 1);
    Json v = Json::parse(value, nullptr, false);
    j[key] = v.is_discarded() ? Json(value) : v;
  }
  return j;
}

struct ModelFlags {
  std::string kind = "diag_gaussian";
  double sigma_floor = 1e-6;
  std::size_t k = 2;
  std::size_t max_iters = 200;
  double tol = 1e-8;
  std::size_t bins = 30;
  double smoothing = 1.0;
  std::size_t order = 1;
  std::size_t alphabet = 256;

  void add(CLI::App *app) {
    app->add_option("--kind", kind, "diag_gaussian | gmm | histogram | markov")
        ->capture_default_str();
    app->add_option("--sigma-floor", sigma_floor)->capture_default_str();
    app->add_option("--k", k, "mixture components")->capture_default_str();
    app->add_option("--max-iters", max_iters)->capture_default_str();
    app->add_option("--tol", tol)->capture_default_str();
    app->add_option("--bins", bins, "histogram bins per dimension")->capture_default_str();
    app->add_option("--smoothing", smoothing)->capture_default_str();
    app->add_option("--order", order, "markov order")->capture_default_str();
    app->add_option("--alphabet", alphabet, "markov alphabet size")->capture_default_str();
  }

  Json json() const {
    return Json{{"kind", kind},   {"sigma_floor", sigma_floor},
                {"k", k},         {"max_iters", max_iters},
                {"tol", tol},     {"bins", bins},
                {"smoothing", smoothing}, {"order", order},
                {"alphabet", alphabet}};
  }
};

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Likelihood-ratio out-of-distribution detection toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(ood_version()));

  // gen
  auto *gen = app.add_subcommand("gen", "generate a synthetic dataset as CSV");
  std::string gen_name, gen_out;
  std::size_t gen_n = 1000;
  std::uint64_t gen_seed = 0;
  std::vector<std::string> gen_params;
  gen->add_option("--generator", gen_name,
                  "gaussian | random_walk | sticky | semantic_background | labeled_clusters")
      ->required();
  gen->add_option("--n", gen_n)->capture_default_str();
  gen->add_option("--seed", gen_seed)->capture_default_str();
  gen->add_option("--param", gen_params, "generator field as key=value (repeatable)");
  gen->add_option("--out", gen_out)->required();

  // fit
  auto *fit = app.add_subcommand("fit", "fit a density model to a CSV dataset");
  std::string fit_data, fit_out, oe_aux, oe_report;
  std::uint64_t fit_seed = 0;
  ModelFlags fit_model;
  std::optional<double> oe_margin;
  std::size_t oe_epochs = 20, oe_batch = 256;
  double oe_step = 0.01;
  fit->add_option("--data", fit_data)->required();
  fit->add_option("--seed", fit_seed)->capture_default_str();
  fit_model.add(fit);
  fit->add_option("--oe-aux", oe_aux, "auxiliary OOD CSV; enables outlier-exposure fine-tuning");
  fit->add_option("--oe-margin", oe_margin, "hinge margin (default: data dimension)");
  fit->add_option("--oe-epochs", oe_epochs)->capture_default_str();
  fit->add_option("--oe-step", oe_step)->capture_default_str();
  fit->add_option("--oe-batch-size", oe_batch)->capture_default_str();
  fit->add_option("--oe-report", oe_report, "write the fine-tune report JSON here");
  fit->add_option("--out", fit_out)->required();

  // proxy
  auto *proxy = app.add_subcommand("proxy", "build an OOD proxy");
  std::string px_kind, px_data, px_data2, px_model, px_spec, px_out;
  std::optional<double> px_level, px_lo, px_hi, px_mu, px_step;
  std::optional<int> px_bits;
  std::optional<std::size_t> px_epochs;
  std::optional<std::uint64_t> px_seed;
  proxy->add_option("--kind", px_kind,
                    "constant | auxiliary | background | complexity | local | label | "
                    "classifier_lr")
      ->required();
  proxy->add_option("--data", px_data,
                    "auxiliary: OOD samples; background/local: training data; label: "
                    "labeled data; classifier_lr: in samples; complexity: range source");
  proxy->add_option("--data2", px_data2, "classifier_lr: out samples");
  proxy->add_option("--model", px_model,
                    "label/classifier_lr: in-distribution model; local: fitted local model");
  proxy->add_option("--model-spec", px_spec, "JSON model spec for fitted proxies");
  proxy->add_option("--level", px_level, "constant log-density");
  proxy->add_option("--bits", px_bits);
  proxy->add_option("--lo", px_lo);
  proxy->add_option("--hi", px_hi);
  proxy->add_option("--mu", px_mu, "background perturbation rate");
  proxy->add_option("--epochs", px_epochs);
  proxy->add_option("--step", px_step);
  proxy->add_option("--seed", px_seed);
  proxy->add_option("--out", px_out)->required();

  // score
  auto *score = app.add_subcommand("score", "score a dataset: log p_out_proxy - log p_in");
  std::string sc_model, sc_proxy, sc_data, sc_out, sc_calibrate;
  std::optional<double> sc_theta;
  double sc_level = 0.05;
  score->add_option("--model", sc_model)->required();
  score->add_option("--proxy", sc_proxy)->required();
  score->add_option("--data", sc_data)->required();
  auto *theta_opt = score->add_option("--theta", sc_theta, "decision threshold (default 0)");
  score->add_option("--calibrate", sc_calibrate,
                    "in-distribution validation CSV used to set the threshold")
      ->excludes(theta_opt);
  score->add_option("--level", sc_level, "type-I level for --calibrate")->capture_default_str();
  score->add_option("--out", sc_out)->required();

  // eval
  auto *eval = app.add_subcommand("eval", "evaluate two score files");
  std::string ev_ood, ev_in, ev_out, ev_roc;
  double ev_level = 0.05;
  eval->add_option("--ood", ev_ood, "scores of OOD samples")->required();
  eval->add_option("--in", ev_in, "scores of in-distribution samples")->required();
  eval->add_option("--level", ev_level)->capture_default_str();
  eval->add_option("--out", ev_out)->required();
  eval->add_option("--roc", ev_roc, "write ROC points as CSV");

  // falsehoods
  auto *fals = app.add_subcommand("falsehoods", "run the likelihood falsehood reproductions");
  double fa_eps = 0.01;
  std::size_t fa_n = 10000, fa_dim = 256;
  std::uint64_t fa_seed = 0;
  std::string fa_out;
  fals->add_option("--epsilon", fa_eps)->capture_default_str();
  fals->add_option("--n", fa_n)->capture_default_str();
  fals->add_option("--seed", fa_seed)->capture_default_str();
  fals->add_option("--dim", fa_dim, "soap-bubble dimension")->capture_default_str();
  fals->add_option("--out", fa_out)->required();

  // bench
  auto *bench = app.add_subcommand("bench", "run the proxy benchmark");
  std::string bn_config, bn_out, bn_csv;
  std::optional<std::uint64_t> bn_seed;
  bool bn_print = false;
  bench->add_option("--config", bn_config, "benchmark config JSON (default: built-in suite)");
  bench->add_option("--seed", bn_seed, "override the config seed");
  bench->add_option("--out", bn_out);
  bench->add_option("--csv", bn_csv);
  bench->add_flag("--print-default-config", bn_print);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kUsageError;
  }

  try {
    if (gen->parsed()) {
      Json spec = parse_params(gen_params);
      spec["generator"] = gen_name;
      spec["n"] = gen_n;
      spec["seed"] = gen_seed;
      ood_dataset *d = nullptr;
      char *resolved = nullptr;
      check(ood_dataset_generate(spec.dump().c_str(), &d, &resolved), "gen");
      DatasetPtr ds(d);
      const auto text = take(resolved);
      check(ood_dataset_save_csv(ds.get(), gen_out.c_str()), "writing " + gen_out);
      std::cout << text;
    } else if (fit->parsed()) {
      auto ds = load_dataset(fit_data);
      const Json spec = fit_model.json();
      ood_model *m = nullptr;
      check(ood_model_fit(spec.dump().c_str(), ds.get(), fit_seed, &m), "fit");
      ModelPtr model(m);
      Json echo{{"data", fit_data}, {"seed", fit_seed}, {"spec", spec}};
      if (!oe_aux.empty()) {
        auto aux = load_dataset(oe_aux);
        Json cfg{{"epochs", oe_epochs}, {"step", oe_step}, {"batch_size", oe_batch},
                 {"seed", fit_seed}, {"sigma_floor", fit_model.sigma_floor}};
        if (oe_margin)
          cfg["margin"] = *oe_margin;
        ood_model *tuned = nullptr;
        char *report = nullptr;
        check(ood_model_finetune(model.get(), ds.get(), aux.get(), cfg.dump().c_str(), &tuned,
                                 &report),
              "fine-tune");
        model.reset(tuned);
        const auto report_text = take(report);
        if (!oe_report.empty())
          write(oe_report, report_text);
        echo["finetune"] = Json::parse(report_text)["config"];
        echo["finetune"]["aux"] = oe_aux;
      }
      check(ood_model_save(model.get(), fit_out.c_str()), "writing " + fit_out);
      std::cout << dump(echo);
    } else if (proxy->parsed()) {
      Json spec{{"kind", px_kind}};
      if (px_level)
        spec["level"] = *px_level;
      if (px_bits)
        spec["bits"] = *px_bits;
      if (px_lo)
        spec["lo"] = *px_lo;
      if (px_hi)
        spec["hi"] = *px_hi;
      if (px_mu)
        spec["mu"] = *px_mu;
      if (px_epochs)
        spec["epochs"] = *px_epochs;
      if (px_step)
        spec["step"] = *px_step;
      if (px_seed)
        spec["seed"] = *px_seed;
      if (!px_spec.empty())
        spec["model"] = parse_object(px_spec, "--model-spec");
      DatasetPtr data, data2;
      ModelPtr model;
      if (!px_data.empty())
        data = load_dataset(px_data);
      if (!px_data2.empty())
        data2 = load_dataset(px_data2);
      if (!px_model.empty())
        model = load_model(px_model);
      ood_proxy *p = nullptr;
      check(ood_proxy_build(spec.dump().c_str(), data.get(), data2.get(), model.get(), &p),
            "proxy");
      ProxyPtr built(p);
      check(ood_proxy_save(built.get(), px_out.c_str()), "writing " + px_out);
      std::cout << dump(spec);
    } else if (score->parsed()) {
      auto model = load_model(sc_model);
      auto px = load_proxy(sc_proxy);
      auto ds = load_dataset(sc_data);
      std::vector<double> s(ood_dataset_size(ds.get()));
      check(ood_score_dataset(model.get(), px.get(), ds.get(), s.data(), s.size()),
            "score " + sc_data);
      double theta = sc_theta.value_or(0.0);
      Json echo{{"model", sc_model}, {"proxy", sc_proxy}, {"data", sc_data}};
      if (!sc_calibrate.empty()) {
        auto val = load_dataset(sc_calibrate);
        std::vector<double> v(ood_dataset_size(val.get()));
        check(ood_score_dataset(model.get(), px.get(), val.get(), v.data(), v.size()),
              "score " + sc_calibrate);
        check(ood_calibrate_threshold(v.data(), v.size(), sc_level, &theta), "calibrate");
        echo["calibrate"] = sc_calibrate;
        echo["level"] = sc_level;
      }
      echo["theta"] = theta;
      echo["posterior"] = ood_proxy_normalized(px.get()) ? "calibrated" : "uncalibrated";
      echo["n"] = s.size();
      check(ood_scores_save_csv(sc_out.c_str(), s.data(), s.size(), theta),
            "writing " + sc_out);
      std::cout << dump(echo);
    } else if (eval->parsed()) {
      const auto ood = load_scores(ev_ood);
      const auto in = load_scores(ev_in);
      char *report = nullptr, *roc = nullptr;
      check(ood_evaluate(ood.data(), ood.size(), in.data(), in.size(), ev_level, &report,
                         ev_roc.empty() ? nullptr : &roc),
            "eval");
      auto doc = Json::parse(take(report));
      doc["inputs"] = {{"ood", ev_ood}, {"in", ev_in}};
      write(ev_out, dump(doc));
      if (!ev_roc.empty())
        write(ev_roc, take(roc));
    } else if (fals->parsed()) {
      Json report{{"config", {{"epsilon", fa_eps}, {"n", fa_n}, {"seed", fa_seed},
                              {"dim", fa_dim}}}};
      const std::vector<std::pair<std::string, Json>> runs = {
          {"gaussian_falsehood", {{"epsilon", fa_eps}, {"n", fa_n}, {"seed", fa_seed}}},
          {"np_optimality", {{"epsilon", fa_eps}, {"n", fa_n}, {"seed", fa_seed}}},
          {"soap_bubble", {{"dim", fa_dim}, {"n", fa_n}, {"seed", fa_seed}}},
          {"expectation_sweep", {{"n", fa_n}, {"seed", fa_seed}}},
      };
      for (const auto &[name, params] : runs) {
        char *out = nullptr;
        check(ood_run_experiment(name.c_str(), params.dump().c_str(), &out), name);
        report[name] = Json::parse(take(out));
      }
      write(fa_out, dump(report));
    } else if (bench->parsed()) {
      if (bn_print) {
        char *cfg = nullptr;
        check(ood_default_benchmark_config(bn_seed.value_or(0), &cfg), "bench");
        std::cout << take(cfg);
        return 0;
      }
      Json config = Json::object();
      if (!bn_config.empty()) {
        char *text = nullptr;
        check(ood_read_file(bn_config.c_str(), &text), "reading " + bn_config);
        config = parse_object(take(text), bn_config);
      }
      if (bn_seed)
        config["seed"] = *bn_seed;
      char *report = nullptr, *csv = nullptr;
      check(ood_run_benchmark(config.dump().c_str(), &report, &csv), "bench");
      const auto report_text = take(report), csv_text = take(csv);
      if (!bn_out.empty())
        write(bn_out, report_text);
      if (!bn_csv.empty())
        write(bn_csv, csv_text);
      if (bn_out.empty() && bn_csv.empty())
        std::cout << csv_text;
    }
  } catch (const Failure &f) {
    std::cerr << "error: " << f.message << "\n";
    return kDataError;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  }
  return 0;
}
