#include <doctest.h>

#include "oodlr/core.hpp"
#include "oodlr/detector.hpp"
#include "oodlr/error.hpp"
#include "oodlr/experiments.hpp"
#include "oodlr/metrics.hpp"

#include <cmath>
#include <numbers>

using namespace oodlr;

TEST_CASE("analytic expected log likelihood") {
  const double h = 0.5 * std::log(2 * std::numbers::pi);
  CHECK(analytic_expected_log_likelihood(1, 1) == doctest::Approx(-h - 0.5).epsilon(1e-14));
  CHECK(analytic_expected_log_likelihood(1, 0) == doctest::Approx(-h).epsilon(1e-14));
  CHECK(analytic_expected_log_likelihood(1, 0.01) ==
        doctest::Approx(-h - 5e-5).epsilon(1e-14));
  CHECK(analytic_expected_log_likelihood(1, 0.01) - analytic_expected_log_likelihood(1, 1) ==
        doctest::Approx(0.49995).epsilon(1e-12));
  CHECK_THROWS_AS(analytic_expected_log_likelihood(0, 1), InvalidArgument);
}

TEST_CASE("analytic value matches a million draws") {
  const auto ds = gen_gaussian(GaussianSpec::isotropic(1, 0.0, 1.0), 1000000, Seed{1});
  const DiagonalGaussian g{{0.0}, {1.0}};
  double s = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i)
    s += g.log_density(ds.row(i));
  CHECK(std::abs(s / 1e6 - analytic_expected_log_likelihood(1, 1)) <= 0.005);
}

TEST_CASE("gaussian falsehood") {
  const auto r = run_gaussian_falsehood(0.01, 10000, Seed{0});
  CHECK(std::abs(r.mean_log_p_ood - r.mean_log_p_in - 0.5) <= 0.05);
  CHECK(r.naive_auroc <= 0.05);
  CHECK(r.true_lr_auroc >= 0.95);
  CHECK(std::abs(r.mean_log_p_in - r.analytic_in) <= 5 * r.se_in);
  CHECK(std::abs(r.mean_log_p_ood - r.analytic_ood) <= 5 * r.se_ood + 1e-9);
  CHECK(r.analytic_true_ood - r.analytic_true_in == doctest::Approx(0.49995).epsilon(1e-12));
  CHECK_THROWS_AS(run_gaussian_falsehood(1.0, 100, Seed{}), InvalidArgument);
}

TEST_CASE("falsehood reports embed their configuration") {
  const Json j = to_json(run_gaussian_falsehood(0.05, 500, Seed{9}));
  CHECK(j.at("config").at("epsilon") == 0.05);
  CHECK(j.at("config").at("n") == 500);
  CHECK(j.at("config").at("seed") == 9);
  CHECK(dump(j) == dump(to_json(run_gaussian_falsehood(0.05, 500, Seed{9}))));
}

TEST_CASE("soap bubble") {
  const auto r = run_soap_bubble(256, 10000, Seed{0});
  CHECK(r.annulus_fraction >= 0.99);
  CHECK(r.origin_exceeds_samples);
  CHECK(r.origin_log_density > r.max_sample_log_density);
  CHECK_THROWS_AS(run_soap_bubble(1, 100, Seed{}), InvalidArgument);
}

TEST_CASE("soap bubble in two dimensions is not concentrated") {
  // P(||x|| <= sqrt(2) + 3) for a chi with 2 dof: 1 - exp(-r^2 / 2).
  const auto r = run_soap_bubble(2, 20000, Seed{1});
  const double hi = std::sqrt(2.0) + 3.0;
  CHECK(std::abs(r.annulus_fraction - (1 - std::exp(-hi * hi / 2))) < 0.01);
  CHECK(r.radius_lo == 0.0);
}

TEST_CASE("expectation sweep tracks the closed form") {
  const auto cells = run_expectation_sweep({0.5, 1, 2, 3, 5}, {0.01, 0.5, 1, 2, 4}, 10000,
                                           Seed{0});
  CHECK(cells.size() == 25);
  for (const auto &c : cells)
    CHECK(std::abs(c.empirical - c.analytic) <= 5 * c.standard_error);
}

TEST_CASE("np optimality") {
  const auto r = run_np_optimality(0.01, 10000, Seed{0});
  CHECK(r.candidates.size() == 8);
  for (const auto &[name, a] : r.candidates)
    CHECK_MESSAGE(r.log_lr_auroc >= a - 0.01, name);
}

TEST_CASE("semantic background generator") {
  SemanticBackgroundSpec spec;
  const auto [in, ood] = gen_semantic_background(spec, 20000, Seed{1});
  CHECK(in.dim() == 52);
  for (std::size_t j = spec.semantic_dims; j < in.dim(); ++j) {
    double ma = 0, mb = 0, va = 0, vb = 0;
    for (std::size_t i = 0; i < in.size(); ++i) {
      ma += in.row(i)[j];
      mb += ood.row(i)[j];
    }
    ma /= in.size();
    mb /= ood.size();
    for (std::size_t i = 0; i < in.size(); ++i) {
      va += (in.row(i)[j] - ma) * (in.row(i)[j] - ma);
      vb += (ood.row(i)[j] - mb) * (ood.row(i)[j] - mb);
    }
    const double se = std::sqrt(va / (in.size() - 1) / in.size() + vb / (ood.size() - 1) / ood.size());
    CHECK(std::abs(ma - mb) <= 5 * se);
  }
}

TEST_CASE("background-only task is indistinguishable") {
  SemanticBackgroundSpec spec;
  spec.semantic_dims = 0;
  spec.background_dims = 5;
  const auto train = gen_semantic_background(spec, 10000, Seed{1}).first;
  const auto model = fit_diag_gaussian(train);
  const auto [in, ood] = gen_semantic_background(spec, 10000, Seed{2});
  const auto p = build_constant_proxy(0.0);
  CHECK(std::abs(auroc(ood_scores(model, p, ood), ood_scores(model, p, in)) - 0.5) <= 0.02);
}

TEST_CASE("semantic-only task with background proxy") {
  SemanticBackgroundSpec spec;
  spec.semantic_dims = 2;
  spec.background_dims = 0;
  spec.ood_semantic_mean = 3.0;
  spec.ood_semantic_sigma = 1.0;
  const auto train = gen_semantic_background(spec, 10000, Seed{1}).first;
  const auto model = fit_diag_gaussian(train);
  const auto bg = build_background_proxy(train, 0.5, ModelSpec{}, Seed{3});
  const auto [in, ood] = gen_semantic_background(spec, 5000, Seed{2});
  CHECK(auroc(ood_scores(model, bg, ood), ood_scores(model, bg, in)) > 0.5);
}

TEST_CASE("sticky sequences keep their coarse level at the stay rate") {
  StickySequenceSpec spec;
  spec.stay = 0.5;
  const auto ds = gen_sticky_sequences(spec, 2000, true, Seed{1});
  std::size_t same = 0, total = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto r = ds.row(i);
    for (std::size_t t = 1; t < r.size(); ++t) {
      same += static_cast<std::size_t>(r[t]) / spec.fine_levels ==
              static_cast<std::size_t>(r[t - 1]) / spec.fine_levels;
      ++total;
    }
  }
  // Kept, or redrawn onto the same level.
  const double expected = 0.5 + 0.5 / spec.coarse_levels;
  CHECK(std::abs(static_cast<double>(same) / total - expected) < 0.01);
}

TEST_CASE("benchmark defaults meet the task oracles") {
  const auto t = run_proxy_benchmark(default_benchmark_config(0));
  for (const auto &c : t.cells) {
    CHECK(c.auroc >= 0.0);
    CHECK(c.auroc <= 1.0);
    CHECK(c.fpr_at_tpr95 >= 0.0);
    CHECK(c.fpr_at_tpr95 <= 1.0);
  }
  CHECK(t.at("gaussian", "narrow", "constant").auroc <= 0.05);
  CHECK(t.at("gaussian", "narrow", "auxiliary").auroc >= 0.95);
  CHECK(t.at("complexity", "constant", "constant").auroc < 0.5);
  CHECK(t.at("complexity", "constant", "complexity").auroc > 0.8);
  CHECK(t.at("correlation", "independent", "local").auroc >= 0.8);
  CHECK(t.at("correlation", "independent", "constant").auroc <= 0.6);
  CHECK(t.at("semantic_background", "wide_semantic", "background").auroc >=
        t.at("semantic_background", "wide_semantic", "constant").auroc);
  CHECK(t.at("label", "midpoint", "label").auroc == t.at("label", "midpoint", "raw_entropy").auroc);
  CHECK(t.at("label", "midpoint", "label").auroc >= 0.8);
}

TEST_CASE("benchmark config validation") {
  CHECK_THROWS_AS(run_proxy_benchmark(Json{{"tasks", {{{"name", "mnist"}}}}}), InvalidArgument);
  CHECK_THROWS_AS(
      run_proxy_benchmark(Json{{"tasks", {{{"name", "gaussian"}, {"proxies", {"oracle"}}}}}}),
      InvalidArgument);
  CHECK_THROWS_AS(
      run_proxy_benchmark(Json{{"tasks", {{{"name", "gaussian"}, {"ood_sets", {"svhn"}}}}}}),
      InvalidArgument);
  CHECK_THROWS_AS(run_proxy_benchmark(Json{{"seeds", 1}}), InvalidArgument);
  CHECK_THROWS_AS(run_proxy_benchmark(
                      Json{{"tasks", {{{"name", "gaussian"}, {"params", {{"eps", 0.1}}}}}}}),
                  InvalidArgument);
}

TEST_CASE("benchmark reruns from its own metadata") {
  Json cfg{{"seed", 5},
           {"tasks",
            {{{"name", "gaussian"}, {"params", {{"n_train", 2000}, {"n_test", 2000},
                                                {"n_aux", 2000}}}},
             {{"name", "label"}, {"params", {{"n_train_per_class", 500}, {"n_test", 1000},
                                             {"epochs", 50}}}}}}};
  const auto a = run_proxy_benchmark(cfg);
  const Json report = to_json(a);
  const auto b = run_proxy_benchmark(report.at("config"));
  CHECK(dump(to_json(b)) == dump(report));
  CHECK(format_benchmark_csv(a).rfind("task,ood_set,proxy,auroc,fpr_at_tpr95\n", 0) == 0);
}
