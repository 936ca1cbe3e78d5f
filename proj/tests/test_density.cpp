#include <doctest.h>

#include "oodlr/core.hpp"
#include "oodlr/density.hpp"
#include "oodlr/error.hpp"
#include "oodlr/metrics.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

using namespace oodlr;

namespace {

constexpr double kHalfLog2Pi = 0.9189385332046727;

double quadrature(const DensityModel &m, double lo, double hi, std::size_t steps) {
  // Composite Simpson on exp(log_density).
  const double h = (hi - lo) / static_cast<double>(steps);
  double sum = 0.0;
  for (std::size_t i = 0; i <= steps; ++i) {
    const double x = lo + h * static_cast<double>(i);
    const double w = (i == 0 || i == steps) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    sum += w * std::exp(m.log_density(std::span<const double>(&x, 1)));
  }
  return sum * h / 3.0;
}

double mean_ll(const DensityModel &m, const Dataset &ds) {
  double s = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i)
    s += m.log_density(ds.row(i));
  return s / static_cast<double>(ds.size());
}

Dataset two_clusters(double a, double b, std::size_t n_each, double sigma, Seed seed) {
  auto x = gen_gaussian(GaussianSpec::isotropic(1, a, sigma), n_each, derive_seed(seed, 1));
  auto y = gen_gaussian(GaussianSpec::isotropic(1, b, sigma), n_each, derive_seed(seed, 2));
  std::vector<double> v(x.values().begin(), x.values().end());
  v.insert(v.end(), y.values().begin(), y.values().end());
  return Dataset(1, std::move(v));
}

} // namespace

TEST_CASE("standard normal log density") {
  const DensityModel m(DiagonalGaussian{{0.0}, {1.0}});
  const double zero = 0.0, one = 1.0;
  CHECK(m.log_density(std::span<const double>(&zero, 1)) ==
        doctest::Approx(-kHalfLog2Pi).epsilon(1e-12));
  CHECK(m.log_density(std::span<const double>(&one, 1)) ==
        doctest::Approx(-kHalfLog2Pi - 0.5).epsilon(1e-12));
}

TEST_CASE("mixture with weights (1, 0) equals component 0 exactly") {
  const DiagonalGaussian a{{0.5, -1.0}, {2.0, 0.3}}, b{{3.0, 3.0}, {1.0, 1.0}};
  const DensityModel mix(GaussianMixture{{1.0, 0.0}, {a, b}});
  const std::vector<double> x{0.7, -0.2};
  CHECK(mix.log_density(x) == a.log_density(x));
}

TEST_CASE("model invariants are validated") {
  CHECK_THROWS_AS(DensityModel(DiagonalGaussian{{0.0}, {0.0}}), InvalidArgument);
  CHECK_THROWS_AS(DensityModel(GaussianMixture{{0.5, 0.6},
                                               {DiagonalGaussian{{0.0}, {1.0}},
                                                DiagonalGaussian{{1.0}, {1.0}}}}),
                  InvalidArgument);
}

TEST_CASE("fit_diag_gaussian on a singleton and on constants") {
  Dataset one(1);
  one.push_back(std::vector<double>{0.0});
  const auto m = fit_diag_gaussian(one);
  CHECK(m.get<DiagonalGaussian>()->mean[0] == 0.0);
  CHECK(m.get<DiagonalGaussian>()->sigma[0] == kDefaultSigmaFloor);

  Dataset c(3);
  for (int i = 0; i < 50; ++i)
    c.push_back(std::vector<double>{1.5, -2.0, 7.0});
  const auto g = *fit_diag_gaussian(c, 1e-3).get<DiagonalGaussian>();
  for (double s : g.sigma)
    CHECK(s == 1e-3);
}

TEST_CASE("fit_diag_gaussian recovers N(0,1)") {
  const auto ds = gen_gaussian(GaussianSpec::isotropic(1, 0.0, 1.0), 100000, Seed{1});
  const auto g = *fit_diag_gaussian(ds).get<DiagonalGaussian>();
  CHECK(std::abs(g.mean[0]) < 0.02);
  CHECK(std::abs(g.sigma[0] - 1.0) < 0.02);
}

TEST_CASE("gmm with one component matches the closed-form fit") {
  const auto ds = gen_gaussian(GaussianSpec{{1.0, -3.0}, {0.5, 2.0}}, 5000, Seed{2});
  const auto g = *fit_diag_gaussian(ds).get<DiagonalGaussian>();
  const auto mix = *fit_gmm(ds, {1, 50, 1e-12, kDefaultSigmaFloor}, Seed{3})
                        .get<GaussianMixture>();
  REQUIRE(mix.components.size() == 1);
  CHECK(mix.weights[0] == doctest::Approx(1.0).epsilon(1e-12));
  for (std::size_t j = 0; j < 2; ++j) {
    CHECK(std::abs(mix.components[0].mean[j] - g.mean[j]) < 1e-9);
    CHECK(std::abs(mix.components[0].sigma[j] - g.sigma[j]) < 1e-9);
  }
}

TEST_CASE("gmm recovers two separated clusters") {
  const auto ds = two_clusters(-5.0, 5.0, 5000, 1.0, Seed{4});
  const auto mix = *fit_gmm(ds, {}, Seed{5}).get<GaussianMixture>();
  std::vector<std::pair<double, double>> comps;
  for (std::size_t c = 0; c < 2; ++c)
    comps.emplace_back(mix.components[c].mean[0], mix.weights[c]);
  std::sort(comps.begin(), comps.end());
  CHECK(std::abs(comps[0].first + 5.0) < 0.1);
  CHECK(std::abs(comps[1].first - 5.0) < 0.1);
  CHECK(std::abs(comps[0].second - 0.5) < 0.02);
  CHECK(std::abs(comps[1].second - 0.5) < 0.02);
}

TEST_CASE("em log-likelihood is monotone on random instances") {
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    Rng rng(Seed{100 + trial});
    const std::size_t dim = 1 + rng.below(3), k = 1 + rng.below(4);
    GaussianSpec spec;
    for (std::size_t j = 0; j < dim; ++j) {
      spec.mean.push_back(rng.uniform(-3, 3));
      spec.sigma.push_back(rng.uniform(0.2, 2));
    }
    auto ds = gen_gaussian(spec, 200 + rng.below(300), Seed{trial});
    const auto m = fit_gmm(ds, {k, 100, 0.0, kDefaultSigmaFloor}, Seed{trial});
    const auto &trace = m.meta().trace;
    REQUIRE(trace.size() >= 2);
    for (std::size_t i = 1; i < trace.size(); ++i)
      CHECK(trace[i] >= trace[i - 1] - 1e-9);
    CHECK(trace.back() == doctest::Approx(mean_ll(m, ds)).epsilon(1e-9));
  }
}

TEST_CASE("gmm weights sum to one") {
  const auto ds = two_clusters(-1.0, 2.0, 300, 0.7, Seed{6});
  const auto mix = *fit_gmm(ds, {3, 200, 1e-10, kDefaultSigmaFloor}, Seed{7})
                        .get<GaussianMixture>();
  CHECK(std::abs(std::accumulate(mix.weights.begin(), mix.weights.end(), 0.0) - 1.0) <
        1e-12);
}

TEST_CASE("1-d models integrate to one") {
  const auto ds = two_clusters(-2.0, 3.0, 2000, 1.0, Seed{8});
  CHECK(quadrature(fit_diag_gaussian(ds), -40, 40, 20000) ==
        doctest::Approx(1.0).epsilon(1e-3));
  CHECK(quadrature(fit_gmm(ds, {}, Seed{9}), -40, 40, 20000) ==
        doctest::Approx(1.0).epsilon(1e-3));
  const auto h = fit_histogram(ds, 25);
  const auto &axis = h.get<Histogram>()->axes[0];
  // Exponential tails decay at one bin width; 60 widths leaves < e^-60.
  const double lo = axis.lo - 60 * axis.width, hi = axis.hi() + 60 * axis.width;
  CHECK(quadrature(h, lo, hi, 400000) == doctest::Approx(1.0).epsilon(1e-3));
  double mass = axis.lower_tail + axis.upper_tail;
  for (double m : axis.mass)
    mass += m;
  CHECK(std::abs(mass - 1.0) < 1e-12);
}

TEST_CASE("histogram with one bin is constant over its support") {
  const auto ds = gen_gaussian(GaussianSpec{{0.0, 5.0}, {1.0, 3.0}}, 100000, Seed{1});
  const auto h = fit_histogram(ds, 1);
  const auto &hist = *h.get<Histogram>();
  double log_widths = 0.0;
  for (const auto &a : hist.axes)
    log_widths += std::log(a.width);
  const std::vector<double> p1{hist.axes[0].lo + 0.1, hist.axes[1].lo + 0.2};
  const std::vector<double> p2{hist.axes[0].hi() - 0.1, hist.axes[1].lo + 5.0};
  CHECK(h.log_density(p1) == h.log_density(p2));
  // Smoothing moves (n + 1) / (n + 3) of the mass into the bin.
  CHECK(std::abs(h.log_density(p1) + log_widths) < 1e-4);
}

TEST_CASE("histogram scores points outside the training range finitely") {
  const auto ds = gen_gaussian(GaussianSpec::isotropic(1, 0.0, 1.0), 1000, Seed{1});
  const auto h = fit_histogram(ds, 10);
  for (double x : {-1e6, -20.0, 20.0, 1e6})
    CHECK(std::isfinite(h.log_density(std::span<const double>(&x, 1))));
}

TEST_CASE("order-0 markov on uniform symbols") {
  const std::size_t A = 16, L = 32;
  Rng rng(Seed{3});
  Dataset ds(L);
  std::vector<double> row(L);
  for (int i = 0; i < 5000; ++i) {
    for (auto &v : row)
      v = static_cast<double>(rng.below(A));
    ds.push_back(row);
  }
  const auto m = fit_markov(ds, 0, A);
  CHECK(mean_ll(m, ds) / L == doctest::Approx(-std::log(A)).epsilon(0.01));
}

TEST_CASE("order-1 markov on constant sequences") {
  Dataset ds(20);
  for (int i = 0; i < 200; ++i)
    ds.push_back(std::vector<double>(20, 7.0));
  const auto m = fit_markov(ds, 1, 32);
  const auto &mc = *m.get<MarkovChain>();
  CHECK(mc.tables[1][7 * 32 + 7] > 0.99);
  for (const auto &table : mc.tables)
    for (std::size_t row = 0; row < table.size(); row += 32) {
      double s = 0.0;
      for (std::size_t a = 0; a < 32; ++a)
        s += table[row + a];
      CHECK(std::abs(s - 1.0) < 1e-12);
    }
}

TEST_CASE("markov rejects out-of-alphabet symbols") {
  Dataset ds(3);
  ds.push_back(std::vector<double>{0, 1, 2});
  const auto m = fit_markov(ds, 1, 4);
  CHECK_THROWS_AS(m.log_density(std::vector<double>{0, 1, 4}), DataError);
  CHECK_THROWS_AS(m.log_density(std::vector<double>{0, 1.5, 2}), DataError);
  CHECK_THROWS_AS(fit_markov(ds, 5, 256), InvalidArgument);
}

TEST_CASE("sampling and refitting agree") {
  const DensityModel g(DiagonalGaussian{{0.0}, {1.0}});
  const auto g_fit = *fit_diag_gaussian(g.sample(100000, Seed{1})).get<DiagonalGaussian>();
  const double se = 1.0 / std::sqrt(100000.0);
  CHECK(std::abs(g_fit.mean[0]) < 5 * se);
  CHECK(std::abs(g_fit.sigma[0] - 1.0) < 5 * se);

  const DensityModel mix(GaussianMixture{
      {0.5, 0.5}, {DiagonalGaussian{{-10.0}, {1.0}}, DiagonalGaussian{{10.0}, {1.0}}}});
  const auto s = mix.sample(10000, Seed{2});
  std::size_t left = 0;
  for (double v : s.values())
    left += v < 0.0;
  CHECK(std::abs(left / 10000.0 - 0.5) < 0.02);

  Dataset one_bin_src(1);
  for (double v : {2.0, 3.0, 4.0})
    one_bin_src.push_back(std::vector<double>{v});
  const auto h = fit_histogram(one_bin_src, 1);
  const auto hs = h.sample(2000, Seed{3});
  std::size_t inside = 0;
  for (double v : hs.values())
    inside += (v >= 2.0 && v <= 4.0);
  // Tails hold 2 / (3 + 3) of the smoothed mass.
  CHECK(std::abs(inside / 2000.0 - 4.0 / 6.0) < 0.05);
}

TEST_CASE("entropy extremes") {
  const std::vector<double> uniform(5, 0.2), one_hot{0.0, 1.0, 0.0};
  CHECK(entropy(uniform) == doctest::Approx(std::log(5.0)).epsilon(1e-12));
  CHECK(entropy(one_hot) == 0.0);
}

TEST_CASE("softmax gradient matches central differences") {
  for (std::uint64_t trial = 0; trial < 10; ++trial) {
    Rng rng(Seed{trial});
    const std::size_t classes = 2 + rng.below(3), dim = 1 + rng.below(4);
    Dataset ds(dim);
    std::vector<double> x(dim);
    for (int i = 0; i < 30; ++i) {
      for (auto &v : x)
        v = rng.normal();
      ds.push_back(x, static_cast<std::uint32_t>(i % classes));
    }
    std::vector<double> w(classes * dim), b(classes);
    for (auto &v : w)
      v = rng.normal();
    for (auto &v : b)
      v = rng.normal();
    std::vector<double> gw, gb, scratch_w, scratch_b;
    softmax_loss_gradient(classes, w, b, ds, gw, gb);
    const double h = 1e-6;
    auto check_param = [&](std::vector<double> &p, std::size_t i, double analytic) {
      const double orig = p[i];
      p[i] = orig + h;
      const double up = softmax_loss_gradient(classes, w, b, ds, scratch_w, scratch_b);
      p[i] = orig - h;
      const double down = softmax_loss_gradient(classes, w, b, ds, scratch_w, scratch_b);
      p[i] = orig;
      const double numeric = (up - down) / (2 * h);
      CHECK(std::abs(numeric - analytic) <= 1e-5 * std::max(1.0, std::abs(numeric)));
    };
    for (std::size_t i = 0; i < w.size(); ++i)
      check_param(w, i, gw[i]);
    for (std::size_t i = 0; i < b.size(); ++i)
      check_param(b, i, gb[i]);
  }
}

TEST_CASE("softmax probabilities are normalized and the loss never rises") {
  const auto ds = [] {
    Dataset d(2);
    Rng rng(Seed{5});
    for (int i = 0; i < 300; ++i) {
      const auto c = static_cast<std::uint32_t>(i % 3);
      d.push_back(std::vector<double>{rng.normal() + c, rng.normal() - c}, c);
    }
    return d;
  }();
  const auto clf = fit_softmax(ds, {200, 1.0, Seed{1}});
  for (std::size_t i = 1; i < clf.loss_trace.size(); ++i)
    CHECK(clf.loss_trace[i] <= clf.loss_trace[i - 1]);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto p = clf.predict_proba(ds.row(i));
    double s = 0.0;
    for (double v : p) {
      CHECK(v > 0.0);
      s += v;
    }
    CHECK(std::abs(s - 1.0) < 1e-9);
  }
}

TEST_CASE("softmax boundary between N(0,1) and N(1,1)") {
  const auto a = gen_gaussian(GaussianSpec::isotropic(1, 0.0, 1.0), 25000, Seed{1});
  const auto b = gen_gaussian(GaussianSpec::isotropic(1, 1.0, 1.0), 25000, Seed{2});
  Dataset ds(1);
  for (std::size_t i = 0; i < a.size(); ++i) {
    ds.push_back(a.row(i), 0);
    ds.push_back(b.row(i), 1);
  }
  const auto clf = fit_softmax(ds, {500, 0.5, Seed{3}});
  // Equal-probability point of the two-class linear softmax.
  const double dw = clf.weights()[1] - clf.weights()[0];
  const double db = clf.bias()[1] - clf.bias()[0];
  CHECK(std::abs(-db / dw - 0.5) < 0.05);
}

TEST_CASE("domain classifier recovers the analytic log ratio") {
  const auto in = gen_gaussian(GaussianSpec::isotropic(1, 0.0, 1.0), 50000, Seed{1});
  const auto out = gen_gaussian(GaussianSpec::isotropic(1, 1.0, 1.0), 50000, Seed{2});
  const auto dc = fit_domain_classifier(in, out, {500, 0.5, Seed{3}});
  CHECK(std::abs(dc.weight[0] - 1.0) < 0.1);
  CHECK(std::abs(dc.bias + 0.5) < 0.1);
  CHECK(dc.prior_log_ratio == 0.0);
  for (std::size_t i = 1; i < dc.loss_trace.size(); ++i)
    CHECK(dc.loss_trace[i] <= dc.loss_trace[i - 1]);
}

TEST_CASE("domain classifier on identical domains is uninformative") {
  const auto in = gen_gaussian(GaussianSpec::isotropic(2, 0.0, 1.0), 5000, Seed{1});
  const auto out = gen_gaussian(GaussianSpec::isotropic(2, 0.0, 1.0), 5000, Seed{2});
  const auto dc = fit_domain_classifier(in, out, {300, 0.5, Seed{3}});
  const auto in_t = gen_gaussian(GaussianSpec::isotropic(2, 0.0, 1.0), 5000, Seed{4});
  const auto out_t = gen_gaussian(GaussianSpec::isotropic(2, 0.0, 1.0), 5000, Seed{5});
  std::vector<double> a, b;
  for (std::size_t i = 0; i < in_t.size(); ++i) {
    a.push_back(dc.logit(out_t.row(i)));
    b.push_back(dc.logit(in_t.row(i)));
  }
  CHECK(std::abs(auroc(a, b) - 0.5) < 0.02);
}

TEST_CASE("imbalanced domain classifier records the prior offset") {
  const auto in = gen_gaussian(GaussianSpec::isotropic(1, 0.0, 1.0), 20000, Seed{1});
  const auto out = gen_gaussian(GaussianSpec::isotropic(1, 1.0, 1.0), 5000, Seed{2});
  const auto dc = fit_domain_classifier(in, out, {500, 0.5, Seed{3}});
  CHECK(dc.prior_log_ratio == doctest::Approx(std::log(0.25)).epsilon(1e-12));
  // Corrected intercept stays near the analytic -1/2.
  const double zero = 0.0;
  CHECK(std::abs(dc.log_ratio(std::span<const double>(&zero, 1)) + 0.5) < 0.15);
}

TEST_CASE("log_sum_exp is stable") {
  const std::vector<double> big{1000.0, 1000.0};
  CHECK(log_sum_exp(big) == doctest::Approx(1000.0 + std::log(2.0)).epsilon(1e-15));
  const std::vector<double> small{-1e4, -1e4 - std::log(3.0)};
  CHECK(log_sum_exp(small) == doctest::Approx(-1e4 + std::log(4.0 / 3.0)).epsilon(1e-15));
}
