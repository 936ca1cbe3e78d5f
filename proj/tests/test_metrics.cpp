#include <doctest.h>

#include "oodlr/core.hpp"
#include "oodlr/error.hpp"
#include "oodlr/metrics.hpp"

#include <algorithm>
#include <cmath>

using namespace oodlr;

namespace {

double brute_auroc(const std::vector<double> &ood, const std::vector<double> &in) {
  // Integer pair count, divided once.
  long long twice = 0;
  for (double a : ood)
    for (double b : in)
      twice += a > b ? 2 : (a == b ? 1 : 0);
  return static_cast<double>(twice) / (2.0 * ood.size() * in.size());
}

std::vector<double> tied_scores(Rng &rng, std::size_t n, int levels) {
  std::vector<double> v(n);
  for (auto &x : v)
    x = levels > 0 ? static_cast<double>(rng.below(levels)) : rng.normal();
  return v;
}

} // namespace

TEST_CASE("auroc examples") {
  CHECK(auroc(std::vector<double>{1, 2, 3}, std::vector<double>{0, 0.5}) == 1.0);
  CHECK(auroc(std::vector<double>(5, 2.0), std::vector<double>(7, 2.0)) == 0.5);
  CHECK(auroc(std::vector<double>{0.9, 0.4}, std::vector<double>{0.5, 0.1}) == 0.75);
  CHECK_THROWS_AS(auroc(std::vector<double>{}, std::vector<double>{1.0}), InvalidArgument);
}

TEST_CASE("auroc equals brute force and is antisymmetric") {
  Rng rng(Seed{1});
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng.below(200), m = 1 + rng.below(200);
    const int levels = trial % 3 == 0 ? 0 : 1 + static_cast<int>(rng.below(10));
    const auto a = tied_scores(rng, n, levels), b = tied_scores(rng, m, levels);
    REQUIRE(auroc(a, b) == brute_auroc(a, b));
    REQUIRE(auroc(a, b) + auroc(b, a) == 1.0);
  }
}

TEST_CASE("auroc is invariant under increasing transforms") {
  Rng rng(Seed{2});
  auto a = tied_scores(rng, 300, 0), b = tied_scores(rng, 300, 0);
  const double base = auroc(a, b);
  for (auto *v : {&a, &b})
    for (auto &x : *v)
      x = std::atan(3.0 * x) + 7.0;
  CHECK(auroc(a, b) == base);
}

TEST_CASE("roc curve shape and area") {
  Rng rng(Seed{3});
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = tied_scores(rng, 1 + rng.below(100), trial % 2 ? 5 : 0);
    const auto b = tied_scores(rng, 1 + rng.below(100), trial % 2 ? 5 : 0);
    const auto roc = roc_points(a, b);
    CHECK(roc.front() == RocPoint{0.0, 0.0});
    CHECK(roc.back() == RocPoint{1.0, 1.0});
    for (std::size_t i = 1; i < roc.size(); ++i) {
      CHECK(roc[i].fpr >= roc[i - 1].fpr);
      CHECK(roc[i].tpr >= roc[i - 1].tpr);
    }
    CHECK(std::abs(trapezoid_area(roc) - auroc(a, b)) <= 1e-9);
  }
}

TEST_CASE("roc points ignore input order") {
  Rng rng(Seed{4});
  auto a = tied_scores(rng, 80, 6), b = tied_scores(rng, 90, 6);
  const auto roc = roc_points(a, b);
  std::reverse(a.begin(), a.end());
  std::rotate(b.begin(), b.begin() + 17, b.end());
  CHECK(roc_points(a, b) == roc);
}

TEST_CASE("fpr at tpr") {
  CHECK(fpr_at_tpr(std::vector<double>{5, 6, 7}, std::vector<double>{1, 2}) == 0.0);
  Rng rng(Seed{5});
  std::vector<double> a(10000), b(10000);
  for (auto &x : a)
    x = rng.normal();
  for (auto &x : b)
    x = rng.normal();
  CHECK(std::abs(fpr_at_tpr(a, b, 0.95) - 0.95) <= 0.02);
}

TEST_CASE("error rate extremes") {
  const std::vector<double> ood{1, 2, 3}, in{0, 1.5};
  auto r = error_rates(ood, in, {-10.0, std::nullopt});
  CHECK(r.type1 == 1.0);
  CHECK(r.type2 == 0.0);
  r = error_rates(ood, in, {10.0, std::nullopt});
  CHECK(r.type1 == 0.0);
  CHECK(r.type2 == 1.0);
}

TEST_CASE("evaluate fills the report") {
  Rng rng(Seed{6});
  std::vector<double> ood(1000), in(2000);
  for (auto &x : ood)
    x = rng.normal() + 1.0;
  for (auto &x : in)
    x = rng.normal();
  const auto rep = evaluate(ood, in, 0.05);
  CHECK(rep.auroc == auroc(ood, in));
  CHECK(rep.n_in == 2000);
  CHECK(rep.n_out == 1000);
  CHECK(rep.level == 0.05);
  CHECK(std::abs(trapezoid_area(rep.roc) - rep.auroc) <= 1e-9);
  CHECK(rep.type1 <= 0.05 + 1.0 / 2000);
  CHECK(!rep.convention.empty());
  CHECK(format_roc_csv(rep.roc).rfind("fpr,tpr\n0,0\n", 0) == 0);
}
