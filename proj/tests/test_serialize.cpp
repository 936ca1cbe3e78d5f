#include <doctest.h>

#include "oodlr/core.hpp"
#include "oodlr/density.hpp"
#include "oodlr/error.hpp"
#include "oodlr/experiments.hpp"
#include "oodlr/proxy.hpp"
#include "oodlr/serialize.hpp"

#include <filesystem>

using namespace oodlr;

namespace {

void check_same_density(const DensityModel &a, const DensityModel &b, const Dataset &ds) {
  for (std::size_t i = 0; i < ds.size(); ++i)
    REQUIRE(a.log_density(ds.row(i)) == b.log_density(ds.row(i)));
}

} // namespace

TEST_CASE("model documents round trip bit-identically") {
  const auto ds = gen_gaussian(GaussianSpec::isotropic(2, 0.3, 1.7), 2000, Seed{1});
  const auto seqs = gen_random_walk_sequences(300, 12, 2.0, 64, Seed{2});
  const std::vector<std::pair<DensityModel, const Dataset *>> models = {
      {fit_diag_gaussian(ds), &ds},
      {fit_gmm(ds, {3, 50, 1e-9, 1e-6}, Seed{3}), &ds},
      {fit_histogram(ds, 17), &ds},
      {fit_markov(seqs, 2, 64), &seqs},
  };
  for (const auto &[m, data] : models) {
    const Json doc = to_json(m);
    CHECK(doc.at("kind") == m.kind());
    CHECK(doc.contains("params"));
    CHECK(doc.at("fit_meta").contains("seed"));
    CHECK(doc.at("fit_meta").contains("iters"));
    CHECK(doc.at("fit_meta").contains("tol"));
    const auto back = density_model_from_json(parse_json(dump(doc)));
    CHECK(back == m);
    check_same_density(m, back, *data);
  }
}

TEST_CASE("model documents are validated") {
  const std::string meta = R"("fit_meta":{"seed":0,"iters":0,"tol":0})";
  CHECK_THROWS(density_model_from_json(parse_json(R"({"kind":"flow","params":{},)" + meta + "}")));
  CHECK_THROWS(density_model_from_json(parse_json(
      R"({"kind":"diag_gaussian","params":{"mean":[0],"sigma":[-1]},)" + meta + "}")));
  CHECK_THROWS_AS(density_model_from_json(parse_json(R"({"kind":"diag_gaussian"})")), DataError);
  CHECK_THROWS_AS(parse_json("{not json"), DataError);
}

TEST_CASE("model spec round trip and strictness") {
  ModelSpec s;
  s.kind = "histogram";
  s.bins = 7;
  CHECK(model_spec_from_json(to_json(s)) == s);
  CHECK(model_spec_from_json(Json::object()) == ModelSpec{});
  CHECK_THROWS_AS(model_spec_from_json(Json{{"kind", "gmm"}, {"kk", 3}}), InvalidArgument);
  CHECK_THROWS_AS(model_spec_from_json(Json{{"kind", "vae"}}), InvalidArgument);
}

TEST_CASE("every proxy kind round trips") {
  const auto labeled = gen_labeled_clusters({-2.0, 2.0}, 2, 1.0, 200, Seed{1});
  const Dataset x(2, std::vector<double>(labeled.values().begin(), labeled.values().end()));
  const auto in_model = fit_diag_gaussian(x);
  const auto other = gen_gaussian(GaussianSpec::isotropic(2, 1.0, 1.0), 300, Seed{2});
  const std::vector<ProxyModel> proxies = {
      build_constant_proxy(-3.25),
      build_auxiliary_proxy(other, ModelSpec{}, Seed{3}),
      build_background_proxy(x, 0.4, ModelSpec{"gmm"}, Seed{4}),
      build_complexity_proxy(Quantizer{10, -6.0, 6.0}),
      build_local_proxy(fit_histogram(x, 9)),
      build_label_proxy(fit_softmax(labeled, {50, 0.5, Seed{5}}), in_model),
      build_classifier_lr_proxy(fit_domain_classifier(x, other, {50, 0.5, Seed{6}}), in_model),
  };
  const auto probe = gen_gaussian(GaussianSpec::isotropic(2, 0.0, 2.0), 100, Seed{7});
  for (const auto &p : proxies) {
    const Json doc = to_json(p);
    CHECK(doc.at("kind") == "proxy");
    CHECK(doc.at("params").at("proxy_kind") == to_string(p.kind()));
    const auto back = proxy_from_json(parse_json(dump(doc)));
    CHECK(back == p);
    for (std::size_t i = 0; i < probe.size(); ++i) {
      auto row = probe.row(i);
      std::vector<double> clipped(row.begin(), row.end());
      for (auto &v : clipped)
        v = std::clamp(v, -6.0, 6.0);
      REQUIRE(back.unnormalized_log_density(clipped) == p.unnormalized_log_density(clipped));
    }
  }
}

TEST_CASE("complexity proxy records the compressor") {
  const Json doc = to_json(build_complexity_proxy(Quantizer{}));
  const auto &c = doc.at("params").at("compressor");
  CHECK(c.at("name") == "zlib");
  CHECK(c.at("level") == 9);
  CHECK(!c.at("version").get<std::string>().empty());
}

TEST_CASE("save and load through files") {
  const auto path = std::filesystem::temp_directory_path() / "oodlr_test_model.json";
  const auto m = fit_diag_gaussian(gen_gaussian(GaussianSpec::isotropic(1, 0, 1), 50, Seed{1}));
  save_json(to_json(m), path);
  CHECK(density_model_from_json(load_json(path)) == m);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_json(path), IoError);
}

TEST_CASE("eval report json") {
  const std::vector<double> ood{1, 2, 3}, in{0, 1};
  const Json j = to_json(evaluate(ood, in));
  for (const char *key : {"auroc", "roc", "fpr_at_tpr95", "type1", "type2", "n_in", "n_out",
                          "convention"})
    CHECK(j.contains(key));
  CHECK(j.at("auroc").get<double>() == auroc(ood, in));
}
