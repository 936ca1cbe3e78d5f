#include <doctest.h>
#include <json.hpp>

#include "oodlr.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

std::string take(char *s) {
  std::string out = s ? s : "";
  ood_string_free(s);
  return out;
}

fs::path scratch(const std::string &name) {
  const auto dir = fs::temp_directory_path() / ("oodlr_capi_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run(const std::string &args) {
  const std::string cmd = std::string(OODLR_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ood_dataset *generate(const std::string &spec) {
  ood_dataset *d = nullptr;
  REQUIRE(ood_dataset_generate(spec.c_str(), &d, nullptr) == OOD_OK);
  return d;
}

} // namespace

TEST_CASE("status codes and last error") {
  ood_dataset *d = nullptr;
  CHECK(ood_dataset_from_array(nullptr, 3, 1, nullptr, &d) == OOD_ERR_INVALID_ARGUMENT);
  CHECK(std::string(ood_last_error()).size() > 0);
  CHECK(ood_dataset_load_csv("/nonexistent/x.csv", &d) == OOD_ERR_IO);
  CHECK(d == nullptr);
  CHECK(ood_model_from_json("{bad", nullptr) == OOD_ERR_INVALID_ARGUMENT);
  ood_model *m = nullptr;
  CHECK(ood_model_from_json("{bad", &m) == OOD_ERR_DATA);
  double p = 0;
  CHECK(ood_posterior(0.0, 0.3, &p) == OOD_OK);
  CHECK(p == 0.3);
  CHECK(ood_posterior(0.0, 1.5, &p) == OOD_ERR_INVALID_ARGUMENT);
  CHECK(std::string(ood_version()).size() > 0);
}

TEST_CASE("dimension mismatch names both dimensions") {
  const double xs[] = {1, 2, 3, 4};
  ood_dataset *d1 = nullptr, *d2 = nullptr;
  REQUIRE(ood_dataset_from_array(xs, 4, 1, nullptr, &d1) == OOD_OK);
  REQUIRE(ood_dataset_from_array(xs, 2, 2, nullptr, &d2) == OOD_OK);
  ood_model *m = nullptr;
  REQUIRE(ood_model_fit(R"({"kind":"diag_gaussian"})", d1, 0, &m) == OOD_OK);
  ood_proxy *p = nullptr;
  REQUIRE(ood_proxy_build(R"({"kind":"constant","level":0})", nullptr, nullptr, nullptr, &p) ==
          OOD_OK);
  double s[2];
  CHECK(ood_score_dataset(m, p, d2, s, 2) == OOD_ERR_DATA);
  const std::string err = ood_last_error();
  CHECK(err.find('1') != std::string::npos);
  CHECK(err.find('2') != std::string::npos);
  ood_proxy_free(p);
  ood_model_free(m);
  ood_dataset_free(d1);
  ood_dataset_free(d2);
}

TEST_CASE("model and proxy round trip through the C API") {
  auto *ds = generate(R"({"generator":"gaussian","n":500,"seed":3,"dim":2})");
  ood_model *m = nullptr;
  REQUIRE(ood_model_fit(R"({"kind":"gmm","k":2})", ds, 7, &m) == OOD_OK);
  char *text = nullptr;
  REQUIRE(ood_model_to_json(m, &text) == OOD_OK);
  ood_model *m2 = nullptr;
  REQUIRE(ood_model_from_json(take(text).c_str(), &m2) == OOD_OK);
  ood_proxy *p = nullptr;
  REQUIRE(ood_proxy_build(R"({"kind":"background","mu":0.3})", ds, nullptr, nullptr, &p) ==
          OOD_OK);
  CHECK(ood_proxy_normalized(p) == 1);
  REQUIRE(ood_proxy_to_json(p, &text) == OOD_OK);
  ood_proxy *p2 = nullptr;
  REQUIRE(ood_proxy_from_json(take(text).c_str(), &p2) == OOD_OK);
  std::vector<double> a(500), b(500);
  REQUIRE(ood_score_dataset(m, p, ds, a.data(), a.size()) == OOD_OK);
  REQUIRE(ood_score_dataset(m2, p2, ds, b.data(), b.size()) == OOD_OK);
  CHECK(a == b);
  ood_proxy_free(p);
  ood_proxy_free(p2);
  ood_model_free(m);
  ood_model_free(m2);
  ood_dataset_free(ds);
}

TEST_CASE("unknown experiment and generator are rejected") {
  char *out = nullptr;
  CHECK(ood_run_experiment("mnist", nullptr, &out) == OOD_ERR_INVALID_ARGUMENT);
  ood_dataset *d = nullptr;
  CHECK(ood_dataset_generate(R"({"generator":"cifar","n":3})", &d, nullptr) ==
        OOD_ERR_INVALID_ARGUMENT);
  CHECK(ood_dataset_generate(R"({"generator":"gaussian","n":3,"sigm":1})", &d, nullptr) ==
        OOD_ERR_INVALID_ARGUMENT);
}

TEST_CASE("cli pipeline matches the library bit for bit") {
  const auto dir = scratch("pipeline");
  const auto p = [&](const char *f) { return (dir / f).string(); };
  REQUIRE(run("gen --generator gaussian --n 2000 --seed 1 --param dim=2 --out " + p("train.csv")) ==
          0);
  REQUIRE(run("gen --generator gaussian --n 1000 --seed 2 --param dim=2 --out " + p("in.csv")) ==
          0);
  REQUIRE(run("gen --generator gaussian --n 1000 --seed 3 --param dim=2 --param sigma=2 --out " +
              p("ood.csv")) == 0);
  REQUIRE(run("fit --data " + p("train.csv") + " --kind diag_gaussian --out " + p("m.json")) ==
          0);
  REQUIRE(run("proxy --kind background --data " + p("train.csv") + " --mu 0.5 --out " +
              p("px.json")) == 0);
  REQUIRE(run("score --model " + p("m.json") + " --proxy " + p("px.json") + " --data " +
              p("in.csv") + " --calibrate " + p("train.csv") + " --out " + p("s_in.csv")) == 0);
  REQUIRE(run("score --model " + p("m.json") + " --proxy " + p("px.json") + " --data " +
              p("ood.csv") + " --theta 0 --out " + p("s_ood.csv")) == 0);
  REQUIRE(run("eval --ood " + p("s_ood.csv") + " --in " + p("s_in.csv") + " --out " +
              p("eval.json") + " --roc " + p("roc.csv")) == 0);

  ood_model *m = nullptr;
  ood_proxy *px = nullptr;
  ood_dataset *in = nullptr, *ood = nullptr;
  REQUIRE(ood_model_load(p("m.json").c_str(), &m) == OOD_OK);
  REQUIRE(ood_proxy_load(p("px.json").c_str(), &px) == OOD_OK);
  REQUIRE(ood_dataset_load_csv(p("in.csv").c_str(), &in) == OOD_OK);
  REQUIRE(ood_dataset_load_csv(p("ood.csv").c_str(), &ood) == OOD_OK);
  std::vector<double> si(1000), so(1000);
  REQUIRE(ood_score_dataset(m, px, in, si.data(), si.size()) == OOD_OK);
  REQUIRE(ood_score_dataset(m, px, ood, so.data(), so.size()) == OOD_OK);
  double a = 0;
  REQUIRE(ood_auroc(so.data(), so.size(), si.data(), si.size(), &a) == OOD_OK);
  const auto report = Json::parse(slurp(dir / "eval.json"));
  CHECK(report.at("auroc").get<double>() == a);

  double *loaded = nullptr;
  size_t n = 0;
  REQUIRE(ood_scores_load_csv(p("s_in.csv").c_str(), &loaded, &n) == OOD_OK);
  CHECK(std::vector<double>(loaded, loaded + n) == si);
  ood_scores_free(loaded);
  ood_dataset_free(in);
  ood_dataset_free(ood);
  ood_proxy_free(px);
  ood_model_free(m);
  fs::remove_all(dir);
}

TEST_CASE("cli exit codes") {
  const auto dir = scratch("exit");
  CHECK(run("") == 1);
  CHECK(run("frobnicate") == 1);
  CHECK(run("fit --kind diag_gaussian") == 1);
  CHECK(run("score --model a --proxy b --data c --theta 1 --calibrate d --out e") == 1);
  CHECK(run("fit --data /nonexistent.csv --out " + (dir / "m.json").string()) == 2);
  REQUIRE(run("gen --generator gaussian --n 10 --seed 1 --param dim=1 --out " +
              (dir / "a.csv").string()) == 0);
  REQUIRE(run("gen --generator gaussian --n 10 --seed 1 --param dim=3 --out " +
              (dir / "b.csv").string()) == 0);
  REQUIRE(run("fit --data " + (dir / "a.csv").string() + " --out " +
              (dir / "m.json").string()) == 0);
  REQUIRE(run("proxy --kind constant --level 0 --out " + (dir / "p.json").string()) == 0);
  CHECK(run("score --model " + (dir / "m.json").string() + " --proxy " +
            (dir / "p.json").string() + " --data " + (dir / "b.csv").string() + " --out " +
            (dir / "s.csv").string()) == 2);
  CHECK(!fs::exists(dir / "s.csv"));
  fs::remove_all(dir);
}
