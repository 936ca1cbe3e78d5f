#pragma once

#include "oodlr/density.hpp"
#include "oodlr/metrics.hpp"
#include "oodlr/proxy.hpp"

#include <json.hpp>

#include <filesystem>

namespace oodlr {

using Json = nlohmann::ordered_json;

// Model documents: {"kind", "params", "fit_meta": {"seed", "iters", "tol"}}.
Json to_json(const DensityModel &model);
DensityModel density_model_from_json(const Json &doc);

Json to_json(const ModelSpec &spec);
ModelSpec model_spec_from_json(const Json &j);

Json to_json(const SoftmaxClassifier &c);
SoftmaxClassifier softmax_from_json(const Json &j);

Json to_json(const DomainClassifier &c);
DomainClassifier domain_classifier_from_json(const Json &j);

/// Proxy documents share the model envelope with kind "proxy".
Json to_json(const ProxyModel &proxy);
ProxyModel proxy_from_json(const Json &doc);

Json to_json(const EvalReport &report);

/// Pretty-printed with a trailing newline.
std::string dump(const Json &j);
Json parse_json(const std::string &text);
Json load_json(const std::filesystem::path &path);
void save_json(const Json &j, const std::filesystem::path &path);

} // namespace oodlr
