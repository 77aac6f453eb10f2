// Copyright 2026 The clipforensics Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "harness/config.hpp"

#include <fmt/format.h>

#include "common/error.hpp"
#include "common/hash.hpp"
#include "common/io.hpp"

namespace cfx::harness {

namespace {

std::filesystem::path resolve_path(const nlohmann::json& j, const char* key, const std::filesystem::path& base) {
  if (!j.contains(key) || j.at(key).is_null()) return {};
  std::filesystem::path p(j.at(key).get<std::string>());
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

bool is_svm(const std::string& kind) { return kind == "svm"; }

}  // namespace

void ClassifierSpec::validate() const {
  if (!is_svm(kind)) classify::parse_ablation_kind(kind);
  if (!(c > 0.0)) config_error("classifier c must be positive, got {}", c);
  if (!(tol > 0.0)) config_error("classifier tol must be positive, got {}", tol);
  if (ablation.shrinkage && !(*ablation.shrinkage >= 0.0 && *ablation.shrinkage <= 1.0)) {
    config_error("shrinkage must lie in [0,1]");
  }
  if (ablation.k && *ablation.k < 1) config_error("k must be positive");
}

nlohmann::ordered_json ClassifierSpec::to_json() const {
  nlohmann::ordered_json j = {{"kind", kind}, {"c", c}, {"tol", tol}, {"normalization", classify::to_string(norm.mode)}};
  if (kind == "logistic_regression") j["max_iter"] = ablation.logistic.max_iter;
  if (kind == "mahalanobis") j["shrinkage"] = ablation.shrinkage ? nlohmann::ordered_json(*ablation.shrinkage) : nullptr;
  if (kind == "gaussian_naive_bayes") j["var_floor"] = ablation.var_floor;
  if (kind == "soft_knn") {
    j["k"] = ablation.k ? nlohmann::ordered_json(*ablation.k) : nullptr;
    j["eps"] = ablation.eps;
  }
  return j;
}

ClassifierSpec ClassifierSpec::from_json(const nlohmann::json& j) {
  ClassifierSpec s;
  s.kind = j.value("kind", s.kind);
  if (!is_svm(s.kind)) s.kind = classify::to_string(classify::parse_ablation_kind(s.kind));
  s.c = j.value("c", s.c);
  s.tol = j.value("tol", s.tol);
  s.norm.mode = classify::parse_normalization(j.value("normalization", std::string("l2_unit")));
  s.ablation.logistic.c = s.c;
  s.ablation.logistic.max_iter = j.value("max_iter", s.ablation.logistic.max_iter);
  if (j.contains("shrinkage") && !j.at("shrinkage").is_null()) s.ablation.shrinkage = j.at("shrinkage").get<double>();
  s.ablation.var_floor = j.value("var_floor", s.ablation.var_floor);
  if (j.contains("k") && !j.at("k").is_null()) s.ablation.k = j.at("k").get<int>();
  s.ablation.eps = j.value("eps", s.ablation.eps);
  s.validate();
  return s;
}

void FewShotProtocol::validate() const {
  if (n_examples < 1) config_error("few-shot n_examples must be positive, got {}", n_examples);
  if (runs < 1) config_error("few-shot runs must be positive, got {}", runs);
}

nlohmann::ordered_json FewShotProtocol::to_json() const {
  nlohmann::ordered_json j = {{"n_examples", n_examples}, {"runs", runs}, {"require_pairing", require_pairing}};
  j["pool_manifest"] = pool_manifest.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(pool_manifest.string());
  return j;
}

FewShotProtocol FewShotProtocol::from_json(const nlohmann::json& j) {
  FewShotProtocol p;
  p.n_examples = j.value("n_examples", p.n_examples);
  p.runs = j.value("runs", p.runs);
  p.require_pairing = j.value("require_pairing", p.require_pairing);
  p.validate();
  return p;
}

embed::BackendConfig BackendSpec::resolve() const {
  if (!export_json.empty()) {
    auto c = embed::load_backend_config(export_json, tap);
    if (feature_dim != 0 && feature_dim != c.feature_dim) {
      config_error("backend feature_dim {} disagrees with the export manifest ({})", feature_dim, c.feature_dim);
    }
    return c;
  }
  if (checkpoint.empty() || feature_dim <= 0) {
    config_error("backend needs either an export manifest or checkpoint and feature_dim");
  }
  embed::BackendConfig c;
  c.tap = tap;
  c.checkpoint = checkpoint;
  c.pretrain_tag = pretrain_tag;
  c.feature_dim = feature_dim;
  (tap == embed::Tap::penultimate ? c.penultimate_dim : c.final_dim) = feature_dim;
  return c;
}

nlohmann::ordered_json BackendSpec::to_json() const {
  nlohmann::ordered_json j;
  if (!export_json.empty()) j["export"] = export_json.string();
  j["tap"] = embed::to_string(tap);
  if (!checkpoint.empty()) j["checkpoint"] = checkpoint;
  if (!pretrain_tag.empty()) j["pretrain_tag"] = pretrain_tag;
  if (feature_dim) j["feature_dim"] = feature_dim;
  return j;
}

BackendSpec BackendSpec::from_json(const nlohmann::json& j, const std::filesystem::path& base) {
  BackendSpec b;
  b.export_json = resolve_path(j, "export", base);
  b.tap = embed::parse_tap(j.value("tap", std::string("penultimate")));
  b.checkpoint = j.value("checkpoint", std::string());
  b.pretrain_tag = j.value("pretrain_tag", std::string());
  b.feature_dim = j.value("feature_dim", 0);
  return b;
}

void ExperimentConfig::validate() const {
  classifier.validate();
  sampling.validate();
  fewshot.validate();
  for (int n : n_values) {
    if (n < 1) config_error("n_values must be positive, got {}", n);
  }
  if (sweep_runs && *sweep_runs < 1) config_error("sweep_runs must be positive");
  if (robustness) robustness->validate();
}

nlohmann::ordered_json ExperimentConfig::to_json() const {
  auto path_or_null = [](const std::filesystem::path& p) {
    return p.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(p.string());
  };
  nlohmann::ordered_json j;
  j["refset_manifest"] = path_or_null(refset_manifest);
  j["eval_manifest"] = path_or_null(eval_manifest);
  j["backend"] = backend.to_json();
  j["cache"] = path_or_null(cache);
  j["cache_only"] = cache_only;
  j["classifier"] = classifier.to_json();
  j["sampling"] = sampling.to_json();
  j["n_values"] = n_values;
  j["sweep_runs"] = sweep_runs ? nlohmann::ordered_json(*sweep_runs) : nullptr;
  if (robustness) {
    j["robustness"] = {{"axis", launder::to_string(robustness->axis)}, {"values", robustness->values}};
  } else {
    j["robustness"] = nullptr;
  }
  auto fs = fewshot.to_json();
  fs["pool_manifest"] = path_or_null(fewshot.pool_manifest);
  j["fewshot"] = fs;
  j["out_dir"] = out_dir.string();
  j["seed"] = seed;
  j["method"] = method;
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j, const std::filesystem::path& base) {
  ExperimentConfig c;
  try {
    if (!j.is_object()) config_error("config must be a JSON object");
    c.refset_manifest = resolve_path(j, "refset_manifest", base);
    c.eval_manifest = resolve_path(j, "eval_manifest", base);
    if (j.contains("backend")) c.backend = BackendSpec::from_json(j.at("backend"), base);
    c.cache = resolve_path(j, "cache", base);
    c.cache_only = j.value("cache_only", false);
    if (j.contains("classifier")) c.classifier = ClassifierSpec::from_json(j.at("classifier"));
    c.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("sampling")) c.sampling = refset::SamplingPlan::from_json(j.at("sampling"));
    if (j.contains("n_values")) c.n_values = j.at("n_values").get<std::vector<int>>();
    if (j.contains("sweep_runs") && !j.at("sweep_runs").is_null()) c.sweep_runs = j.at("sweep_runs").get<int>();
    if (j.contains("robustness") && !j.at("robustness").is_null()) {
      launder::SweepGrid g;
      g.axis = launder::parse_axis(j.at("robustness").at("axis").get<std::string>());
      g.values = j.at("robustness").at("values").get<std::vector<double>>();
      c.robustness = g;
    }
    if (j.contains("fewshot")) {
      c.fewshot = FewShotProtocol::from_json(j.at("fewshot"));
      c.fewshot.pool_manifest = resolve_path(j.at("fewshot"), "pool_manifest", base);
    }
    if (j.contains("out_dir")) c.out_dir = resolve_path(j, "out_dir", base);
    c.method = j.value("method", c.method);
  } catch (const nlohmann::json::exception& e) {
    config_error("bad config: {}", e.what());
  }
  c.sampling.seed = c.seed;
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file_text(path));
  } catch (const nlohmann::json::exception& e) {
    config_error("{}: {}", path.string(), e.what());
  } catch (const Error& e) {
    config_error("{}", e.what());
  }
  return from_json(j, path.parent_path());
}

std::string ExperimentConfig::hash() const {
  auto j = to_json();
  j.erase("out_dir");
  return to_hex(sha256(j.dump()));
}

std::filesystem::path ExperimentConfig::run_dir(const std::string& protocol) const {
  return out_dir / fmt::format("{}-{}", protocol, hash().substr(0, 16));
}

}  // namespace cfx::harness
