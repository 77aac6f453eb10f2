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

#include "harness/protocols.hpp"

#include <set>

#include <fmt/format.h>

#include "common/error.hpp"
#include "common/rng.hpp"
#include "image/raster.hpp"
#include "launder/launder.hpp"

namespace cfx::harness {

using manifest::DatasetManifest;
using manifest::ImageRecord;

CachedEmbeddings::CachedEmbeddings(embed::EmbeddingCache& cache, embed::BackendConfig backend, embed::Encoder* encoder)
    : cache_(cache), backend_(std::move(backend)), encoder_(encoder) {}

std::vector<std::vector<float>> CachedEmbeddings::embed(const DatasetManifest& manifest,
                                                        const std::vector<ImageRecord>& records) {
  std::vector<std::vector<float>> out;
  for (auto& v : embed::cache_get_or_extract(manifest, records, cache_, backend_, encoder_)) {
    out.push_back(std::move(v.values));
  }
  return out;
}

std::vector<float> CachedEmbeddings::embed_laundered(const DatasetManifest& manifest, const ImageRecord& record,
                                                     const launder::LaunderRecipe& recipe) {
  const auto raster = launder::apply(image::load(manifest.resolve(record)), recipe);
  return embed_rasters({raster}).front();
}

std::vector<std::vector<float>> CachedEmbeddings::embed_rasters(const std::vector<image::Raster>& images) {
  std::vector<std::vector<float>> out;
  for (auto& v : embed::cache_get_or_extract(images, cache_, backend_, encoder_)) out.push_back(std::move(v.values));
  return out;
}

void check_disjoint(const DatasetManifest& train, const DatasetManifest& test) {
  std::set<std::string> ids;
  std::set<std::filesystem::path> paths;
  for (const auto& r : train.records) {
    ids.insert(r.id);
    paths.insert(train.resolve(r).lexically_normal());
  }
  for (const auto& r : test.records) {
    if (ids.contains(r.id)) {
      config_error("id '{}' appears in both '{}' and '{}' (reference and evaluation data must be disjoint)", r.id,
                   train.name, test.name);
    }
    if (paths.contains(test.resolve(r).lexically_normal())) {
      config_error("file '{}' (id '{}') is used by both '{}' and '{}'", test.resolve(r).string(), r.id, train.name,
                   test.name);
    }
  }
}

Session::Session(ExperimentConfig config) : config_(std::move(config)) {
  config_.validate();
  if (!config_.refset_manifest.empty()) {
    refset_ = std::make_unique<DatasetManifest>(manifest::load_manifest(config_.refset_manifest));
  }
  if (!config_.eval_manifest.empty()) {
    eval_ = std::make_unique<DatasetManifest>(manifest::load_manifest(config_.eval_manifest));
  }
  if (refset_ && eval_) check_disjoint(*refset_, *eval_);
  backend_ = config_.backend.resolve();
  cache_ = std::make_unique<embed::EmbeddingCache>(config_.cache.empty() ? embed::EmbeddingCache(backend_.feature_dim)
                                                                         : embed::EmbeddingCache::open(config_.cache));
  if (!config_.cache_only && !backend_.graph_path.empty()) encoder_ = std::make_unique<embed::Encoder>(backend_);
  source_ = std::make_unique<CachedEmbeddings>(*cache_, backend_, encoder_.get());
}

Session::~Session() = default;

const DatasetManifest& Session::refset_manifest() const {
  if (!refset_) config_error("config names no refset_manifest");
  return *refset_;
}

const DatasetManifest& Session::eval_manifest() const {
  if (!eval_) config_error("config names no eval_manifest");
  return *eval_;
}

const std::map<std::string, std::vector<float>>& Session::eval_vectors() {
  if (!eval_ready_) {
    const auto& m = eval_manifest();
    auto vecs = source_->embed(m, m.records);
    for (std::size_t i = 0; i < m.records.size(); ++i) eval_vectors_.emplace(m.records[i].id, std::move(vecs[i]));
    eval_ready_ = true;
  }
  return eval_vectors_;
}

void Session::flush() { cache_->flush(); }

classify::Model train_model(const refset::ReferenceSet& rs, const ClassifierSpec& spec, std::uint64_t seed) {
  const auto data = classify::training_data(rs, spec.norm);
  if (spec.kind == "svm") {
    classify::SvmOptions opt;
    opt.c = spec.c;
    opt.tol = spec.tol;
    opt.seed = seed;
    return classify::train_svm(data, opt);
  }
  auto params = spec.ablation;
  params.logistic.c = spec.c;
  return classify::fit_ablation(data, classify::parse_ablation_kind(spec.kind), params);
}

std::map<std::string, double> score_vectors(const classify::Model& model,
                                            const std::map<std::string, std::vector<float>>& vectors) {
  std::map<std::string, double> scores;
  for (const auto& [id, v] : vectors) scores.emplace(id, classify::predict_score(model, std::span<const float>(v)));
  return scores;
}

double generator_mean(const metrics::RunReport& run, metrics::Metric metric) {
  if (run.generators.empty()) data_error("{}: no generator could be evaluated", run.method);
  double sum = 0.0;
  for (const auto& [_, g] : run.generators) {
    sum += metric == metrics::Metric::auc ? g.auc : metric == metrics::Metric::ap ? g.ap : g.accuracy;
  }
  return sum / static_cast<double>(run.generators.size());
}

namespace {

constexpr metrics::Metric kMetrics[] = {metrics::Metric::auc, metrics::Metric::ap, metrics::Metric::accuracy};

std::optional<std::string> solver_warning(const classify::Model& model) {
  if (const auto* m = std::get_if<classify::LinearModel>(&model); m && !m->report.warning.empty()) {
    return m->report.warning;
  }
  return std::nullopt;
}

nlohmann::ordered_json header(const char* protocol, const ExperimentConfig& config) {
  return {{"protocol", protocol}, {"config_hash", config.hash()}, {"config", config.to_json()}};
}

}  // namespace

SizeSweepResult run_size_sweep(Session& session, const std::vector<int>& n_values) {
  const auto& config = session.config();
  const auto& ref = session.refset_manifest();
  const auto& eval = session.eval_manifest();
  if (n_values.empty()) config_error("size sweep needs at least one N");
  const refset::RunsRule rule = config.sweep_runs ? refset::RunsRule([r = *config.sweep_runs](int) { return r; })
                                                  : refset::RunsRule(refset::default_runs);
  const auto plans = refset::size_sweep_plan(n_values, config.sampling, rule);
  // Every N must be drawable before any training starts.
  for (const auto& plan : plans) refset::select(ref, plan, 0);

  const auto& vectors = session.eval_vectors();
  SizeSweepResult result;
  for (const auto& plan : plans) {
    SizePoint point;
    point.n = plan.n_per_class;
    point.runs = plan.runs;
    std::vector<metrics::RunReport> runs;
    std::map<metrics::Metric, std::vector<double>> per_run;
    const std::string method = fmt::format("{} N={}", config.method, plan.n_per_class);
    for (int r = 0; r < plan.runs; ++r) {
      const auto rs = refset::build(ref, plan, r, session.embeddings());
      const auto model = train_model(rs, config.classifier,
                                     combine64(config.seed, combine64(static_cast<std::uint64_t>(plan.n_per_class),
                                                                      static_cast<std::uint64_t>(r))));
      if (auto w = solver_warning(model)) point.warnings.push_back(fmt::format("run {}: {}", r, *w));
      runs.push_back(metrics::evaluate_manifest(method, eval, score_vectors(model, vectors)));
      for (auto m : kMetrics) per_run[m].push_back(generator_mean(runs.back(), m));
      point.refsets.push_back(rs.to_json());
    }
    point.report = metrics::aggregate(runs);
    for (auto m : kMetrics) point.summary[metrics::to_string(m)] = metrics::mean_std(per_run[m]);
    result.points.push_back(std::move(point));
  }
  session.flush();
  return result;
}

nlohmann::ordered_json SizeSweepResult::to_json(const ExperimentConfig& config) const {
  auto j = header("sweep-size", config);
  auto& pts = j["points"] = nlohmann::ordered_json::array();
  for (const auto& p : points) {
    nlohmann::ordered_json s;
    for (auto m : kMetrics) {
      const auto& st = p.summary.at(metrics::to_string(m));
      s[metrics::to_string(m)] = {{"mean", st.mean}, {"std", st.std}};
    }
    pts.push_back({{"n", p.n},
                   {"runs", p.runs},
                   {"summary", s},
                   {"report", p.report.to_json()},
                   {"refsets", p.refsets},
                   {"warnings", p.warnings}});
  }
  return j;
}

std::string SizeSweepResult::to_csv() const {
  std::string out = "N,metric,mean,std\n";
  for (const auto& p : points) {
    for (auto m : kMetrics) {
      const auto& st = p.summary.at(metrics::to_string(m));
      out += fmt::format("{},{},{},{}\n", p.n, metrics::to_string(m), st.mean, st.std);
    }
  }
  return out;
}

RobustnessResult run_robustness_sweep(Session& session, const launder::SweepGrid& grid) {
  const auto& config = session.config();
  if (config.cache_only) config_error("robustness sweeps launder pixels and cannot run in cache-only mode");
  grid.validate();
  const auto& ref = session.refset_manifest();
  const auto& eval = session.eval_manifest();

  RobustnessResult result;
  const auto rs = refset::build(ref, config.sampling, 0, session.embeddings());
  const auto model = train_model(rs, config.classifier, combine64(config.seed, fnv1a64("robustness")));
  result.trainings = 1;
  result.refset = rs.to_json();
  result.model = classify::model_to_json(model);

  const auto base = metrics::aggregate({metrics::evaluate_manifest(config.method, eval,
                                                                   score_vectors(model, session.eval_vectors()))});
  result.baseline_auc = base.grand.auc;
  result.baseline_acc = base.grand.accuracy;

  std::vector<image::Raster> images;
  images.reserve(eval.records.size());
  for (const auto& r : eval.records) {
    try {
      images.push_back(image::load(eval.resolve(r)));
    } catch (const Error& e) {
      data_error("record '{}': {}", r.id, e.what());
    }
  }
  for (const auto& [value, laundered] : launder::sweep(images, grid)) {
    const auto vecs = session.embeddings().embed_rasters(laundered);
    std::map<std::string, double> scores;
    for (std::size_t i = 0; i < vecs.size(); ++i) {
      scores.emplace(eval.records[i].id, classify::predict_score(model, std::span<const float>(vecs[i])));
    }
    RobustnessRow row;
    row.axis = grid.axis;
    row.value = value;
    row.report = metrics::aggregate({metrics::evaluate_manifest(
        fmt::format("{} {}={}", config.method, launder::to_string(grid.axis), value), eval, scores)});
    row.auc = row.report.grand.auc;
    row.acc = row.report.grand.accuracy;
    result.rows.push_back(std::move(row));
  }
  session.flush();
  return result;
}

nlohmann::ordered_json RobustnessResult::to_json(const ExperimentConfig& config) const {
  auto j = header("sweep-robust", config);
  j["trainings"] = trainings;
  j["refset"] = refset;
  j["model"] = model;
  j["baseline"] = {{"auc", baseline_auc}, {"acc", baseline_acc}};
  auto& rs = j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    rs.push_back({{"axis", launder::to_string(r.axis)},
                  {"value", r.value},
                  {"auc", r.auc},
                  {"acc", r.acc},
                  {"report", r.report.to_json()}});
  }
  return j;
}

std::string RobustnessResult::to_csv() const {
  std::string out = "axis,value,auc,acc\n";
  for (const auto& r : rows) out += fmt::format("{},{},{},{}\n", launder::to_string(r.axis), r.value, r.auc, r.acc);
  return out;
}

FewShotResult run_fewshot(Session& session, const FewShotProtocol& protocol) {
  protocol.validate();
  const auto& config = session.config();
  DatasetManifest loaded;
  const DatasetManifest* pool = nullptr;
  if (!protocol.pool_manifest.empty()) {
    loaded = manifest::load_manifest(protocol.pool_manifest);
    pool = &loaded;
  } else {
    pool = &session.eval_manifest();
  }
  const auto n = static_cast<std::size_t>(protocol.n_examples);
  std::size_t reals = 0, fakes = 0;
  for (const auto& r : pool->records) (r.is_fake() ? fakes : reals)++;
  if (reals < n + 1 || fakes < n + 1) {
    data_error("few-shot pool '{}' has {} real and {} fake records; {} per class plus a held-out remainder are needed",
               pool->name, reals, fakes, n);
  }

  std::map<std::string, std::vector<float>> vectors;
  {
    auto v = session.embeddings().embed(*pool, pool->records);
    for (std::size_t i = 0; i < v.size(); ++i) vectors.emplace(pool->records[i].id, std::move(v[i]));
  }

  refset::SamplingPlan plan;
  plan.n_per_class = protocol.n_examples;
  plan.seed = combine64(config.seed, fnv1a64("fewshot"));
  plan.runs = protocol.runs;
  plan.require_pairing = protocol.require_pairing;

  FewShotResult result;
  std::vector<metrics::RunReport> reports;
  for (int r = 0; r < protocol.runs; ++r) {
    const auto sel = refset::select(*pool, plan, r);
    refset::ReferenceSet rs;
    rs.manifest_name = pool->name;
    rs.plan = plan;
    rs.run = r;
    std::set<std::string> train_ids;
    for (const auto& rec : sel.real) {
      rs.real_vectors.push_back(vectors.at(rec.id));
      rs.real_ids.push_back(rec.id);
      train_ids.insert(rec.id);
    }
    for (const auto& rec : sel.fake) {
      rs.fake_vectors.push_back(vectors.at(rec.id));
      rs.fake_ids.push_back(rec.id);
      train_ids.insert(rec.id);
    }
    DatasetManifest test;
    test.name = pool->name + "/held-out";
    test.base_dir = pool->base_dir;
    std::map<std::string, std::vector<float>> test_vectors;
    for (const auto& rec : pool->records) {
      if (train_ids.contains(rec.id)) continue;
      test.records.push_back(rec);
      test_vectors.emplace(rec.id, vectors.at(rec.id));
    }
    for (const auto& rec : test.records) {
      if (train_ids.contains(rec.id)) internal_error("few-shot run {} leaks '{}' into its test set", r, rec.id);
    }
    const auto model = train_model(rs, config.classifier, combine64(plan.seed, static_cast<std::uint64_t>(r)));
    FewShotRun run;
    run.train_ids.assign(rs.real_ids.begin(), rs.real_ids.end());
    run.train_ids.insert(run.train_ids.end(), rs.fake_ids.begin(), rs.fake_ids.end());
    run.n_test = test.records.size();
    run.report = metrics::evaluate_manifest(config.method + " few-shot", test, score_vectors(model, test_vectors));
    reports.push_back(run.report);
    result.runs.push_back(std::move(run));
  }
  result.report = metrics::aggregate(reports);
  session.flush();
  return result;
}

nlohmann::ordered_json FewShotResult::to_json(const ExperimentConfig& config) const {
  auto j = header("fewshot", config);
  j["report"] = report.to_json();
  auto& rs = j["runs"] = nlohmann::ordered_json::array();
  for (std::size_t r = 0; r < runs.size(); ++r) {
    rs.push_back({{"run", r},
                  {"train_ids", runs[r].train_ids},
                  {"n_test", runs[r].n_test},
                  {"auc", generator_mean(runs[r].report, metrics::Metric::auc)}});
  }
  return j;
}

Layout parse_layout(const std::string& text) {
  if (text == "table_csv" || text == "csv") return Layout::table_csv;
  if (text == "json") return Layout::json;
  if (text == "markdown" || text == "md") return Layout::markdown;
  config_error("unknown report layout '{}' (table_csv, json, markdown)", text);
}

std::string emit_report(const std::vector<metrics::EvalReport>& reports, Layout layout, metrics::Metric metric) {
  if (reports.empty()) data_error("nothing to report");
  switch (layout) {
    case Layout::table_csv:
      return metrics::table_csv(reports, metric);
    case Layout::markdown:
      return metrics::table_markdown(reports, metric);
    case Layout::json: {
      auto arr = nlohmann::ordered_json::array();
      for (const auto& r : reports) arr.push_back(r.to_json());
      return arr.dump(2) + "\n";
    }
  }
  internal_error("unhandled layout");
}

metrics::EvalReport evaluate_scores(const std::string& method, const DatasetManifest& eval,
                                    const std::map<std::string, double>& scores) {
  return metrics::aggregate({metrics::evaluate_manifest(method, eval, scores)});
}

}  // namespace cfx::harness
