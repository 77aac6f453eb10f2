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

#include "clipforensics/clipforensics.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <memory>
#include <new>
#include <optional>
#include <string>
#include <vector>

#include "common/error.hpp"
#include "common/hash.hpp"
#include "common/rng.hpp"
#include "common/io.hpp"
#include "harness/config.hpp"
#include "harness/protocols.hpp"
#include "harness/toy.hpp"
#include "image/raster.hpp"
#include "manifest/manifest.hpp"
#include "metrics/metrics.hpp"
#include "spectral/spectral.hpp"

namespace fs = std::filesystem;
using namespace cfx;

struct cfx_session {
  harness::ExperimentConfig config;
  std::unique_ptr<harness::Session> session;

  // Manifests and backend are only touched by protocols that need them.
  harness::Session& get() {
    if (!session) session = std::make_unique<harness::Session>(config);
    return *session;
  }
};

struct cfx_model {
  classify::Model model;
};

struct cfx_spectrum {
  spectral::SpectrumMap map;
};

struct cfx_report {
  manifest::DatasetManifest eval;
  std::vector<metrics::EvalReport> reports;
};

namespace {

thread_local std::string last_error;

cfx_status fail(cfx_status status, std::string message) {
  last_error = std::move(message);
  return status;
}

template <typename Fn>
cfx_status guarded(Fn&& fn) {
  try {
    fn();
    last_error.clear();
    return CFX_OK;
  } catch (const Error& e) {
    return fail(static_cast<cfx_status>(e.kind()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(CFX_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(CFX_ERR_INTERNAL, e.what());
  }
}

char* dup(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

void need(const void* p, const char* what) {
  if (!p) config_error("{} must not be null", what);
}

fs::path absolute_from_cwd(const char* p) { return fs::absolute(fs::path(p)).lexically_normal(); }

std::uint64_t model_seed(const harness::ExperimentConfig& c, int run) {
  // Same derivation as the size sweep, so run r here equals run r there.
  return combine64(c.seed, combine64(static_cast<std::uint64_t>(c.sampling.n_per_class), static_cast<std::uint64_t>(run)));
}

std::map<std::string, double> eval_scores(harness::Session& s, const classify::Model& model) {
  return harness::score_vectors(model, s.eval_vectors());
}

spectral::SpectrumMap spectrum_of(const std::vector<fs::path>& paths, int side, int factor) {
  if (paths.empty()) data_error("no images for the spectrum");
  if (factor < 1) config_error("decimation factor must be at least 1, got {}", factor);
  std::vector<image::PlanarImage> residuals;
  residuals.reserve(paths.size());
  for (const auto& p : paths) {
    auto img = image::load(p);
    if (factor > 1) img = spectral::decimate(img, factor);
    residuals.push_back(spectral::noise_residual(img));
  }
  return spectral::mean_power_spectrum(residuals, side);
}

}  // namespace

extern "C" {

const char* cfx_version(void) { return "1.0.0"; }

const char* cfx_status_name(cfx_status status) {
  switch (status) {
    case CFX_OK:
      return "ok";
    case CFX_ERR_INTERNAL:
      return "internal error";
    case CFX_ERR_CONFIG:
      return "config error";
    case CFX_ERR_DATA:
      return "data error";
    case CFX_ERR_BACKEND:
      return "backend error";
  }
  return "unknown status";
}

const char* cfx_last_error(void) { return last_error.c_str(); }

void cfx_string_free(char* text) { std::free(text); }

cfx_status cfx_session_open(const char* config_path, const cfx_overrides* overrides, cfx_session** out) {
  return guarded([&] {
    need(config_path, "config path");
    need(out, "output handle");
    *out = nullptr;
    auto s = std::make_unique<cfx_session>();
    s->config = harness::ExperimentConfig::load(config_path);
    if (overrides) {
      auto& c = s->config;
      if (overrides->cache) c.cache = absolute_from_cwd(overrides->cache);
      if (overrides->backend) c.backend.export_json = absolute_from_cwd(overrides->backend);
      if (overrides->out_dir) c.out_dir = absolute_from_cwd(overrides->out_dir);
      if (overrides->has_seed) {
        c.seed = overrides->seed;
        c.sampling.seed = overrides->seed;
      }
      if (overrides->cache_only) c.cache_only = true;
      c.validate();
    }
    *out = s.release();
  });
}

void cfx_session_close(cfx_session* session) {
  if (!session) return;
  try {
    if (session->session) session->session->flush();
  } catch (...) {
    // Closing must not throw; a failed flush leaves the old cache in place.
  }
  delete session;
}

cfx_status cfx_session_config_json(cfx_session* session, char** out) {
  return guarded([&] {
    need(session, "session");
    need(out, "output string");
    *out = dup(session->config.to_json().dump(2) + "\n");
  });
}

cfx_status cfx_session_run_dir(cfx_session* session, const char* protocol, char** out) {
  return guarded([&] {
    need(session, "session");
    need(protocol, "protocol");
    need(out, "output string");
    const auto dir = session->config.run_dir(protocol);
    fs::create_directories(dir);
    *out = dup(dir.string());
  });
}

cfx_status cfx_session_embed(cfx_session* session, const char* which, size_t* embedded) {
  return guarded([&] {
    need(session, "session");
    const std::string w = which ? which : "all";
    if (w != "refset" && w != "eval" && w != "all") config_error("unknown manifest selector '{}' (refset, eval, all)", w);
    auto& s = session->get();
    std::size_t n = 0;
    if (w != "eval") {
      const auto& m = s.refset_manifest();
      n += s.embeddings().embed(m, m.records).size();
    }
    if (w != "refset") n += s.eval_vectors().size();
    s.flush();
    if (embedded) *embedded = n;
  });
}

cfx_status cfx_session_refset(cfx_session* session, int run, char** json) {
  return guarded([&] {
    need(session, "session");
    need(json, "output string");
    if (run < 0) config_error("run index must be non-negative, got {}", run);
    auto& s = session->get();
    const auto rs = refset::build(s.refset_manifest(), session->config.sampling, run, s.embeddings());
    s.flush();
    *json = dup(rs.to_json().dump(2) + "\n");
  });
}

cfx_status cfx_session_train(cfx_session* session, int run, cfx_model** out) {
  return guarded([&] {
    need(session, "session");
    need(out, "output handle");
    if (run < 0) config_error("run index must be non-negative, got {}", run);
    *out = nullptr;
    auto& s = session->get();
    const auto& c = session->config;
    const auto rs = refset::build(s.refset_manifest(), c.sampling, run, s.embeddings());
    // Hand out the artifact form (32-bit parameters) so a model scores the
    // same before and after a save/load cycle.
    const auto trained = harness::train_model(rs, c.classifier, model_seed(c, run));
    auto m = std::make_unique<cfx_model>(cfx_model{classify::model_from_json(classify::model_to_json(trained))});
    s.flush();
    *out = m.release();
  });
}

cfx_status cfx_session_score(cfx_session* session, const cfx_model* model, char** csv) {
  return guarded([&] {
    need(session, "session");
    need(model, "model");
    need(csv, "output string");
    auto& s = session->get();
    const auto scores = eval_scores(s, model->model);
    s.flush();
    // Manifest order, not id order, so the file lines up with the input.
    std::vector<std::pair<std::string, double>> rows;
    for (const auto& r : s.eval_manifest().records) rows.emplace_back(r.id, scores.at(r.id));
    *csv = dup(manifest::serialize_scores(rows));
  });
}

cfx_status cfx_session_evaluate(cfx_session* session, const cfx_model* model, char** json) {
  return guarded([&] {
    need(session, "session");
    need(model, "model");
    need(json, "output string");
    auto& s = session->get();
    const auto report = harness::evaluate_scores(session->config.method, s.eval_manifest(), eval_scores(s, model->model));
    s.flush();
    *json = dup(report.to_json().dump(2) + "\n");
  });
}

cfx_status cfx_session_sweep_size(cfx_session* session, char** json, char** csv) {
  return guarded([&] {
    need(session, "session");
    auto& s = session->get();
    const auto result = harness::run_size_sweep(s, session->config.n_values);
    s.flush();
    std::string j = result.to_json(session->config).dump(2) + "\n";
    std::string c = result.to_csv();
    if (json) *json = dup(j);
    if (csv) *csv = dup(c);
  });
}

cfx_status cfx_session_sweep_robust(cfx_session* session, char** json, char** csv) {
  return guarded([&] {
    need(session, "session");
    auto& s = session->get();
    const auto grid = session->config.robustness.value_or(launder::SweepGrid::jpeg_default());
    const auto result = harness::run_robustness_sweep(s, grid);
    s.flush();
    std::string j = result.to_json(session->config).dump(2) + "\n";
    std::string c = result.to_csv();
    if (json) *json = dup(j);
    if (csv) *csv = dup(c);
  });
}

cfx_status cfx_session_fewshot(cfx_session* session, char** json) {
  return guarded([&] {
    need(session, "session");
    need(json, "output string");
    auto& s = session->get();
    const auto result = harness::run_fewshot(s, session->config.fewshot);
    s.flush();
    *json = dup(result.to_json(session->config).dump(2) + "\n");
  });
}

cfx_status cfx_model_load(const char* path, cfx_model** out) {
  return guarded([&] {
    need(path, "model path");
    need(out, "output handle");
    *out = nullptr;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file_text(path));
    } catch (const nlohmann::json::exception& e) {
      data_error("{}: not valid JSON ({})", path, e.what());
    }
    *out = new cfx_model{classify::model_from_json(j)};
  });
}

cfx_status cfx_model_save(const cfx_model* model, const char* path) {
  return guarded([&] {
    need(model, "model");
    need(path, "model path");
    write_file_atomic(path, classify::model_to_json(model->model).dump(2) + "\n");
  });
}

cfx_status cfx_model_to_json(const cfx_model* model, char** json) {
  return guarded([&] {
    need(model, "model");
    need(json, "output string");
    *json = dup(classify::model_to_json(model->model).dump(2) + "\n");
  });
}

int cfx_model_feature_dim(const cfx_model* model) { return model ? classify::feature_dim(model->model) : 0; }

cfx_status cfx_model_score(const cfx_model* model, const float* features, size_t dim, double* score) {
  return guarded([&] {
    need(model, "model");
    need(features, "features");
    need(score, "output score");
    *score = classify::predict_score(model->model, std::span<const float>(features, dim));
  });
}

void cfx_model_free(cfx_model* model) { delete model; }

cfx_status cfx_spectrum_from_manifest(const char* manifest_path, const char* generator, int side, int decimate,
                                      cfx_spectrum** out) {
  return guarded([&] {
    need(manifest_path, "manifest path");
    need(out, "output handle");
    *out = nullptr;
    const auto m = manifest::load_manifest(manifest_path);
    std::vector<fs::path> paths;
    for (const auto& r : m.records) {
      if (!generator || r.generator == generator) paths.push_back(m.resolve(r));
    }
    if (paths.empty() && generator) data_error("{} has no records from generator '{}'", manifest_path, generator);
    *out = new cfx_spectrum{spectrum_of(paths, side, decimate)};
  });
}

cfx_status cfx_spectrum_from_files(const char* const* paths, size_t count, int side, int decimate,
                                   cfx_spectrum** out) {
  return guarded([&] {
    need(out, "output handle");
    *out = nullptr;
    if (count) need(paths, "paths");
    std::vector<fs::path> list;
    for (std::size_t i = 0; i < count; ++i) {
      need(paths[i], "path");
      list.emplace_back(paths[i]);
    }
    *out = new cfx_spectrum{spectrum_of(list, side, decimate)};
  });
}

cfx_status cfx_spectrum_peaks(const cfx_spectrum* spectrum, double k, char** json) {
  return guarded([&] {
    need(spectrum, "spectrum");
    need(json, "output string");
    *json = dup(spectral::detect_peaks(spectrum->map, k).to_json().dump(2) + "\n");
  });
}

cfx_status cfx_spectrum_export(const cfx_spectrum* spectrum, const char* stem) {
  return guarded([&] {
    need(spectrum, "spectrum");
    need(stem, "output stem");
    spectral::export_spectrum(spectrum->map, stem);
  });
}

int cfx_spectrum_side(const cfx_spectrum* spectrum) { return spectrum ? spectrum->map.side : 0; }

void cfx_spectrum_free(cfx_spectrum* spectrum) { delete spectrum; }

cfx_status cfx_report_new(const char* eval_manifest, cfx_report** out) {
  return guarded([&] {
    need(eval_manifest, "eval manifest");
    need(out, "output handle");
    *out = nullptr;
    *out = new cfx_report{manifest::load_manifest(eval_manifest), {}};
  });
}

cfx_status cfx_report_add_scores(cfx_report* report, const char* method, const char* csv_path, size_t* skipped) {
  return guarded([&] {
    need(report, "report");
    need(method, "method");
    need(csv_path, "score file");
    const auto table = manifest::parse_scores(read_file_text(csv_path), report->eval, method);
    report->reports.push_back(harness::evaluate_scores(method, report->eval, table.entries));
    if (skipped) *skipped = table.warnings.size();
  });
}

cfx_status cfx_report_render(const cfx_report* report, const char* layout, const char* metric, char** out) {
  return guarded([&] {
    need(report, "report");
    need(out, "output string");
    const auto l = harness::parse_layout(layout ? layout : "csv");
    const auto m = metrics::parse_metric(metric ? metric : "auc");
    *out = dup(harness::emit_report(report->reports, l, m));
  });
}

void cfx_report_free(cfx_report* report) { delete report; }

cfx_status cfx_make_toy(const char* dir, const char* kind, uint64_t seed, const char* backend, char** config_path) {
  return guarded([&] {
    need(dir, "directory");
    need(config_path, "output string");
    const std::string k = kind ? kind : "embeddings";
    fs::path path;
    if (k == "embeddings") {
      harness::ToyEmbeddingOptions o;
      o.seed = seed;
      path = harness::make_toy_embeddings(dir, o);
    } else if (k == "rasters") {
      if (!backend) config_error("raster toy needs a model export JSON");
      harness::ToyRasterOptions o;
      o.seed = seed;
      o.export_json = absolute_from_cwd(backend);
      path = harness::make_toy_rasters(dir, o);
    } else {
      config_error("unknown toy kind '{}' (embeddings, rasters)", k);
    }
    *config_path = dup(path.string());
  });
}

}  // extern "C"
