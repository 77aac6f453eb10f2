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

// cfx: command-line front end. Everything goes through the C interface.

#include <clipforensics/clipforensics.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

namespace fs = std::filesystem;

namespace {

struct Failure {
  cfx_status status;
};

void check(cfx_status s) {
  if (s != CFX_OK) throw Failure{s};
}

// Owns a library string.
struct Text {
  char* p = nullptr;
  ~Text() { cfx_string_free(p); }
  char** out() { return &p; }
  std::string str() const { return p ? p : ""; }
};

struct SessionCloser {
  void operator()(cfx_session* s) const { cfx_session_close(s); }
};
struct ModelFree {
  void operator()(cfx_model* m) const { cfx_model_free(m); }
};
struct SpectrumFree {
  void operator()(cfx_spectrum* s) const { cfx_spectrum_free(s); }
};
struct ReportFree {
  void operator()(cfx_report* r) const { cfx_report_free(r); }
};
using SessionPtr = std::unique_ptr<cfx_session, SessionCloser>;
using ModelPtr = std::unique_ptr<cfx_model, ModelFree>;

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) {
    std::cerr << "cfx: cannot write " << path.string() << "\n";
    throw Failure{CFX_ERR_BACKEND};
  }
  std::cout << path.string() << "\n";
}

// Flags shared by every subcommand that works on an experiment config.
struct SessionFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string cache;
  std::string backend;
  std::string out;
  bool cache_only = false;

  void attach(CLI::App* app) {
    app->add_option("--config", config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    app->add_option("--seed", seed, "global seed");
    app->add_option("--cache", cache, "embedding cache file");
    app->add_option("--backend", backend, "model export JSON");
    app->add_option("--out", out, "output root directory");
    app->add_flag("--cache-only", cache_only, "never run the encoder");
  }

  SessionPtr open() const {
    cfx_overrides o{};
    o.cache = cache.empty() ? nullptr : cache.c_str();
    o.backend = backend.empty() ? nullptr : backend.c_str();
    o.out_dir = out.empty() ? nullptr : out.c_str();
    o.has_seed = seed.has_value();
    o.seed = seed.value_or(0);
    o.cache_only = cache_only;
    cfx_session* s = nullptr;
    check(cfx_session_open(config.c_str(), &o, &s));
    return SessionPtr(s);
  }
};

fs::path run_dir(cfx_session* s, const char* protocol) {
  Text dir;
  check(cfx_session_run_dir(s, protocol, dir.out()));
  return dir.str();
}

// Keeps the effective config next to the outputs it produced.
fs::path prepare_run(cfx_session* s, const char* protocol) {
  const auto dir = run_dir(s, protocol);
  Text cfg;
  check(cfx_session_config_json(s, cfg.out()));
  std::ofstream(dir / "config.json", std::ios::binary) << cfg.str();
  return dir;
}

ModelPtr load_model(const std::string& path) {
  cfx_model* m = nullptr;
  check(cfx_model_load(path.c_str(), &m));
  return ModelPtr(m);
}

ModelPtr train(cfx_session* s, int run) {
  cfx_model* m = nullptr;
  check(cfx_session_train(s, run, &m));
  return ModelPtr(m);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic image detection from foundation-model features"};
  app.require_subcommand(1);
  app.set_version_flag("--version", cfx_version());

  SessionFlags flags;
  int run = 0;
  std::string which = "all";
  std::string model_path;

  auto* embed = app.add_subcommand("embed", "fill the embedding cache for the configured manifests");
  flags.attach(embed);
  embed->add_option("--which", which, "refset, eval or all")->check(CLI::IsMember({"refset", "eval", "all"}));

  auto* refset = app.add_subcommand("refset", "sample a reference set and write its provenance");
  flags.attach(refset);
  refset->add_option("--run", run, "run index")->check(CLI::NonNegativeNumber);

  auto* trainc = app.add_subcommand("train", "train a detector on one reference set");
  flags.attach(trainc);
  trainc->add_option("--run", run, "run index")->check(CLI::NonNegativeNumber);

  auto* score = app.add_subcommand("score", "score the evaluation manifest with a saved model");
  flags.attach(score);
  score->add_option("--model", model_path, "model JSON")->required()->check(CLI::ExistingFile);

  auto* eval = app.add_subcommand("eval", "train (or load) a model and evaluate it");
  flags.attach(eval);
  eval->add_option("--run", run, "run index")->check(CLI::NonNegativeNumber);
  eval->add_option("--model", model_path, "evaluate this model instead of training")->check(CLI::ExistingFile);

  auto* sweep_size = app.add_subcommand("sweep-size", "metrics as a function of reference set size");
  flags.attach(sweep_size);

  auto* sweep_robust = app.add_subcommand("sweep-robust", "metrics under laundering of the evaluation images");
  flags.attach(sweep_robust);

  auto* fewshot = app.add_subcommand("fewshot", "few-shot adaptation on a target pool");
  flags.attach(fewshot);

  std::string manifest;
  std::string generator;
  std::vector<std::string> images;
  int side = 256;
  int decimate = 1;
  double k = 6.0;
  std::string out_dir = ".";
  auto* spectrum = app.add_subcommand("spectrum", "mean residual power spectrum and its peaks");
  auto* src = spectrum->add_option("--manifest", manifest, "images of a manifest")->check(CLI::ExistingFile);
  spectrum->add_option("--generator", generator, "only records of this generator")->needs(src);
  spectrum->add_option("images", images, "image files")->excludes(src)->check(CLI::ExistingFile);
  spectrum->add_option("--side", side, "spectrum side in pixels")->check(CLI::PositiveNumber);
  spectrum->add_option("--decimate", decimate, "subsample by this factor first")->check(CLI::PositiveNumber);
  spectrum->add_option("--k", k, "peak threshold in robust spreads")->check(CLI::PositiveNumber);
  spectrum->add_option("--out", out_dir, "output directory");

  std::vector<std::string> score_files;
  std::string layout = "csv";
  std::string metric = "auc";
  std::string report_out;
  auto* report = app.add_subcommand("report", "tabulate score files against an evaluation manifest");
  report->add_option("--manifest", manifest, "evaluation manifest")->required()->check(CLI::ExistingFile);
  report->add_option("--scores", score_files, "method=path to an id,score CSV (repeatable)")->required();
  report->add_option("--layout", layout, "csv, json or markdown")->check(CLI::IsMember({"csv", "json", "markdown"}));
  report->add_option("--metric", metric, "auc, ap or acc")->check(CLI::IsMember({"auc", "ap", "acc"}));
  report->add_option("--out", report_out, "write here instead of stdout");

  std::string toy_kind = "embeddings";
  std::string toy_dir;
  std::uint64_t toy_seed = 0;
  std::string toy_backend;
  auto* toy = app.add_subcommand("toy", "write a small synthetic experiment");
  toy->add_option("--kind", toy_kind, "embeddings or rasters")->check(CLI::IsMember({"embeddings", "rasters"}));
  toy->add_option("--dir", toy_dir, "target directory")->required();
  toy->add_option("--seed", toy_seed, "seed");
  toy->add_option("--backend", toy_backend, "model export JSON (rasters)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return CFX_ERR_CONFIG;
  }

  try {
    if (embed->parsed()) {
      auto s = flags.open();
      std::size_t n = 0;
      check(cfx_session_embed(s.get(), which.c_str(), &n));
      std::cout << n << " embeddings ready\n";
    } else if (refset->parsed()) {
      auto s = flags.open();
      Text json;
      check(cfx_session_refset(s.get(), run, json.out()));
      const auto dir = prepare_run(s.get(), "refset");
      write_text(dir / ("refset-" + std::to_string(run) + ".json"), json.str());
    } else if (trainc->parsed()) {
      auto s = flags.open();
      auto m = train(s.get(), run);
      const auto dir = prepare_run(s.get(), "train");
      const auto path = dir / ("model-" + std::to_string(run) + ".json");
      check(cfx_model_save(m.get(), path.c_str()));
      std::cout << path.string() << "\n";
    } else if (score->parsed()) {
      auto s = flags.open();
      auto m = load_model(model_path);
      Text csv;
      check(cfx_session_score(s.get(), m.get(), csv.out()));
      const auto dir = prepare_run(s.get(), "score");
      write_text(dir / "scores.csv", csv.str());
    } else if (eval->parsed()) {
      auto s = flags.open();
      ModelPtr m = model_path.empty() ? train(s.get(), run) : load_model(model_path);
      Text csv, json;
      check(cfx_session_score(s.get(), m.get(), csv.out()));
      check(cfx_session_evaluate(s.get(), m.get(), json.out()));
      const auto dir = prepare_run(s.get(), "eval");
      if (model_path.empty()) {
        const auto path = dir / "model.json";
        check(cfx_model_save(m.get(), path.c_str()));
        std::cout << path.string() << "\n";
      }
      write_text(dir / "scores.csv", csv.str());
      write_text(dir / "report.json", json.str());
    } else if (sweep_size->parsed()) {
      auto s = flags.open();
      Text json, csv;
      check(cfx_session_sweep_size(s.get(), json.out(), csv.out()));
      const auto dir = prepare_run(s.get(), "sweep-size");
      write_text(dir / "sweep_size.json", json.str());
      write_text(dir / "sweep_size.csv", csv.str());
    } else if (sweep_robust->parsed()) {
      auto s = flags.open();
      Text json, csv;
      check(cfx_session_sweep_robust(s.get(), json.out(), csv.out()));
      const auto dir = prepare_run(s.get(), "sweep-robust");
      write_text(dir / "robustness.json", json.str());
      write_text(dir / "robustness.csv", csv.str());
    } else if (fewshot->parsed()) {
      auto s = flags.open();
      Text json;
      check(cfx_session_fewshot(s.get(), json.out()));
      const auto dir = prepare_run(s.get(), "fewshot");
      write_text(dir / "fewshot.json", json.str());
    } else if (spectrum->parsed()) {
      if (manifest.empty() && images.empty()) {
        std::cerr << "cfx: spectrum needs --manifest or image files\n";
        return CFX_ERR_CONFIG;
      }
      cfx_spectrum* raw = nullptr;
      if (!manifest.empty()) {
        check(cfx_spectrum_from_manifest(manifest.c_str(), generator.empty() ? nullptr : generator.c_str(), side,
                                         decimate, &raw));
      } else {
        std::vector<const char*> paths;
        for (const auto& p : images) paths.push_back(p.c_str());
        check(cfx_spectrum_from_files(paths.data(), paths.size(), side, decimate, &raw));
      }
      std::unique_ptr<cfx_spectrum, SpectrumFree> sp(raw);
      fs::create_directories(out_dir);
      const auto stem = fs::path(out_dir) / "spectrum";
      check(cfx_spectrum_export(sp.get(), stem.c_str()));
      std::cout << stem.string() << ".pgm\n";
      Text peaks;
      check(cfx_spectrum_peaks(sp.get(), k, peaks.out()));
      write_text(fs::path(out_dir) / "peaks.json", peaks.str());
    } else if (report->parsed()) {
      cfx_report* raw = nullptr;
      check(cfx_report_new(manifest.c_str(), &raw));
      std::unique_ptr<cfx_report, ReportFree> r(raw);
      for (const auto& item : score_files) {
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == item.size()) {
          std::cerr << "cfx: --scores expects method=path, got '" << item << "'\n";
          return CFX_ERR_CONFIG;
        }
        const std::string method = item.substr(0, eq);
        const std::string path = item.substr(eq + 1);
        std::size_t skipped = 0;
        check(cfx_report_add_scores(r.get(), method.c_str(), path.c_str(), &skipped));
        if (skipped) std::cerr << "cfx: warning: " << method << ": " << skipped << " ids not in the manifest\n";
      }
      Text table;
      check(cfx_report_render(r.get(), layout.c_str(), metric.c_str(), table.out()));
      if (report_out.empty()) {
        std::cout << table.str();
      } else {
        write_text(report_out, table.str());
      }
    } else if (toy->parsed()) {
      Text path;
      check(cfx_make_toy(toy_dir.c_str(), toy_kind.c_str(), toy_seed, toy_backend.empty() ? nullptr : toy_backend.c_str(),
                         path.out()));
      std::cout << path.str() << "\n";
    }
  } catch (const Failure& f) {
    std::cerr << "cfx: " << cfx_status_name(f.status) << ": " << cfx_last_error() << "\n";
    return f.status;
  } catch (const std::exception& e) {
    std::cerr << "cfx: " << e.what() << "\n";
    return CFX_ERR_INTERNAL;
  }
  return 0;
}
