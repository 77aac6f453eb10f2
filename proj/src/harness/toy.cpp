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

#include "harness/toy.hpp"

#include <cmath>

#include <fmt/format.h>
#include <json.hpp>

#include "common/error.hpp"
#include "common/io.hpp"
#include "common/rng.hpp"
#include "embed/backend.hpp"
#include "embed/cache.hpp"
#include "image/raster.hpp"
#include "manifest/manifest.hpp"

namespace cfx::harness {

namespace {

using manifest::DatasetManifest;
using manifest::ImageRecord;
using manifest::Label;

ImageRecord record(const std::string& id, const std::string& path, bool fake, const std::string& generator,
                   const std::string& source, const std::string& pair) {
  ImageRecord r;
  r.id = id;
  r.path = path;
  r.label = fake ? Label::fake : Label::real;
  r.generator = fake ? generator : "real";
  r.source_set = source;
  if (!pair.empty()) r.pair_id = pair;
  return r;
}

void write_config(const std::filesystem::path& path, nlohmann::ordered_json j) {
  write_file_atomic(path, j.dump(2) + "\n");
}

}  // namespace

std::filesystem::path make_toy_embeddings(const std::filesystem::path& dir, const ToyEmbeddingOptions& o) {
  if (o.dim < 1 || o.ref_pairs < 1 || o.eval_per_class < 1) config_error("toy fixture sizes must be positive");
  std::filesystem::create_directories(dir / "records");
  embed::BackendConfig backend;
  backend.checkpoint = fmt::format("toy-gaussian-{}d", o.dim);
  backend.pretrain_tag = "synthetic";
  backend.feature_dim = o.dim;
  backend.penultimate_dim = o.dim;

  const auto cache_path = dir / "embeddings.cfxc";
  std::filesystem::remove(cache_path);
  auto cache = embed::EmbeddingCache::open(cache_path);
  Rng rng(combine64(o.seed, fnv1a64("toy-embeddings")));
  DatasetManifest ref, eval;
  ref.name = "refset";
  ref.base_dir = dir;
  eval.name = "eval";
  eval.base_dir = dir;

  auto add = [&](DatasetManifest& m, ImageRecord r) {
    const std::string text = fmt::format("toy record {}\n", r.id);
    write_file_atomic(dir / r.path, text);
    std::vector<float> v(static_cast<std::size_t>(o.dim));
    const double mean = r.is_fake() ? o.offset : -o.offset;
    for (auto& x : v) x = static_cast<float>(mean + rng.normal());
    cache.put(embed::record_key(m, r, backend), v);
    m.records.push_back(std::move(r));
  };
  for (int i = 0; i < o.ref_pairs; ++i) {
    const auto pair = fmt::format("p{:05d}", i);
    add(ref, record(fmt::format("ref-real-{:05d}", i), fmt::format("records/ref-real-{:05d}.tok", i), false,
                    o.generator, "toy-ref", pair));
    add(ref, record(fmt::format("ref-fake-{:05d}", i), fmt::format("records/ref-fake-{:05d}.tok", i), true,
                    o.generator, "toy-ref", pair));
  }
  for (int i = 0; i < o.eval_per_class; ++i) {
    add(eval, record(fmt::format("eval-real-{:05d}", i), fmt::format("records/eval-real-{:05d}.tok", i), false,
                     o.generator, "toy-eval", ""));
  }
  for (int i = 0; i < o.eval_per_class; ++i) {
    add(eval, record(fmt::format("eval-fake-{:05d}", i), fmt::format("records/eval-fake-{:05d}.tok", i), true,
                     o.generator, "toy-eval", ""));
  }
  cache.flush();
  manifest::save_manifest(ref, dir / "refset.jsonl");
  manifest::save_manifest(eval, dir / "eval.jsonl");

  nlohmann::ordered_json cfg = {
      {"refset_manifest", "refset.jsonl"},
      {"eval_manifest", "eval.jsonl"},
      {"backend",
       {{"checkpoint", backend.checkpoint}, {"pretrain_tag", backend.pretrain_tag}, {"tap", "penultimate"},
        {"feature_dim", o.dim}}},
      {"cache", "embeddings.cfxc"},
      {"cache_only", true},
      {"classifier", {{"kind", "svm"}, {"c", 1.0}, {"tol", 1e-4}, {"normalization", "l2_unit"}}},
      {"sampling", {{"n_per_class", 10}, {"require_pairing", true}}},
      {"n_values", {10, 100}},
      {"sweep_runs", 5},
      {"fewshot", {{"n_examples", 10}, {"runs", 100}}},
      {"out_dir", "runs"},
      {"seed", o.seed},
      {"method", "toy-svm"}};
  const auto path = dir / "config.json";
  write_config(path, cfg);
  return path;
}

std::filesystem::path make_toy_rasters(const std::filesystem::path& dir, const ToyRasterOptions& o) {
  if (o.side < 32) config_error("toy rasters need at least 32 px per side");
  if (o.export_json.empty()) config_error("toy rasters need an encoder export manifest");
  std::filesystem::create_directories(dir / "images");
  Rng rng(combine64(o.seed, fnv1a64("toy-rasters")));

  auto make = [&](bool fake) {
    // A few random low-frequency waves per channel.
    image::PlanarImage p(o.side, o.side, 3);
    for (int c = 0; c < 3; ++c) {
      double fx[3], fy[3], ph[3], amp[3];
      for (int k = 0; k < 3; ++k) {
        fx[k] = rng.uniform(0.5, 3.0);
        fy[k] = rng.uniform(0.5, 3.0);
        ph[k] = rng.uniform(0.0, 2.0 * M_PI);
        amp[k] = rng.uniform(0.05, 0.15);
      }
      for (int y = 0; y < o.side; ++y) {
        for (int x = 0; x < o.side; ++x) {
          double v = 0.5;
          for (int k = 0; k < 3; ++k) {
            v += amp[k] * std::sin(2.0 * M_PI * (fx[k] * x + fy[k] * y) / o.side + ph[k]);
          }
          if (fake) v += 0.12 * std::cos(M_PI * 0.5 * (x % 4));
          p.at(c, x, y) = v + 0.01 * rng.normal();
        }
      }
    }
    return image::to_raster(p);
  };

  DatasetManifest ref, eval;
  ref.name = "refset";
  ref.base_dir = dir;
  eval.name = "eval";
  eval.base_dir = dir;
  auto add = [&](DatasetManifest& m, const std::string& id, bool fake, const std::string& source,
                 const std::string& pair) {
    const auto rel = fmt::format("images/{}.png", id);
    image::save_png(make(fake), dir / rel);
    auto r = record(id, rel, fake, "toy-gan", source, pair);
    r.resolution = manifest::Resolution{o.side, o.side};
    m.records.push_back(std::move(r));
  };
  for (int i = 0; i < o.ref_pairs; ++i) {
    const auto pair = fmt::format("p{:04d}", i);
    add(ref, fmt::format("ref-real-{:04d}", i), false, "toy-ref", pair);
    add(ref, fmt::format("ref-fake-{:04d}", i), true, "toy-ref", pair);
  }
  for (int i = 0; i < o.eval_per_class; ++i) add(eval, fmt::format("eval-real-{:04d}", i), false, "toy-eval", "");
  for (int i = 0; i < o.eval_per_class; ++i) add(eval, fmt::format("eval-fake-{:04d}", i), true, "toy-eval", "");
  manifest::save_manifest(ref, dir / "refset.jsonl");
  manifest::save_manifest(eval, dir / "eval.jsonl");
  std::filesystem::remove(dir / "embeddings.cfxc");

  nlohmann::ordered_json cfg = {
      {"refset_manifest", "refset.jsonl"},
      {"eval_manifest", "eval.jsonl"},
      {"backend", {{"export", std::filesystem::absolute(o.export_json).string()}, {"tap", "penultimate"}}},
      {"cache", "embeddings.cfxc"},
      {"cache_only", false},
      {"classifier", {{"kind", "svm"}, {"c", 1.0}, {"tol", 1e-4}, {"normalization", "l2_unit"}}},
      {"sampling", {{"n_per_class", std::min(10, o.ref_pairs)}, {"require_pairing", true}}},
      {"n_values", {std::min(10, o.ref_pairs)}},
      {"sweep_runs", 1},
      {"robustness", {{"axis", "jpeg_q"}, {"values", {100, 60}}}},
      {"fewshot", {{"n_examples", 5}, {"runs", 5}}},
      {"out_dir", "runs"},
      {"seed", o.seed},
      {"method", "toy-clip-svm"}};
  const auto path = dir / "config.json";
  write_config(path, cfg);
  return path;
}

}  // namespace cfx::harness
