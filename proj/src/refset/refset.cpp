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

#include "refset/refset.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "common/error.hpp"
#include "common/rng.hpp"

namespace cfx::refset {

void SamplingPlan::validate() const {
  if (n_per_class < 1) config_error("n_per_class must be at least 1, got {}", n_per_class);
  if (runs < 1) config_error("runs must be at least 1, got {}", runs);
  if (!(augmented_fraction >= 0.0 && augmented_fraction <= 1.0)) {
    config_error("augmented_fraction {} outside [0,1]", augmented_fraction);
  }
}

nlohmann::ordered_json SamplingPlan::to_json() const {
  return {{"n_per_class", n_per_class},
          {"seed", seed},
          {"runs", runs},
          {"require_pairing", require_pairing},
          {"augmented_fraction", augmented_fraction}};
}

SamplingPlan SamplingPlan::from_json(const nlohmann::json& j) {
  SamplingPlan p;
  try {
    p.n_per_class = j.value("n_per_class", p.n_per_class);
    p.seed = j.value("seed", p.seed);
    p.runs = j.value("runs", p.runs);
    p.require_pairing = j.value("require_pairing", p.require_pairing);
    p.augmented_fraction = j.value("augmented_fraction", p.augmented_fraction);
  } catch (const nlohmann::json::exception& e) {
    config_error("bad sampling plan: {}", e.what());
  }
  p.validate();
  return p;
}

namespace {

std::uint64_t rank_key(std::uint64_t seed, int run, std::uint64_t salt, const std::string& id) {
  return mix64(combine64(combine64(seed, static_cast<std::uint64_t>(run)), salt) ^ fnv1a64(id));
}

template <typename T>
void rank_by(std::vector<T>& items, std::uint64_t seed, int run, std::uint64_t salt,
             const std::function<const std::string&(const T&)>& id_of) {
  std::vector<std::pair<std::uint64_t, std::size_t>> keys;
  for (std::size_t k = 0; k < items.size(); ++k) keys.emplace_back(rank_key(seed, run, salt, id_of(items[k])), k);
  std::sort(keys.begin(), keys.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return id_of(items[a.second]) < id_of(items[b.second]);
  });
  std::vector<T> out;
  out.reserve(items.size());
  for (const auto& [_, k] : keys) out.push_back(items[k]);
  items = std::move(out);
}

const std::uint64_t kSelectSalt = fnv1a64("select");
const std::uint64_t kAugmentSalt = fnv1a64("augment");

}  // namespace

Selection select(const manifest::DatasetManifest& manifest, const SamplingPlan& plan, int run,
                 const std::set<std::string>& exclude) {
  plan.validate();
  if (run < 0) config_error("run index must be non-negative");
  const auto n = static_cast<std::size_t>(plan.n_per_class);
  Selection sel;

  using Record = manifest::ImageRecord;
  if (plan.require_pairing) {
    struct Pair {
      std::string id;
      std::vector<const Record*> real, fake;
    };
    std::map<std::string, Pair> pairs;
    for (const auto& r : manifest.records) {
      if (!r.pair_id) continue;
      auto& p = pairs[*r.pair_id];
      p.id = *r.pair_id;
      (r.is_fake() ? p.fake : p.real).push_back(&r);
    }
    std::vector<Pair> usable;
    for (auto& [_, p] : pairs) {
      if (p.real.size() != 1 || p.fake.size() != 1) continue;
      if (exclude.contains(p.real[0]->id) || exclude.contains(p.fake[0]->id)) continue;
      usable.push_back(p);
    }
    if (usable.size() < n) {
      data_error("manifest '{}' has {} usable pairs, {} requested", manifest.name, usable.size(), n);
    }
    rank_by<Pair>(usable, plan.seed, run, kSelectSalt, [](const Pair& p) -> const std::string& { return p.id; });
    for (std::size_t k = 0; k < n; ++k) {
      sel.real.push_back(*usable[k].real[0]);
      sel.fake.push_back(*usable[k].fake[0]);
    }
  } else {
    std::vector<Record> reals, fakes;
    for (const auto& r : manifest.records) {
      if (exclude.contains(r.id)) continue;
      (r.is_fake() ? fakes : reals).push_back(r);
    }
    if (reals.size() < n || fakes.size() < n) {
      data_error("manifest '{}' has {} real and {} fake records, {} per class requested",
                 manifest.name, reals.size(), fakes.size(), n);
    }
    auto id_of = [](const Record& r) -> const std::string& { return r.id; };
    rank_by<Record>(reals, plan.seed, run, kSelectSalt, id_of);
    rank_by<Record>(fakes, plan.seed, run, kSelectSalt, id_of);
    sel.real.assign(reals.begin(), reals.begin() + static_cast<std::ptrdiff_t>(n));
    sel.fake.assign(fakes.begin(), fakes.begin() + static_cast<std::ptrdiff_t>(n));
  }

  const auto n_aug = static_cast<std::size_t>(std::lround(plan.augmented_fraction * static_cast<double>(n)));
  if (n_aug > 0) {
    for (const auto* cls : {&sel.real, &sel.fake}) {
      std::vector<Record> order = *cls;
      rank_by<Record>(order, plan.seed, run, kAugmentSalt, [](const Record& r) -> const std::string& { return r.id; });
      std::vector<std::string> chosen;
      for (std::size_t k = 0; k < n_aug; ++k) chosen.push_back(order[k].id);
      // Log in selection order.
      for (const auto& r : *cls) {
        if (std::find(chosen.begin(), chosen.end(), r.id) == chosen.end()) continue;
        const std::uint64_t recipe_seed = rank_key(plan.seed, run, kAugmentSalt, r.id + "/recipe");
        sel.augmentation.push_back({r.id, launder::social_pipeline(recipe_seed)});
      }
    }
  }
  return sel;
}

int ReferenceSet::feature_dim() const {
  return real_vectors.empty() ? 0 : static_cast<int>(real_vectors.front().size());
}

nlohmann::ordered_json ReferenceSet::to_json() const {
  nlohmann::ordered_json j;
  j["manifest"] = manifest_name;
  j["plan"] = plan.to_json();
  j["run"] = run;
  j["real_ids"] = real_ids;
  j["fake_ids"] = fake_ids;
  auto& log = j["augmentation_log"] = nlohmann::ordered_json::array();
  for (const auto& a : augmentation_log) log.push_back({{"id", a.record_id}, {"recipe", a.recipe.to_json()}});
  return j;
}

ReferenceSet build(const manifest::DatasetManifest& manifest, const SamplingPlan& plan, int run,
                   EmbeddingSource& embeddings, const std::set<std::string>& exclude) {
  const Selection sel = select(manifest, plan, run, exclude);
  ReferenceSet rs;
  rs.manifest_name = manifest.name;
  rs.plan = plan;
  rs.run = run;
  rs.augmentation_log = sel.augmentation;
  std::map<std::string, const launder::LaunderRecipe*> recipes;
  for (const auto& a : sel.augmentation) recipes.emplace(a.record_id, &a.recipe);

  auto fill = [&](const std::vector<manifest::ImageRecord>& records, std::vector<std::vector<float>>& vectors,
                  std::vector<std::string>& ids) {
    std::vector<manifest::ImageRecord> plain;
    for (const auto& r : records) {
      if (!recipes.contains(r.id)) plain.push_back(r);
    }
    auto plain_vectors = embeddings.embed(manifest, plain);
    if (plain_vectors.size() != plain.size()) internal_error("embedding source returned {} rows for {} records", plain_vectors.size(), plain.size());
    std::size_t next = 0;
    for (const auto& r : records) {
      ids.push_back(r.id);
      if (auto it = recipes.find(r.id); it != recipes.end()) {
        vectors.push_back(embeddings.embed_laundered(manifest, r, *it->second));
      } else {
        vectors.push_back(std::move(plain_vectors[next++]));
      }
    }
  };
  fill(sel.real, rs.real_vectors, rs.real_ids);
  fill(sel.fake, rs.fake_vectors, rs.fake_ids);

  const int dim = rs.feature_dim();
  for (const auto* set : {&rs.real_vectors, &rs.fake_vectors}) {
    for (const auto& v : *set) {
      if (static_cast<int>(v.size()) != dim) data_error("reference vectors have inconsistent dimensions");
    }
  }
  return rs;
}

int default_runs(int n) {
  if (n >= 10000) return 1;
  const int runs = static_cast<int>((10000 + static_cast<long long>(n) - 1) / n);
  return std::min(50, runs);
}

std::vector<SamplingPlan> size_sweep_plan(const std::vector<int>& n_values, const SamplingPlan& base,
                                          const RunsRule& rule) {
  if (n_values.empty()) config_error("size sweep needs at least one N");
  std::vector<SamplingPlan> plans;
  for (std::size_t k = 0; k < n_values.size(); ++k) {
    const int n = n_values[k];
    if (n <= 0) config_error("size sweep N must be positive, got {}", n);
    if (k > 0 && n <= n_values[k - 1]) config_error("size sweep N values must be ascending");
    SamplingPlan p = base;
    p.n_per_class = n;
    p.runs = rule(n);
    p.validate();
    plans.push_back(p);
  }
  return plans;
}

}  // namespace cfx::refset
