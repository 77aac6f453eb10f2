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

#include <algorithm>
#include <map>
#include <random>
#include <set>

#include <doctest.h>
#include <fmt/format.h>

#include "common/error.hpp"
#include "common/rng.hpp"
#include "manifest/manifest.hpp"
#include "refset/refset.hpp"

using namespace cfx;
using namespace cfx::refset;
using manifest::DatasetManifest;
using manifest::ImageRecord;
using manifest::Label;

namespace {

DatasetManifest paired(int pairs, int unpaired_fakes = 0) {
  DatasetManifest m;
  m.name = "pairs";
  for (int i = 0; i < pairs; ++i) {
    ImageRecord r;
    r.id = fmt::format("r{}", i);
    r.path = r.id + ".png";
    r.generator = "real";
    r.source_set = "coco";
    r.pair_id = fmt::format("p{}", i);
    ImageRecord f = r;
    f.id = fmt::format("f{}", i);
    f.path = f.id + ".png";
    f.label = Label::fake;
    f.generator = "latent-diffusion";
    m.records.push_back(r);
    m.records.push_back(f);
  }
  for (int i = 0; i < unpaired_fakes; ++i) {
    ImageRecord f;
    f.id = fmt::format("u{}", i);
    f.path = f.id + ".png";
    f.label = Label::fake;
    f.generator = "stylegan2";
    f.source_set = "lsun";
    m.records.push_back(f);
  }
  manifest::validate(m);
  return m;
}

// Vector = hash of the id, laundered vectors are tagged by negating.
class FakeSource : public EmbeddingSource {
 public:
  int plain_calls = 0;
  int laundered_calls = 0;

  std::vector<std::vector<float>> embed(const DatasetManifest&, const std::vector<ImageRecord>& records) override {
    std::vector<std::vector<float>> out;
    for (const auto& r : records) {
      ++plain_calls;
      out.push_back({static_cast<float>(fnv1a64(r.id) % 1000), 1.0f});
    }
    return out;
  }
  std::vector<float> embed_laundered(const DatasetManifest&, const ImageRecord& r,
                                     const launder::LaunderRecipe& recipe) override {
    ++laundered_calls;
    CHECK_FALSE(recipe.steps.empty());
    return {static_cast<float>(fnv1a64(r.id) % 1000), -1.0f};
  }
};

std::multiset<std::string> pair_ids(const Selection& s) {
  std::multiset<std::string> out;
  for (const auto& r : s.real) out.insert(*r.pair_id);
  for (const auto& r : s.fake) out.insert(*r.pair_id);
  return out;
}

}  // namespace

TEST_CASE("paired selection") {
  const auto m = paired(12);
  SamplingPlan plan;
  plan.n_per_class = 10;
  plan.seed = 42;
  const auto s = select(m, plan, 0);
  REQUIRE(s.real.size() == 10);
  REQUIRE(s.fake.size() == 10);
  std::set<std::string> ids;
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(s.real[i].pair_id == s.fake[i].pair_id);
    CHECK_FALSE(s.real[i].is_fake());
    CHECK(s.fake[i].is_fake());
    ids.insert(s.real[i].id);
    ids.insert(s.fake[i].id);
  }
  CHECK(ids.size() == 20);  // without replacement

  const auto again = select(m, plan, 0);
  CHECK(again.real == s.real);
  CHECK(again.fake == s.fake);
  std::set<std::multiset<std::string>> across_runs;
  for (int run = 0; run < 10; ++run) across_runs.insert(pair_ids(select(m, plan, run)));
  CHECK(across_runs.size() > 1);
}

TEST_CASE("insufficient data") {
  SamplingPlan plan;
  plan.n_per_class = 13;
  CHECK_THROWS_AS(select(paired(12), plan, 0), Error);
  plan.n_per_class = 10;
  CHECK_THROWS_AS(select(paired(12), plan, 0, {"p0", "r0", "r1", "r2"}), Error);
  plan.n_per_class = 0;
  CHECK_THROWS_AS(plan.validate(), Error);
  plan.n_per_class = 1;
  plan.augmented_fraction = 1.5;
  CHECK_THROWS_AS(plan.validate(), Error);
}

TEST_CASE("selection ignores file order") {
  const auto m = paired(40);
  SamplingPlan plan;
  plan.n_per_class = 15;
  plan.seed = 9;
  const auto base = pair_ids(select(m, plan, 3));
  std::mt19937_64 rng(1);
  for (int t = 0; t < 20; ++t) {
    auto shuffled = m;
    std::shuffle(shuffled.records.begin(), shuffled.records.end(), rng);
    CHECK(pair_ids(select(shuffled, plan, 3)) == base);
  }
}

TEST_CASE("exclusion is respected") {
  const auto m = paired(30, 20);
  std::set<std::string> exclude;
  for (int i = 0; i < 30; i += 3) exclude.insert(fmt::format("r{}", i));
  for (int i = 0; i < 20; i += 2) exclude.insert(fmt::format("u{}", i));
  for (bool pairing : {true, false}) {
    SamplingPlan plan;
    plan.n_per_class = 20;
    plan.require_pairing = pairing;
    for (int run = 0; run < 20; ++run) {
      const auto s = select(m, plan, run, exclude);
      CHECK(s.real.size() == 20);
      CHECK(s.fake.size() == 20);
      for (const auto* set : {&s.real, &s.fake})
        for (const auto& r : *set) CHECK_FALSE(exclude.contains(r.id));
    }
  }
}

TEST_CASE("augmented variants keep counts") {
  const auto m = paired(12);
  SamplingPlan plan;
  plan.n_per_class = 10;
  plan.augmented_fraction = 0.5;
  FakeSource src;
  const auto rs = build(m, plan, 0, src);
  CHECK(rs.real_vectors.size() == 10);
  CHECK(rs.fake_vectors.size() == 10);
  for (const auto* set : {&rs.real_vectors, &rs.fake_vectors}) {
    int laundered = 0;
    for (const auto& v : *set) laundered += v[1] < 0;
    CHECK(laundered == 5);
  }
  CHECK(rs.augmentation_log.size() == 10);
  CHECK(src.laundered_calls == 10);
  CHECK(src.plain_calls == 10);
  CHECK(rs.feature_dim() == 2);
  CHECK(rs.to_json().at("real_ids").size() == 10);

  for (double frac : {0.0, 0.14, 0.26, 1.0}) {
    plan.augmented_fraction = frac;
    const auto s = select(m, plan, 1);
    const long expect = std::lround(frac * 10);
    long real_aug = 0, fake_aug = 0;
    for (const auto& a : s.augmentation) {
      const bool is_real = std::any_of(s.real.begin(), s.real.end(), [&](const auto& r) { return r.id == a.record_id; });
      (is_real ? real_aug : fake_aug) += 1;
    }
    CHECK(real_aug == expect);
    CHECK(fake_aug == expect);
  }
}

TEST_CASE("size sweep plan") {
  const auto plans = size_sweep_plan({10, 100, 1000, 10000});
  REQUIRE(plans.size() == 4);
  const int expect[] = {50, 50, 10, 1};
  for (int i = 0; i < 4; ++i) CHECK(plans[i].runs == expect[i]);
  CHECK(size_sweep_plan({10000})[0].runs == 1);
  CHECK(size_sweep_plan({1000})[0].runs == 10);
  CHECK(default_runs(300) == 34);
  CHECK(size_sweep_plan({5, 7}, {}, [](int) { return 3; })[1].runs == 3);
  CHECK_THROWS_AS(size_sweep_plan({}), Error);
  CHECK_THROWS_AS(size_sweep_plan({0}), Error);
  CHECK_THROWS_AS(size_sweep_plan({100, 10}), Error);
  SamplingPlan p;
  p.n_per_class = 7;
  p.seed = 123;
  p.augmented_fraction = 0.5;
  const auto q = SamplingPlan::from_json(p.to_json());
  CHECK(q.n_per_class == 7);
  CHECK(q.seed == 123);
  CHECK(q.augmented_fraction == 0.5);
}
