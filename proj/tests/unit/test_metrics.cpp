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

#include <cmath>

#include <doctest.h>

#include "common/error.hpp"
#include "common/rng.hpp"
#include "metrics/metrics.hpp"
#include "oracles/metrics.hpp"

using namespace cfx;
using namespace cfx::metrics;

namespace {

// Scores drawn from a small grid so ties are common.
LabeledScores random_set(Rng& rng, int n, bool coarse) {
  LabeledScores s;
  for (int i = 0; i < n; ++i) {
    const double v = coarse ? rng.uniform_int(0, 9) / 10.0 : rng.uniform();
    s.push_back({v, i < 2 ? i == 0 : rng.uniform() < 0.4});
  }
  return s;
}

RunReport one(const std::string& gen, double auc) {
  GeneratorMetrics m;
  m.auc = auc;
  m.ap = auc;
  m.accuracy = auc;
  return {"m", {{gen, m}}};
}

}  // namespace

TEST_CASE("auc examples") {
  CHECK(auc({{0.9, true}, {0.9, true}, {0.1, false}, {0.1, false}}) == 1.0);
  CHECK(auc({{0.3, true}, {0.3, false}, {0.3, false}, {0.3, true}}) == 0.5);
  CHECK_THROWS_AS(auc({{0.3, true}, {0.4, true}}), Error);
  CHECK_THROWS_AS(auc({}), Error);
}

TEST_CASE("ap examples") {
  CHECK(average_precision({{0.9, true}, {0.8, true}, {0.2, false}}) == 1.0);
  CHECK(average_precision({{0.9, false}, {0.8, false}, {0.7, false}, {0.1, true}}) == 0.25);
  CHECK_THROWS_AS(average_precision({{0.9, false}}), Error);
}

TEST_CASE("metrics agree with the quadratic oracles") {
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    const auto s = random_set(rng, 50, i % 2 == 0);
    CHECK(std::abs(auc(s) - oracle::pairwise_auc(s)) <= 1e-12);
    CHECK(std::abs(average_precision(s) - oracle::enumerated_ap(s)) <= 1e-12);
    const double t = rng.uniform_int(0, 10) / 10.0;
    const auto a = accuracy_at(s, t);
    const auto c = oracle::counted(s, t);
    CHECK(a.accuracy == c.accuracy);
    CHECK(a.tpr == c.tpr);
    CHECK(a.tnr == c.tnr);
  }
}

TEST_CASE("threshold rule") {
  const auto a = accuracy_at({{0.6, true}, {0.4, false}});
  CHECK(a.accuracy == 1.0);
  CHECK(a.tpr == 1.0);
  CHECK(a.tnr == 1.0);
  CHECK(accuracy_at({{0.5, true}}).tpr == 0.0);
  CHECK(accuracy_at({{0.5, false}}).tnr == 1.0);
  CHECK_THROWS_AS(accuracy_at({}), Error);
}

TEST_CASE("auc is rank based") {
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    auto s = random_set(rng, 60, i % 2 == 0);
    const double base = auc(s);
    auto t = s;
    for (auto& x : t) x.score = std::exp(3 * x.score) - 7;
    CHECK(auc(t) == doctest::Approx(base).epsilon(1e-15));
    auto flipped = s;
    for (auto& x : flipped) x.fake = !x.fake;
    // With the half-credit tie rule the complement holds with ties too.
    CHECK(auc(flipped) == doctest::Approx(1.0 - base).epsilon(1e-12));
    const double ap = average_precision(s);
    CHECK(ap >= 0.0);
    CHECK(ap <= 1.0);
  }
}

TEST_CASE("ap of random scores is the prevalence") {
  Rng rng(8);
  LabeledScores s;
  int pos = 0;
  for (int i = 0; i < 100000; ++i) {
    const bool fake = rng.uniform() < 0.3;
    pos += fake;
    s.push_back({rng.uniform(), fake});
  }
  const double prevalence = pos / 1e5;
  // Monte-Carlo spread of AP around prevalence is about sqrt(p(1-p)/n) plus a
  // small upward bias from the first few steps; 0.01 is several sigma.
  CHECK(std::abs(average_precision(s) - prevalence) < 0.01);
  CHECK(std::abs(auc(s) - 0.5) < 0.01);
}

TEST_CASE("aggregation") {
  const auto single = aggregate({one("stylegan2", 0.8)});
  CHECK(single.runs == 1);
  CHECK(single.generators[0].auc.mean == 0.8);
  CHECK(single.generators[0].auc.std == 0.0);

  const auto two = aggregate({one("stylegan2", 0.8), one("stylegan2", 0.9)});
  CHECK(two.generators[0].auc.mean == doctest::Approx(0.85).epsilon(1e-12));
  CHECK(two.generators[0].auc.std == doctest::Approx(std::sqrt(0.005)).epsilon(1e-12));
  CHECK(std::round(two.generators[0].auc.std * 1e4) / 1e4 == 0.0707);

  CHECK_THROWS_AS(aggregate({one("stylegan2", 0.8), one("dalle2", 0.9)}), Error);
  CHECK_THROWS_AS(aggregate({}), Error);
  CHECK(mean_std({1.0, 2.0, 3.0}).std == doctest::Approx(1.0));
}

TEST_CASE("family average table") {
  RunReport r{"ours", {}};
  const std::pair<const char*, double> gens[] = {{"stylegan2", 0.939}, {"latent-diffusion", 0.933}, {"dalle2", 0.817}};
  for (const auto& [g, v] : gens) {
    GeneratorMetrics m;
    m.auc = v;
    r.generators.emplace_back(g, m);
  }
  const auto rep = aggregate({r});
  REQUIRE(rep.families.size() == 3);
  CHECK(rep.families[0].family == "GAN");
  CHECK(rep.families[1].family == "Diffusion");
  CHECK(rep.families[2].family == "Commercial");
  CHECK(percent(rep.family_mean.auc) == "89.6");
  CHECK(percent(rep.grand.auc) == "89.6");
  CHECK(family_table_csv({rep}, Metric::auc) == "method,GAN,Diffusion,Commercial,AVG\nours,93.9,93.3,81.7,89.6\n");
  CHECK(table_csv({rep}, Metric::auc) ==
        "method,stylegan2,latent-diffusion,dalle2,AVG\nours,93.9,93.3,81.7,89.6\n");

  FamilyMap fm;
  fm.set("mystery", "GAN");
  CHECK(fm.family_of("mystery") == "GAN");
  CHECK(fm.family_of("Midjourney-v5") == "Commercial");
  CHECK(fm.family_of("BigGAN") == "GAN");
  CHECK(fm.family_of("SDXL") == "Diffusion");
}

TEST_CASE("report json") {
  const auto rep = aggregate({one("stylegan2", 0.8), one("stylegan2", 0.9)});
  const auto j = rep.to_json();
  CHECK(j.at("runs") == 2);
  CHECK(rep.find("stylegan2") != nullptr);
  CHECK(rep.find("nope") == nullptr);
  CHECK(parse_metric("ap") == Metric::ap);
  CHECK_THROWS_AS(parse_metric("f1"), Error);
}
