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

#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "manifest/manifest.hpp"

namespace cfx::metrics {

// Fake is the positive class.
struct LabeledScore {
  double score = 0.0;
  bool fake = false;
};

using LabeledScores = std::vector<LabeledScore>;

// Mann-Whitney statistic; ties count one half. O(m log m).
double auc(const LabeledScores& samples);

// Step-wise area under the precision-recall curve; tied scores form one
// threshold.
double average_precision(const LabeledScores& samples);

struct ThresholdStats {
  double accuracy = 0.0;
  double tpr = 0.0;  // over fakes; 0 when there are none
  double tnr = 0.0;  // over reals; 0 when there are none
};

// Predicts fake iff score > threshold.
ThresholdStats accuracy_at(const LabeledScores& samples, double threshold = 0.5);

struct GeneratorMetrics {
  double auc = 0.0;
  double ap = 0.0;
  double accuracy = 0.0;
  double tpr = 0.0;
  double tnr = 0.0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
};

GeneratorMetrics evaluate(const LabeledScores& samples);

// One evaluation run of one method, generators in presentation order.
struct RunReport {
  std::string method;
  std::vector<std::pair<std::string, GeneratorMetrics>> generators;
};

/// Scores every generator of `eval` against all of its real records.
/// Records missing from `scores` are skipped; a generator left with no
/// scored fakes is dropped.
RunReport evaluate_manifest(const std::string& method, const manifest::DatasetManifest& eval,
                            const std::map<std::string, double>& scores);

// Family lookup for generator names; unknown names fall in "Other".
class FamilyMap {
 public:
  FamilyMap();  // known generator names
  void set(const std::string& generator, const std::string& family);
  std::string family_of(const std::string& generator) const;
  // Families in display order: GAN, Diffusion, Commercial, then the rest
  // alphabetically.
  std::vector<std::string> order(const std::vector<std::string>& families) const;

 private:
  std::map<std::string, std::string> explicit_;
};

struct Stat {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for one run
};

Stat mean_std(const std::vector<double>& values);

struct GeneratorSummary {
  std::string generator;
  std::string family;
  Stat auc, ap, accuracy, tpr, tnr;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
};

struct MetricTriple {
  double auc = 0.0;
  double ap = 0.0;
  double accuracy = 0.0;
};

struct FamilySummary {
  std::string family;
  std::vector<std::string> members;
  MetricTriple means;  // unweighted over members' run means
};

struct EvalReport {
  std::string method;
  std::size_t runs = 0;
  std::vector<GeneratorSummary> generators;
  std::vector<FamilySummary> families;
  MetricTriple grand;        // over all generators
  MetricTriple family_mean;  // over family means

  nlohmann::ordered_json to_json() const;
  const GeneratorSummary* find(const std::string& generator) const;
};

EvalReport aggregate(const std::vector<RunReport>& runs, const FamilyMap& families = FamilyMap());

enum class Metric { auc, ap, accuracy };
const char* to_string(Metric metric);
Metric parse_metric(const std::string& text);

// Percent with one decimal, as results tables print them.
std::string percent(double value);

/// Rows are methods, columns the union of generators (first-seen order),
/// then AVG (mean of the row's entries). Missing cells are left blank.
std::string table_csv(const std::vector<EvalReport>& reports, Metric metric);
std::string table_markdown(const std::vector<EvalReport>& reports, Metric metric);
// Same layout with family columns; AVG is the mean of the family columns.
std::string family_table_csv(const std::vector<EvalReport>& reports, Metric metric);

}  // namespace cfx::metrics
