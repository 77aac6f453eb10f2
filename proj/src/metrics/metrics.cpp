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

#include "metrics/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <optional>
#include <set>

#include <fmt/format.h>

#include "common/error.hpp"

namespace cfx::metrics {

namespace {

void check_finite(const LabeledScores& s) {
  for (const auto& x : s) {
    if (!std::isfinite(x.score)) data_error("non-finite score in metric input");
  }
}

}  // namespace

double auc(const LabeledScores& samples) {
  check_finite(samples);
  std::vector<LabeledScore> s(samples);
  std::sort(s.begin(), s.end(), [](const auto& a, const auto& b) { return a.score < b.score; });
  double wins = 0.0;
  double neg_below = 0.0;
  std::size_t n_pos = 0, n_neg = 0;
  for (std::size_t i = 0; i < s.size();) {
    std::size_t j = i;
    double pos = 0.0, neg = 0.0;
    while (j < s.size() && s[j].score == s[i].score) {
      (s[j].fake ? pos : neg) += 1.0;
      ++j;
    }
    wins += pos * neg_below + 0.5 * pos * neg;
    neg_below += neg;
    n_pos += static_cast<std::size_t>(pos);
    n_neg += static_cast<std::size_t>(neg);
    i = j;
  }
  if (n_pos == 0 || n_neg == 0) data_error("auc needs both classes (got {} fake, {} real)", n_pos, n_neg);
  return wins / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double average_precision(const LabeledScores& samples) {
  check_finite(samples);
  std::vector<LabeledScore> s(samples);
  std::stable_sort(s.begin(), s.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
  const auto n_pos = static_cast<double>(
      std::count_if(s.begin(), s.end(), [](const auto& x) { return x.fake; }));
  if (n_pos == 0) data_error("average precision needs at least one fake sample");
  double ap = 0.0, tp = 0.0, seen = 0.0, prev_recall = 0.0;
  for (std::size_t i = 0; i < s.size();) {
    std::size_t j = i;
    while (j < s.size() && s[j].score == s[i].score) {
      if (s[j].fake) tp += 1.0;
      seen += 1.0;
      ++j;
    }
    const double recall = tp / n_pos;
    ap += (recall - prev_recall) * (tp / seen);
    prev_recall = recall;
    i = j;
  }
  return ap;
}

ThresholdStats accuracy_at(const LabeledScores& samples, double threshold) {
  if (samples.empty()) data_error("accuracy of an empty sample");
  check_finite(samples);
  std::size_t tp = 0, tn = 0, pos = 0, neg = 0;
  for (const auto& x : samples) {
    const bool predicted_fake = x.score > threshold;
    if (x.fake) {
      ++pos;
      tp += predicted_fake;
    } else {
      ++neg;
      tn += !predicted_fake;
    }
  }
  ThresholdStats t;
  t.accuracy = static_cast<double>(tp + tn) / static_cast<double>(samples.size());
  t.tpr = pos ? static_cast<double>(tp) / static_cast<double>(pos) : 0.0;
  t.tnr = neg ? static_cast<double>(tn) / static_cast<double>(neg) : 0.0;
  return t;
}

GeneratorMetrics evaluate(const LabeledScores& samples) {
  GeneratorMetrics m;
  m.auc = auc(samples);
  m.ap = average_precision(samples);
  const auto t = accuracy_at(samples);
  m.accuracy = t.accuracy;
  m.tpr = t.tpr;
  m.tnr = t.tnr;
  for (const auto& x : samples) (x.fake ? m.n_pos : m.n_neg)++;
  return m;
}

RunReport evaluate_manifest(const std::string& method, const manifest::DatasetManifest& eval,
                            const std::map<std::string, double>& scores) {
  LabeledScores reals;
  std::vector<std::string> order;
  std::map<std::string, LabeledScores> fakes;
  for (const auto& r : eval.records) {
    auto it = scores.find(r.id);
    if (it == scores.end()) continue;
    if (r.is_fake()) {
      if (!fakes.contains(r.generator)) order.push_back(r.generator);
      fakes[r.generator].push_back({it->second, true});
    } else {
      reals.push_back({it->second, false});
    }
  }
  if (reals.empty()) data_error("{}: no scored real images in '{}'", method, eval.name);
  RunReport report;
  report.method = method;
  for (const auto& g : order) {
    LabeledScores s = reals;
    s.insert(s.end(), fakes[g].begin(), fakes[g].end());
    report.generators.emplace_back(g, evaluate(s));
  }
  return report;
}

namespace {

std::string normalize_name(const std::string& name) {
  std::string out;
  for (char c : name) {
    if (std::isalnum(static_cast<unsigned char>(c))) out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

}  // namespace

FamilyMap::FamilyMap() = default;

void FamilyMap::set(const std::string& generator, const std::string& family) {
  explicit_[generator] = family;
}

std::string FamilyMap::family_of(const std::string& generator) const {
  if (auto it = explicit_.find(generator); it != explicit_.end()) return it->second;
  const std::string n = normalize_name(generator);
  static const char* commercial[] = {"dalle", "midjourney", "firefly"};
  for (const char* c : commercial) {
    if (n.starts_with(c)) return "Commercial";
  }
  if (n.find("gan") != std::string::npos) return "GAN";
  static const char* diffusion[] = {"scoresde", "sde",  "adm",    "glide", "ediff", "latent",
                                    "stable",   "sdxl", "dit",    "deepfloyd", "if", "ldm",
                                    "diffusion"};
  for (const char* d : diffusion) {
    if (n.starts_with(d) || (std::string(d).size() > 3 && n.find(d) != std::string::npos)) return "Diffusion";
  }
  return "Other";
}

std::vector<std::string> FamilyMap::order(const std::vector<std::string>& families) const {
  static const std::vector<std::string> fixed = {"GAN", "Diffusion", "Commercial"};
  std::set<std::string> present(families.begin(), families.end());
  std::vector<std::string> out;
  for (const auto& f : fixed) {
    if (present.erase(f)) out.push_back(f);
  }
  out.insert(out.end(), present.begin(), present.end());
  return out;
}

Stat mean_std(const std::vector<double>& values) {
  Stat s;
  if (values.empty()) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

EvalReport aggregate(const std::vector<RunReport>& runs, const FamilyMap& families) {
  if (runs.empty()) data_error("aggregate needs at least one run");
  const auto& first = runs.front();
  for (const auto& run : runs) {
    bool same = run.generators.size() == first.generators.size();
    for (std::size_t g = 0; same && g < run.generators.size(); ++g) {
      same = run.generators[g].first == first.generators[g].first;
    }
    if (!same) data_error("run reports of '{}' have inconsistent generator keys", first.method);
  }
  EvalReport report;
  report.method = first.method;
  report.runs = runs.size();
  for (std::size_t g = 0; g < first.generators.size(); ++g) {
    std::vector<double> a, p, acc, tpr, tnr;
    for (const auto& run : runs) {
      const auto& m = run.generators[g].second;
      a.push_back(m.auc);
      p.push_back(m.ap);
      acc.push_back(m.accuracy);
      tpr.push_back(m.tpr);
      tnr.push_back(m.tnr);
    }
    GeneratorSummary s;
    s.generator = first.generators[g].first;
    s.family = families.family_of(s.generator);
    s.auc = mean_std(a);
    s.ap = mean_std(p);
    s.accuracy = mean_std(acc);
    s.tpr = mean_std(tpr);
    s.tnr = mean_std(tnr);
    s.n_pos = first.generators[g].second.n_pos;
    s.n_neg = first.generators[g].second.n_neg;
    report.generators.push_back(std::move(s));
  }

  std::vector<std::string> fams;
  for (const auto& g : report.generators) fams.push_back(g.family);
  for (const auto& f : families.order(fams)) {
    FamilySummary fs;
    fs.family = f;
    for (const auto& g : report.generators) {
      if (g.family != f) continue;
      fs.members.push_back(g.generator);
      fs.means.auc += g.auc.mean;
      fs.means.ap += g.ap.mean;
      fs.means.accuracy += g.accuracy.mean;
    }
    const auto n = static_cast<double>(fs.members.size());
    fs.means.auc /= n;
    fs.means.ap /= n;
    fs.means.accuracy /= n;
    report.families.push_back(std::move(fs));
  }

  if (!report.generators.empty()) {
    for (const auto& g : report.generators) {
      report.grand.auc += g.auc.mean;
      report.grand.ap += g.ap.mean;
      report.grand.accuracy += g.accuracy.mean;
    }
    const auto n = static_cast<double>(report.generators.size());
    report.grand.auc /= n;
    report.grand.ap /= n;
    report.grand.accuracy /= n;
    for (const auto& f : report.families) {
      report.family_mean.auc += f.means.auc;
      report.family_mean.ap += f.means.ap;
      report.family_mean.accuracy += f.means.accuracy;
    }
    const auto nf = static_cast<double>(report.families.size());
    report.family_mean.auc /= nf;
    report.family_mean.ap /= nf;
    report.family_mean.accuracy /= nf;
  }
  return report;
}

namespace {

nlohmann::ordered_json stat_json(const Stat& s) { return {{"mean", s.mean}, {"std", s.std}}; }

nlohmann::ordered_json triple_json(const MetricTriple& t) {
  return {{"auc", t.auc}, {"ap", t.ap}, {"accuracy", t.accuracy}};
}

double metric_of(const MetricTriple& t, Metric m) {
  return m == Metric::auc ? t.auc : m == Metric::ap ? t.ap : t.accuracy;
}

double metric_of(const GeneratorSummary& g, Metric m) {
  return m == Metric::auc ? g.auc.mean : m == Metric::ap ? g.ap.mean : g.accuracy.mean;
}

}  // namespace

nlohmann::ordered_json EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["method"] = method;
  j["runs"] = runs;
  auto& gens = j["generators"] = nlohmann::ordered_json::array();
  for (const auto& g : generators) {
    gens.push_back({{"generator", g.generator},
                    {"family", g.family},
                    {"n_pos", g.n_pos},
                    {"n_neg", g.n_neg},
                    {"auc", stat_json(g.auc)},
                    {"ap", stat_json(g.ap)},
                    {"accuracy", stat_json(g.accuracy)},
                    {"tpr", stat_json(g.tpr)},
                    {"tnr", stat_json(g.tnr)}});
  }
  auto& fams = j["families"] = nlohmann::ordered_json::array();
  for (const auto& f : families) {
    fams.push_back({{"family", f.family}, {"members", f.members}, {"means", triple_json(f.means)}});
  }
  j["grand_mean"] = triple_json(grand);
  j["family_mean"] = triple_json(family_mean);
  return j;
}

const GeneratorSummary* EvalReport::find(const std::string& generator) const {
  for (const auto& g : generators) {
    if (g.generator == generator) return &g;
  }
  return nullptr;
}

const char* to_string(Metric metric) {
  switch (metric) {
    case Metric::auc:
      return "auc";
    case Metric::ap:
      return "ap";
    case Metric::accuracy:
      return "accuracy";
  }
  return "?";
}

Metric parse_metric(const std::string& text) {
  if (text == "auc") return Metric::auc;
  if (text == "ap") return Metric::ap;
  if (text == "accuracy" || text == "acc") return Metric::accuracy;
  config_error("unknown metric '{}' (auc, ap, accuracy)", text);
}

std::string percent(double value) { return fmt::format("{:.1f}", 100.0 * value); }

namespace {

struct Grid {
  std::vector<std::string> columns;
  std::vector<std::vector<std::optional<double>>> cells;  // per report
  std::vector<double> avg;
};

Grid generator_grid(const std::vector<EvalReport>& reports, Metric metric) {
  Grid grid;
  for (const auto& r : reports) {
    for (const auto& g : r.generators) {
      if (std::find(grid.columns.begin(), grid.columns.end(), g.generator) == grid.columns.end()) {
        grid.columns.push_back(g.generator);
      }
    }
  }
  for (const auto& r : reports) {
    std::vector<std::optional<double>> row;
    double sum = 0.0;
    int n = 0;
    for (const auto& c : grid.columns) {
      const auto* g = r.find(c);
      if (g) {
        row.push_back(metric_of(*g, metric));
        sum += metric_of(*g, metric);
        ++n;
      } else {
        row.push_back(std::nullopt);
      }
    }
    grid.cells.push_back(std::move(row));
    grid.avg.push_back(n ? sum / n : 0.0);
  }
  return grid;
}

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string grid_csv(const std::vector<EvalReport>& reports, const Grid& grid) {
  std::string out = "method";
  for (const auto& c : grid.columns) out += "," + csv_cell(c);
  out += ",AVG\n";
  for (std::size_t r = 0; r < reports.size(); ++r) {
    out += csv_cell(reports[r].method);
    for (const auto& cell : grid.cells[r]) out += "," + (cell ? percent(*cell) : std::string());
    out += "," + percent(grid.avg[r]) + "\n";
  }
  return out;
}

}  // namespace

std::string table_csv(const std::vector<EvalReport>& reports, Metric metric) {
  return grid_csv(reports, generator_grid(reports, metric));
}

std::string table_markdown(const std::vector<EvalReport>& reports, Metric metric) {
  const Grid grid = generator_grid(reports, metric);
  std::string out = "| method |";
  std::string rule = "|---|";
  for (const auto& c : grid.columns) {
    out += " " + c + " |";
    rule += "---:|";
  }
  out += " AVG |\n" + rule + "---:|\n";
  for (std::size_t r = 0; r < reports.size(); ++r) {
    out += "| " + reports[r].method + " |";
    for (const auto& cell : grid.cells[r]) out += " " + (cell ? percent(*cell) : std::string()) + " |";
    out += " " + percent(grid.avg[r]) + " |\n";
  }
  return out;
}

std::string family_table_csv(const std::vector<EvalReport>& reports, Metric metric) {
  Grid grid;
  FamilyMap order;
  std::vector<std::string> fams;
  for (const auto& r : reports) {
    for (const auto& f : r.families) fams.push_back(f.family);
  }
  grid.columns = order.order(fams);
  for (const auto& r : reports) {
    std::vector<std::optional<double>> row;
    double sum = 0.0;
    int n = 0;
    for (const auto& c : grid.columns) {
      auto it = std::find_if(r.families.begin(), r.families.end(), [&](const auto& f) { return f.family == c; });
      if (it != r.families.end()) {
        row.push_back(metric_of(it->means, metric));
        sum += metric_of(it->means, metric);
        ++n;
      } else {
        row.push_back(std::nullopt);
      }
    }
    grid.cells.push_back(std::move(row));
    grid.avg.push_back(n ? sum / n : 0.0);
  }
  return grid_csv(reports, grid);
}

}  // namespace cfx::metrics
