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

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "refset/refset.hpp"

namespace cfx::classify {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Eigen::VectorXd;

enum class Normalization { l2_unit, none };

const char* to_string(Normalization mode);
Normalization parse_normalization(const std::string& text);

/// l2_unit divides by the Euclidean norm and rounds the result to float32, so
/// that x and a*x (a > 0) map to the same features. A zero vector stays zero.
struct NormalizationConfig {
  Normalization mode = Normalization::l2_unit;

  VectorXd apply(std::span<const float> x) const;
  VectorXd apply(std::span<const double> x) const;
};

// Normalized rows with labels -1 (real) / +1 (fake).
struct TrainingData {
  RowMatrix x;
  VectorXd y;
  std::vector<std::string> ids;
  NormalizationConfig norm;

  int dim() const { return static_cast<int>(x.cols()); }
  std::size_t size() const { return static_cast<std::size_t>(x.rows()); }
};

TrainingData training_data(const refset::ReferenceSet& refset, const NormalizationConfig& norm);
TrainingData training_data(const std::vector<std::vector<double>>& rows, const std::vector<int>& labels,
                           const NormalizationConfig& norm, std::vector<std::string> ids = {});

struct SolverReport {
  long iterations = 0;
  double primal = 0.0;
  double dual = 0.0;
  double gap = 0.0;
  double gradient_norm = 0.0;
  bool converged = false;
  std::string warning;

  nlohmann::ordered_json to_json() const;
};

struct SvmOptions {
  double c = 1.0;
  double tol = 1e-4;
  std::uint64_t seed = 0;
  long max_epochs = 1000000;
  bool shrinking = true;
};

// Shared by the SVM and logistic regression: margin = w.x + b.
struct LinearModel {
  enum class Kind { svm, logistic_regression } kind = Kind::svm;
  VectorXd weights;
  double bias = 0.0;
  NormalizationConfig norm;
  double c = 1.0;
  double tol = 0.0;
  SolverReport report;

  double margin(const VectorXd& normalized) const { return weights.dot(normalized) + bias; }
};

/// Dual coordinate descent on the hinge loss with shrinking. The bias is
/// learned as the weight of a constant feature 1 appended to every row, so
/// it is regularized with w. Stops when gap <= tol * primal.
LinearModel train_svm(const TrainingData& data, const SvmOptions& options = {});
LinearModel train_svm(const refset::ReferenceSet& refset, double c, const NormalizationConfig& norm,
                      double tol, std::uint64_t seed);

// Primal objective 1/2 |(w,b)|^2 + c * sum hinge.
double svm_primal(const TrainingData& data, const VectorXd& w, double b, double c);

struct LogisticOptions {
  double c = 1.0;
  double tol = 1e-6;  // on the gradient norm
  int max_iter = 1000;
};

// f(v) = 1/2 |v|^2 + c * sum log(1 + exp(-y v.(x,1))) with v = (w, b).
double logistic_loss(const TrainingData& data, const VectorXd& v, double c, VectorXd* gradient = nullptr);

LinearModel train_logistic(const TrainingData& data, const LogisticOptions& options = {});

struct MahalanobisModel {
  VectorXd mean_real;
  VectorXd mean_fake;
  RowMatrix chol;  // lower factor of the shrunk covariance
  double shrinkage = 0.0;
  bool shrinkage_auto = false;
  NormalizationConfig norm;

  double distance2(const VectorXd& x, bool fake) const;
};

struct GnbModel {
  VectorXd mean_real, var_real;
  VectorXd mean_fake, var_fake;
  double var_floor = 1e-9;
  NormalizationConfig norm;

  double log_likelihood(const VectorXd& x, bool fake) const;
};

struct KnnModel {
  RowMatrix refs;
  std::vector<bool> fake;
  std::vector<std::string> ids;
  int k = 1;
  double eps = 1e-12;
  NormalizationConfig norm;
};

enum class AblationKind { logistic_regression, mahalanobis, gaussian_naive_bayes, soft_knn };

const char* to_string(AblationKind kind);
AblationKind parse_ablation_kind(const std::string& text);

struct AblationParams {
  LogisticOptions logistic;
  std::optional<double> shrinkage;  // empty: closed-form estimate
  double var_floor = 1e-9;
  std::optional<int> k;  // empty: ceil(sqrt(2N))
  double eps = 1e-12;
};

// Schafer-Strimmer / Ledoit-Wolf style intensity toward diag(S), in [0,1].
double auto_shrinkage(const TrainingData& data);

MahalanobisModel fit_mahalanobis(const TrainingData& data, std::optional<double> shrinkage);
GnbModel fit_gnb(const TrainingData& data, double var_floor);
KnnModel fit_knn(const TrainingData& data, std::optional<int> k, double eps);

using Model = std::variant<LinearModel, MahalanobisModel, GnbModel, KnnModel>;

Model fit_ablation(const TrainingData& data, AblationKind kind, const AblationParams& params = {});

std::string kind_name(const Model& model);
int feature_dim(const Model& model);
const NormalizationConfig& normalization(const Model& model);

// Logistic link, with margins > 0 always mapping strictly above 0.5.
double sigmoid(double margin);

// Raw decision value (margin, scaled log-odds, or kNN vote) on normalized input.
double decision(const Model& model, const VectorXd& normalized);

double predict_score(const Model& model, std::span<const float> x);
double predict_score(const Model& model, std::span<const double> x);

// JSON header plus base64 float32 parameter block.
nlohmann::ordered_json model_to_json(const Model& model);
Model model_from_json(const nlohmann::json& j);

}  // namespace cfx::classify
