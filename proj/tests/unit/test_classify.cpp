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
#include <vector>

#include <doctest.h>
#include <json.hpp>

#include "classify/classify.hpp"
#include "common/error.hpp"
#include "common/rng.hpp"
#include "oracles/qp.hpp"

using namespace cfx;
using namespace cfx::classify;

namespace {

struct Problem {
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
};

// Two overlapping Gaussian blobs.
Problem blobs(std::uint64_t seed, int n_per_class, int d, double sep) {
  Rng rng(seed);
  Problem p;
  for (int c = 0; c < 2; ++c) {
    for (int i = 0; i < n_per_class; ++i) {
      std::vector<double> x(static_cast<std::size_t>(d));
      for (int j = 0; j < d; ++j) x[static_cast<std::size_t>(j)] = rng.normal() + (c ? sep : -sep) * (j % 2 ? 1 : 0.5);
      p.rows.push_back(x);
      p.labels.push_back(c ? 1 : -1);
    }
  }
  return p;
}

Eigen::MatrixXd signed_rows(const TrainingData& t) {
  Eigen::MatrixXd a(t.x.rows(), t.x.cols() + 1);
  for (Eigen::Index i = 0; i < t.x.rows(); ++i) {
    a.row(i).head(t.x.cols()) = t.y[i] * t.x.row(i);
    a(i, t.x.cols()) = t.y[i];
  }
  return a;
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind{0};
}

}  // namespace

TEST_CASE("l2 normalization is scale invariant and leaves zero alone") {
  NormalizationConfig norm;
  Rng rng(3);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> x(16);
    for (auto& v : x) v = rng.normal();
    const auto base = norm.apply(std::span<const double>(x));
    CHECK(std::abs(base.norm() - 1.0) < 1e-6);
    for (double a : {1e-3, 7.0, 1e3}) {
      std::vector<double> y = x;
      for (auto& v : y) v *= a;
      CHECK(norm.apply(std::span<const double>(y)) == base);
    }
  }
  const std::vector<double> zero(5, 0.0);
  CHECK(norm.apply(std::span<const double>(zero)).isZero());
  NormalizationConfig none{Normalization::none};
  const std::vector<float> raw = {3.0f, 4.0f};
  CHECK(none.apply(std::span<const float>(raw))[1] == 4.0);
  const std::vector<double> bad = {1.0, NAN};
  CHECK(kind_of([&] { norm.apply(std::span<const double>(bad)); }) == ErrorKind::data);
}

TEST_CASE("svm matches a dense interior-point solution of the dual") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto p = blobs(seed, 15, 6, 0.4);
    const auto data = training_data(p.rows, p.labels, {});
    const double c = seed % 2 ? 0.5 : 4.0;
    SvmOptions opt;
    opt.c = c;
    opt.tol = 1e-12;
    opt.seed = seed;
    const auto model = train_svm(data, opt);
    REQUIRE(model.report.converged);
    const auto ref = oracle::svm_dual_barrier(signed_rows(data), c);
    CHECK(std::abs(model.report.primal - ref.primal) <= 1e-9 * ref.primal);
    for (Eigen::Index i = 0; i < data.x.rows(); ++i) {
      const Eigen::VectorXd x = data.x.row(i).transpose();
      const double oracle_margin = ref.v.head(x.size()).dot(x) + ref.v[x.size()];
      CHECK(std::abs(model.margin(x) - oracle_margin) < 1e-4);
    }
  }
}

TEST_CASE("svm stopping rule bounds the true suboptimality") {
  const auto p = blobs(11, 40, 8, 0.3);
  const auto data = training_data(p.rows, p.labels, {});
  const auto ref = oracle::svm_dual_barrier(signed_rows(data), 1.0);
  for (double tol : {1e-2, 1e-4, 1e-6}) {
    SvmOptions opt;
    opt.tol = tol;
    const auto m = train_svm(data, opt);
    CHECK(m.report.converged);
    const double primal = svm_primal(data, m.weights, m.bias, 1.0);
    CHECK(std::abs(primal - m.report.primal) <= 1e-9 * primal);
    CHECK(m.report.gap <= tol * m.report.primal);
    CHECK(primal - ref.primal <= tol * primal + 1e-9);
    CHECK(primal >= ref.primal - 1e-7);
  }
}

TEST_CASE("duplicated training set at half c is the same problem") {
  const auto p = blobs(5, 20, 4, 0.5);
  auto dup = p;
  dup.rows.insert(dup.rows.end(), p.rows.begin(), p.rows.end());
  dup.labels.insert(dup.labels.end(), p.labels.begin(), p.labels.end());
  const auto a = training_data(p.rows, p.labels, {});
  const auto b = training_data(dup.rows, dup.labels, {});
  const double tol = 1e-8;
  SvmOptions oa{.c = 2.0, .tol = tol};
  SvmOptions ob{.c = 1.0, .tol = tol};
  const auto ma = train_svm(a, oa);
  const auto mb = train_svm(b, ob);
  const double pa = svm_primal(a, ma.weights, ma.bias, 2.0);
  const double pb = svm_primal(b, mb.weights, mb.bias, 1.0);
  CHECK(std::abs(pa - pb) <= 2 * tol * pa);
  const double bound = 2.0 * std::sqrt(2.0 * tol * pa);
  CHECK((ma.weights - mb.weights).norm() <= bound);
  CHECK(std::abs(ma.bias - mb.bias) <= bound);
}

TEST_CASE("svm is deterministic per seed and rejects bad input") {
  const auto p = blobs(2, 10, 3, 1.0);
  const auto data = training_data(p.rows, p.labels, {});
  const auto m1 = train_svm(data, {.seed = 9});
  const auto m2 = train_svm(data, {.seed = 9});
  CHECK(m1.weights == m2.weights);
  CHECK(m1.bias == m2.bias);
  CHECK(kind_of([&] { train_svm(data, {.c = 0.0}); }) == ErrorKind::config);
  const std::vector<int> one_class(p.labels.size(), 1);
  const auto mono = training_data(p.rows, one_class, {});
  CHECK(kind_of([&] { train_svm(mono); }) == ErrorKind::data);
}

TEST_CASE("iteration cap produces a warning instead of an error") {
  const auto p = blobs(4, 30, 5, 0.1);
  const auto data = training_data(p.rows, p.labels, {});
  const auto m = train_svm(data, {.tol = 1e-12, .max_epochs = 1});
  CHECK_FALSE(m.report.converged);
  CHECK(m.report.warning.find("cap") != std::string::npos);
}

TEST_CASE("logistic gradient agrees with finite differences") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto p = blobs(100 + seed, 8, 5, 0.5);
    const auto data = training_data(p.rows, p.labels, {Normalization::none});
    Rng rng(seed);
    Eigen::VectorXd v(6);
    for (Eigen::Index k = 0; k < v.size(); ++k) v[k] = rng.normal();
    const double c = 0.3 + seed;
    Eigen::VectorXd g;
    const double f = logistic_loss(data, v, c, &g);
    const Eigen::MatrixXd x = data.x;
    CHECK(std::abs(f - oracle::logistic_objective(x, data.y, v, c)) <= 1e-12 * f);
    const Eigen::VectorXd fd = oracle::central_difference(x, data.y, v, c);
    CHECK((g - fd).norm() <= 1e-4 * std::max(1.0, fd.norm()));
  }
}

TEST_CASE("logistic training reaches a stationary point") {
  const auto p = blobs(7, 25, 10, 0.4);
  const auto data = training_data(p.rows, p.labels, {});
  const auto m = train_logistic(data, {.c = 10.0});
  CHECK(m.report.converged);
  Eigen::VectorXd v(m.weights.size() + 1);
  v << m.weights, m.bias;
  const Eigen::VectorXd fd = oracle::central_difference(data.x, data.y, v, 10.0, 1e-6);
  CHECK(fd.norm() < 1e-4);
}

TEST_CASE("sigmoid link is coherent with the margin sign") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(1e-300) > 0.5);
  CHECK(sigmoid(-1e-300) < 0.5);
  CHECK(sigmoid(800) == 1.0);
  CHECK(sigmoid(-800) >= 0.0);
  const auto p = blobs(12, 20, 8, 0.3);
  const auto data = training_data(p.rows, p.labels, {});
  const Model model = train_svm(data);
  Rng rng(1);
  for (int t = 0; t < 2000; ++t) {
    std::vector<double> x(8);
    for (auto& v : x) v = rng.normal();
    const double m = decision(model, normalization(model).apply(std::span<const double>(x)));
    const double s = predict_score(model, std::span<const double>(x));
    CHECK((s > 0.5) == (m > 0.0));
    for (double a : {1e-3, 1e3}) {
      std::vector<double> y = x;
      for (auto& v : y) v *= a;
      CHECK(predict_score(model, std::span<const double>(y)) == s);
    }
  }
}

TEST_CASE("mahalanobis matches a direct inverse") {
  const auto p = blobs(21, 30, 4, 0.6);
  const auto data = training_data(p.rows, p.labels, {Normalization::none});
  const auto m = fit_mahalanobis(data, 0.2);
  Eigen::VectorXd mr = Eigen::VectorXd::Zero(4), mf = Eigen::VectorXd::Zero(4);
  for (Eigen::Index i = 0; i < 60; ++i) (i < 30 ? mr : mf) += data.x.row(i).transpose() / 30.0;
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(4, 4);
  for (Eigen::Index i = 0; i < 60; ++i) {
    const Eigen::VectorXd z = data.x.row(i).transpose() - (i < 30 ? mr : mf);
    s += z * z.transpose();
  }
  s /= 58.0;
  Eigen::MatrixXd shrunk = 0.8 * s;
  shrunk.diagonal() += 0.2 * s.diagonal();
  const Eigen::MatrixXd inv = shrunk.inverse();
  for (Eigen::Index i = 0; i < 60; ++i) {
    const Eigen::VectorXd x = data.x.row(i).transpose();
    const double dr = (x - mr).dot(inv * (x - mr));
    const double df = (x - mf).dot(inv * (x - mf));
    CHECK(std::abs(decision(Model{m}, x) - 0.5 * (dr - df)) < 1e-9);
  }
}

TEST_CASE("mahalanobis auto shrinkage follows the closed form") {
  const auto p = blobs(22, 12, 5, 0.5);
  const auto data = training_data(p.rows, p.labels, {Normalization::none});
  const int n = 24, d = 5;
  Eigen::VectorXd mr = Eigen::VectorXd::Zero(d), mf = Eigen::VectorXd::Zero(d);
  for (int i = 0; i < n; ++i) (i < 12 ? mr : mf) += data.x.row(i).transpose() / 12.0;
  std::vector<Eigen::VectorXd> z;
  for (int i = 0; i < n; ++i) z.push_back(data.x.row(i).transpose() - (i < 12 ? mr : mf));
  double num = 0, den = 0;
  for (int a = 0; a < d; ++a) {
    for (int b = 0; b < d; ++b) {
      if (a == b) continue;
      double mean = 0;
      for (const auto& v : z) mean += v[a] * v[b] / n;
      double var = 0;
      for (const auto& v : z) var += (v[a] * v[b] - mean) * (v[a] * v[b] - mean);
      num += var * n / std::pow(n - 1.0, 3);
      den += std::pow(mean * n / (n - 1.0), 2);
    }
  }
  const double expected = std::clamp(num / den, 0.0, 1.0);
  CHECK(std::abs(auto_shrinkage(data) - expected) < 1e-12);
  const auto m = fit_mahalanobis(data, std::nullopt);
  CHECK(m.shrinkage_auto);
  CHECK(m.shrinkage == doctest::Approx(expected));
}

TEST_CASE("mahalanobis refuses a singular covariance without shrinkage") {
  const auto p = blobs(23, 5, 64, 0.5);
  const auto data = training_data(p.rows, p.labels, {});
  CHECK(kind_of([&] { fit_mahalanobis(data, 0.0); }) == ErrorKind::data);
  CHECK_NOTHROW(fit_mahalanobis(data, std::nullopt));
  CHECK(kind_of([&] { fit_mahalanobis(data, 1.5); }) == ErrorKind::config);
}

TEST_CASE("gaussian naive bayes matches the per-coordinate formula") {
  const auto p = blobs(31, 10, 3, 0.7);
  auto rows = p.rows;
  for (auto& r : rows) r[2] = 1.0;  // constant column exercises the floor
  const auto data = training_data(rows, p.labels, {Normalization::none});
  const auto m = fit_gnb(data, 1e-6);
  CHECK(m.var_real[2] == 1e-6);
  for (Eigen::Index i = 0; i < 20; ++i) {
    const Eigen::VectorXd x = data.x.row(i).transpose();
    double llr = 0;
    for (int j = 0; j < 3; ++j) {
      for (int c = 0; c < 2; ++c) {
        double mu = 0, var = 0;
        for (int k = 0; k < 10; ++k) mu += data.x(c * 10 + k, j) / 10.0;
        for (int k = 0; k < 10; ++k) var += std::pow(data.x(c * 10 + k, j) - mu, 2) / 10.0;
        var = std::max(var, 1e-6);
        const double ll = -0.5 * std::log(2 * M_PI * var) - std::pow(x[j] - mu, 2) / (2 * var);
        llr += c ? ll : -ll;
      }
    }
    CHECK(decision(Model{m}, x) == doctest::Approx(llr).epsilon(1e-12));
  }
}

TEST_CASE("soft knn weights the k nearest references") {
  const std::vector<std::vector<double>> rows = {{0, 0}, {1, 0}, {3, 0}, {4, 0}, {10, 0}, {11, 0}};
  const std::vector<int> labels = {-1, -1, 1, 1, -1, 1};
  const auto data = training_data(rows, labels, {Normalization::none});
  const auto m = fit_knn(data, std::nullopt, 1e-12);
  CHECK(m.k == 3);  // ceil(sqrt(6))
  const Eigen::Vector2d q(2.0, 0.0);
  // neighbours: 1 (d=1, real), 3 (d=1, fake), 0 (d=2, real); 4 is at d=2 too
  // but loses the id tie-break.
  const double w1 = 1 / (1 + 1e-12), w2 = 1 / (2 + 1e-12);
  CHECK(decision(Model{m}, q) == doctest::Approx(w1 / (2 * w1 + w2)).epsilon(1e-14));
  const Eigen::Vector2d exact(10.0, 0.0);
  CHECK(decision(Model{m}, exact) < 1e-9);
  CHECK(kind_of([&] { fit_knn(data, 7, 1e-12); }) == ErrorKind::config);
}

TEST_CASE("models survive a json round trip") {
  const auto p = blobs(41, 15, 6, 0.5);
  const auto data = training_data(p.rows, p.labels, {});
  std::vector<Model> models = {train_svm(data), train_logistic(data)};
  for (auto kind : {AblationKind::mahalanobis, AblationKind::gaussian_naive_bayes, AblationKind::soft_knn}) {
    models.push_back(fit_ablation(data, kind));
  }
  for (const auto& m : models) {
    const auto text = model_to_json(m).dump();
    const Model back = model_from_json(nlohmann::json::parse(text));
    CHECK(kind_name(back) == kind_name(m));
    CHECK(feature_dim(back) == 6);
    CHECK(model_to_json(back).dump() == text);
    for (const auto& r : p.rows) {
      CHECK(predict_score(back, std::span<const double>(r)) ==
            doctest::Approx(predict_score(m, std::span<const double>(r))).epsilon(1e-5));
    }
  }
  auto broken = model_to_json(models[0]);
  broken["feature_dim"] = 7;
  CHECK(kind_of([&] { model_from_json(broken); }) == ErrorKind::data);
  const std::vector<double> short_vec(5, 1.0);
  CHECK(kind_of([&] { predict_score(models[0], std::span<const double>(short_vec)); }) == ErrorKind::data);
}
