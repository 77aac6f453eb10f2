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

#include "classify/classify.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>

#include <Eigen/Cholesky>
#include <fmt/format.h>

#include "common/error.hpp"
#include "common/hash.hpp"
#include "common/rng.hpp"

namespace cfx::classify {

const char* to_string(Normalization mode) { return mode == Normalization::l2_unit ? "l2_unit" : "none"; }

Normalization parse_normalization(const std::string& text) {
  if (text == "l2_unit") return Normalization::l2_unit;
  if (text == "none") return Normalization::none;
  config_error("unknown normalization '{}' (l2_unit or none)", text);
}

namespace {

template <typename T>
VectorXd normalize(std::span<const T> x, Normalization mode) {
  VectorXd v(static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(static_cast<double>(x[i]))) data_error("non-finite feature value");
    v[static_cast<Eigen::Index>(i)] = static_cast<double>(x[i]);
  }
  if (mode == Normalization::none) return v;
  // Scale by the largest magnitude first so the norm cannot overflow.
  const double peak = v.cwiseAbs().maxCoeff();
  if (peak == 0.0) return v;
  const VectorXd u = v / peak;
  const double n = u.norm();
  for (Eigen::Index i = 0; i < u.size(); ++i) v[i] = static_cast<double>(static_cast<float>(u[i] / n));
  return v;
}

}  // namespace

VectorXd NormalizationConfig::apply(std::span<const float> x) const { return normalize(x, mode); }
VectorXd NormalizationConfig::apply(std::span<const double> x) const { return normalize(x, mode); }

TrainingData training_data(const std::vector<std::vector<double>>& rows, const std::vector<int>& labels,
                           const NormalizationConfig& norm, std::vector<std::string> ids) {
  if (rows.size() != labels.size()) internal_error("rows and labels differ in length");
  if (rows.empty()) data_error("training set is empty");
  const auto d = static_cast<Eigen::Index>(rows.front().size());
  if (d == 0) data_error("training vectors have zero dimension");
  TrainingData t;
  t.norm = norm;
  t.x.resize(static_cast<Eigen::Index>(rows.size()), d);
  t.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (static_cast<Eigen::Index>(rows[i].size()) != d) data_error("training vectors differ in dimension");
    t.x.row(static_cast<Eigen::Index>(i)) = norm.apply(std::span<const double>(rows[i])).transpose();
    if (labels[i] != 1 && labels[i] != -1) internal_error("labels must be +1 or -1");
    t.y[static_cast<Eigen::Index>(i)] = labels[i];
  }
  if (ids.empty()) {
    for (std::size_t i = 0; i < rows.size(); ++i) ids.push_back(fmt::format("{:08d}", i));
  }
  t.ids = std::move(ids);
  return t;
}

TrainingData training_data(const refset::ReferenceSet& rs, const NormalizationConfig& norm) {
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < rs.real_vectors.size(); ++i) {
    rows.emplace_back(rs.real_vectors[i].begin(), rs.real_vectors[i].end());
    labels.push_back(-1);
    ids.push_back(i < rs.real_ids.size() ? rs.real_ids[i] : fmt::format("real{}", i));
  }
  for (std::size_t i = 0; i < rs.fake_vectors.size(); ++i) {
    rows.emplace_back(rs.fake_vectors[i].begin(), rs.fake_vectors[i].end());
    labels.push_back(1);
    ids.push_back(i < rs.fake_ids.size() ? rs.fake_ids[i] : fmt::format("fake{}", i));
  }
  return training_data(rows, labels, norm, std::move(ids));
}

nlohmann::ordered_json SolverReport::to_json() const {
  nlohmann::ordered_json j = {{"iterations", iterations},
                              {"primal", primal},
                              {"dual", dual},
                              {"gap", gap},
                              {"gradient_norm", gradient_norm},
                              {"converged", converged}};
  if (!warning.empty()) j["warning"] = warning;
  return j;
}

namespace {

void check_classes(const TrainingData& data) {
  int pos = 0, neg = 0;
  for (Eigen::Index i = 0; i < data.y.size(); ++i) (data.y[i] > 0 ? pos : neg)++;
  if (pos == 0 || neg == 0) data_error("training needs both classes (got {} fake, {} real)", pos, neg);
}

}  // namespace

double svm_primal(const TrainingData& data, const VectorXd& w, double b, double c) {
  double loss = 0.0;
  for (Eigen::Index i = 0; i < data.x.rows(); ++i) {
    loss += std::max(0.0, 1.0 - data.y[i] * (data.x.row(i).dot(w) + b));
  }
  return 0.5 * (w.squaredNorm() + b * b) + c * loss;
}

LinearModel train_svm(const TrainingData& data, const SvmOptions& opt) {
  if (!(opt.c > 0.0)) config_error("svm c must be positive, got {}", opt.c);
  if (!(opt.tol > 0.0)) config_error("svm tol must be positive, got {}", opt.tol);
  check_classes(data);
  const Eigen::Index n = data.x.rows();
  const Eigen::Index d = data.x.cols();
  const double C = opt.c;

  VectorXd qd(n);
  for (Eigen::Index i = 0; i < n; ++i) qd[i] = data.x.row(i).squaredNorm() + 1.0;
  VectorXd alpha = VectorXd::Zero(n);
  VectorXd w = VectorXd::Zero(d);
  double b = 0.0;

  std::vector<Eigen::Index> index(static_cast<std::size_t>(n));
  std::iota(index.begin(), index.end(), 0);
  std::size_t active = index.size();
  double pg_max_old = std::numeric_limits<double>::infinity();
  double pg_min_old = -std::numeric_limits<double>::infinity();
  double pg_eps = 1e-2;
  Rng rng(combine64(opt.seed, fnv1a64("svm")));

  LinearModel model;
  model.kind = LinearModel::Kind::svm;
  model.norm = data.norm;
  model.c = C;
  model.tol = opt.tol;
  SolverReport& rep = model.report;

  auto measure = [&] {
    // Rebuild (w, b) from alpha to keep both objectives consistent.
    w.setZero();
    b = 0.0;
    double sum_alpha = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (alpha[i] == 0.0) continue;
      w.noalias() += (alpha[i] * data.y[i]) * data.x.row(i).transpose();
      b += alpha[i] * data.y[i];
      sum_alpha += alpha[i];
    }
    rep.primal = svm_primal(data, w, b, C);
    rep.dual = sum_alpha - 0.5 * (w.squaredNorm() + b * b);
    rep.gap = rep.primal - rep.dual;
  };

  for (long epoch = 0; epoch < opt.max_epochs; ++epoch) {
    for (std::size_t s = 0; s + 1 < active; ++s) {
      const auto r = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(s), static_cast<std::int64_t>(active - 1)));
      std::swap(index[s], index[r]);
    }
    double pg_max_new = -std::numeric_limits<double>::infinity();
    double pg_min_new = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < active;) {
      const Eigen::Index i = index[s];
      const double yi = data.y[i];
      const double g = yi * (data.x.row(i).dot(w) + b) - 1.0;
      double pg = 0.0;
      if (alpha[i] == 0.0) {
        if (opt.shrinking && g > pg_max_old) {
          std::swap(index[s], index[--active]);
          continue;
        }
        if (g < 0.0) pg = g;
      } else if (alpha[i] == C) {
        if (opt.shrinking && g < pg_min_old) {
          std::swap(index[s], index[--active]);
          continue;
        }
        if (g > 0.0) pg = g;
      } else {
        pg = g;
      }
      pg_max_new = std::max(pg_max_new, pg);
      pg_min_new = std::min(pg_min_new, pg);
      if (std::abs(pg) > 1e-14) {
        const double old = alpha[i];
        alpha[i] = std::min(std::max(old - g / qd[i], 0.0), C);
        const double delta = (alpha[i] - old) * yi;
        w.noalias() += delta * data.x.row(i).transpose();
        b += delta;
      }
      ++s;
    }
    rep.iterations = epoch + 1;

    measure();
    if (rep.gap <= opt.tol * rep.primal) {
      rep.converged = true;
      break;
    }
    if (active == 0 || pg_max_new - pg_min_new <= pg_eps) {
      if (active == index.size()) {
        if (pg_eps < 1e-15) {
          rep.warning = "projected gradient vanished before the duality gap reached tolerance";
          break;
        }
        pg_eps *= 0.1;
      }
      active = index.size();
      pg_max_old = std::numeric_limits<double>::infinity();
      pg_min_old = -std::numeric_limits<double>::infinity();
      continue;
    }
    pg_max_old = pg_max_new <= 0.0 ? std::numeric_limits<double>::infinity() : pg_max_new;
    pg_min_old = pg_min_new >= 0.0 ? -std::numeric_limits<double>::infinity() : pg_min_new;
  }
  if (!rep.converged && rep.warning.empty()) {
    rep.warning = fmt::format("iteration cap of {} epochs reached (gap {:.3g}, primal {:.3g})",
                              opt.max_epochs, rep.gap, rep.primal);
  }
  model.weights = w;
  model.bias = b;
  return model;
}

LinearModel train_svm(const refset::ReferenceSet& rs, double c, const NormalizationConfig& norm, double tol,
                      std::uint64_t seed) {
  SvmOptions opt;
  opt.c = c;
  opt.tol = tol;
  opt.seed = seed;
  return train_svm(training_data(rs, norm), opt);
}

namespace {

// log(1 + exp(-m)) without overflow.
double log1p_exp_neg(double m) {
  return m > 0.0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
}

}  // namespace

double logistic_loss(const TrainingData& data, const VectorXd& v, double c, VectorXd* gradient) {
  const Eigen::Index d = data.x.cols();
  if (v.size() != d + 1) internal_error("logistic parameter vector must have dim + 1 entries");
  const auto w = v.head(d);
  const double b = v[d];
  double loss = 0.5 * v.squaredNorm();
  if (gradient) *gradient = v;
  for (Eigen::Index i = 0; i < data.x.rows(); ++i) {
    const double m = data.y[i] * (data.x.row(i).dot(w) + b);
    loss += c * log1p_exp_neg(m);
    if (gradient) {
      // d/dm log(1+exp(-m)) = -sigma(-m)
      const double s = m > 0.0 ? std::exp(-m) / (1.0 + std::exp(-m)) : 1.0 / (1.0 + std::exp(m));
      const double coef = -c * s * data.y[i];
      gradient->head(d).noalias() += coef * data.x.row(i).transpose();
      (*gradient)[d] += coef;
    }
  }
  return loss;
}

LinearModel train_logistic(const TrainingData& data, const LogisticOptions& opt) {
  if (!(opt.c > 0.0)) config_error("logistic c must be positive, got {}", opt.c);
  if (!(opt.tol > 0.0)) config_error("logistic tol must be positive, got {}", opt.tol);
  check_classes(data);
  const Eigen::Index n = data.x.rows();
  const Eigen::Index d = data.x.cols();
  VectorXd v = VectorXd::Zero(d + 1);
  VectorXd g;
  double f = logistic_loss(data, v, opt.c, &g);

  LinearModel model;
  model.kind = LinearModel::Kind::logistic_regression;
  model.norm = data.norm;
  model.c = opt.c;
  model.tol = opt.tol;
  SolverReport& rep = model.report;

  auto hess_vec = [&](const VectorXd& curv, const VectorXd& p) {
    VectorXd out = p;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double xp = data.x.row(i).dot(p.head(d)) + p[d];
      const double k = opt.c * curv[i] * xp;
      out.head(d).noalias() += k * data.x.row(i).transpose();
      out[d] += k;
    }
    return out;
  };

  int it = 0;
  for (; it < opt.max_iter && g.norm() > opt.tol; ++it) {
    VectorXd curv(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double z = data.x.row(i).dot(v.head(d)) + v[d];
      const double s = sigmoid(z);
      curv[i] = s * (1.0 - s);
    }
    // Truncated conjugate gradient on H p = -g.
    VectorXd p = VectorXd::Zero(d + 1);
    VectorXd r = -g;
    VectorXd dir = r;
    double rr = r.squaredNorm();
    const double stop = std::min(0.5, std::sqrt(g.norm())) * g.norm();
    for (int cg = 0; cg < 2 * (d + 1) && std::sqrt(rr) > stop; ++cg) {
      const VectorXd hd = hess_vec(curv, dir);
      const double a = rr / dir.dot(hd);
      p += a * dir;
      r -= a * hd;
      const double rr_new = r.squaredNorm();
      dir = r + (rr_new / rr) * dir;
      rr = rr_new;
    }
    // Armijo backtracking.
    double step = 1.0;
    const double slope = g.dot(p);
    VectorXd next;
    VectorXd g_next;
    double f_next = f;
    for (int ls = 0; ls < 60; ++ls) {
      next = v + step * p;
      f_next = logistic_loss(data, next, opt.c, &g_next);
      if (f_next <= f + 1e-4 * step * slope) break;
      step *= 0.5;
    }
    if (!(f_next <= f)) {
      rep.warning = "line search failed to decrease the loss";
      break;
    }
    v = std::move(next);
    g = std::move(g_next);
    f = f_next;
  }
  rep.iterations = it;
  rep.primal = f;
  rep.gradient_norm = g.norm();
  rep.converged = rep.gradient_norm <= opt.tol;
  if (!rep.converged && rep.warning.empty()) {
    rep.warning = fmt::format("iteration cap of {} reached (gradient norm {:.3g})", opt.max_iter, rep.gradient_norm);
  }
  model.weights = v.head(d);
  model.bias = v[d];
  return model;
}

double MahalanobisModel::distance2(const VectorXd& x, bool fake) const {
  const VectorXd diff = x - (fake ? mean_fake : mean_real);
  const VectorXd z = chol.triangularView<Eigen::Lower>().solve(diff);
  return z.squaredNorm();
}

double GnbModel::log_likelihood(const VectorXd& x, bool fake) const {
  const VectorXd& mu = fake ? mean_fake : mean_real;
  const VectorXd& var = fake ? var_fake : var_real;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double diff = x[i] - mu[i];
    ll += -0.5 * std::log(2.0 * M_PI * var[i]) - diff * diff / (2.0 * var[i]);
  }
  return ll;
}

const char* to_string(AblationKind kind) {
  switch (kind) {
    case AblationKind::logistic_regression:
      return "logistic_regression";
    case AblationKind::mahalanobis:
      return "mahalanobis";
    case AblationKind::gaussian_naive_bayes:
      return "gaussian_naive_bayes";
    case AblationKind::soft_knn:
      return "soft_knn";
  }
  return "?";
}

AblationKind parse_ablation_kind(const std::string& text) {
  if (text == "logistic_regression" || text == "logistic") return AblationKind::logistic_regression;
  if (text == "mahalanobis") return AblationKind::mahalanobis;
  if (text == "gaussian_naive_bayes" || text == "gnb") return AblationKind::gaussian_naive_bayes;
  if (text == "soft_knn" || text == "knn") return AblationKind::soft_knn;
  config_error("unknown classifier '{}'", text);
}

namespace {

struct ClassStats {
  VectorXd mean_real, mean_fake;
  RowMatrix centered;  // rows minus their class mean
  int n_real = 0, n_fake = 0;
};

ClassStats class_stats(const TrainingData& data) {
  check_classes(data);
  ClassStats s;
  const Eigen::Index d = data.x.cols();
  s.mean_real = VectorXd::Zero(d);
  s.mean_fake = VectorXd::Zero(d);
  for (Eigen::Index i = 0; i < data.x.rows(); ++i) {
    if (data.y[i] > 0) {
      s.mean_fake += data.x.row(i).transpose();
      ++s.n_fake;
    } else {
      s.mean_real += data.x.row(i).transpose();
      ++s.n_real;
    }
  }
  s.mean_real /= s.n_real;
  s.mean_fake /= s.n_fake;
  s.centered = data.x;
  for (Eigen::Index i = 0; i < data.x.rows(); ++i) {
    s.centered.row(i) -= (data.y[i] > 0 ? s.mean_fake : s.mean_real).transpose();
  }
  return s;
}

}  // namespace

double auto_shrinkage(const TrainingData& data) {
  const ClassStats s = class_stats(data);
  const auto n = static_cast<double>(data.x.rows());
  if (n < 2) return 1.0;
  const RowMatrix& z = s.centered;
  const Eigen::MatrixXd wbar = (z.transpose() * z) / n;
  const RowMatrix z2 = z.array().square().matrix();
  const Eigen::MatrixXd w2 = z2.transpose() * z2;  // sum_k z_ki^2 z_kj^2
  double num = 0.0, den = 0.0;
  for (Eigen::Index i = 0; i < wbar.rows(); ++i) {
    for (Eigen::Index j = 0; j < wbar.cols(); ++j) {
      if (i == j) continue;
      const double var_w = std::max(0.0, w2(i, j) - n * wbar(i, j) * wbar(i, j));
      num += n / ((n - 1) * (n - 1) * (n - 1)) * var_w;
      const double sij = n / (n - 1) * wbar(i, j);
      den += sij * sij;
    }
  }
  if (den == 0.0) return 1.0;
  return std::clamp(num / den, 0.0, 1.0);
}

MahalanobisModel fit_mahalanobis(const TrainingData& data, std::optional<double> shrinkage) {
  if (shrinkage && !(*shrinkage >= 0.0 && *shrinkage <= 1.0)) {
    config_error("mahalanobis shrinkage {} outside [0,1]", *shrinkage);
  }
  const ClassStats s = class_stats(data);
  const Eigen::Index d = data.x.cols();
  const auto n = data.x.rows();
  const double lambda = shrinkage ? *shrinkage : auto_shrinkage(data);
  if (lambda == 0.0 && n - 2 < d) {
    data_error("singular covariance: {} reference vectors per class cannot span {} dimensions with shrinkage 0",
               std::min(s.n_real, s.n_fake), d);
  }
  const double denom = n > 2 ? static_cast<double>(n - 2) : static_cast<double>(n);
  Eigen::MatrixXd cov = (s.centered.transpose() * s.centered) / denom;
  const VectorXd diag = cov.diagonal();
  cov *= (1.0 - lambda);
  cov.diagonal() += lambda * diag;
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  const double scale = std::max(cov.diagonal().maxCoeff(), std::numeric_limits<double>::min());
  if (llt.info() != Eigen::Success ||
      llt.matrixL().toDenseMatrix().diagonal().array().square().minCoeff() <= 1e-12 * scale) {
    data_error("covariance is singular after shrinkage {} (constant features?)", lambda);
  }
  MahalanobisModel m;
  m.mean_real = s.mean_real;
  m.mean_fake = s.mean_fake;
  m.chol = llt.matrixL().toDenseMatrix();
  m.shrinkage = lambda;
  m.shrinkage_auto = !shrinkage.has_value();
  m.norm = data.norm;
  return m;
}

GnbModel fit_gnb(const TrainingData& data, double var_floor) {
  if (!(var_floor > 0.0)) config_error("gnb variance floor must be positive, got {}", var_floor);
  const ClassStats s = class_stats(data);
  const Eigen::Index d = data.x.cols();
  GnbModel m;
  m.mean_real = s.mean_real;
  m.mean_fake = s.mean_fake;
  m.var_real = VectorXd::Zero(d);
  m.var_fake = VectorXd::Zero(d);
  for (Eigen::Index i = 0; i < data.x.rows(); ++i) {
    (data.y[i] > 0 ? m.var_fake : m.var_real) += s.centered.row(i).array().square().matrix().transpose();
  }
  m.var_real /= s.n_real;
  m.var_fake /= s.n_fake;
  m.var_real = m.var_real.cwiseMax(var_floor);
  m.var_fake = m.var_fake.cwiseMax(var_floor);
  m.var_floor = var_floor;
  m.norm = data.norm;
  return m;
}

KnnModel fit_knn(const TrainingData& data, std::optional<int> k, double eps) {
  check_classes(data);
  const auto total = static_cast<int>(data.x.rows());
  const int kk = k ? *k : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(total))));
  if (kk < 1 || kk > total) config_error("soft_knn k={} outside [1, {}]", kk, total);
  if (!(eps > 0.0)) config_error("soft_knn eps must be positive");
  KnnModel m;
  m.refs = data.x;
  for (Eigen::Index i = 0; i < data.y.size(); ++i) m.fake.push_back(data.y[i] > 0);
  m.ids = data.ids;
  m.k = kk;
  m.eps = eps;
  m.norm = data.norm;
  return m;
}

Model fit_ablation(const TrainingData& data, AblationKind kind, const AblationParams& p) {
  switch (kind) {
    case AblationKind::logistic_regression:
      return train_logistic(data, p.logistic);
    case AblationKind::mahalanobis:
      return fit_mahalanobis(data, p.shrinkage);
    case AblationKind::gaussian_naive_bayes:
      return fit_gnb(data, p.var_floor);
    case AblationKind::soft_knn:
      return fit_knn(data, p.k, p.eps);
  }
  internal_error("unhandled classifier kind");
}

std::string kind_name(const Model& model) {
  struct V {
    std::string operator()(const LinearModel& m) const {
      return m.kind == LinearModel::Kind::svm ? "svm" : "logistic_regression";
    }
    std::string operator()(const MahalanobisModel&) const { return "mahalanobis"; }
    std::string operator()(const GnbModel&) const { return "gaussian_naive_bayes"; }
    std::string operator()(const KnnModel&) const { return "soft_knn"; }
  };
  return std::visit(V{}, model);
}

int feature_dim(const Model& model) {
  struct V {
    Eigen::Index operator()(const LinearModel& m) const { return m.weights.size(); }
    Eigen::Index operator()(const MahalanobisModel& m) const { return m.mean_real.size(); }
    Eigen::Index operator()(const GnbModel& m) const { return m.mean_real.size(); }
    Eigen::Index operator()(const KnnModel& m) const { return m.refs.cols(); }
  };
  return static_cast<int>(std::visit(V{}, model));
}

const NormalizationConfig& normalization(const Model& model) {
  return std::visit([](const auto& m) -> const NormalizationConfig& { return m.norm; }, model);
}

double sigmoid(double margin) {
  if (std::isnan(margin)) data_error("non-finite decision value");
  const double s = margin >= 0.0 ? 1.0 / (1.0 + std::exp(-margin))
                                 : std::exp(margin) / (1.0 + std::exp(margin));
  if (margin > 0.0 && s <= 0.5) return std::nextafter(0.5, 1.0);
  if (margin < 0.0 && s >= 0.5) return std::nextafter(0.5, 0.0);
  if (margin == 0.0) return 0.5;
  return s;
}

namespace {

double knn_vote(const KnnModel& m, const VectorXd& x) {
  std::vector<std::pair<double, Eigen::Index>> dist;
  dist.reserve(static_cast<std::size_t>(m.refs.rows()));
  for (Eigen::Index i = 0; i < m.refs.rows(); ++i) dist.emplace_back((m.refs.row(i).transpose() - x).norm(), i);
  const auto k = static_cast<std::size_t>(m.k);
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end(),
                    [&](const auto& a, const auto& b) {
                      if (a.first != b.first) return a.first < b.first;
                      return m.ids[static_cast<std::size_t>(a.second)] < m.ids[static_cast<std::size_t>(b.second)];
                    });
  double num = 0.0, den = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    const double wgt = 1.0 / (dist[j].first + m.eps);
    den += wgt;
    if (m.fake[static_cast<std::size_t>(dist[j].second)]) num += wgt;
  }
  return num / den;
}

}  // namespace

double decision(const Model& model, const VectorXd& x) {
  if (x.size() != feature_dim(model)) {
    data_error("dimension mismatch: model expects {}, got {}", feature_dim(model), x.size());
  }
  struct V {
    const VectorXd& x;
    double operator()(const LinearModel& m) const { return m.margin(x); }
    double operator()(const MahalanobisModel& m) const {
      return 0.5 * (m.distance2(x, false) - m.distance2(x, true));
    }
    double operator()(const GnbModel& m) const { return m.log_likelihood(x, true) - m.log_likelihood(x, false); }
    double operator()(const KnnModel& m) const { return knn_vote(m, x); }
  };
  return std::visit(V{x}, model);
}

namespace {

template <typename T>
double score_impl(const Model& model, std::span<const T> x) {
  if (static_cast<int>(x.size()) != feature_dim(model)) {
    data_error("dimension mismatch: model expects {}, got {}", feature_dim(model), x.size());
  }
  const VectorXd v = normalization(model).apply(x);
  const double dv = decision(model, v);
  if (std::holds_alternative<KnnModel>(model)) return dv;
  return sigmoid(dv);
}

}  // namespace

double predict_score(const Model& model, std::span<const float> x) { return score_impl(model, x); }
double predict_score(const Model& model, std::span<const double> x) { return score_impl(model, x); }

// ---- serialization ----

namespace {

class ParamWriter {
 public:
  void add(const std::string& name, const VectorXd& v) {
    layout_.push_back({name, v.size()});
    for (Eigen::Index i = 0; i < v.size(); ++i) data_.push_back(static_cast<float>(v[i]));
  }
  void add(const std::string& name, const RowMatrix& m) {
    layout_.push_back({name, m.size()});
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) data_.push_back(static_cast<float>(m(r, c)));
    }
  }
  void add(const std::string& name, double x) {
    layout_.push_back({name, 1});
    data_.push_back(static_cast<float>(x));
  }
  nlohmann::ordered_json json() const {
    nlohmann::ordered_json layout = nlohmann::ordered_json::array();
    for (const auto& l : layout_) layout.push_back({{"name", l.first}, {"count", l.second}});
    std::vector<std::uint8_t> bytes(data_.size() * 4);
    if (!data_.empty()) std::memcpy(bytes.data(), data_.data(), bytes.size());
    return {{"encoding", "base64-f32le"}, {"layout", layout}, {"data", base64_encode(bytes)}};
  }

 private:
  std::vector<std::pair<std::string, Eigen::Index>> layout_;
  std::vector<float> data_;
};

class ParamReader {
 public:
  explicit ParamReader(const nlohmann::json& p) {
    if (p.at("encoding").get<std::string>() != "base64-f32le") data_error("unsupported parameter encoding");
    const std::string raw = base64_decode(p.at("data").get<std::string>());
    if (raw.size() % 4 != 0) data_error("parameter block is not a whole number of floats");
    data_.resize(raw.size() / 4);
    if (!raw.empty()) std::memcpy(data_.data(), raw.data(), raw.size());
    std::size_t off = 0;
    for (const auto& l : p.at("layout")) {
      const auto count = l.at("count").get<std::size_t>();
      offsets_[l.at("name").get<std::string>()] = {off, count};
      off += count;
    }
    if (off != data_.size()) data_error("parameter layout covers {} values, block has {}", off, data_.size());
  }
  VectorXd vec(const std::string& name, Eigen::Index expected) const {
    const auto [off, count] = find(name);
    if (static_cast<Eigen::Index>(count) != expected) data_error("parameter '{}' has {} values, expected {}", name, count, expected);
    VectorXd v(expected);
    for (Eigen::Index i = 0; i < expected; ++i) v[i] = data_[off + static_cast<std::size_t>(i)];
    return v;
  }
  RowMatrix mat(const std::string& name, Eigen::Index rows, Eigen::Index cols) const {
    const VectorXd v = vec(name, rows * cols);
    RowMatrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = v[i];
    return m;
  }
  double scalar(const std::string& name) const { return vec(name, 1)[0]; }

 private:
  std::pair<std::size_t, std::size_t> find(const std::string& name) const {
    auto it = offsets_.find(name);
    if (it == offsets_.end()) data_error("model parameters lack '{}'", name);
    return it->second;
  }
  std::vector<float> data_;
  std::map<std::string, std::pair<std::size_t, std::size_t>> offsets_;
};

}  // namespace

nlohmann::ordered_json model_to_json(const Model& model) {
  nlohmann::ordered_json j;
  j["kind"] = kind_name(model);
  j["feature_dim"] = feature_dim(model);
  j["normalization"] = to_string(normalization(model).mode);
  ParamWriter pw;
  nlohmann::ordered_json hp = nlohmann::ordered_json::object();
  if (const auto* m = std::get_if<LinearModel>(&model)) {
    hp["c"] = m->c;
    hp["tol"] = m->tol;
    j["hyperparams"] = hp;
    j["solver_report"] = m->report.to_json();
    pw.add("weights", m->weights);
    pw.add("bias", m->bias);
  } else if (const auto* m = std::get_if<MahalanobisModel>(&model)) {
    hp["shrinkage"] = m->shrinkage;
    hp["shrinkage_auto"] = m->shrinkage_auto;
    j["hyperparams"] = hp;
    pw.add("mean_real", m->mean_real);
    pw.add("mean_fake", m->mean_fake);
    pw.add("chol", m->chol);
  } else if (const auto* m = std::get_if<GnbModel>(&model)) {
    hp["var_floor"] = m->var_floor;
    j["hyperparams"] = hp;
    pw.add("mean_real", m->mean_real);
    pw.add("var_real", m->var_real);
    pw.add("mean_fake", m->mean_fake);
    pw.add("var_fake", m->var_fake);
  } else if (const auto* m = std::get_if<KnnModel>(&model)) {
    hp["k"] = m->k;
    hp["eps"] = m->eps;
    j["hyperparams"] = hp;
    j["ids"] = m->ids;
    std::vector<int> labels;
    for (bool f : m->fake) labels.push_back(f ? 1 : 0);
    j["fake"] = labels;
    pw.add("refs", m->refs);
  }
  j["parameters"] = pw.json();
  return j;
}

Model model_from_json(const nlohmann::json& j) {
  try {
    const auto kind = j.at("kind").get<std::string>();
    const auto d = j.at("feature_dim").get<Eigen::Index>();
    if (d <= 0) data_error("model feature_dim must be positive");
    NormalizationConfig norm{parse_normalization(j.at("normalization").get<std::string>())};
    const auto& hp = j.at("hyperparams");
    const ParamReader pr(j.at("parameters"));
    if (kind == "svm" || kind == "logistic_regression") {
      LinearModel m;
      m.kind = kind == "svm" ? LinearModel::Kind::svm : LinearModel::Kind::logistic_regression;
      m.norm = norm;
      m.c = hp.at("c").get<double>();
      m.tol = hp.value("tol", 0.0);
      if (j.contains("solver_report")) {
        const auto& r = j.at("solver_report");
        m.report.iterations = r.value("iterations", 0L);
        m.report.primal = r.value("primal", 0.0);
        m.report.dual = r.value("dual", 0.0);
        m.report.gap = r.value("gap", 0.0);
        m.report.gradient_norm = r.value("gradient_norm", 0.0);
        m.report.converged = r.value("converged", false);
        m.report.warning = r.value("warning", std::string());
      }
      m.weights = pr.vec("weights", d);
      m.bias = pr.scalar("bias");
      return m;
    }
    if (kind == "mahalanobis") {
      MahalanobisModel m;
      m.norm = norm;
      m.shrinkage = hp.at("shrinkage").get<double>();
      m.shrinkage_auto = hp.value("shrinkage_auto", false);
      m.mean_real = pr.vec("mean_real", d);
      m.mean_fake = pr.vec("mean_fake", d);
      m.chol = pr.mat("chol", d, d);
      return m;
    }
    if (kind == "gaussian_naive_bayes") {
      GnbModel m;
      m.norm = norm;
      m.var_floor = hp.at("var_floor").get<double>();
      m.mean_real = pr.vec("mean_real", d);
      m.var_real = pr.vec("var_real", d);
      m.mean_fake = pr.vec("mean_fake", d);
      m.var_fake = pr.vec("var_fake", d);
      return m;
    }
    if (kind == "soft_knn") {
      KnnModel m;
      m.norm = norm;
      m.k = hp.at("k").get<int>();
      m.eps = hp.at("eps").get<double>();
      m.ids = j.at("ids").get<std::vector<std::string>>();
      for (int f : j.at("fake").get<std::vector<int>>()) m.fake.push_back(f != 0);
      const auto n = static_cast<Eigen::Index>(m.ids.size());
      if (static_cast<Eigen::Index>(m.fake.size()) != n) data_error("soft_knn ids and labels differ in length");
      if (m.k < 1 || m.k > n) data_error("soft_knn k={} outside [1, {}]", m.k, n);
      m.refs = pr.mat("refs", n, d);
      return m;
    }
    data_error("unknown model kind '{}'", kind);
  } catch (const nlohmann::json::exception& e) {
    data_error("bad model file: {}", e.what());
  }
}

}  // namespace cfx::classify
