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

// Reference solvers used only by tests. Kept deliberately plain: dense
// matrices, no shrinking, no warm starts.

#include <cmath>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

struct SvmSolution {
  Eigen::VectorXd v;  // (w, b)
  double primal = 0.0;
  double dual = 0.0;
};

// Rows of `a` are y_i * (x_i, 1). Log-barrier interior point on the box QP
//   min 1/2 a' Q a - sum a,  0 <= a <= c,  Q = A A'.
inline SvmSolution svm_dual_barrier(const Eigen::MatrixXd& a, double c) {
  const Eigen::Index n = a.rows();
  const Eigen::MatrixXd q = a * a.transpose();
  Eigen::VectorXd alpha = Eigen::VectorXd::Constant(n, 0.5 * c);
  auto barrier_obj = [&](const Eigen::VectorXd& x, double mu) {
    double f = 0.5 * x.dot(q * x) - x.sum();
    for (Eigen::Index i = 0; i < n; ++i) f -= mu * (std::log(x[i]) + std::log(c - x[i]));
    return f;
  };
  for (double mu = 1.0; 2.0 * static_cast<double>(n) * mu > 1e-14; mu *= 0.2) {
    for (int it = 0; it < 200; ++it) {
      Eigen::VectorXd g = q * alpha - Eigen::VectorXd::Ones(n);
      Eigen::MatrixXd h = q;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double lo = alpha[i], hi = c - alpha[i];
        g[i] += -mu / lo + mu / hi;
        h(i, i) += mu / (lo * lo) + mu / (hi * hi);
      }
      const Eigen::VectorXd step = -h.ldlt().solve(g);
      const double decrement = -g.dot(step);
      if (decrement < 1e-20) break;
      double t = 1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (step[i] < 0) t = std::min(t, -0.99 * alpha[i] / step[i]);
        if (step[i] > 0) t = std::min(t, 0.99 * (c - alpha[i]) / step[i]);
      }
      const double f0 = barrier_obj(alpha, mu);
      while (barrier_obj(alpha + t * step, mu) > f0 - 0.25 * t * decrement && t > 1e-20) t *= 0.5;
      alpha += t * step;
    }
  }
  SvmSolution s;
  s.v = a.transpose() * alpha;
  s.dual = alpha.sum() - 0.5 * s.v.squaredNorm();
  double hinge = 0.0;
  const Eigen::VectorXd m = a * s.v;
  for (Eigen::Index i = 0; i < n; ++i) hinge += std::max(0.0, 1.0 - m[i]);
  s.primal = 0.5 * s.v.squaredNorm() + c * hinge;
  return s;
}

// Same objective as the library's logistic regression, evaluated in long
// double with the direct formula.
inline double logistic_objective(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& v,
                                 double c) {
  const Eigen::Index d = x.cols();
  long double f = 0.5L * static_cast<long double>(v.squaredNorm());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    long double m = v[d];
    for (Eigen::Index j = 0; j < d; ++j) m += static_cast<long double>(v[j]) * x(i, j);
    m *= y[i];
    f += c * std::log1p(std::exp(-m));
  }
  return static_cast<double>(f);
}

inline Eigen::VectorXd central_difference(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                          const Eigen::VectorXd& v, double c, double h = 1e-5) {
  Eigen::VectorXd g(v.size());
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    Eigen::VectorXd p = v, m = v;
    p[k] += h;
    m[k] -= h;
    g[k] = (logistic_objective(x, y, p, c) - logistic_objective(x, y, m, c)) / (2 * h);
  }
  return g;
}

}  // namespace oracle
