#pragma once

// Helpers shared by the test binaries: samplers and finite differences.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "recontact/glm.hpp"

namespace testing {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline int draw_nb(std::mt19937_64& rng, double mu, double theta) {
  std::gamma_distribution<double> gamma(theta, mu / theta);
  std::poisson_distribution<int> poisson(gamma(rng));
  return poisson(rng);
}

inline int draw_zinb(std::mt19937_64& rng, double mu, double theta, double pi) {
  std::bernoulli_distribution excess(pi);
  if (excess(rng)) return 0;
  return draw_nb(rng, mu, theta);
}

inline recontact::glm::DesignMatrix intercept_only(Eigen::Index n) {
  return {MatrixXd::Ones(n, 1), {recontact::glm::kInterceptName}};
}

/// Central differences of a scalar function.
inline VectorXd numeric_gradient(const std::function<double(const VectorXd&)>& f,
                                 const VectorXd& x, double h = 1e-5) {
  VectorXd g(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    VectorXd a = x, b = x;
    a[j] += h;
    b[j] -= h;
    g[j] = (f(a) - f(b)) / (2.0 * h);
  }
  return g;
}

inline double relative_error(const VectorXd& a, const VectorXd& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

/// Exhaustive grid search followed by successive zooming; a maximizer that
/// knows nothing about derivatives.
inline std::pair<VectorXd, double> grid_maximize(const std::function<double(const VectorXd&)>& f,
                                                 VectorXd lo, VectorXd hi, int points = 41,
                                                 int zooms = 12) {
  const Eigen::Index d = lo.size();
  VectorXd best = 0.5 * (lo + hi);
  double best_value = -INFINITY;
  for (int z = 0; z < zooms; ++z) {
    long total = 1;
    for (Eigen::Index k = 0; k < d; ++k) total *= points;
    for (long idx = 0; idx < total; ++idx) {
      long rest = idx;
      VectorXd x(d);
      for (Eigen::Index k = 0; k < d; ++k) {
        const int i = static_cast<int>(rest % points);
        rest /= points;
        x[k] = lo[k] + (hi[k] - lo[k]) * i / (points - 1);
      }
      const double v = f(x);
      if (v > best_value) {
        best_value = v;
        best = x;
      }
    }
    const VectorXd span = (hi - lo) / (points - 1) * 2.0;
    lo = best - span;
    hi = best + span;
  }
  return {best, best_value};
}

}  // namespace testing
