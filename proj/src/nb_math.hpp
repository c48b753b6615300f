#pragma once

// Per-row NB2 pieces shared by the kernels. Everything is written in terms
// of eta = log mu and theta.

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <cmath>

namespace recontact::glm::detail {

inline double log1pexp(double x) {
  if (x > 35.0) return x;
  if (x < -35.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double log_factorial(double y) { return boost::math::lgamma(y + 1.0); }

// For small integer y the gamma ratios reduce to short sums, which keeps
// precision when theta is large.
inline constexpr int kSmallCount = 64;

struct GammaRatio {
  double log_ratio;  // lgamma(y + theta) - lgamma(theta)
  double digamma;    // psi(y + theta) - psi(theta)
  double trigamma;   // psi'(y + theta) - psi'(theta)
};

inline GammaRatio gamma_ratio(double y, double theta, bool want_derivs) {
  GammaRatio r{0.0, 0.0, 0.0};
  if (y == 0.0) return r;
  const int yi = static_cast<int>(y);
  if (yi == y && yi < kSmallCount) {
    for (int k = 0; k < yi; ++k) {
      const double t = theta + k;
      r.log_ratio += std::log(t);
      if (want_derivs) {
        r.digamma += 1.0 / t;
        r.trigamma -= 1.0 / (t * t);
      }
    }
    return r;
  }
  r.log_ratio = boost::math::lgamma(y + theta) - boost::math::lgamma(theta);
  if (want_derivs) {
    r.digamma = boost::math::digamma(y + theta) - boost::math::digamma(theta);
    r.trigamma = boost::math::trigamma(y + theta) - boost::math::trigamma(theta);
  }
  return r;
}

/// log NB(y; mu, theta) and its derivatives in (eta, phi = log theta).
struct NbRow {
  double ll = 0.0;
  double d_eta = 0.0;
  double d_phi = 0.0;
  double d_eta_eta = 0.0;
  double d_phi_phi = 0.0;
  double d_eta_phi = 0.0;
};

inline NbRow nb_row(double y, double eta, double theta, bool derivs) {
  NbRow r;
  const double mu = std::exp(eta);
  const double tm = theta + mu;
  // log(theta / (theta + mu)) and log(mu / (theta + mu)) without cancellation.
  const double log_p = -std::log1p(mu / theta);
  const double log_q = eta - std::log(tm);
  const GammaRatio g = gamma_ratio(y, theta, derivs);
  r.ll = g.log_ratio - log_factorial(y) + theta * log_p + (y > 0.0 ? y * log_q : 0.0);
  if (!derivs) return r;
  const double tm2 = tm * tm;
  r.d_eta = theta * (y - mu) / tm;
  r.d_eta_eta = -(theta + y) * theta * mu / tm2;
  const double l_t = g.digamma + log_p + (mu - y) / tm;
  const double l_tt = g.trigamma + 1.0 / theta - 1.0 / tm - (mu - y) / tm2;
  r.d_phi = theta * l_t;
  r.d_phi_phi = theta * theta * l_tt + theta * l_t;
  // d/dtheta of theta (y - mu)/(theta + mu), times theta for the log scale.
  r.d_eta_phi = theta * mu * (y - mu) / tm2;
  return r;
}

}  // namespace recontact::glm::detail
