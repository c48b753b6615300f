#include "recontact/kernels.hpp"

#include <cmath>
#include <limits>

#include "nb_math.hpp"

namespace recontact::glm {

using detail::log1pexp;
using detail::nb_row;
using detail::sigmoid;

void Accumulation::reset(Index n_params, Need need) {
  value = 0.0;
  if (need != Need::Value) {
    gradient.setZero(n_params);
  } else {
    gradient.resize(0);
  }
  if (need == Need::Hessian) {
    hessian.setZero(n_params, n_params);
  } else {
    hessian.resize(0, 0);
  }
}

void Accumulation::add(const Accumulation& other) {
  value += other.value;
  if (gradient.size() > 0) gradient += other.gradient;
  if (hessian.size() > 0) hessian += other.hessian;
}

namespace {

// H += X^T diag(w) X on a chunk.
void add_weighted_gram(MatrixXd& H, Index row, Index col, const Eigen::Ref<const MatrixXd>& A,
                       const VectorXd& w, const Eigen::Ref<const MatrixXd>& B) {
  const MatrixXd WB = w.asDiagonal() * B;
  H.block(row, col, A.cols(), B.cols()).noalias() += A.transpose() * WB;
}

}  // namespace

LogisticKernel::LogisticKernel(const MatrixXd& X, const VectorXd& y, const VectorXd* weights)
    : X_(X), y_(y), w_(weights) {}

void LogisticKernel::accumulate(const VectorXd& beta, Index begin, Index end, Need need,
                                Accumulation& acc) const {
  const Index len = end - begin;
  if (len <= 0) return;
  const auto Xb = X_.middleRows(begin, len);
  const VectorXd eta = Xb * beta;
  VectorXd d(len);
  VectorXd h(len);
  double ll = 0.0;
  for (Index i = 0; i < len; ++i) {
    const double w = w_ ? (*w_)[begin + i] : 1.0;
    const double y = y_[begin + i];
    const double e = eta[i];
    ll += w * (y * e - log1pexp(e));
    const double p = sigmoid(e);
    d[i] = w * (y - p);
    h[i] = -w * p * (1.0 - p);
  }
  acc.value += ll;
  if (need == Need::Value) return;
  acc.gradient.noalias() += Xb.transpose() * d;
  if (need == Need::Hessian) add_weighted_gram(acc.hessian, 0, 0, Xb, h, Xb);
}

NegBinKernel::NegBinKernel(const MatrixXd& X, const VectorXd& y, const VectorXd* weights,
                           const double* fixed_log_theta)
    : X_(X), y_(y), w_(weights), fixed_(fixed_log_theta) {}

void NegBinKernel::accumulate(const VectorXd& params, Index begin, Index end, Need need,
                              Accumulation& acc) const {
  const Index len = end - begin;
  if (len <= 0) return;
  const Index p = X_.cols();
  const auto Xb = X_.middleRows(begin, len);
  const VectorXd eta = Xb * params.head(p);
  const double phi = fixed_ ? *fixed_ : params[p];
  const double theta = std::exp(phi);
  const bool derivs = need != Need::Value;
  VectorXd d_eta(len), h_eta(len), h_cross(len);
  double g_phi = 0.0;
  double h_phi = 0.0;
  double ll = 0.0;
  for (Index i = 0; i < len; ++i) {
    const double w = w_ ? (*w_)[begin + i] : 1.0;
    if (w == 0.0) {
      d_eta[i] = h_eta[i] = h_cross[i] = 0.0;
      continue;
    }
    const auto r = nb_row(y_[begin + i], eta[i], theta, derivs);
    ll += w * r.ll;
    if (!derivs) continue;
    d_eta[i] = w * r.d_eta;
    h_eta[i] = w * r.d_eta_eta;
    h_cross[i] = w * r.d_eta_phi;
    g_phi += w * r.d_phi;
    h_phi += w * r.d_phi_phi;
  }
  acc.value += ll;
  if (!derivs) return;
  acc.gradient.head(p).noalias() += Xb.transpose() * d_eta;
  if (!fixed_) acc.gradient[p] += g_phi;
  if (need != Need::Hessian) return;
  add_weighted_gram(acc.hessian, 0, 0, Xb, h_eta, Xb);
  if (!fixed_) {
    const VectorXd cross = Xb.transpose() * h_cross;
    acc.hessian.block(0, p, p, 1) += cross;
    acc.hessian.block(p, 0, 1, p) += cross.transpose();
    acc.hessian(p, p) += h_phi;
  }
}

ZinbKernel::ZinbKernel(const MatrixXd& Xc, const MatrixXd& Xz, const VectorXd& y)
    : Xc_(Xc), Xz_(Xz), y_(y) {}

void ZinbKernel::accumulate(const VectorXd& params, Index begin, Index end, Need need,
                            Accumulation& acc) const {
  const Index len = end - begin;
  if (len <= 0) return;
  const Index pc = Xc_.cols();
  const Index pz = Xz_.cols();
  const Index iphi = pc + pz;
  const auto Xcb = Xc_.middleRows(begin, len);
  const auto Xzb = Xz_.middleRows(begin, len);
  const VectorXd eta = Xcb * params.head(pc);
  const VectorXd zeta = Xzb * params.segment(pc, pz);
  const double theta = std::exp(params[iphi]);
  const bool derivs = need != Need::Value;

  VectorXd d_eta(len), d_zeta(len), h_ee(len), h_zz(len), h_ez(len), h_ep(len), h_zp(len);
  double g_phi = 0.0;
  double h_pp = 0.0;
  double ll = 0.0;
  for (Index i = 0; i < len; ++i) {
    const double y = y_[begin + i];
    const double z = zeta[i];
    const double log_pi = -log1pexp(-z);
    const double log_1mpi = -log1pexp(z);
    const double pi = sigmoid(z);
    const auto r = nb_row(y, eta[i], theta, derivs);
    if (y > 0.0) {
      ll += log_1mpi + r.ll;
      if (!derivs) continue;
      d_eta[i] = r.d_eta;
      d_zeta[i] = -pi;
      h_ee[i] = r.d_eta_eta;
      h_zz[i] = -pi * (1.0 - pi);
      h_ez[i] = 0.0;
      h_ep[i] = r.d_eta_phi;
      h_zp[i] = 0.0;
      g_phi += r.d_phi;
      h_pp += r.d_phi_phi;
      continue;
    }
    // y = 0: log(pi + (1 - pi) f0) via log-sum-exp.
    const double a = log_pi;
    const double b = log_1mpi + r.ll;
    const double m = std::max(a, b);
    const double log_d = m + std::log(std::exp(a - m) + std::exp(b - m));
    ll += log_d;
    if (!derivs) continue;
    const double tau = std::exp(a - log_d);  // posterior excess-zero membership
    const double w = std::exp(b - log_d);
    d_zeta[i] = tau - pi;
    h_zz[i] = tau * w - pi * (1.0 - pi);
    d_eta[i] = w * r.d_eta;
    g_phi += w * r.d_phi;
    const double ww = w * (1.0 - w);
    h_ee[i] = w * r.d_eta_eta + ww * r.d_eta * r.d_eta;
    h_ep[i] = w * r.d_eta_phi + ww * r.d_eta * r.d_phi;
    h_pp += w * r.d_phi_phi + ww * r.d_phi * r.d_phi;
    h_ez[i] = -tau * w * r.d_eta;
    h_zp[i] = -tau * w * r.d_phi;
  }
  acc.value += ll;
  if (!derivs) return;
  acc.gradient.head(pc).noalias() += Xcb.transpose() * d_eta;
  acc.gradient.segment(pc, pz).noalias() += Xzb.transpose() * d_zeta;
  acc.gradient[iphi] += g_phi;
  if (need != Need::Hessian) return;
  auto& H = acc.hessian;
  add_weighted_gram(H, 0, 0, Xcb, h_ee, Xcb);
  add_weighted_gram(H, pc, pc, Xzb, h_zz, Xzb);
  const MatrixXd WXz = h_ez.asDiagonal() * Xzb;
  const MatrixXd cz = Xcb.transpose() * WXz;
  H.block(0, pc, pc, pz) += cz;
  H.block(pc, 0, pz, pc) += cz.transpose();
  const VectorXd cp = Xcb.transpose() * h_ep;
  H.block(0, iphi, pc, 1) += cp;
  H.block(iphi, 0, 1, pc) += cp.transpose();
  const VectorXd zp = Xzb.transpose() * h_zp;
  H.block(pc, iphi, pz, 1) += zp;
  H.block(iphi, pc, 1, pz) += zp.transpose();
  H(iphi, iphi) += h_pp;
}

namespace reference {

namespace {

double lnb(double y, double mu, double theta) {
  return boost::math::lgamma(y + theta) - boost::math::lgamma(theta) -
         boost::math::lgamma(y + 1.0) + theta * std::log(theta / (theta + mu)) +
         (y > 0.0 ? y * std::log(mu / (theta + mu)) : 0.0);
}

struct Nb {
  double ll, e, p, ee, pp, ep;
};

Nb nb(double y, double eta, double phi) {
  const double mu = std::exp(eta);
  const double t = std::exp(phi);
  const double s = t + mu;
  Nb r{};
  r.ll = lnb(y, mu, t);
  r.e = t * (y - mu) / s;
  r.ee = -(t + y) * t * mu / (s * s);
  const double lt = boost::math::digamma(y + t) - boost::math::digamma(t) + std::log(t / s) +
                    (mu - y) / s;
  const double ltt = boost::math::trigamma(y + t) - boost::math::trigamma(t) + 1.0 / t - 1.0 / s -
                     (mu - y) / (s * s);
  r.p = t * lt;
  r.pp = t * t * ltt + t * lt;
  r.ep = t * mu * (y - mu) / (s * s);
  return r;
}

void init(Accumulation& acc, Index p, Need need) { acc.reset(p, need); }

}  // namespace

Accumulation logistic(const MatrixXd& X, const VectorXd& y, const VectorXd& beta, Need need) {
  Accumulation acc;
  init(acc, X.cols(), need);
  for (Index i = 0; i < X.rows(); ++i) {
    const VectorXd x = X.row(i).transpose();
    const double eta = x.dot(beta);
    const double p = 1.0 / (1.0 + std::exp(-eta));
    acc.value += y[i] * std::log(p) + (1.0 - y[i]) * std::log1p(-p);
    if (need == Need::Value) continue;
    acc.gradient += (y[i] - p) * x;
    if (need == Need::Hessian) acc.hessian -= p * (1.0 - p) * x * x.transpose();
  }
  return acc;
}

Accumulation negbin(const MatrixXd& X, const VectorXd& y, const VectorXd& params, Need need) {
  const Index p = X.cols();
  Accumulation acc;
  init(acc, p + 1, need);
  for (Index i = 0; i < X.rows(); ++i) {
    VectorXd x = VectorXd::Zero(p + 1);
    x.head(p) = X.row(i).transpose();
    const auto r = nb(y[i], x.head(p).dot(params.head(p)), params[p]);
    acc.value += r.ll;
    if (need == Need::Value) continue;
    VectorXd g = r.e * x;
    g[p] = r.p;
    acc.gradient += g;
    if (need != Need::Hessian) continue;
    MatrixXd h = MatrixXd::Zero(p + 1, p + 1);
    h.topLeftCorner(p, p) = r.ee * x.head(p) * x.head(p).transpose();
    h.block(0, p, p, 1) = r.ep * x.head(p);
    h.block(p, 0, 1, p) = r.ep * x.head(p).transpose();
    h(p, p) = r.pp;
    acc.hessian += h;
  }
  return acc;
}

Accumulation zinb(const MatrixXd& Xc, const MatrixXd& Xz, const VectorXd& y,
                  const VectorXd& params, Need need) {
  const Index pc = Xc.cols();
  const Index pz = Xz.cols();
  const Index q = pc + pz + 1;
  Accumulation acc;
  init(acc, q, need);
  for (Index i = 0; i < Xc.rows(); ++i) {
    const VectorXd xc = Xc.row(i).transpose();
    const VectorXd xz = Xz.row(i).transpose();
    const double eta = xc.dot(params.head(pc));
    const double zeta = xz.dot(params.segment(pc, pz));
    const double pi = 1.0 / (1.0 + std::exp(-zeta));
    const auto r = nb(y[i], eta, params[q - 1]);
    // Derivatives of the row log-likelihood in (eta, zeta, phi).
    double l = 0.0;
    Eigen::Vector3d g = Eigen::Vector3d::Zero();
    Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
    if (y[i] > 0.0) {
      l = std::log1p(-pi) + r.ll;
      g << r.e, -pi, r.p;
      h << r.ee, 0.0, r.ep, 0.0, -pi * (1.0 - pi), 0.0, r.ep, 0.0, r.pp;
    } else {
      // Direct mixture formula, differentiated by the quotient rule.
      const double f0 = std::exp(r.ll);
      const double D = pi + (1.0 - pi) * f0;
      l = std::log(D);
      const double dpi = pi * (1.0 - pi);
      const double d2pi = dpi * (1.0 - 2.0 * pi);
      // D derivatives: in zeta through pi, in (eta, phi) through f0.
      const double De = (1.0 - pi) * f0 * r.e;
      const double Dz = dpi * (1.0 - f0);
      const double Dp = (1.0 - pi) * f0 * r.p;
      const double Dee = (1.0 - pi) * f0 * (r.ee + r.e * r.e);
      const double Dpp = (1.0 - pi) * f0 * (r.pp + r.p * r.p);
      const double Dep = (1.0 - pi) * f0 * (r.ep + r.e * r.p);
      const double Dzz = d2pi * (1.0 - f0);
      const double Dez = -dpi * f0 * r.e;
      const double Dzp = -dpi * f0 * r.p;
      g << De / D, Dz / D, Dp / D;
      Eigen::Matrix3d D2;
      D2 << Dee, Dez, Dep, Dez, Dzz, Dzp, Dep, Dzp, Dpp;
      h = D2 / D - g * g.transpose();
    }
    acc.value += l;
    if (need == Need::Value) continue;
    VectorXd grad = VectorXd::Zero(q);
    grad.head(pc) = g[0] * xc;
    grad.segment(pc, pz) = g[1] * xz;
    grad[q - 1] = g[2];
    acc.gradient += grad;
    if (need != Need::Hessian) continue;
    MatrixXd J = MatrixXd::Zero(q, 3);
    J.block(0, 0, pc, 1) = xc;
    J.block(pc, 1, pz, 1) = xz;
    J(q - 1, 2) = 1.0;
    acc.hessian += J * h * J.transpose();
  }
  return acc;
}

}  // namespace reference

}  // namespace recontact::glm
