#include "recontact/glm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "newton.hpp"
#include "nb_math.hpp"
#include "recontact/error.hpp"
#include "recontact/kernels.hpp"

namespace recontact::glm {

namespace {

constexpr double kCollinearityTolerance = 1e-10;
constexpr double kSeparationBound = 1e3;
const double kMaxLogTheta = std::log(kMaxTheta);
const double kMinLogTheta = std::log(1e-8);

void check_response(const DesignMatrix& X, const VectorXd& y, bool penalized = false) {
  if (y.size() != X.rows()) throw DesignError("response length does not match design rows");
  if (!penalized && X.rows() <= X.cols()) {
    throw DegenerateDataError("need more rows (" + std::to_string(X.rows()) + ") than columns (" +
                              std::to_string(X.cols()) + ")");
  }
  if (!y.allFinite()) throw DesignError("response has non-finite entries");
}

void check_counts(const VectorXd& y) {
  for (Index i = 0; i < y.size(); ++i) {
    if (y[i] < 0.0 || y[i] != std::floor(y[i])) {
      throw DesignError("count response must hold nonnegative integers");
    }
  }
}

// Sequential Cholesky of the Gram matrix of the column-normalized design, in
// column order: the first column explained by its predecessors is reported.
void check_collinearity(const DesignMatrix& X) {
  const Index p = X.cols();
  MatrixXd Xn = X.X;
  for (Index j = 0; j < p; ++j) {
    const double norm = Xn.col(j).norm();
    if (norm == 0.0) throw CollinearityError(X.names[static_cast<std::size_t>(j)]);
    Xn.col(j) /= norm;
  }
  const MatrixXd G = Xn.transpose() * Xn;
  MatrixXd L = MatrixXd::Zero(p, p);
  for (Index j = 0; j < p; ++j) {
    double s = G(j, j) - L.row(j).head(j).squaredNorm();
    if (s < kCollinearityTolerance) throw CollinearityError(X.names[static_cast<std::size_t>(j)]);
    L(j, j) = std::sqrt(s);
    for (Index i = j + 1; i < p; ++i) {
      L(i, j) = (G(i, j) - L.row(i).head(j).dot(L.row(j).head(j))) / L(j, j);
    }
  }
}

// Column most responsible for a separation: largest |beta| or SE, preferring
// non-intercept columns.
std::string separation_column(const DesignMatrix& X, const VectorXd& beta, const VectorXd& se) {
  Index best = 0;
  double worst = -1.0;
  for (Index j = X.cols() > 1 ? 1 : 0; j < X.cols(); ++j) {
    const double score = std::max(std::abs(beta[j]), std::isfinite(se[j]) ? se[j] : 1e300);
    if (score > worst) {
      worst = score;
      best = j;
    }
  }
  return X.names[static_cast<std::size_t>(best)];
}

double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace

DesignMatrix::DesignMatrix(MatrixXd x, std::vector<std::string> column_names)
    : X(std::move(x)), names(std::move(column_names)) {}

void DesignMatrix::validate() const {
  if (static_cast<Index>(names.size()) != X.cols()) {
    throw DesignError("design has " + std::to_string(X.cols()) + " columns but " +
                      std::to_string(names.size()) + " names");
  }
  if (X.cols() == 0 || names.front() != kInterceptName) {
    throw DesignError("column 0 must be the intercept");
  }
  if (!(X.col(0).array() == 1.0).all()) throw DesignError("intercept column must be all ones");
  if (!X.allFinite()) throw DesignError("design has non-finite entries");
}

Index DesignMatrix::column(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw DesignError("unknown design column '" + name + "'");
  return static_cast<Index>(it - names.begin());
}

GlmFit fit_logistic(const DesignMatrix& X, const VectorXd& y, const LogisticOptions& options) {
  X.validate();
  check_response(X, y, options.ridge > 0.0);
  for (Index i = 0; i < y.size(); ++i) {
    if (y[i] < 0.0 || y[i] > 1.0) throw DesignError("logistic response must lie in [0, 1]");
  }
  const double ridge = options.ridge;
  const double ybar = y.mean();
  if (ybar == 0.0 || ybar == 1.0) throw SeparationError(kInterceptName);
  if (ridge == 0.0) check_collinearity(X);

  const LogisticKernel kernel(X.X, y);
  const Index p = X.cols();
  const detail::Objective f = [&](const VectorXd& b, Need need) {
    Accumulation a = evaluate(kernel, b, need);
    if (ridge > 0.0 && p > 1) {
      a.value -= 0.5 * ridge * b.tail(p - 1).squaredNorm();
      if (need != Need::Value) a.gradient.tail(p - 1) -= ridge * b.tail(p - 1);
      if (need == Need::Hessian) a.hessian.diagonal().tail(p - 1).array() -= ridge;
    }
    return a;
  };
  VectorXd start = VectorXd::Zero(X.cols());
  if (options.start && options.start->size() == X.cols()) {
    start = *options.start;
  } else {
    start[0] = logit(std::clamp(ybar, 1e-3, 1.0 - 1e-3));
  }
  detail::NewtonOptions newton;
  newton.max_iterations = options.max_iterations;
  newton.tolerance = options.tolerance;
  auto result = detail::maximize(f, start, newton);

  GlmFit fit;
  fit.family = Family::Logistic;
  fit.names = X.names;
  fit.coefficients = result.x;
  fit.converged = result.converged;
  fit.iterations = result.iterations;
  fit.score_norm = result.score_norm;
  fit.log_likelihood = evaluate(kernel, result.x, Need::Value).value;
  try {
    fit.covariance = detail::inverse_information(result.at.hessian);
  } catch (const NumericalError&) {
    if (ridge == 0.0) {
      throw SeparationError(separation_column(
          X, fit.coefficients, VectorXd::Constant(X.cols(), std::numeric_limits<double>::infinity())));
    }
    throw FitError("logistic information matrix is singular even with ridge");
  }
  if (ridge == 0.0) {
    const VectorXd se = fit.standard_errors();
    if (fit.coefficients.cwiseAbs().maxCoeff() > kSeparationBound ||
        !(se.maxCoeff() <= kSeparationBound)) {
      throw SeparationError(separation_column(X, fit.coefficients, se));
    }
  }
  return fit;
}

GlmFit fit_negbin(const DesignMatrix& X, const VectorXd& y, const NegBinOptions& options) {
  X.validate();
  check_response(X, y);
  check_counts(y);
  if (y.maxCoeff() == 0.0) throw DegenerateDataError("all counts are zero");
  check_collinearity(X);

  const double ybar = y.mean();
  const double var = (y.array() - ybar).square().mean();
  VectorXd start = VectorXd::Zero(X.cols() + 1);
  if (options.start && options.start->size() == X.cols()) {
    start.head(X.cols()) = *options.start;
  } else {
    start[0] = std::log(ybar);
  }
  double theta0 = var > ybar ? ybar * ybar / (var - ybar) : 1e4;
  theta0 = std::clamp(theta0, 1e-3, 1e4);
  start[X.cols()] = options.start_log_theta ? *options.start_log_theta : std::log(theta0);

  const NegBinKernel kernel(X.X, y);
  const Index ip = X.cols();
  const detail::Objective f = [&](const VectorXd& v, Need need) { return evaluate(kernel, v, need); };
  const detail::Projection clamp = [&](VectorXd& v) {
    v[ip] = std::clamp(v[ip], kMinLogTheta, kMaxLogTheta);
  };
  detail::NewtonOptions newton;
  newton.max_iterations = options.max_iterations;
  newton.tolerance = options.tolerance;
  // A log theta pinned at its ceiling with an upward score is at the
  // Poisson boundary; it does not block convergence.
  newton.score_norm = [&](const VectorXd& v, const VectorXd& g) {
    double m = g.head(ip).cwiseAbs().maxCoeff();
    if (!(v[ip] >= kMaxLogTheta && g[ip] > 0.0)) m = std::max(m, std::abs(g[ip]));
    return m;
  };
  auto result = detail::maximize(f, start, newton, clamp);

  GlmFit fit;
  fit.family = Family::NegativeBinomial;
  fit.names = X.names;
  fit.iterations = result.iterations;

  const double fixed = kMaxLogTheta;
  const NegBinKernel poisson(X.X, y, nullptr, &fixed);
  const detail::Objective fp = [&](const VectorXd& b, Need need) {
    return evaluate(poisson, b, need);
  };
  detail::NewtonOptions plain;
  plain.max_iterations = options.max_iterations;
  plain.tolerance = options.tolerance;
  bool at_limit = result.x[ip] >= kMaxLogTheta;
  std::optional<detail::NewtonResult> refit;
  // The score in log theta decays like 1/theta, so a likelihood still rising
  // towards the ceiling can pass the tolerance early. Compare with the
  // boundary fit directly.
  if (!at_limit && result.x[ip] > std::log(1e3) && result.at.gradient[ip] >= 0.0) {
    refit = detail::maximize(fp, result.x.head(ip), plain);
    at_limit = refit->at.value >= result.at.value;
  }
  if (at_limit) {
    fit.poisson_limit = true;
    if (!refit) refit = detail::maximize(fp, result.x.head(ip), plain);
    fit.coefficients = refit->x;
    fit.dispersion = kMaxTheta;
    fit.converged = refit->converged;
    fit.iterations += refit->iterations;
    fit.score_norm = refit->score_norm;
    fit.log_likelihood = refit->at.value;
    fit.covariance = detail::inverse_information(refit->at.hessian);
    return fit;
  }
  fit.coefficients = result.x.head(ip);
  fit.dispersion = std::exp(result.x[ip]);
  fit.converged = result.converged;
  fit.score_norm = result.score_norm;
  fit.log_likelihood = result.at.value;
  fit.covariance = detail::inverse_information(result.at.hessian).topLeftCorner(ip, ip);
  return fit;
}

VectorXd ZinbParams::pack() const {
  VectorXd v(size());
  v << count, zero, log_theta;
  return v;
}

ZinbParams ZinbParams::unpack(const VectorXd& packed, Index n_count, Index n_zero) {
  if (packed.size() != n_count + n_zero + 1) throw DesignError("packed ZINB vector has wrong size");
  ZinbParams p;
  p.count = packed.head(n_count);
  p.zero = packed.segment(n_count, n_zero);
  p.log_theta = packed[n_count + n_zero];
  return p;
}

ZinbParams ZinbFit::params() const {
  ZinbParams p;
  p.count = count_coefficients;
  p.zero = zero_coefficients;
  p.log_theta = std::log(theta);
  return p;
}

VectorXd ZinbFit::count_standard_errors() const {
  return covariance.diagonal().head(count_coefficients.size()).cwiseSqrt();
}

VectorXd ZinbFit::zero_standard_errors() const {
  return covariance.diagonal()
      .segment(count_coefficients.size(), zero_coefficients.size())
      .cwiseSqrt();
}

Index ZinbFit::count_index(const std::string& name) const {
  const auto it = std::find(count_names.begin(), count_names.end(), name);
  if (it == count_names.end()) throw DesignError("unknown count-model column '" + name + "'");
  return static_cast<Index>(it - count_names.begin());
}

double loglik_negbin(const VectorXd& beta, double theta, const MatrixXd& X, const VectorXd& y) {
  if (beta.size() != X.cols() || y.size() != X.rows()) throw DesignError("dimension mismatch");
  const double phi = std::log(theta);
  const NegBinKernel kernel(X, y, nullptr, &phi);
  return evaluate(kernel, beta, Need::Value).value;
}

double loglik_zinb(const ZinbParams& params, const DesignMatrix& X_count,
                   const DesignMatrix& X_zero, const VectorXd& y) {
  if (params.count.size() != X_count.cols() || X_count.rows() != y.size()) {
    throw DesignError("count design does not match parameters or response");
  }
  if (params.zero_disabled) {
    return loglik_negbin(params.count, std::exp(params.log_theta), X_count.X, y);
  }
  if (params.zero.size() != X_zero.cols() || X_zero.rows() != y.size()) {
    throw DesignError("zero design does not match parameters or response");
  }
  const ZinbKernel kernel(X_count.X, X_zero.X, y);
  return evaluate(kernel, params.pack(), Need::Value).value;
}

ZinbFit fit_zinb(const DesignMatrix& X_count, const DesignMatrix& X_zero, const VectorXd& y,
                 const ZinbOptions& options) {
  X_count.validate();
  X_zero.validate();
  check_response(X_count, y);
  if (X_zero.rows() != X_count.rows()) throw DesignError("count and zero designs differ in rows");
  check_counts(y);
  const Index n = y.size();
  const Index n_zero_obs = (y.array() == 0.0).count();
  if (n_zero_obs == 0) throw DegenerateDataError("no zero counts: the zero part is unidentifiable");
  if (n_zero_obs == n) throw DegenerateDataError("all counts are zero");
  check_collinearity(X_count);
  check_collinearity(X_zero);

  const Index pc = X_count.cols();
  const Index pz = X_zero.cols();
  const Index iphi = pc + pz;

  ZinbParams start;
  if (options.start && options.start->count.size() == pc && options.start->zero.size() == pz) {
    start = *options.start;
  } else {
    // NB fit on the positives-and-zeros data, then an excess-zero share from
    // the zeros the NB part does not explain.
    NegBinOptions nb_opts;
    nb_opts.max_iterations = 50;
    start.count = VectorXd::Zero(pc);
    start.log_theta = 0.0;
    try {
      const GlmFit nb = fit_negbin(X_count, y, nb_opts);
      start.count = nb.coefficients;
      start.log_theta = std::min(std::log(nb.dispersion), std::log(1e4));
    } catch (const Error&) {
      start.count[0] = std::log(std::max(y.mean(), 1e-3));
    }
    const VectorXd mu = (X_count.X * start.count).array().exp();
    const double theta = std::exp(start.log_theta);
    double explained = 0.0;
    for (Index i = 0; i < n; ++i) explained += std::pow(theta / (theta + mu[i]), theta);
    const double excess = (static_cast<double>(n_zero_obs) - explained) / static_cast<double>(n);
    start.zero = VectorXd::Zero(pz);
    start.zero[0] = logit(std::clamp(excess, 0.02, 0.9));
  }

  const ZinbKernel kernel(X_count.X, X_zero.X, y);
  VectorXd x = start.pack();
  double ll = evaluate(kernel, x, Need::Value).value;
  if (!std::isfinite(ll)) throw NumericalError("ZINB log-likelihood is not finite at the start");

  // EM on latent excess-zero membership; each M-step takes a few Newton
  // steps, which keeps the ascent property.
  ZinbFit fit;
  VectorXd tau = VectorXd::Zero(n);
  VectorXd weight = VectorXd::Ones(n);
  const detail::Projection clamp_phi = [&](VectorXd& v) {
    v[v.size() - 1] = std::clamp(v[v.size() - 1], kMinLogTheta, kMaxLogTheta);
  };
  int em = 0;
  for (; em < options.max_em_iterations; ++em) {
    const VectorXd eta = X_count.X * x.head(pc);
    const VectorXd zeta = X_zero.X * x.segment(pc, pz);
    const double theta = std::exp(x[iphi]);
    for (Index i = 0; i < n; ++i) {
      if (y[i] > 0.0) {
        tau[i] = 0.0;
      } else {
        const double log_f0 = -theta * std::log1p(std::exp(eta[i]) / theta);
        const double log_pi = -detail::log1pexp(-zeta[i]);
        const double log_rest = -detail::log1pexp(zeta[i]) + log_f0;
        tau[i] = 1.0 / (1.0 + std::exp(log_rest - log_pi));
      }
      weight[i] = 1.0 - tau[i];
    }
    detail::NewtonOptions inner;
    inner.max_iterations = 5;
    inner.tolerance = options.tolerance * 0.1;

    const LogisticKernel zk(X_zero.X, tau);
    const detail::Objective fz = [&](const VectorXd& g, Need need) { return evaluate(zk, g, need); };
    const auto zr = detail::maximize(fz, x.segment(pc, pz), inner);
    x.segment(pc, pz) = zr.x;

    const NegBinKernel ck(X_count.X, y, &weight);
    const detail::Objective fc = [&](const VectorXd& v, Need need) { return evaluate(ck, v, need); };
    VectorXd cv(pc + 1);
    cv << x.head(pc), x[iphi];
    const auto cr = detail::maximize(fc, cv, inner, clamp_phi);
    x.head(pc) = cr.x.head(pc);
    x[iphi] = cr.x[pc];

    const double next = evaluate(kernel, x, Need::Value).value;
    const double gain = next - ll;
    ll = next;
    if (gain < options.em_tolerance * (std::abs(ll) + 1.0)) {
      ++em;
      break;
    }
  }
  fit.em_iterations = em;

  const detail::Objective f = [&](const VectorXd& v, Need need) { return evaluate(kernel, v, need); };
  detail::NewtonOptions polish;
  polish.max_iterations = options.max_newton_iterations;
  polish.tolerance = options.tolerance;
  polish.score_norm = [&](const VectorXd& v, const VectorXd& g) {
    double m = g.head(iphi).cwiseAbs().maxCoeff();
    if (!(v[iphi] >= kMaxLogTheta && g[iphi] > 0.0)) m = std::max(m, std::abs(g[iphi]));
    return m;
  };
  const auto result = detail::maximize(f, x, polish, clamp_phi);

  fit.count_names = X_count.names;
  fit.zero_names = X_zero.names;
  fit.count_coefficients = result.x.head(pc);
  fit.zero_coefficients = result.x.segment(pc, pz);
  fit.theta = std::exp(result.x[iphi]);
  fit.log_likelihood = result.at.value;
  fit.converged = result.converged;
  fit.newton_iterations = result.iterations;
  fit.score_norm = result.score_norm;
  try {
    fit.covariance = detail::inverse_information(result.at.hessian);
  } catch (const NumericalError&) {
    // Keep the best iterate; a singular information matrix means the fit
    // sits on a boundary and is reported as not converged.
    const MatrixXd info = -0.5 * (result.at.hessian + result.at.hessian.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(info);
    VectorXd inv = eig.eigenvalues();
    for (Index j = 0; j < inv.size(); ++j) inv[j] = inv[j] > 1e-12 ? 1.0 / inv[j] : 0.0;
    fit.covariance = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
    fit.converged = false;
  }
  return fit;
}

double predict_expected_count(const ZinbParams& params, const VectorXd& x_count,
                              const VectorXd& x_zero) {
  if (x_count.size() != params.count.size()) throw DesignError("count row has wrong length");
  const double mu = std::exp(x_count.dot(params.count));
  if (params.zero_disabled) return mu;
  if (x_zero.size() != params.zero.size()) throw DesignError("zero row has wrong length");
  const double pi = detail::sigmoid(x_zero.dot(params.zero));
  return (1.0 - pi) * mu;
}

double predict_expected_count(const ZinbFit& fit, const VectorXd& x_count, const VectorXd& x_zero) {
  return predict_expected_count(fit.params(), x_count, x_zero);
}

CoefficientSampler::CoefficientSampler(VectorXd mean, const MatrixXd& covariance)
    : mean_(std::move(mean)) {
  const Index p = mean_.size();
  if (covariance.rows() != p || covariance.cols() != p) {
    throw DesignError("covariance does not match coefficient length");
  }
  if (!covariance.allFinite() || !mean_.allFinite()) {
    throw NumericalError("covariance or mean has non-finite entries");
  }
  const MatrixXd sym = 0.5 * (covariance + covariance.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(sym);
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  VectorXd lambda = eig.eigenvalues();
  const double top = std::max(0.0, lambda.size() ? lambda.maxCoeff() : 0.0);
  for (Index j = 0; j < p; ++j) {
    if (lambda[j] < -1e-8 * std::max(1.0, top)) {
      throw NumericalError("covariance is not positive semidefinite");
    }
    lambda[j] = std::sqrt(std::max(0.0, lambda[j]));
  }
  factor_ = eig.eigenvectors() * lambda.asDiagonal();
}

VectorXd CoefficientSampler::draw(std::mt19937_64& rng) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  VectorXd z(mean_.size());
  for (Index j = 0; j < z.size(); ++j) z[j] = normal(rng);
  return mean_ + factor_ * z;
}

VectorXd draw_coefficients(const GlmFit& fit, std::mt19937_64& rng) {
  return CoefficientSampler(fit.coefficients, fit.covariance).draw(rng);
}

VectorXd draw_coefficients(const ZinbFit& fit, std::mt19937_64& rng) {
  return CoefficientSampler(fit.packed(), fit.covariance).draw(rng);
}

}  // namespace recontact::glm
