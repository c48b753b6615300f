#include "newton.hpp"

#include <cmath>
#include <limits>

#include "recontact/error.hpp"

namespace recontact::glm::detail {

namespace {

double default_norm(const VectorXd&, const VectorXd& g) {
  return g.size() ? g.cwiseAbs().maxCoeff() : 0.0;
}

bool finite(const Accumulation& a) {
  return std::isfinite(a.value) && (a.gradient.size() == 0 || a.gradient.allFinite());
}

}  // namespace

VectorXd ascent_direction(const MatrixXd& H, const VectorXd& g) {
  MatrixXd A = -0.5 * (H + H.transpose());
  const double scale = std::max(1e-12, A.diagonal().cwiseAbs().maxCoeff());
  double lambda = 0.0;
  for (int attempt = 0; attempt < 60; ++attempt) {
    MatrixXd M = A;
    M.diagonal().array() += lambda;
    Eigen::LLT<MatrixXd> llt(M);
    if (llt.info() == Eigen::Success) {
      VectorXd d = llt.solve(g);
      if (d.allFinite()) return d;
    }
    lambda = lambda == 0.0 ? 1e-10 * scale : lambda * 4.0;
  }
  // Gradient ascent as a last resort.
  return g / scale;
}

NewtonResult maximize(const Objective& f, VectorXd x, const NewtonOptions& options,
                      const Projection& project) {
  const auto norm = options.score_norm ? options.score_norm : default_norm;
  if (project) project(x);
  NewtonResult out;
  out.at = f(x, Need::Hessian);
  if (!finite(out.at)) throw NumericalError("objective is not finite at the starting point");
  for (int it = 0;; ++it) {
    out.score_norm = norm(x, out.at.gradient);
    out.iterations = it;
    if (out.score_norm <= options.tolerance) {
      out.converged = true;
      break;
    }
    if (it >= options.max_iterations) break;

    const VectorXd d = ascent_direction(out.at.hessian, out.at.gradient);
    const double slope = out.at.gradient.dot(d);
    const double f0 = out.at.value;
    const double roundoff = 1e-12 * (std::abs(f0) + 1.0);
    double t = 1.0;
    bool moved = false;
    VectorXd candidate;
    for (int half = 0; half < 40; ++half, t *= 0.5) {
      candidate = x + t * d;
      if (project) project(candidate);
      const Accumulation trial = f(candidate, Need::Value);
      if (!std::isfinite(trial.value)) continue;
      if (trial.value >= f0 + 1e-4 * t * slope || trial.value >= f0 - roundoff) {
        moved = true;
        break;
      }
    }
    if (!moved) break;
    if ((candidate - x).cwiseAbs().maxCoeff() == 0.0) break;
    x = candidate;
    out.at = f(x, Need::Hessian);
  }
  out.x = x;
  return out;
}

MatrixXd inverse_information(const MatrixXd& H) {
  const MatrixXd info = -0.5 * (H + H.transpose());
  Eigen::LDLT<MatrixXd> ldlt(info);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw NumericalError("observed information is not positive definite");
  }
  MatrixXd inv = ldlt.solve(MatrixXd::Identity(info.rows(), info.cols()));
  if (!inv.allFinite()) throw NumericalError("observed information is singular");
  return 0.5 * (inv + inv.transpose());
}

}  // namespace recontact::glm::detail
