#pragma once

// Damped Newton ascent with Armijo backtracking, shared by every fitter.

#include <functional>

#include "recontact/kernels.hpp"

namespace recontact::glm::detail {

using Objective = std::function<Accumulation(const VectorXd&, Need)>;
/// Maps an iterate back into the feasible box; identity when empty.
using Projection = std::function<void(VectorXd&)>;

struct NewtonResult {
  VectorXd x;
  Accumulation at;  // value, gradient and Hessian at x
  bool converged = false;
  int iterations = 0;
  double score_norm = 0.0;
};

struct NewtonOptions {
  int max_iterations = 100;
  double tolerance = 1e-6;
  /// Components whose score is ignored by the convergence test (used when a
  /// projected coordinate sits on its bound).
  std::function<double(const VectorXd& x, const VectorXd& g)> score_norm;
};

/// Solves (-H + lambda I) d = g with the smallest lambda from a doubling
/// ladder that makes the system positive definite.
VectorXd ascent_direction(const MatrixXd& H, const VectorXd& g);

NewtonResult maximize(const Objective& f, VectorXd x0, const NewtonOptions& options,
                      const Projection& project = {});

/// Inverse of the negative Hessian; throws NumericalError when singular.
MatrixXd inverse_information(const MatrixXd& H);

}  // namespace recontact::glm::detail
