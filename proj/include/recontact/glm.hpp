#pragma once

// Maximum-likelihood fitters for the three model families used by the
// pipeline: logistic, NB2 negative binomial and zero-inflated NB2.

#include <Eigen/Dense>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace recontact::glm {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr const char* kInterceptName = "(Intercept)";

struct DesignMatrix {
  MatrixXd X;
  std::vector<std::string> names;

  DesignMatrix() = default;
  DesignMatrix(MatrixXd x, std::vector<std::string> column_names);

  Index rows() const { return X.rows(); }
  Index cols() const { return X.cols(); }
  /// Throws DesignError unless names match columns, column 0 is an all-ones
  /// intercept and every entry is finite.
  void validate() const;
  Index column(const std::string& name) const;
};

enum class Family { Logistic, NegativeBinomial };

struct GlmFit {
  Family family = Family::Logistic;
  std::vector<std::string> names;
  VectorXd coefficients;
  /// Inverse observed information for the regression coefficients.
  MatrixXd covariance;
  /// NB size parameter theta; zero for logistic fits.
  double dispersion = 0.0;
  double log_likelihood = 0.0;
  bool converged = false;
  int iterations = 0;
  /// theta ran into the 1e6 ceiling; coefficients are then the Poisson fit.
  bool poisson_limit = false;
  double score_norm = 0.0;

  VectorXd standard_errors() const { return covariance.diagonal().cwiseSqrt(); }
};

struct LogisticOptions {
  int max_iterations = 100;
  double tolerance = 1e-6;
  /// Penalty (ridge/2)*|beta|^2 on every coefficient but the intercept; 0
  /// disables it and turns on the separation and collinearity checks.
  double ridge = 0.0;
  std::optional<VectorXd> start;
};

/// y may be fractional in [0,1] when weights are used internally; public
/// callers pass 0/1 outcomes.
GlmFit fit_logistic(const DesignMatrix& X, const VectorXd& y, const LogisticOptions& options = {});

struct NegBinOptions {
  int max_iterations = 100;
  double tolerance = 1e-6;
  std::optional<VectorXd> start;
  std::optional<double> start_log_theta;
};

inline constexpr double kMaxTheta = 1e6;

GlmFit fit_negbin(const DesignMatrix& X, const VectorXd& y, const NegBinOptions& options = {});

/// Parameters of the zero-inflated model. A zero vector of size 0 together
/// with zero_disabled means pi = 0 exactly.
struct ZinbParams {
  VectorXd count;
  VectorXd zero;
  double log_theta = 0.0;
  bool zero_disabled = false;

  Index size() const { return count.size() + zero.size() + 1; }
  VectorXd pack() const;
  static ZinbParams unpack(const VectorXd& packed, Index n_count, Index n_zero);
};

struct ZinbFit {
  std::vector<std::string> count_names;
  std::vector<std::string> zero_names;
  VectorXd count_coefficients;
  VectorXd zero_coefficients;
  double theta = 1.0;
  /// Joint covariance over (beta, gamma, log theta) in that order.
  MatrixXd covariance;
  double log_likelihood = 0.0;
  bool converged = false;
  int em_iterations = 0;
  int newton_iterations = 0;
  double score_norm = 0.0;

  ZinbParams params() const;
  VectorXd packed() const { return params().pack(); }
  VectorXd count_standard_errors() const;
  VectorXd zero_standard_errors() const;
  Index count_index(const std::string& name) const;
};

struct ZinbOptions {
  int max_em_iterations = 500;
  int max_newton_iterations = 50;
  double tolerance = 1e-5;
  /// EM stops once the per-iteration log-likelihood gain falls below this,
  /// after which Newton takes over.
  double em_tolerance = 1e-4;
  std::optional<ZinbParams> start;
};

/// Throws DegenerateDataError when y has no zeros or no positive counts.
/// A fit that does not reach the score tolerance is returned with
/// converged = false and the best iterate.
ZinbFit fit_zinb(const DesignMatrix& X_count, const DesignMatrix& X_zero, const VectorXd& y,
                 const ZinbOptions& options = {});

double loglik_zinb(const ZinbParams& params, const DesignMatrix& X_count,
                   const DesignMatrix& X_zero, const VectorXd& y);

/// Plain NB2 log-likelihood with mean exp(X beta).
double loglik_negbin(const VectorXd& beta, double theta, const MatrixXd& X, const VectorXd& y);

/// E[y] = (1 - pi) mu for one design row pair.
double predict_expected_count(const ZinbParams& params, const VectorXd& x_count,
                              const VectorXd& x_zero);
double predict_expected_count(const ZinbFit& fit, const VectorXd& x_count, const VectorXd& x_zero);

/// Multivariate normal draws around an estimate. The covariance is
/// symmetrized and its eigenvalues clipped at zero; a clearly negative
/// eigenvalue or a non-finite entry raises NumericalError.
class CoefficientSampler {
 public:
  CoefficientSampler(VectorXd mean, const MatrixXd& covariance);
  VectorXd draw(std::mt19937_64& rng) const;
  const VectorXd& mean() const { return mean_; }

 private:
  VectorXd mean_;
  MatrixXd factor_;
};

VectorXd draw_coefficients(const GlmFit& fit, std::mt19937_64& rng);
/// Returns a packed (beta, gamma, log theta) vector.
VectorXd draw_coefficients(const ZinbFit& fit, std::mt19937_64& rng);

std::string to_json(const GlmFit& fit);
std::string to_json(const ZinbFit& fit);
ZinbFit zinb_from_json(const std::string& text);
GlmFit glm_from_json(const std::string& text);

}  // namespace recontact::glm
