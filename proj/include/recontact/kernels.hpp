#pragma once

// Log-likelihood, score and Hessian accumulation for the GLM families.
//
// Rows are cut into fixed-size chunks; each chunk is reduced on its own
// (in parallel under OpenMP) and the chunk partials are summed in chunk
// order, so the result does not depend on the thread count. The naive
// per-row versions in `reference` are kept for tests and benchmarks.

#include <Eigen/Dense>
#include <algorithm>
#include <vector>

namespace recontact::glm {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Need { Value, Gradient, Hessian };

struct Accumulation {
  double value = 0.0;
  VectorXd gradient;
  MatrixXd hessian;

  void reset(Index n_params, Need need);
  void add(const Accumulation& other);
};

inline constexpr Index kChunkRows = 4096;

/// y in [0,1] (fractional responses allowed), optional nonnegative row weights.
class LogisticKernel {
 public:
  LogisticKernel(const MatrixXd& X, const VectorXd& y, const VectorXd* weights = nullptr);
  Index n_rows() const { return X_.rows(); }
  Index n_params() const { return X_.cols(); }
  void accumulate(const VectorXd& beta, Index begin, Index end, Need need,
                  Accumulation& acc) const;

 private:
  const MatrixXd& X_;
  const VectorXd& y_;
  const VectorXd* w_;
};

/// NB2 with parameters (beta, log theta), or beta alone when log theta is fixed.
class NegBinKernel {
 public:
  NegBinKernel(const MatrixXd& X, const VectorXd& y, const VectorXd* weights = nullptr,
               const double* fixed_log_theta = nullptr);
  Index n_rows() const { return X_.rows(); }
  Index n_params() const { return X_.cols() + (fixed_ ? 0 : 1); }
  void accumulate(const VectorXd& params, Index begin, Index end, Need need,
                  Accumulation& acc) const;

 private:
  const MatrixXd& X_;
  const VectorXd& y_;
  const VectorXd* w_;
  const double* fixed_;
};

/// Zero-inflated NB2 with packed parameters (beta, gamma, log theta).
class ZinbKernel {
 public:
  ZinbKernel(const MatrixXd& Xc, const MatrixXd& Xz, const VectorXd& y);
  Index n_rows() const { return Xc_.rows(); }
  Index n_params() const { return Xc_.cols() + Xz_.cols() + 1; }
  void accumulate(const VectorXd& params, Index begin, Index end, Need need,
                  Accumulation& acc) const;

 private:
  const MatrixXd& Xc_;
  const MatrixXd& Xz_;
  const VectorXd& y_;
};

template <typename Kernel>
Accumulation evaluate(const Kernel& kernel, const VectorXd& params, Need need) {
  const Index n = kernel.n_rows();
  const Index p = kernel.n_params();
  const Index chunks = (n + kChunkRows - 1) / kChunkRows;
  std::vector<Accumulation> parts(static_cast<std::size_t>(chunks));
#pragma omp parallel for schedule(static)
  for (Index c = 0; c < chunks; ++c) {
    auto& part = parts[static_cast<std::size_t>(c)];
    part.reset(p, need);
    kernel.accumulate(params, c * kChunkRows, std::min(n, (c + 1) * kChunkRows), need, part);
  }
  Accumulation total;
  total.reset(p, need);
  for (const auto& part : parts) total.add(part);
  return total;
}

/// Same reduction without chunking or threads.
template <typename Kernel>
Accumulation evaluate_serial(const Kernel& kernel, const VectorXd& params, Need need) {
  Accumulation total;
  total.reset(kernel.n_params(), need);
  kernel.accumulate(params, 0, kernel.n_rows(), need, total);
  return total;
}

namespace reference {

// Row-at-a-time formulas with boost special functions throughout.
Accumulation logistic(const MatrixXd& X, const VectorXd& y, const VectorXd& beta, Need need);
Accumulation negbin(const MatrixXd& X, const VectorXd& y, const VectorXd& params, Need need);
Accumulation zinb(const MatrixXd& Xc, const MatrixXd& Xz, const VectorXd& y,
                  const VectorXd& params, Need need);

}  // namespace reference

}  // namespace recontact::glm
