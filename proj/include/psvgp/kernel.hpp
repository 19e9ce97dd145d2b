#pragma once

#include <Eigen/Core>

#include <vector>

namespace psvgp {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Covariance hyperparameters for the anisotropic squared-exponential kernel
// plus the Gaussian noise precision. Stored on log scale so gradient-based
// optimization is unconstrained; exp() recovers the positive value exactly.
struct KernelParams {
  Vec log_lengthscales;       // one per input dimension
  double log_process_var;     // log sigma_f^2
  double log_noise_precision; // log beta

  static KernelParams make(const Vec& lengthscales, double process_var, double noise_precision);

  int dim() const { return static_cast<int>(log_lengthscales.size()); }
  Vec lengthscales() const { return log_lengthscales.array().exp().matrix(); }
  double process_var() const { return std::exp(log_process_var); }
  double noise_precision() const { return std::exp(log_noise_precision); }
  double noise_var() const { return std::exp(-log_noise_precision); }
};

// Dense kernel matrix: entry (i,j) = sigma_f^2 exp(-1/2 sum_d (x1_id - x2_jd)^2 / l_d^2).
// Rows of X1/X2 are points. Throws ConfigError on dimension mismatch.
Mat cov_matrix(const Mat& X1, const Mat& X2, const KernelParams& kp);

// Relative jitter ladder used everywhere a Cholesky is taken: the factor
// multiplies sigma_f^2 and escalates x10 on failure.
inline constexpr double kJitterBase = 1e-8;
inline constexpr double kJitterMax = 1e-2;

}  // namespace psvgp
