#include "psvgp/kernel.hpp"

#include "psvgp/errors.hpp"

#include <cmath>

namespace psvgp {

KernelParams KernelParams::make(const Vec& lengthscales, double process_var,
                                double noise_precision) {
  if ((lengthscales.array() <= 0.0).any() || process_var <= 0.0 || noise_precision <= 0.0) {
    throw ConfigError("KernelParams: lengthscales, process variance and noise precision must be positive");
  }
  KernelParams kp;
  kp.log_lengthscales = lengthscales.array().log().matrix();
  kp.log_process_var = std::log(process_var);
  kp.log_noise_precision = std::log(noise_precision);
  return kp;
}

Mat cov_matrix(const Mat& X1, const Mat& X2, const KernelParams& kp) {
  const int d = kp.dim();
  if (X1.rows() == 0 || X2.rows() == 0) {
    throw ConfigError("cov_matrix: empty point set");
  }
  if (X1.cols() != d || X2.cols() != d) {
    throw ConfigError("cov_matrix: point dimensionality does not match kernel lengthscales");
  }
  const Vec inv_l2 = (-2.0 * kp.log_lengthscales.array()).exp().matrix();
  const double sf2 = kp.process_var();
  Mat K(X1.rows(), X2.rows());
  for (Eigen::Index i = 0; i < X1.rows(); ++i) {
    for (Eigen::Index j = 0; j < X2.rows(); ++j) {
      double q = 0.0;
      for (int k = 0; k < d; ++k) {
        const double diff = X1(i, k) - X2(j, k);
        q += diff * diff * inv_l2[k];
      }
      K(i, j) = sf2 * std::exp(-0.5 * q);
    }
  }
  return K;
}

}  // namespace psvgp
