#include "psvgp/gp_exact.hpp"

#include "psvgp/errors.hpp"

#include <cmath>

namespace psvgp {

Eigen::LLT<Mat> cholesky_with_jitter(const Mat& A, double scale, const std::string& context) {
  Eigen::LLT<Mat> llt(A);
  if (llt.info() == Eigen::Success) return llt;
  for (double j = kJitterBase; j <= kJitterMax * 1.0001; j *= 10.0) {
    Mat Aj = A;
    Aj.diagonal().array() += j * scale;
    llt.compute(Aj);
    if (llt.info() == Eigen::Success) return llt;
  }
  throw NumericalError("Cholesky failed after jitter escalation in " + context);
}

namespace {

Mat noisy_gram(const Mat& X, const KernelParams& kp) {
  Mat K = cov_matrix(X, X, kp);
  K.diagonal().array() += kp.noise_var();
  return K;
}

}  // namespace

std::pair<Vec, Mat> exact_posterior(const Mat& X, const Vec& y, const KernelParams& kp,
                                    const Mat& Xs, const std::string& context) {
  if (X.rows() != y.size() || X.rows() < 1) {
    throw ConfigError("exact_posterior: need |X| = |y| >= 1");
  }
  const Eigen::LLT<Mat> llt = cholesky_with_jitter(noisy_gram(X, kp), kp.process_var(), context);
  const Mat Ksx = cov_matrix(X, Xs, kp);  // n x s
  const Vec alpha = llt.solve(y);
  Vec mean = Ksx.transpose() * alpha;
  Mat cov = noisy_gram(Xs, kp) - Ksx.transpose() * llt.solve(Ksx);
  return {std::move(mean), std::move(cov)};
}

double log_marginal(const Mat& X, const Vec& y, const KernelParams& kp,
                    const std::string& context) {
  if (X.rows() != y.size() || X.rows() < 1) {
    throw ConfigError("log_marginal: need |X| = |y| >= 1");
  }
  const Eigen::Index n = X.rows();
  const Eigen::LLT<Mat> llt = cholesky_with_jitter(noisy_gram(X, kp), kp.process_var(), context);
  const Vec alpha = llt.solve(y);
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return -0.5 * (y.dot(alpha) + logdet + static_cast<double>(n) * std::log(2.0 * M_PI));
}

Vec sample_grf(const Mat& grid, const KernelParams& kp, std::uint64_t seed) {
  const Eigen::LLT<Mat> llt =
      cholesky_with_jitter(noisy_gram(grid, kp), kp.process_var(), "sample_grf");
  Rng rng(seed);
  Vec z(grid.rows());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  return llt.matrixL() * z;
}

}  // namespace psvgp
