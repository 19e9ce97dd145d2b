#pragma once

#include "psvgp/kernel.hpp"
#include "psvgp/rng.hpp"

#include <Eigen/Cholesky>

#include <string>
#include <utility>

namespace psvgp {

// Cholesky of a symmetric PSD matrix with jitter escalation: tries the matrix
// as-is, then adds scale * {1e-8, 1e-7, ..., 1e-2} to the diagonal. Throws
// NumericalError naming `context` once the ladder is exhausted.
Eigen::LLT<Mat> cholesky_with_jitter(const Mat& A, double scale, const std::string& context);

// Exact GP posterior at Xs given noisy observations (X, y), zero prior mean.
// The nugget 1/beta enters both the training Gram and the prior variance at
// the prediction points, so the returned covariance is in observation space.
std::pair<Vec, Mat> exact_posterior(const Mat& X, const Vec& y, const KernelParams& kp,
                                    const Mat& Xs, const std::string& context = "exact_posterior");

// log N(y | 0, K(X,X) + beta^-1 I).
double log_marginal(const Mat& X, const Vec& y, const KernelParams& kp,
                    const std::string& context = "log_marginal");

// One draw from N(0, K(grid,grid) + beta^-1 I). Same seed, same draw.
Vec sample_grf(const Mat& grid, const KernelParams& kp, std::uint64_t seed);

}  // namespace psvgp
