#pragma once

#include "psvgp/gp_exact.hpp"
#include "psvgp/kernel.hpp"
#include "psvgp/partition.hpp"

#include <cstdint>
#include <vector>

namespace psvgp {

// Index arithmetic for the flat unconstrained parameter vector. Ordering:
// variational mean, packed lower-triangular Cholesky factor (row-major,
// diagonal on log scale), inducing inputs (row-major), log-lengthscales,
// log process variance, log noise precision.
struct ParamLayout {
  int m = 0, d = 0;

  int tri() const { return m * (m + 1) / 2; }
  int offset_mean() const { return 0; }
  int offset_chol() const { return m; }
  int offset_inducing() const { return m + tri(); }
  int offset_log_lengthscales() const { return offset_inducing() + m * d; }
  int offset_log_process_var() const { return offset_log_lengthscales() + d; }
  int offset_log_noise_precision() const { return offset_log_process_var() + 1; }
  int total() const { return offset_log_noise_precision() + 1; }
  // Row-major lower-triangle packing, c <= r.
  static int tri_index(int r, int c) { return r * (r + 1) / 2 + c; }
};

// One local model's parameters. The covariance factor is stored packed with
// its diagonal on log scale, so the implied S = L L^T is always SPD.
struct VariationalState {
  std::int64_t partition_id = -1;
  Mat inducing_inputs;   // m x d
  Vec variational_mean;  // m
  Vec chol_packed;       // m(m+1)/2
  KernelParams kernel;

  int m() const { return static_cast<int>(variational_mean.size()); }
  int dim() const { return static_cast<int>(inducing_inputs.cols()); }
  ParamLayout layout() const { return ParamLayout{m(), dim()}; }

  // Lower-triangular factor with exponentiated diagonal.
  Mat chol_factor() const;
  Mat covariance() const;  // S = L L^T

  Vec pack() const;
  static VariationalState unpack(const Vec& theta, int m, int d, std::int64_t partition_id = -1);
};

// Shared per-batch quantities of the per-observation bound: the inducing
// Gram and its Cholesky, cross-covariances k_i, the Nystrom corrections
// k~_ii, and (on demand) the rank-one matrices Lambda_i.
class ElboWorkspace {
public:
  ElboWorkspace(const VariationalState& phi, const Mat& X_batch);

  const Mat& kmm() const { return kmm_; }
  const Eigen::LLT<Mat>& kmm_llt() const { return llt_; }
  const Mat& cross_cov() const { return kmb_; }         // m x b, column i = k_i
  const Mat& kmm_inv_cross() const { return a_; }       // column i = K_mm^{-1} k_i
  double ktilde(Eigen::Index i) const { return ktilde_[i]; }
  const Vec& ktilde_all() const { return ktilde_; }
  Mat lambda(Eigen::Index i) const;                     // beta a_i a_i^T

private:
  Mat kmm_, kmb_, a_;
  Eigen::LLT<Mat> llt_;
  Vec ktilde_;
  double beta_;
};

// KL(q(u) || N(0, K_mm)).
double kl_to_prior(const VariationalState& phi);

// Per-observation bound term: Gaussian log-density, variance correction, and
// the KL amortized by n_total.
double elbo_term(const Eigen::RowVectorXd& x, double y, const VariationalState& phi,
                 double n_total);

struct ElboEval {
  double value = 0.0;
  Vec grad;  // empty unless requested
};

// scale * sum_i l(x_i, y_i, phi, n_total) over a batch, with an analytic
// gradient in the unconstrained parameterization when with_grad is set.
ElboEval elbo_batch(const VariationalState& phi, const Mat& X, const Vec& y, double scale,
                    double n_total, bool with_grad);

inline Vec elbo_grad(const Mat& X, const Vec& y, const VariationalState& phi, double scale,
                     double n_total) {
  return elbo_batch(phi, X, y, scale, n_total, true).grad;
}

// Weighted multi-partition bound: sum_k w_k sum_i l(...), with the amortizer
// set to the weighted effective count so the KL is counted exactly once.
ElboEval elbo_weighted(const std::vector<PartitionData>& parts, const VariationalState& phi,
                       const std::vector<double>& weights, bool with_grad = false);

inline double elbo(const std::vector<PartitionData>& parts, const VariationalState& phi,
                   const std::vector<double>& weights) {
  return elbo_weighted(parts, phi, weights, false).value;
}

struct Prediction {
  Vec mean;
  Vec var;
};

// Predictive mean and variance at Xs; with_noise adds 1/beta for
// observation-space prediction.
Prediction predict(const VariationalState& phi, const Mat& Xs, bool with_noise = false);

}  // namespace psvgp
