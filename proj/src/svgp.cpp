#include "psvgp/svgp.hpp"

#include "psvgp/errors.hpp"

#include <cmath>

namespace psvgp {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
}

Mat VariationalState::chol_factor() const {
  const int mm = m();
  Mat L = Mat::Zero(mm, mm);
  for (int r = 0; r < mm; ++r) {
    for (int c = 0; c < r; ++c) L(r, c) = chol_packed[ParamLayout::tri_index(r, c)];
    L(r, r) = std::exp(chol_packed[ParamLayout::tri_index(r, r)]);
  }
  return L;
}

Mat VariationalState::covariance() const {
  const Mat L = chol_factor();
  return L * L.transpose();
}

Vec VariationalState::pack() const {
  const ParamLayout lay = layout();
  Vec theta(lay.total());
  theta.segment(lay.offset_mean(), lay.m) = variational_mean;
  theta.segment(lay.offset_chol(), lay.tri()) = chol_packed;
  for (int r = 0; r < lay.m; ++r) {
    theta.segment(lay.offset_inducing() + r * lay.d, lay.d) = inducing_inputs.row(r);
  }
  theta.segment(lay.offset_log_lengthscales(), lay.d) = kernel.log_lengthscales;
  theta[lay.offset_log_process_var()] = kernel.log_process_var;
  theta[lay.offset_log_noise_precision()] = kernel.log_noise_precision;
  return theta;
}

VariationalState VariationalState::unpack(const Vec& theta, int m, int d,
                                          std::int64_t partition_id) {
  const ParamLayout lay{m, d};
  if (theta.size() != lay.total()) throw ConfigError("VariationalState::unpack: bad length");
  VariationalState phi;
  phi.partition_id = partition_id;
  phi.variational_mean = theta.segment(lay.offset_mean(), m);
  phi.chol_packed = theta.segment(lay.offset_chol(), lay.tri());
  phi.inducing_inputs.resize(m, d);
  for (int r = 0; r < m; ++r) {
    phi.inducing_inputs.row(r) = theta.segment(lay.offset_inducing() + r * d, d);
  }
  phi.kernel.log_lengthscales = theta.segment(lay.offset_log_lengthscales(), d);
  phi.kernel.log_process_var = theta[lay.offset_log_process_var()];
  phi.kernel.log_noise_precision = theta[lay.offset_log_noise_precision()];
  return phi;
}

namespace {

// Inducing Gram with relative jitter; the jitter scales with sigma_f^2 so the
// whole matrix stays exactly homogeneous in the process variance (the
// log-sigma_f^2 gradient relies on this).
Eigen::LLT<Mat> inducing_llt(const Mat& kmm, double process_var, Mat* kmm_with_jitter) {
  Mat A = kmm;
  A.diagonal().array() += kJitterBase * process_var;
  Eigen::LLT<Mat> llt(A);
  double j = kJitterBase * 10.0;
  while (llt.info() != Eigen::Success && j <= kJitterMax * 1.0001) {
    A = kmm;
    A.diagonal().array() += j * process_var;
    llt.compute(A);
    j *= 10.0;
  }
  if (llt.info() != Eigen::Success) {
    throw NumericalError("Cholesky of inducing Gram failed after jitter escalation");
  }
  if (kmm_with_jitter) *kmm_with_jitter = A;
  return llt;
}

}  // namespace

ElboWorkspace::ElboWorkspace(const VariationalState& phi, const Mat& X_batch) {
  if (X_batch.cols() != phi.dim()) {
    throw ConfigError("ElboWorkspace: batch dimensionality does not match inducing inputs");
  }
  beta_ = phi.kernel.noise_precision();
  const Mat kzz = cov_matrix(phi.inducing_inputs, phi.inducing_inputs, phi.kernel);
  llt_ = inducing_llt(kzz, phi.kernel.process_var(), &kmm_);
  kmb_ = cov_matrix(phi.inducing_inputs, X_batch, phi.kernel);
  a_ = llt_.solve(kmb_);
  const double sf2 = phi.kernel.process_var();
  ktilde_ = Vec::Constant(X_batch.rows(), sf2) -
            (kmb_.array() * a_.array()).colwise().sum().matrix().transpose();
}

Mat ElboWorkspace::lambda(Eigen::Index i) const {
  const Vec ai = a_.col(i);
  return beta_ * ai * ai.transpose();
}

double kl_to_prior(const VariationalState& phi) {
  const Mat kzz = cov_matrix(phi.inducing_inputs, phi.inducing_inputs, phi.kernel);
  Mat A;
  const Eigen::LLT<Mat> llt = inducing_llt(kzz, phi.kernel.process_var(), &A);
  const Mat L = phi.chol_factor();
  const int m = phi.m();
  const Mat W = llt.matrixL().solve(L);
  const double trace = W.squaredNorm();
  const Vec ainv_m = llt.solve(phi.variational_mean);
  const double maha = phi.variational_mean.dot(ainv_m);
  const double logdet_a = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  double logdet_s = 0.0;
  for (int r = 0; r < m; ++r) logdet_s += 2.0 * phi.chol_packed[ParamLayout::tri_index(r, r)];
  return 0.5 * (trace + maha - m + logdet_a - logdet_s);
}

ElboEval elbo_batch(const VariationalState& phi, const Mat& X, const Vec& y, double scale,
                    double n_total, bool with_grad) {
  if (X.rows() != y.size() || X.rows() == 0) throw ConfigError("elbo_batch: empty or mismatched batch");
  if (n_total <= 0.0) throw ConfigError("elbo_batch: n_total must be positive");

  const int m = phi.m();
  const int d = phi.dim();
  const Eigen::Index b = X.rows();
  const double beta = phi.kernel.noise_precision();
  const double sf2 = phi.kernel.process_var();
  const Vec inv_l2 = (-2.0 * phi.kernel.log_lengthscales.array()).exp().matrix();

  const ElboWorkspace ws(phi, X);
  const Eigen::LLT<Mat>& llt = ws.kmm_llt();
  const Mat& kmb = ws.cross_cov();
  const Mat& amk = ws.kmm_inv_cross();
  const Mat L = phi.chol_factor();
  const Mat S = L * L.transpose();

  const Vec ainv_m = llt.solve(phi.variational_mean);
  const Vec mu = kmb.transpose() * ainv_m;
  const Vec r = y - mu;
  const Mat sa = S * amk;  // column i = S a_i
  const Vec quad = (amk.array() * sa.array()).colwise().sum().matrix().transpose();

  // KL(q || p), from the same factorization.
  const Mat W = llt.matrixL().solve(L);
  const double logdet_a = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  double logdet_s = 0.0;
  for (int rr = 0; rr < m; ++rr) logdet_s += 2.0 * phi.chol_packed[ParamLayout::tri_index(rr, rr)];
  const double kl = 0.5 * (W.squaredNorm() + phi.variational_mean.dot(ainv_m) - m + logdet_a -
                           logdet_s);

  const double bf = static_cast<double>(b);
  double data_sum = 0.5 * bf * (std::log(beta) - kLog2Pi);
  data_sum -= 0.5 * beta * (r.squaredNorm() + ws.ktilde_all().sum() + quad.sum());

  ElboEval out;
  out.value = scale * (data_sum - (bf / n_total) * kl);
  if (!with_grad) return out;

  const ParamLayout lay = phi.layout();
  Vec grad = Vec::Zero(lay.total());
  const double kl_w = bf / n_total;  // weight of the KL inside the batch sum

  // Mean block.
  const Vec ar = amk * r;  // sum_i r_i a_i
  grad.segment(lay.offset_mean(), m) = beta * ar - kl_w * ainv_m;

  // Cholesky block: d/dL of -1/2 beta sum_i a_i^T S a_i  and of -kl_w * KL.
  const Mat ainv_l = llt.solve(L);
  const Mat linv_t = L.triangularView<Eigen::Lower>().solve(Mat::Identity(m, m)).transpose();
  Mat grad_l = -beta * (amk * (amk.transpose() * L)) - kl_w * (ainv_l - linv_t);
  for (int rr = 0; rr < m; ++rr) {
    for (int cc = 0; cc < rr; ++cc) {
      grad[lay.offset_chol() + ParamLayout::tri_index(rr, cc)] = grad_l(rr, cc);
    }
    // log-diagonal chain: dL_rr/dlambda_r = L_rr
    grad[lay.offset_chol() + ParamLayout::tri_index(rr, rr)] = grad_l(rr, rr) * L(rr, rr);
  }

  // Coefficient of dA (inducing Gram, jitter included) under tr(G dA).
  const Mat asa = llt.solve(sa);  // column i = A^{-1} S a_i
  Mat g_a = Mat::Zero(m, m);
  g_a.noalias() -= 0.5 * beta * (ar * ainv_m.transpose() + ainv_m * ar.transpose());
  g_a.noalias() -= 0.5 * beta * (amk * amk.transpose());
  g_a.noalias() += 0.5 * beta * (amk * asa.transpose() + asa * amk.transpose());
  {
    const Mat p = llt.solve(S);
    const Mat ainv_s_ainv = llt.solve(p.transpose());
    Mat g_a_kl = 0.5 * (llt.solve(Mat::Identity(m, m)) - ainv_s_ainv -
                        ainv_m * ainv_m.transpose());
    g_a -= kl_w * 0.5 * (g_a_kl + g_a_kl.transpose());
  }

  // Coefficient of d(k_i): beta (r_i A^{-1}m + a_i - A^{-1} S a_i).
  const Mat g_k = beta * (ainv_m * r.transpose() + amk - asa);

  // Chain to the kernel inputs and hyperparameters. Only off-diagonal entries
  // of the inducing Gram enter the lengthscale/location chain (zero
  // displacement on the diagonal), so the jittered matrix can be used as-is.
  const Mat& kzz = ws.kmm();

  // log process variance: A, k_i and k** all scale linearly with sigma_f^2.
  double g_logsf2 = (g_a.array() * kzz.array()).sum() + (g_k.array() * kmb.array()).sum() -
                    0.5 * beta * bf * sf2;

  // log lengthscales and inducing locations.
  Vec g_logl = Vec::Zero(d);
  Mat g_z = Mat::Zero(m, d);
  for (int p = 0; p < m; ++p) {
    for (int q = 0; q < m; ++q) {
      if (p == q) continue;
      const double gk = g_a(p, q) * kzz(p, q);
      for (int k = 0; k < d; ++k) {
        const double diff = phi.inducing_inputs(p, k) - phi.inducing_inputs(q, k);
        g_logl[k] += gk * diff * diff * inv_l2[k];
        g_z(p, k) -= 2.0 * gk * diff * inv_l2[k];
      }
    }
    for (Eigen::Index i = 0; i < b; ++i) {
      const double gk = g_k(p, i) * kmb(p, i);
      for (int k = 0; k < d; ++k) {
        const double diff = phi.inducing_inputs(p, k) - X(i, k);
        g_logl[k] += gk * diff * diff * inv_l2[k];
        g_z(p, k) -= gk * diff * inv_l2[k];
      }
    }
  }

  // log noise precision.
  const double g_logbeta =
      0.5 * bf - 0.5 * beta * (r.squaredNorm() + ws.ktilde_all().sum() + quad.sum());

  for (int rr = 0; rr < m; ++rr) {
    grad.segment(lay.offset_inducing() + rr * d, d) = g_z.row(rr);
  }
  grad.segment(lay.offset_log_lengthscales(), d) = g_logl;
  grad[lay.offset_log_process_var()] = g_logsf2;
  grad[lay.offset_log_noise_precision()] = g_logbeta;

  out.grad = scale * grad;
  return out;
}

double elbo_term(const Eigen::RowVectorXd& x, double y, const VariationalState& phi,
                 double n_total) {
  Mat X(1, x.size());
  X.row(0) = x;
  Vec yv(1);
  yv[0] = y;
  return elbo_batch(phi, X, yv, 1.0, n_total, false).value;
}

ElboEval elbo_weighted(const std::vector<PartitionData>& parts, const VariationalState& phi,
                       const std::vector<double>& weights, bool with_grad) {
  if (parts.size() != weights.size()) throw ConfigError("elbo_weighted: weight count mismatch");
  double n_total = 0.0;
  bool any_positive = false;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    if (weights[k] < 0.0) throw ConfigError("elbo_weighted: weights must be >= 0");
    if (weights[k] > 0.0) any_positive = true;
    n_total += weights[k] * static_cast<double>(parts[k].count());
  }
  if (!any_positive) throw ConfigError("elbo_weighted: at least one weight must be > 0");
  if (n_total <= 0.0) throw ConfigError("elbo_weighted: weighted effective count is zero");

  ElboEval total;
  if (with_grad) total.grad = Vec::Zero(phi.layout().total());
  for (std::size_t k = 0; k < parts.size(); ++k) {
    if (weights[k] == 0.0 || parts[k].count() == 0) continue;
    const ElboEval e =
        elbo_batch(phi, parts[k].coords, parts[k].responses, weights[k], n_total, with_grad);
    total.value += e.value;
    if (with_grad) total.grad += e.grad;
  }
  return total;
}

Prediction predict(const VariationalState& phi, const Mat& Xs, bool with_noise) {
  const Mat kzz = cov_matrix(phi.inducing_inputs, phi.inducing_inputs, phi.kernel);
  const Eigen::LLT<Mat> llt = inducing_llt(kzz, phi.kernel.process_var(), nullptr);
  const Mat ksm = cov_matrix(phi.inducing_inputs, Xs, phi.kernel);  // m x s
  const Mat amk = llt.solve(ksm);
  const Mat S = phi.covariance();

  Prediction pred;
  pred.mean = ksm.transpose() * llt.solve(phi.variational_mean);
  const double sf2 = phi.kernel.process_var();
  const Vec nystrom = (ksm.array() * amk.array()).colwise().sum().matrix().transpose();
  const Mat samk = S * amk;
  const Vec qvar = (amk.array() * samk.array()).colwise().sum().matrix().transpose();
  pred.var = Vec::Constant(Xs.rows(), sf2) - nystrom + qvar;
  if (with_noise) pred.var.array() += phi.kernel.noise_var();
  return pred;
}

}  // namespace psvgp
