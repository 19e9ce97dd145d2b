#include "psvgp/trainer.hpp"

#include "psvgp/errors.hpp"

#include <cmath>

namespace psvgp {

namespace {

Mat slice_rows(const Mat& coords, const std::vector<std::uint64_t>& idx) {
  Mat out(static_cast<Eigen::Index>(idx.size()), coords.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = coords.row(static_cast<Eigen::Index>(idx[i]));
  }
  return out;
}

Vec slice_vec(const Vec& v, const std::vector<std::uint64_t>& idx) {
  Vec out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out[static_cast<Eigen::Index>(i)] = v[static_cast<Eigen::Index>(idx[i])];
  }
  return out;
}

}  // namespace

VariationalState init_state(const PartitionData& part, int m, Rng& rng) {
  const Eigen::Index n = part.count();
  if (n < 1) throw ConfigError("init_state: empty partition " + std::to_string(part.id));
  if (m < 1) throw ConfigError("init_state: need at least one inducing point");
  const int d = static_cast<int>(part.coords.cols());

  Vec range(d);
  for (int k = 0; k < d; ++k) {
    range[k] = part.coords.col(k).maxCoeff() - part.coords.col(k).minCoeff();
  }
  const double bbox_w = part.bbox.xmax - part.bbox.xmin;
  const double bbox_h = part.bbox.ymax - part.bbox.ymin;
  if (range.size() >= 2) {
    if (range[0] <= 0.0) range[0] = bbox_w;
    if (range[1] <= 0.0) range[1] = bbox_h;
  }
  for (int k = 0; k < d; ++k) {
    if (range[k] <= 0.0) range[k] = 1.0;
  }

  Mat z(m, d);
  const auto keep = rng.sample_without_replacement(static_cast<std::uint64_t>(n),
                                                   static_cast<std::uint64_t>(std::min<long>(m, n)));
  for (std::size_t i = 0; i < keep.size(); ++i) {
    z.row(static_cast<Eigen::Index>(i)) = part.coords.row(static_cast<Eigen::Index>(keep[i]));
  }
  for (Eigen::Index i = static_cast<Eigen::Index>(keep.size()); i < m; ++i) {
    const auto pick = rng.uniform_below(static_cast<std::uint64_t>(n));
    z.row(i) = part.coords.row(static_cast<Eigen::Index>(pick));
    for (int k = 0; k < d; ++k) {
      z(i, k) += 1e-3 * range[k] * rng.normal();
    }
  }

  const double mean_y = part.responses.mean();
  double var_y = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double dv = part.responses[i] - mean_y;
    var_y += dv * dv;
  }
  var_y /= static_cast<double>(n);
  if (!(var_y > 0.0)) var_y = 1.0;

  VariationalState phi;
  phi.partition_id = part.id;
  phi.inducing_inputs = z;
  phi.kernel = KernelParams::make(0.3 * range, var_y, 100.0 / var_y);
  phi.variational_mean = Vec::Zero(m);

  const Mat kzz = cov_matrix(z, z, phi.kernel);
  const Eigen::LLT<Mat> llt =
      cholesky_with_jitter(kzz + kJitterBase * var_y * Mat::Identity(m, m), var_y, "init_state");
  const Mat l0 = 0.5 * llt.matrixL().toDenseMatrix();
  phi.chol_packed.resize(m * (m + 1) / 2);
  for (int r = 0; r < m; ++r) {
    for (int c = 0; c < r; ++c) phi.chol_packed[ParamLayout::tri_index(r, c)] = l0(r, c);
    phi.chol_packed[ParamLayout::tri_index(r, r)] = std::log(l0(r, r));
  }
  return phi;
}

Vec stochastic_grad(int j, int k_prime, const std::vector<std::uint64_t>& batch_indices,
                    const VariationalState& phi_j, const std::vector<PartitionData>& data,
                    double delta, const NeighborGraph& graph, const GridLayout& layout) {
  if (batch_indices.empty()) throw ConfigError("stochastic_grad: empty batch");
  const PartitionData& src = data[static_cast<std::size_t>(k_prime)];
  const Mat coords = chart_coords(layout, j, slice_rows(src.coords, batch_indices));
  const Vec y = slice_vec(src.responses, batch_indices);
  const double n_eff = graph.effective_count(j, delta);
  return elbo_grad(coords, y, phi_j, n_eff / static_cast<double>(batch_indices.size()), n_eff);
}

PartitionTrainer::PartitionTrainer(const PartitionData& part, const NeighborGraph& graph,
                                   const GridLayout& layout, const TrainOptions& opt)
    : id_(static_cast<int>(part.id)),
      layout_(layout),
      adam_(AdamState::init(0, opt.adam)),
      rng_(Rng::for_partition(opt.master_seed, static_cast<std::uint64_t>(part.id))),
      probs_(source_probs(id_, graph, opt.delta)),
      n_eff_(graph.effective_count(id_, opt.delta)) {
  phi_ = init_state(part, opt.inducing_points, rng_);
  adam_ = AdamState::init(phi_.layout().total(), opt.adam);
  batch_size_ = opt.batch_size;
  counts_ = &graph.counts;
}

PartitionTrainer::StepPlan PartitionTrainer::plan_step() {
  StepPlan plan;
  plan.source = sample_source(probs_, rng_);
  const auto n_src = (*counts_)[static_cast<std::size_t>(plan.source)];
  plan.indices = sample_minibatch(static_cast<std::uint64_t>(n_src), batch_size_, rng_);
  return plan;
}

double PartitionTrainer::apply_step(const Mat& coords, const Vec& responses) {
  const Mat local = chart_coords(layout_, id_, coords);
  const double scale = n_eff_ / static_cast<double>(responses.size());
  const ElboEval eval = elbo_batch(phi_, local, responses, scale, n_eff_, true);
  Vec theta = phi_.pack();
  if (adam_step(theta, eval.grad, adam_)) {
    phi_ = VariationalState::unpack(theta, phi_.m(), phi_.dim(), phi_.partition_id);
  } else {
    ++skipped_;
  }
  return eval.value;
}

std::vector<std::optional<VariationalState>> train_sequential(
    const std::vector<PartitionData>& data, const NeighborGraph& graph, const GridLayout& layout,
    const TrainOptions& opt) {
  std::vector<std::optional<PartitionTrainer>> trainers(data.size());
  for (std::size_t j = 0; j < data.size(); ++j) {
    if (data[j].count() > 0) trainers[j].emplace(data[j], graph, layout, opt);
  }
  for (long it = 0; it < opt.iterations; ++it) {
    for (auto& t : trainers) {
      if (!t) continue;
      const auto plan = t->plan_step();
      const PartitionData& src = data[static_cast<std::size_t>(plan.source)];
      t->apply_step(slice_rows(src.coords, plan.indices), slice_vec(src.responses, plan.indices));
    }
  }
  std::vector<std::optional<VariationalState>> out(data.size());
  for (std::size_t j = 0; j < data.size(); ++j) {
    if (trainers[j]) out[j] = trainers[j]->state();
  }
  return out;
}

std::vector<std::optional<VariationalState>> train_isvgp(const std::vector<PartitionData>& data,
                                                         const GridLayout& layout,
                                                         const TrainOptions& opt) {
  std::vector<std::optional<VariationalState>> out(data.size());
  for (std::size_t j = 0; j < data.size(); ++j) {
    const PartitionData& part = data[j];
    if (part.count() == 0) continue;
    Rng rng = Rng::for_partition(opt.master_seed, static_cast<std::uint64_t>(part.id));
    VariationalState phi = init_state(part, opt.inducing_points, rng);
    AdamState adam = AdamState::init(phi.layout().total(), opt.adam);
    const double n_j = static_cast<double>(part.count());
    for (long it = 0; it < opt.iterations; ++it) {
      rng.uniform();  // keep the stream aligned with the source-selection draw
      const auto idx = sample_minibatch(static_cast<std::uint64_t>(part.count()), opt.batch_size, rng);
      const Mat coords = chart_coords(layout, static_cast<int>(part.id), slice_rows(part.coords, idx));
      const Vec y = slice_vec(part.responses, idx);
      const Vec grad = elbo_grad(coords, y, phi, n_j / static_cast<double>(idx.size()), n_j);
      Vec theta = phi.pack();
      if (adam_step(theta, grad, adam)) {
        phi = VariationalState::unpack(theta, phi.m(), phi.dim(), phi.partition_id);
      }
    }
    out[j] = std::move(phi);
  }
  return out;
}

}  // namespace psvgp
