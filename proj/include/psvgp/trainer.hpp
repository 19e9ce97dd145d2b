#pragma once

#include "psvgp/adam.hpp"
#include "psvgp/partition.hpp"
#include "psvgp/sampler.hpp"
#include "psvgp/svgp.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace psvgp {

// Optimization settings for one run, shared by every training path.
struct TrainOptions {
  int inducing_points = 5;
  double delta = 0.0;
  std::uint64_t batch_size = 32;
  long iterations = 1500;
  std::uint64_t master_seed = 1;
  AdamParams adam;
};

// Deterministic initialization from the partition's own stream: inducing
// inputs subsampled from the data (resampled with a small jitter when the
// partition is smaller than m), zero mean, half the prior Cholesky for the
// covariance factor, lengthscales from the local data range, variance and
// noise from the local response variance.
VariationalState init_state(const PartitionData& part, int m, Rng& rng);

// Unbiased gradient estimate U_j for partition j's model given a mini-batch
// drawn from source partition k': (n_eff / |I|) * sum of per-observation
// gradients, with the KL amortized by n_eff.
Vec stochastic_grad(int j, int k_prime, const std::vector<std::uint64_t>& batch_indices,
                    const VariationalState& phi_j, const std::vector<PartitionData>& data,
                    double delta, const NeighborGraph& graph, const GridLayout& layout);

// One partition's sampler + optimizer, stepped externally so the mini-batch
// rows can come from memory or from a peer. Every random draw comes from the
// partition's own stream; results are independent of who hosts the data.
class PartitionTrainer {
public:
  PartitionTrainer(const PartitionData& part, const NeighborGraph& graph,
                   const GridLayout& layout, const TrainOptions& opt);

  struct StepPlan {
    int source = -1;                       // partition the batch comes from
    std::vector<std::uint64_t> indices;    // row indices within that partition
  };

  StepPlan plan_step();
  // Rows must be the source partition's rows at the planned indices, in
  // global coordinates; returns the stochastic bound estimate for the step.
  double apply_step(const Mat& coords, const Vec& responses);

  int partition_id() const { return id_; }
  double effective_count() const { return n_eff_; }
  const SourceProbs& probs() const { return probs_; }
  const VariationalState& state() const { return phi_; }
  long skipped_steps() const { return skipped_; }

private:
  int id_;
  const GridLayout& layout_;
  VariationalState phi_;
  AdamState adam_;
  Rng rng_;
  SourceProbs probs_;
  double n_eff_;
  std::uint64_t batch_size_ = 1;
  const std::vector<Eigen::Index>* counts_ = nullptr;
  long skipped_ = 0;
};

// Sequential reference loop with PSVGP semantics: all partitions advance in
// lockstep on one thread, batches sliced straight from memory. The worker
// fabric must reproduce its results bitwise for any worker count.
std::vector<std::optional<VariationalState>> train_sequential(
    const std::vector<PartitionData>& data, const NeighborGraph& graph, const GridLayout& layout,
    const TrainOptions& opt);

// Standalone independent-SVGP loop: each partition trains on its own data
// only. Shares the per-partition streams (including the source-selection
// draw) so the delta = 0 configuration above is bitwise comparable.
std::vector<std::optional<VariationalState>> train_isvgp(const std::vector<PartitionData>& data,
                                                         const GridLayout& layout,
                                                         const TrainOptions& opt);

}  // namespace psvgp
