#pragma once

#include "psvgp/partition.hpp"
#include "psvgp/rng.hpp"

#include <cstdint>
#include <vector>

namespace psvgp {

struct SamplerConfig {
  double delta = 0.0;        // 0 = purely local training, 1 = full neighborhood
  std::uint64_t batch_size = 32;
  std::uint64_t seed = 1;
};

// Source-partition distribution over {j} union N_j: the home partition keeps
// weight n_j, each neighbor k gets delta * n_k, normalized by
// n_eff,j = n_j + delta * sum_k n_k. Entries are emitted in id order (self
// first, then sorted neighbors) and the last positive entry is computed as
// one minus the rest so the mass sums to 1 exactly.
struct SourceProbs {
  std::vector<int> ids;
  std::vector<double> probs;
  double n_eff = 0.0;
};

SourceProbs source_probs(int j, const NeighborGraph& graph, double delta);

// Inverse-CDF draw; consumes exactly one uniform. Zero-probability entries
// are never selected.
int sample_source(const SourceProbs& probs, Rng& rng);

// min(B, n_k) distinct indices, uniform over subsets. B >= n_k returns the
// whole partition without consuming randomness.
std::vector<std::uint64_t> sample_minibatch(std::uint64_t n_k, std::uint64_t batch_size, Rng& rng);

}  // namespace psvgp
