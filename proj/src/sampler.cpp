#include "psvgp/sampler.hpp"

#include "psvgp/errors.hpp"

namespace psvgp {

SourceProbs source_probs(int j, const NeighborGraph& graph, double delta) {
  if (delta < 0.0 || delta > 1.0) throw ConfigError("source_probs: delta must lie in [0, 1]");
  const auto n_j = graph.counts[static_cast<std::size_t>(j)];
  if (n_j <= 0) throw ConfigError("source_probs: partition " + std::to_string(j) + " is empty");

  SourceProbs out;
  out.ids.push_back(j);
  double weight_sum = static_cast<double>(n_j);
  std::vector<double> weights{static_cast<double>(n_j)};
  for (int k : graph.adjacency[static_cast<std::size_t>(j)]) {
    const double w = delta * static_cast<double>(graph.counts[static_cast<std::size_t>(k)]);
    out.ids.push_back(k);
    weights.push_back(w);
    weight_sum += w;
  }
  out.n_eff = weight_sum;

  out.probs.resize(weights.size());
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    out.probs[i] = weights[i] / weight_sum;
    if (weights[i] > 0.0) last_positive = i;
  }
  double rest = 0.0;
  for (std::size_t i = 0; i < out.probs.size(); ++i) {
    if (i != last_positive) rest += out.probs[i];
  }
  out.probs[last_positive] = 1.0 - rest;
  return out;
}

int sample_source(const SourceProbs& probs, Rng& rng) {
  const double u = rng.uniform();
  double cum = 0.0;
  int chosen = -1;
  for (std::size_t i = 0; i < probs.probs.size(); ++i) {
    if (probs.probs[i] <= 0.0) continue;
    cum += probs.probs[i];
    chosen = probs.ids[i];
    if (u < cum) break;
  }
  return chosen;
}

std::vector<std::uint64_t> sample_minibatch(std::uint64_t n_k, std::uint64_t batch_size,
                                            Rng& rng) {
  if (batch_size < 1) throw ConfigError("sample_minibatch: batch size must be >= 1");
  return rng.sample_without_replacement(n_k, batch_size);
}

}  // namespace psvgp
