#include "psvgp/adam.hpp"

#include "psvgp/errors.hpp"

#include <cmath>

namespace psvgp {

bool adam_step(Vec& theta, const Vec& grad, AdamState& state) {
  if (theta.size() != grad.size() || theta.size() != state.first_moment.size()) {
    throw ConfigError("adam_step: dimension mismatch");
  }
  if (!grad.allFinite()) return false;

  state.step += 1;
  const AdamParams& p = state.params;
  state.first_moment = p.beta1 * state.first_moment + (1.0 - p.beta1) * grad;
  state.second_moment =
      p.beta2 * state.second_moment.array().matrix() + (1.0 - p.beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(p.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(p.beta2, static_cast<double>(state.step));
  theta.array() += p.step_size * (state.first_moment.array() / c1) /
                   ((state.second_moment.array() / c2).sqrt() + p.epsilon);
  return true;
}

}  // namespace psvgp
