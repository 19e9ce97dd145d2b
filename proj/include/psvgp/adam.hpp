#pragma once

#include "psvgp/kernel.hpp"

namespace psvgp {

struct AdamParams {
  double step_size = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  Vec first_moment;
  Vec second_moment;
  long step = 0;
  AdamParams params;

  static AdamState init(int n, const AdamParams& params) {
    return AdamState{Vec::Zero(n), Vec::Zero(n), 0, params};
  }
};

// Bias-corrected Adam step in ascent orientation. A non-finite gradient skips
// the update (parameters, moments and counter untouched) and returns false.
bool adam_step(Vec& theta, const Vec& grad, AdamState& state);

}  // namespace psvgp
