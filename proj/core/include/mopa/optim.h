#pragma once

#include "mopa/params.h"

namespace mopa {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Per-parameter first/second moments plus the shared step counter. `lr` is
// the live learning rate (schedules mutate it); `base_lr` stays fixed.
struct AdamState {
  AdamConfig cfg;
  double base_lr = 0.0;
  std::int64_t step = 0;
  std::vector<std::pair<std::string, std::pair<Tensor, Tensor>>> moments;

  static AdamState init(const ParamSet& params, AdamConfig cfg);
};

// One Adam update with bias correction. Gradients missing from `grads` are
// treated as zero (their moments still decay).
void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state);

// target <- (1 - tau) * target + tau * source
void soft_update(ParamSet& target, const ParamSet& source, double tau);

// stepwise exponential decay: base * decay^(epoch / step_size)
double lr_schedule(double base_lr, int epoch, int step_size = 5, double decay = 0.99);

}  // namespace mopa
