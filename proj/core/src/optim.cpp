#include "mopa/optim.h"

#include <cmath>
#include <stdexcept>

namespace mopa {

AdamState AdamState::init(const ParamSet& params, AdamConfig cfg) {
  AdamState st;
  st.cfg = cfg;
  st.base_lr = cfg.lr;
  st.moments.reserve(params.size());
  for (const auto& [name, t] : params.items)
    st.moments.emplace_back(name, std::make_pair(Tensor::zeros(t.shape), Tensor::zeros(t.shape)));
  return st;
}

void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state) {
  if (params.size() != state.moments.size())
    throw std::invalid_argument("adam_step: state does not match parameters");
  state.step += 1;
  const double b1 = state.cfg.beta1, b2 = state.cfg.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.items.size(); ++k) {
    auto& [name, p] = params.items[k];
    auto& [mname, mv] = state.moments[k];
    if (name != mname) throw std::invalid_argument("adam_step: moment order mismatch at " + name);
    const Tensor* g = grads.find(name);
    Tensor& m = mv.first;
    Tensor& v = mv.second;
    if (g && !g->same_shape(p)) throw std::invalid_argument("adam_step: grad shape mismatch at " + name);
    for (std::size_t i = 0; i < p.data.size(); ++i) {
      const double gi = g ? static_cast<double>(g->data[i]) : 0.0;
      const double mi = b1 * m.data[i] + (1.0 - b1) * gi;
      const double vi = b2 * v.data[i] + (1.0 - b2) * gi * gi;
      m.data[i] = static_cast<float>(mi);
      v.data[i] = static_cast<float>(vi);
      const double mhat = mi / bc1;
      const double vhat = vi / bc2;
      p.data[i] = static_cast<float>(p.data[i] - state.cfg.lr * mhat / (std::sqrt(vhat) + state.cfg.eps));
    }
  }
}

void soft_update(ParamSet& target, const ParamSet& source, double tau) {
  std::string why;
  if (!target.shapes_match(source, &why))
    throw std::invalid_argument("soft_update: " + why);
  if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("soft_update: tau out of (0,1]");
  for (std::size_t k = 0; k < target.items.size(); ++k) {
    Tensor& t = target.items[k].second;
    const Tensor& s = source.items[k].second;
    for (std::size_t i = 0; i < t.data.size(); ++i)
      t.data[i] = static_cast<float>((1.0 - tau) * t.data[i] + tau * s.data[i]);
  }
}

double lr_schedule(double base_lr, int epoch, int step_size, double decay) {
  if (epoch < 0) throw std::invalid_argument("lr_schedule: negative epoch");
  return base_lr * std::pow(decay, epoch / step_size);
}

}  // namespace mopa
