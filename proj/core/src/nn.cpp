#include "mopa/nn.h"

#include <cmath>
#include <stdexcept>

namespace mopa {

int NetworkSpec::conv_out_spatial() const {
  int s = image_size;
  for (int i = 0; i < 3; ++i) s = (s + 2 * conv_pad - conv_ksize) / conv_stride + 1;
  return s;
}

int NetworkSpec::conv_flat_dim() const {
  const int s = conv_out_spatial();
  return conv_channels[2] * s * s;
}

NetworkSpec NetworkSpec::state_mlp(int input_dim, int output_dim) {
  NetworkSpec s;
  s.kind = Kind::StateMlp;
  s.input_dim = input_dim;
  s.output_dim = output_dim;
  s.activation = Activation::Relu;
  return s;
}

NetworkSpec NetworkSpec::state_actor(int input_dim, int action_dim) {
  NetworkSpec s = state_mlp(input_dim, 0);
  s.action_dim = action_dim;
  return s;
}

NetworkSpec NetworkSpec::visual_actor(int image_size, int joint_feature_dim, int action_dim) {
  NetworkSpec s;
  s.kind = Kind::VisualActor;
  s.image_size = image_size;
  s.joint_feature_dim = joint_feature_dim;
  s.action_dim = action_dim;
  s.activation = Activation::LeakyRelu;
  return s;
}

namespace {

constexpr float kLeakySlope = 0.01f;

Tensor uniform_tensor(std::vector<int> shape, double scale, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (float& v : t.data) v = static_cast<float>(rng.uniform(-scale, scale));
  return t;
}

void add_fc(ParamSet& p, const std::string& name, int in, int out, Rng& rng) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(in));
  p.add(name + ".w", uniform_tensor({in, out}, scale, rng));
  p.add(name + ".b", uniform_tensor({out}, scale, rng));
}

void add_conv(ParamSet& p, const std::string& name, int in_ch, int out_ch, int k, Rng& rng) {
  const int ckk = in_ch * k * k;
  const double scale = 1.0 / std::sqrt(static_cast<double>(ckk));
  p.add(name + ".w", uniform_tensor({out_ch, ckk}, scale, rng));
  p.add(name + ".b", uniform_tensor({out_ch}, scale, rng));
}

}  // namespace

ParamSet init_params(const NetworkSpec& spec, Rng& rng) {
  ParamSet p;
  int trunk_in = spec.input_dim;
  if (spec.kind == NetworkSpec::Kind::VisualActor) {
    add_conv(p, "conv1", spec.image_channels, spec.conv_channels[0], spec.conv_ksize, rng);
    add_conv(p, "conv2", spec.conv_channels[0], spec.conv_channels[1], spec.conv_ksize, rng);
    add_conv(p, "conv3", spec.conv_channels[1], spec.conv_channels[2], spec.conv_ksize, rng);
    trunk_in = spec.conv_flat_dim() + spec.joint_feature_dim;
    add_fc(p, "fc1", trunk_in, spec.hidden, rng);
    add_fc(p, "fc2", spec.hidden, spec.hidden, rng);
    add_fc(p, "fc3", spec.hidden, spec.hidden, rng);
  } else {
    add_fc(p, "fc1", trunk_in, spec.hidden, rng);
    add_fc(p, "fc2", spec.hidden, spec.hidden, rng);
  }
  if (spec.action_dim > 0) {
    add_fc(p, "mean", spec.hidden, spec.action_dim, rng);
    add_fc(p, "logstd", spec.hidden, spec.action_dim, rng);
  } else {
    add_fc(p, "out", spec.hidden, spec.output_dim, rng);
  }
  return p;
}

int BoundParams::at(const std::string& name) const {
  for (const auto& [n, id] : ids)
    if (n == name) return id;
  throw std::out_of_range("BoundParams: no parameter named " + name);
}

BoundParams bind_params(Tape& tape, const ParamSet& params, bool needs_grad) {
  BoundParams b;
  b.ids.reserve(params.size());
  for (const auto& [name, tensor] : params.items)
    b.ids.emplace_back(name, tape.leaf(&tensor, needs_grad));
  return b;
}

ParamSet collect_grads(Tape& tape, const BoundParams& bound) {
  ParamSet g;
  for (const auto& [name, id] : bound.ids) g.add(name, tape.grad_or_zeros(id));
  return g;
}

namespace {

int activate(Tape& tape, const NetworkSpec& spec, int x) {
  return spec.activation == Activation::Relu ? tape.relu(x) : tape.leaky_relu(x, kLeakySlope);
}

// shared trunk: returns the last hidden node
int forward_trunk(Tape& tape, const NetworkSpec& spec, const BoundParams& p, int primary,
                  int joint_features) {
  if (spec.kind == NetworkSpec::Kind::VisualActor) {
    if (joint_features < 0) throw std::invalid_argument("visual actor requires joint features");
    const int s0 = spec.image_size;
    const int s1 = (s0 + 2 * spec.conv_pad - spec.conv_ksize) / spec.conv_stride + 1;
    const int s2 = (s1 + 2 * spec.conv_pad - spec.conv_ksize) / spec.conv_stride + 1;
    int h = activate(tape, spec,
                     tape.conv2d(primary, p.at("conv1.w"), p.at("conv1.b"), s0, s0,
                                 spec.image_channels, spec.conv_channels[0], spec.conv_ksize,
                                 spec.conv_stride, spec.conv_pad));
    h = activate(tape, spec,
                 tape.conv2d(h, p.at("conv2.w"), p.at("conv2.b"), s1, s1, spec.conv_channels[0],
                             spec.conv_channels[1], spec.conv_ksize, spec.conv_stride,
                             spec.conv_pad));
    h = activate(tape, spec,
                 tape.conv2d(h, p.at("conv3.w"), p.at("conv3.b"), s2, s2, spec.conv_channels[1],
                             spec.conv_channels[2], spec.conv_ksize, spec.conv_stride,
                             spec.conv_pad));
    // per-sample conv output is already a contiguous row; concat joint features
    h = tape.concat_cols(h, joint_features);
    h = activate(tape, spec, tape.linear(h, p.at("fc1.w"), p.at("fc1.b")));
    h = activate(tape, spec, tape.linear(h, p.at("fc2.w"), p.at("fc2.b")));
    h = activate(tape, spec, tape.linear(h, p.at("fc3.w"), p.at("fc3.b")));
    return h;
  }
  int h = activate(tape, spec, tape.linear(primary, p.at("fc1.w"), p.at("fc1.b")));
  h = activate(tape, spec, tape.linear(h, p.at("fc2.w"), p.at("fc2.b")));
  return h;
}

}  // namespace

int forward_plain(Tape& tape, const NetworkSpec& spec, const BoundParams& params, int input) {
  const int h = forward_trunk(tape, spec, params, input, -1);
  return tape.linear(h, params.at("out.w"), params.at("out.b"));
}

ActorHeads forward_actor(Tape& tape, const NetworkSpec& spec, const BoundParams& params,
                         int primary, int joint_features) {
  const int h = forward_trunk(tape, spec, params, primary, joint_features);
  ActorHeads heads;
  heads.mean = tape.linear(h, params.at("mean.w"), params.at("mean.b"));
  heads.log_std = tape.linear(h, params.at("logstd.w"), params.at("logstd.b"));
  return heads;
}

namespace {

Tensor bounds_tile(int batch, const std::vector<double>& bounds) {
  const int d = static_cast<int>(bounds.size());
  Tensor t = Tensor::zeros({batch, d});
  for (int i = 0; i < batch; ++i)
    for (int j = 0; j < d; ++j) t.data[static_cast<std::size_t>(i) * d + j] =
        static_cast<float>(bounds[static_cast<std::size_t>(j)]);
  return t;
}

}  // namespace

GaussianSample gaussian_tanh_sample(Tape& tape, ActorHeads heads, const Tensor& noise,
                                    const std::vector<double>& bounds) {
  const Tensor& mean = tape.val(heads.mean);
  const int batch = mean.dim(0);
  const int d = mean.dim(1);
  if (noise.dim(0) != batch || noise.dim(1) != d)
    throw std::invalid_argument("gaussian_tanh_sample: noise shape mismatch");

  const int ls = tape.clamp(heads.log_std, kLogStdMin, kLogStdMax);
  const int sigma = tape.exp_op(ls);
  const int z = tape.constant(noise);
  const int u = tape.add(heads.mean, tape.mul(sigma, z));

  const int tu = tape.tanh_op(u);
  const int action = tape.mul(tu, tape.constant(bounds_tile(batch, bounds)));

  // log N(u; mean, sigma) at u = mean + sigma z collapses to
  //   -z^2/2 - log_std - log(2 pi)/2,
  // and squash + bound-scale corrections contribute
  //   -2 (log 2 - u - softplus(-2u)) - log(bound).
  Tensor cmat = Tensor::zeros({batch, d});
  constexpr double kHalfLog2Pi = 0.9189385332046727;  // log(2 pi)/2
  constexpr double kLog2 = 0.6931471805599453;
  for (int i = 0; i < batch; ++i) {
    for (int j = 0; j < d; ++j) {
      const double zv = noise.data[static_cast<std::size_t>(i) * d + j];
      cmat.data[static_cast<std::size_t>(i) * d + j] = static_cast<float>(
          -0.5 * zv * zv - kHalfLog2Pi - 2.0 * kLog2 - std::log(bounds[static_cast<std::size_t>(j)]));
    }
  }
  const int neg_ls = tape.scale(ls, -1.0f);
  const int two_u = tape.scale(u, 2.0f);
  const int two_sp = tape.scale(tape.softplus(tape.scale(u, -2.0f)), 2.0f);
  const int mat = tape.add(tape.add(tape.constant(std::move(cmat)), neg_ls), tape.add(two_u, two_sp));

  GaussianSample out;
  out.action = action;
  out.log_prob = tape.row_sum(mat);
  return out;
}

int deterministic_action(Tape& tape, ActorHeads heads, const std::vector<double>& bounds) {
  const int batch = tape.val(heads.mean).dim(0);
  return tape.mul(tape.tanh_op(heads.mean), tape.constant(bounds_tile(batch, bounds)));
}

Tensor sample_noise(Rng& rng, int batch, int dim) {
  Tensor t = Tensor::zeros({batch, dim});
  for (float& v : t.data) v = static_cast<float>(rng.normal());
  return t;
}

// ----- tape-free inference ----- //

namespace {

void apply_activation_inplace(const NetworkSpec& spec, std::vector<float>& v) {
  if (spec.activation == Activation::Relu) {
    for (float& x : v) x = x > 0.0f ? x : 0.0f;
  } else {
    for (float& x : v) x = x > 0.0f ? x : kLeakySlope * x;
  }
}

std::vector<float> fc_infer(const ParamSet& params, const std::string& name,
                            const std::vector<float>& x) {
  const Tensor& w = params.at(name + ".w");
  const Tensor& b = params.at(name + ".b");
  const int in = w.dim(0), out = w.dim(1);
  if (static_cast<int>(x.size()) != in) throw std::invalid_argument("fc_infer: width mismatch");
  std::vector<float> y(static_cast<std::size_t>(out), 0.0f);
  addmm_nn(y.data(), x.data(), w.ptr(), 1, in, out);
  for (int j = 0; j < out; ++j) y[static_cast<std::size_t>(j)] += b.data[static_cast<std::size_t>(j)];
  return y;
}

std::vector<float> conv_infer(const NetworkSpec& spec, const ParamSet& params,
                              const std::string& name, const std::vector<float>& x, int side,
                              int in_ch, int out_ch) {
  const Tensor& w = params.at(name + ".w");
  const Tensor& b = params.at(name + ".b");
  const int k = spec.conv_ksize, stride = spec.conv_stride, pad = spec.conv_pad;
  const int o = (side + 2 * pad - k) / stride + 1;
  const int ohow = o * o;
  const int ckk = in_ch * k * k;
  std::vector<float> cols(static_cast<std::size_t>(ohow) * ckk);
  im2col(x.data(), in_ch, side, side, k, stride, pad, o, o, cols.data());
  std::vector<float> wt(static_cast<std::size_t>(ckk) * out_ch);
  transpose(w.ptr(), wt.data(), out_ch, ckk);
  std::vector<float> yrows(static_cast<std::size_t>(ohow) * out_ch, 0.0f);
  addmm_nn(yrows.data(), cols.data(), wt.data(), ohow, ckk, out_ch);
  std::vector<float> y(static_cast<std::size_t>(out_ch) * ohow);
  for (int r = 0; r < ohow; ++r)
    for (int oc = 0; oc < out_ch; ++oc)
      y[static_cast<std::size_t>(oc) * ohow + r] =
          yrows[static_cast<std::size_t>(r) * out_ch + oc] + b.data[static_cast<std::size_t>(oc)];
  return y;
}

std::vector<double> heads_to_action(const NetworkSpec& spec, const ParamSet& params,
                                    const std::vector<float>& hidden,
                                    const std::vector<double>& bounds, bool deterministic,
                                    Rng* rng) {
  std::vector<float> mean = fc_infer(params, "mean", hidden);
  std::vector<double> action(static_cast<std::size_t>(spec.action_dim));
  if (deterministic) {
    for (int j = 0; j < spec.action_dim; ++j) {
      // stay in f32 so results match the tape forward bit for bit
      const float bf = static_cast<float>(bounds[static_cast<std::size_t>(j)]);
      action[static_cast<std::size_t>(j)] = std::tanh(mean[static_cast<std::size_t>(j)]) * bf;
    }
    return action;
  }
  if (rng == nullptr) throw std::invalid_argument("stochastic inference requires an rng");
  std::vector<float> log_std = fc_infer(params, "logstd", hidden);
  for (int j = 0; j < spec.action_dim; ++j) {
    float ls = log_std[static_cast<std::size_t>(j)];
    ls = ls < kLogStdMin ? kLogStdMin : (ls > kLogStdMax ? kLogStdMax : ls);
    const float z = static_cast<float>(rng->normal());
    const float u = mean[static_cast<std::size_t>(j)] + std::exp(ls) * z;
    const float bf = static_cast<float>(bounds[static_cast<std::size_t>(j)]);
    action[static_cast<std::size_t>(j)] = std::tanh(u) * bf;
  }
  return action;
}

}  // namespace

std::vector<double> infer_action_state(const NetworkSpec& spec, const ParamSet& params,
                                       const std::vector<double>& state,
                                       const std::vector<double>& bounds, bool deterministic,
                                       Rng* rng) {
  std::vector<float> h(state.size());
  for (std::size_t i = 0; i < state.size(); ++i) h[i] = static_cast<float>(state[i]);
  h = fc_infer(params, "fc1", h);
  apply_activation_inplace(spec, h);
  h = fc_infer(params, "fc2", h);
  apply_activation_inplace(spec, h);
  return heads_to_action(spec, params, h, bounds, deterministic, rng);
}

std::vector<double> infer_action_visual(const NetworkSpec& spec, const ParamSet& params,
                                        const std::vector<float>& image,
                                        const std::vector<double>& joint_features,
                                        const std::vector<double>& bounds, bool deterministic,
                                        Rng* rng) {
  const int s0 = spec.image_size;
  const int s1 = (s0 + 2 * spec.conv_pad - spec.conv_ksize) / spec.conv_stride + 1;
  const int s2 = (s1 + 2 * spec.conv_pad - spec.conv_ksize) / spec.conv_stride + 1;
  std::vector<float> h = conv_infer(spec, params, "conv1", image, s0, spec.image_channels,
                                    spec.conv_channels[0]);
  apply_activation_inplace(spec, h);
  h = conv_infer(spec, params, "conv2", h, s1, spec.conv_channels[0], spec.conv_channels[1]);
  apply_activation_inplace(spec, h);
  h = conv_infer(spec, params, "conv3", h, s2, spec.conv_channels[1], spec.conv_channels[2]);
  apply_activation_inplace(spec, h);
  h.reserve(h.size() + joint_features.size());
  for (double jf : joint_features) h.push_back(static_cast<float>(jf));
  h = fc_infer(params, "fc1", h);
  apply_activation_inplace(spec, h);
  h = fc_infer(params, "fc2", h);
  apply_activation_inplace(spec, h);
  h = fc_infer(params, "fc3", h);
  apply_activation_inplace(spec, h);
  return heads_to_action(spec, params, h, bounds, deterministic, rng);
}

}  // namespace mopa
