#pragma once

#include <vector>

#include "mopa/params.h"
#include "mopa/rng.h"
#include "mopa/tape.h"

namespace mopa {

enum class Activation { Relu, LeakyRelu };

// The two network shapes used throughout: a plain 3-layer MLP over state
// vectors (actor trunk or critic) and a 3-conv + 3-FC visual actor whose
// convolution output is concatenated with the joint features.
struct NetworkSpec {
  enum class Kind { StateMlp, VisualActor };
  Kind kind = Kind::StateMlp;

  int input_dim = 0;    // StateMlp input width
  int output_dim = 0;   // plain-output width (critics; ignored when action_dim > 0)
  int hidden = 256;
  Activation activation = Activation::Relu;

  // action_dim > 0 selects Gaussian mean / log-std heads instead of a plain
  // output layer
  int action_dim = 0;

  // VisualActor fields
  int image_size = 0;
  int image_channels = 3;
  int conv_channels[3] = {16, 32, 64};
  int conv_ksize = 3;
  int conv_stride = 2;
  int conv_pad = 1;
  int joint_feature_dim = 0;

  int conv_out_spatial() const;  // spatial side after the three conv layers
  int conv_flat_dim() const;     // conv_channels[2] * spatial^2
  int image_dim() const { return image_channels * image_size * image_size; }

  static NetworkSpec state_mlp(int input_dim, int output_dim);
  static NetworkSpec state_actor(int input_dim, int action_dim);
  static NetworkSpec visual_actor(int image_size, int joint_feature_dim, int action_dim);
};

// fan-in scaled uniform init for every layer
ParamSet init_params(const NetworkSpec& spec, Rng& rng);

// Leaf bindings of a ParamSet on a tape, so gradients can be read back by
// parameter name after backward().
struct BoundParams {
  std::vector<std::pair<std::string, int>> ids;
  int at(const std::string& name) const;
};
// needs_grad = false freezes the parameters (forward only), e.g. critics
// inside the actor objective
BoundParams bind_params(Tape& tape, const ParamSet& params, bool needs_grad = true);
ParamSet collect_grads(Tape& tape, const BoundParams& bound);

struct ActorHeads {
  int mean = -1;     // tape node, [B, action_dim]
  int log_std = -1;  // tape node (unclamped; sampling clamps)
};

// Plain 3-layer MLP; input node is [B, input_dim]. Returns the output node.
int forward_plain(Tape& tape, const NetworkSpec& spec, const BoundParams& params, int input);

// Actor forward. StateMlp: `primary` is the state batch. VisualActor:
// `primary` is the image batch [B, C*S*S] and `joint_features` is required.
ActorHeads forward_actor(Tape& tape, const NetworkSpec& spec, const BoundParams& params,
                         int primary, int joint_features = -1);

struct GaussianSample {
  int action = -1;    // [B, d], in (-bound, bound) per dimension
  int log_prob = -1;  // [B, 1]
};

// Reparameterized tanh-Gaussian sample. The log-probability includes the
// change-of-variables corrections for both the tanh squash and the bound
// scaling. `noise` is the standard normal draw, constant w.r.t. the graph.
GaussianSample gaussian_tanh_sample(Tape& tape, ActorHeads heads, const Tensor& noise,
                                    const std::vector<double>& bounds);

// Deterministic head: tanh(mean) * bounds.
int deterministic_action(Tape& tape, ActorHeads heads, const std::vector<double>& bounds);

Tensor sample_noise(Rng& rng, int batch, int dim);

// ----- tape-free inference (single sample) ----- //
// Bit-identical to the tape forward on the same inputs.
std::vector<double> infer_action_state(const NetworkSpec& spec, const ParamSet& params,
                                       const std::vector<double>& state,
                                       const std::vector<double>& bounds, bool deterministic,
                                       Rng* rng);
std::vector<double> infer_action_visual(const NetworkSpec& spec, const ParamSet& params,
                                        const std::vector<float>& image,
                                        const std::vector<double>& joint_features,
                                        const std::vector<double>& bounds, bool deterministic,
                                        Rng* rng);

constexpr float kLogStdMin = -20.0f;
constexpr float kLogStdMax = 2.0f;

}  // namespace mopa
