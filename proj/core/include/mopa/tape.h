#pragma once

#include <functional>
#include <vector>

#include "mopa/tensor.h"

namespace mopa {

// Reverse-mode autodiff over a flat operation tape. Node ids are indices into
// the tape; ops return the id of their output. Activations are [B, F] rows;
// images are stored as [B, C*H*W] with per-sample CHW layout.
//
// The tape is rebuilt for every optimization step. Backward walks the tape in
// reverse creation order, which is a valid topological order by construction.
class Tape {
 public:
  // Leaf referencing external storage (parameters, batch inputs). The tensor
  // must outlive the tape. Gradients accumulate on the tape node. Inputs that
  // never need gradients (batch images, state batches) should pass
  // needs_grad = false so backward skips their gradient paths.
  int leaf(const Tensor* external, bool needs_grad = true);
  // Constant owned by the tape (targets, noise draws, broadcast tiles);
  // never differentiated.
  int constant(Tensor v);

  const Tensor& val(int id) const;
  Tensor& grad(int id);               // zero-allocated on first access
  bool has_grad(int id) const;        // false -> gradient is identically zero
  bool wants_grad(int id) const;
  Tensor grad_or_zeros(int id) const;

  // ----- layers ----- //
  int linear(int x, int w, int b);    // x[B,in] * W[in,out] + b[out]
  // x[B, C*H*W] -> [B, OC*OH*OW]; weight [OC, C*K*K], bias [OC]
  int conv2d(int x, int w, int b, int height, int width, int channels, int out_channels, int ksize,
             int stride, int pad);

  // ----- elementwise ----- //
  int relu(int x);
  int leaky_relu(int x, float slope);
  int tanh_op(int x);
  int softplus(int x);
  int exp_op(int x);
  int clamp(int x, float lo, float hi);
  int add(int a, int b);
  int sub(int a, int b);
  int mul(int a, int b);
  int scale(int x, float s);
  int add_scalar(int x, float s);
  int min_elem(int a, int b);         // subgradient follows the argmin (ties -> a)

  // ----- shape / reductions ----- //
  int concat_cols(int a, int b);      // [B,F1] + [B,F2] -> [B,F1+F2]
  int row_sum(int x);                 // [B,F] -> [B,1]
  int mean_all(int x);                // -> [1,1]
  int mse(int pred, int target);      // mean((pred-target)^2) -> [1,1]

  // Seeds d(loss)/d(loss) = 1 and propagates to every reachable node.
  // Throws if the loss is not scalar.
  void backward(int loss_id);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    const Tensor* external = nullptr;
    Tensor grad;
    bool needs_grad = false;
    std::function<void(Tape&)> back;
  };
  std::vector<Node> nodes_;

  int push(Tensor value, bool needs_grad);
  void set_back(int id, std::function<void(Tape&)> fn);
};

}  // namespace mopa
