#include "mopa/tape.h"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace mopa {

int Tape::push(Tensor value, bool needs_grad) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

void Tape::set_back(int id, std::function<void(Tape&)> fn) {
  nodes_[static_cast<std::size_t>(id)].back = std::move(fn);
}

int Tape::leaf(const Tensor* external, bool needs_grad) {
  Node n;
  n.external = external;
  n.needs_grad = needs_grad;
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

int Tape::constant(Tensor v) { return push(std::move(v), false); }

const Tensor& Tape::val(int id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  return n.external ? *n.external : n.value;
}

Tensor& Tape::grad(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.data.empty()) n.grad = Tensor::zeros(val(id).shape);
  return n.grad;
}

bool Tape::has_grad(int id) const { return !nodes_[static_cast<std::size_t>(id)].grad.data.empty(); }

bool Tape::wants_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }

Tensor Tape::grad_or_zeros(int id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.data.empty()) return Tensor::zeros(val(id).shape);
  return n.grad;
}

// ----- layers ----- //

int Tape::linear(int x, int w, int b) {
  const Tensor& xv = val(x);
  const Tensor& wv = val(w);
  const Tensor& bv = val(b);
  if (xv.rank() != 2 || wv.rank() != 2 || xv.dim(1) != wv.dim(0))
    throw std::invalid_argument("linear: shape mismatch " + xv.shape_str() + " x " + wv.shape_str());
  const int batch = xv.dim(0), in = xv.dim(1), out = wv.dim(1);
  if (bv.numel() != out) throw std::invalid_argument("linear: bias shape mismatch");

  Tensor y = Tensor::zeros({batch, out});
  addmm_nn(y.ptr(), xv.ptr(), wv.ptr(), batch, in, out);
  for (int i = 0; i < batch; ++i)
    for (int j = 0; j < out; ++j) y.data[static_cast<std::size_t>(i) * out + j] += bv.data[j];

  const bool ng = wants_grad(x) || wants_grad(w) || wants_grad(b);
  int id = push(std::move(y), ng);
  if (!ng) return id;
  set_back(id, [id, x, w, b, batch, in, out](Tape& t) {
    const Tensor& dy = t.grad(id);
    if (t.wants_grad(w)) addmm_tn(t.grad(w).ptr(), t.val(x).ptr(), dy.ptr(), in, batch, out);
    if (t.wants_grad(b)) {
      Tensor& db = t.grad(b);
      for (int i = 0; i < batch; ++i)
        for (int j = 0; j < out; ++j) db.data[j] += dy.data[static_cast<std::size_t>(i) * out + j];
    }
    if (t.wants_grad(x)) {
      Tensor wt = Tensor::zeros({out, in});
      transpose(t.val(w).ptr(), wt.ptr(), in, out);
      addmm_nn(t.grad(x).ptr(), dy.ptr(), wt.ptr(), batch, out, in);
    }
  });
  return id;
}

int Tape::conv2d(int x, int w, int b, int height, int width, int channels, int out_channels,
                 int ksize, int stride, int pad) {
  const Tensor& xv = val(x);
  const Tensor& wv = val(w);
  const int batch = xv.dim(0);
  const int ckk = channels * ksize * ksize;
  if (xv.dim(1) != channels * height * width)
    throw std::invalid_argument("conv2d: input shape mismatch");
  if (wv.dim(0) != out_channels || wv.dim(1) != ckk)
    throw std::invalid_argument("conv2d: weight shape mismatch");
  const int oh = (height + 2 * pad - ksize) / stride + 1;
  const int ow = (width + 2 * pad - ksize) / stride + 1;
  const int ohow = oh * ow;
  const int bhw = batch * ohow;

  // transposed columns [CKK, B*OH*OW]: keeps the long axis innermost so every
  // GEMM below runs over contiguous, register-friendly rows. Cached for
  // backward.
  Tensor cols_t = Tensor::zeros({ckk, bhw});
  im2col_t(xv.ptr(), batch, xv.dim(1), channels, height, width, ksize, stride, pad, oh, ow,
           cols_t.ptr());

  // Y^T [OC, B*OH*OW] = W [OC, CKK] * cols_t
  std::vector<float> yt(static_cast<std::size_t>(out_channels) * bhw, 0.0f);
  addmm_nn(yt.data(), wv.ptr(), cols_t.ptr(), out_channels, ckk, bhw);

  const Tensor& bv = val(b);
  Tensor y = Tensor::zeros({batch, out_channels * ohow});
  for (int s = 0; s < batch; ++s) {
    float* ys = y.ptr() + static_cast<std::size_t>(s) * out_channels * ohow;
    for (int oc = 0; oc < out_channels; ++oc) {
      const float* src = yt.data() + static_cast<std::size_t>(oc) * bhw + static_cast<std::size_t>(s) * ohow;
      const float bias = bv.data[oc];
      float* dst = ys + static_cast<std::size_t>(oc) * ohow;
      for (int r = 0; r < ohow; ++r) dst[r] = src[r] + bias;
    }
  }

  const bool ng = wants_grad(x) || wants_grad(w) || wants_grad(b);
  int id = push(std::move(y), ng);
  if (!ng) return id;
  set_back(id, [id, x, w, b, batch, channels, height, width, ksize, stride, pad, oh, ow, ohow, bhw,
                ckk, out_channels, cols_t = std::move(cols_t)](Tape& t) {
    const Tensor& dy = t.grad(id);
    const Tensor& wv = t.val(w);

    // gather dY^T [OC, B*OH*OW] from the per-sample [OC, OHOW] layout
    std::vector<float> dyt(static_cast<std::size_t>(out_channels) * bhw);
    for (int s = 0; s < batch; ++s) {
      const float* dys = dy.ptr() + static_cast<std::size_t>(s) * out_channels * ohow;
      for (int oc = 0; oc < out_channels; ++oc) {
        const float* src = dys + static_cast<std::size_t>(oc) * ohow;
        float* dst = dyt.data() + static_cast<std::size_t>(oc) * bhw + static_cast<std::size_t>(s) * ohow;
        for (int r = 0; r < ohow; ++r) dst[r] = src[r];
      }
    }

    if (t.wants_grad(b)) {
      Tensor& db = t.grad(b);
      for (int oc = 0; oc < out_channels; ++oc)
        db.data[oc] += static_cast<float>(
            dsum({dyt.data() + static_cast<std::size_t>(oc) * bhw, static_cast<std::size_t>(bhw)}));
    }
    if (t.wants_grad(w))
      addmm_nt(t.grad(w).ptr(), dyt.data(), cols_t.ptr(), out_channels, bhw, ckk);
    if (t.wants_grad(x)) {
      Tensor wt = Tensor::zeros({ckk, out_channels});
      transpose(wv.ptr(), wt.ptr(), out_channels, ckk);
      std::vector<float> dcols_t(static_cast<std::size_t>(ckk) * bhw, 0.0f);
      addmm_nn(dcols_t.data(), wt.ptr(), dyt.data(), ckk, out_channels, bhw);
      Tensor& dx = t.grad(x);
      col2im_t_add(dcols_t.data(), batch, dx.dim(1), channels, height, width, ksize, stride, pad,
                   oh, ow, dx.ptr());
    }
  });
  return id;
}

// ----- elementwise ----- //

int Tape::relu(int x) {
  const Tensor& xv = val(x);
  Tensor y = xv;
  for (float& v : y.data) v = v > 0.0f ? v : 0.0f;
  const bool ng = wants_grad(x);
  int id = push(std::move(y), ng);
  if (!ng) return id;
  set_back(id, [id, x](Tape& t) {
    const Tensor& dy = t.grad(id);
    const Tensor& xv = t.val(x);
    Tensor& dx = t.grad(x);
    for (std::size_t i = 0; i < dx.data.size(); ++i)
      if (xv.data[i] > 0.0f) dx.data[i] += dy.data[i];
  });
  return id;
}

int Tape::leaky_relu(int x, float slope) {
  const Tensor& xv = val(x);
  Tensor y = xv;
  for (float& v : y.data) v = v > 0.0f ? v : slope * v;
  const bool ng = wants_grad(x);
  int id = push(std::move(y), ng);
  if (!ng) return id;
  set_back(id, [id, x, slope](Tape& t) {
    const Tensor& dy = t.grad(id);
    const Tensor& xv = t.val(x);
    Tensor& dx = t.grad(x);
    for (std::size_t i = 0; i < dx.data.size(); ++i)
      dx.data[i] += (xv.data[i] > 0.0f ? 1.0f : slope) * dy.data[i];
  });
  return id;
}

int Tape::tanh_op(int x) {
  const Tensor& xv = val(x);
  Tensor y = xv;
  for (float& v : y.data) v = std::tanh(v);
  const bool ng = wants_grad(x);
  int id = push(std::move(y), ng);
  if (!ng) return id;
  set_back(id, [id, x](Tape& t) {
    const Tensor& dy = t.grad(id);
    const Tensor& yv = t.val(id);
    Tensor& dx = t.grad(x);
    for (std::size_t i = 0; i < dx.data.size(); ++i)
      dx.data[i] += (1.0f - yv.data[i] * yv.data[i]) * dy.data[i];
  });
  return id;
}

int Tape::softplus(int x) {
  const Tensor& xv = val(x);
  Tensor y = xv;
  for (float& v : y.data) v = (v > 0.0f ? v : 0.0f) + std::log1p(std::exp(-std::fabs(v)));
  const bool ng = wants_grad(x);
  int id = push(std::move(y), ng);
  if (!ng) return id;
  set_back(id, [id, x](Tape& t) {
    const Tensor& dy = t.grad(id);
    const Tensor& xv = t.val(x);
    Tensor& dx = t.grad(x);
    for (std::size_t i = 0; i < dx.data.size(); ++i) {
      const float s = 1.0f / (1.0f + std::exp(-xv.data[i]));
      dx.data[i] += s * dy.data[i];
    }
  });
  return id;
}

int Tape::exp_op(int x) {
  const Tensor& xv = val(x);
  Tensor y = xv;
  for (float& v : y.data) v = std::exp(v);
  const bool ng = wants_grad(x);
  int id = push(std::move(y), ng);
  if (!ng) return id;
  set_back(id, [id, x](Tape& t) {
    const Tensor& dy = t.grad(id);
    const Tensor& yv = t.val(id);
    Tensor& dx = t.grad(x);
    for (std::size_t i = 0; i < dx.data.size(); ++i) dx.data[i] += yv.data[i] * dy.data[i];
  });
  return id;
}

int Tape::clamp(int x, float lo, float hi) {
  const Tensor& xv = val(x);
  Tensor y = xv;
  for (float& v : y.data) v = v < lo ? lo : (v > hi ? hi : v);
  const bool ng = wants_grad(x);
  int id = push(std::move(y), ng);
  if (!ng) return id;
  set_back(id, [id, x, lo, hi](Tape& t) {
    const Tensor& dy = t.grad(id);
    const Tensor& xv = t.val(x);
    Tensor& dx = t.grad(x);
    for (std::size_t i = 0; i < dx.data.size(); ++i)
      if (xv.data[i] > lo && xv.data[i] < hi) dx.data[i] += dy.data[i];
  });
  return id;
}

namespace {

void accumulate(Tensor& dst, const Tensor& src, float scale) {
  for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += scale * src.data[i];
}

}  // namespace

int Tape::add(int a, int b) {
  const Tensor& av = val(a);
  const Tensor& bv = val(b);
  if (!av.same_shape(bv)) throw std::invalid_argument("add: shape mismatch");
  Tensor y = av;
  for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] += bv.data[i];
  const bool ng = wants_grad(a) || wants_grad(b);
  int id = push(std::move(y), ng);
  if (!ng) return id;
  set_back(id, [id, a, b](Tape& t) {
    const Tensor& dy = t.grad(id);
    if (t.wants_grad(a)) accumulate(t.grad(a), dy, 1.0f);
    if (t.wants_grad(b)) accumulate(t.grad(b), dy, 1.0f);
  });
  return id;
}

int Tape::sub(int a, int b) {
  const Tensor& av = val(a);
  const Tensor& bv = val(b);
  if (!av.same_shape(bv)) throw std::invalid_argument("sub: shape mismatch");
  Tensor y = av;
  for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] -= bv.data[i];
  const bool ng = wants_grad(a) || wants_grad(b);
  int id = push(std::move(y), ng);
  if (!ng) return id;
  set_back(id, [id, a, b](Tape& t) {
    const Tensor& dy = t.grad(id);
    if (t.wants_grad(a)) accumulate(t.grad(a), dy, 1.0f);
    if (t.wants_grad(b)) accumulate(t.grad(b), dy, -1.0f);
  });
  return id;
}

int Tape::mul(int a, int b) {
  const Tensor& av = val(a);
  const Tensor& bv = val(b);
  if (!av.same_shape(bv)) throw std::invalid_argument("mul: shape mismatch");
  Tensor y = av;
  for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] *= bv.data[i];
  const bool ng = wants_grad(a) || wants_grad(b);
  int id = push(std::move(y), ng);
  if (!ng) return id;
  set_back(id, [id, a, b](Tape& t) {
    const Tensor& dy = t.grad(id);
    const Tensor& av = t.val(a);
    const Tensor& bv = t.val(b);
    if (t.wants_grad(a)) {
      Tensor& da = t.grad(a);
      for (std::size_t i = 0; i < dy.data.size(); ++i) da.data[i] += bv.data[i] * dy.data[i];
    }
    if (t.wants_grad(b)) {
      Tensor& db = t.grad(b);
      for (std::size_t i = 0; i < dy.data.size(); ++i) db.data[i] += av.data[i] * dy.data[i];
    }
  });
  return id;
}

int Tape::scale(int x, float s) {
  Tensor y = val(x);
  for (float& v : y.data) v *= s;
  const bool ng = wants_grad(x);
  int id = push(std::move(y), ng);
  if (!ng) return id;
  set_back(id, [id, x, s](Tape& t) { accumulate(t.grad(x), t.grad(id), s); });
  return id;
}

int Tape::add_scalar(int x, float s) {
  Tensor y = val(x);
  for (float& v : y.data) v += s;
  const bool ng = wants_grad(x);
  int id = push(std::move(y), ng);
  if (!ng) return id;
  set_back(id, [id, x](Tape& t) { accumulate(t.grad(x), t.grad(id), 1.0f); });
  return id;
}

int Tape::min_elem(int a, int b) {
  const Tensor& av = val(a);
  const Tensor& bv = val(b);
  if (!av.same_shape(bv)) throw std::invalid_argument("min_elem: shape mismatch");
  Tensor y = av;
  for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] = std::min(av.data[i], bv.data[i]);
  const bool ng = wants_grad(a) || wants_grad(b);
  int id = push(std::move(y), ng);
  if (!ng) return id;
  set_back(id, [id, a, b](Tape& t) {
    const Tensor& dy = t.grad(id);
    const Tensor& av = t.val(a);
    const Tensor& bv = t.val(b);
    const bool ga = t.wants_grad(a), gb = t.wants_grad(b);
    for (std::size_t i = 0; i < dy.data.size(); ++i) {
      if (av.data[i] <= bv.data[i]) {
        if (ga) t.grad(a).data[i] += dy.data[i];
      } else {
        if (gb) t.grad(b).data[i] += dy.data[i];
      }
    }
  });
  return id;
}

// ----- shape / reductions ----- //

int Tape::concat_cols(int a, int b) {
  const Tensor& av = val(a);
  const Tensor& bv = val(b);
  if (av.dim(0) != bv.dim(0)) throw std::invalid_argument("concat_cols: batch mismatch");
  const int batch = av.dim(0), fa = av.dim(1), fb = bv.dim(1);
  Tensor y = Tensor::zeros({batch, fa + fb});
  for (int i = 0; i < batch; ++i) {
    float* row = y.ptr() + static_cast<std::size_t>(i) * (fa + fb);
    const float* ra = av.ptr() + static_cast<std::size_t>(i) * fa;
    const float* rb = bv.ptr() + static_cast<std::size_t>(i) * fb;
    std::copy(ra, ra + fa, row);
    std::copy(rb, rb + fb, row + fa);
  }
  const bool ng = wants_grad(a) || wants_grad(b);
  int id = push(std::move(y), ng);
  if (!ng) return id;
  set_back(id, [id, a, b, batch, fa, fb](Tape& t) {
    const Tensor& dy = t.grad(id);
    const bool ga = t.wants_grad(a), gb = t.wants_grad(b);
    for (int i = 0; i < batch; ++i) {
      const float* row = dy.ptr() + static_cast<std::size_t>(i) * (fa + fb);
      if (ga) {
        Tensor& da = t.grad(a);
        for (int j = 0; j < fa; ++j) da.data[static_cast<std::size_t>(i) * fa + j] += row[j];
      }
      if (gb) {
        Tensor& db = t.grad(b);
        for (int j = 0; j < fb; ++j) db.data[static_cast<std::size_t>(i) * fb + j] += row[fa + j];
      }
    }
  });
  return id;
}

int Tape::row_sum(int x) {
  const Tensor& xv = val(x);
  const int batch = xv.dim(0), f = xv.dim(1);
  Tensor y = Tensor::zeros({batch, 1});
  for (int i = 0; i < batch; ++i) {
    double s = 0.0;
    for (int j = 0; j < f; ++j) s += xv.data[static_cast<std::size_t>(i) * f + j];
    y.data[static_cast<std::size_t>(i)] = static_cast<float>(s);
  }
  const bool ng = wants_grad(x);
  int id = push(std::move(y), ng);
  if (!ng) return id;
  set_back(id, [id, x, batch, f](Tape& t) {
    const Tensor& dy = t.grad(id);
    Tensor& dx = t.grad(x);
    for (int i = 0; i < batch; ++i)
      for (int j = 0; j < f; ++j) dx.data[static_cast<std::size_t>(i) * f + j] += dy.data[i];
  });
  return id;
}

int Tape::mean_all(int x) {
  const Tensor& xv = val(x);
  const double n = static_cast<double>(xv.numel());
  Tensor y = Tensor::zeros({1, 1});
  y.data[0] = static_cast<float>(dsum({xv.data.data(), xv.data.size()}) / n);
  const bool ng = wants_grad(x);
  int id = push(std::move(y), ng);
  if (!ng) return id;
  set_back(id, [id, x, n](Tape& t) {
    const float g = t.grad(id).data[0] / static_cast<float>(n);
    Tensor& dx = t.grad(x);
    for (float& v : dx.data) v += g;
  });
  return id;
}

int Tape::mse(int pred, int target) {
  const Tensor& pv = val(pred);
  const Tensor& tv = val(target);
  if (!pv.same_shape(tv)) throw std::invalid_argument("mse: shape mismatch");
  const double n = static_cast<double>(pv.numel());
  double acc = 0.0;
  for (std::size_t i = 0; i < pv.data.size(); ++i) {
    const double d = static_cast<double>(pv.data[i]) - static_cast<double>(tv.data[i]);
    acc += d * d;
  }
  Tensor y = Tensor::zeros({1, 1});
  y.data[0] = static_cast<float>(acc / n);
  const bool ng = wants_grad(pred) || wants_grad(target);
  int id = push(std::move(y), ng);
  if (!ng) return id;
  set_back(id, [id, pred, target, n](Tape& t) {
    const float g = t.grad(id).data[0];
    const Tensor& pv = t.val(pred);
    const Tensor& tv = t.val(target);
    const float c = 2.0f * g / static_cast<float>(n);
    if (t.wants_grad(pred)) {
      Tensor& dp = t.grad(pred);
      for (std::size_t i = 0; i < dp.data.size(); ++i)
        dp.data[i] += c * (pv.data[i] - tv.data[i]);
    }
    if (t.wants_grad(target)) {
      Tensor& dt = t.grad(target);
      for (std::size_t i = 0; i < dt.data.size(); ++i)
        dt.data[i] -= c * (pv.data[i] - tv.data[i]);
    }
  });
  return id;
}

void Tape::backward(int loss_id) {
  if (val(loss_id).numel() != 1) throw std::invalid_argument("backward: loss must be scalar");
  grad(loss_id).data[0] = 1.0f;
  for (int i = loss_id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.back || n.grad.data.empty()) continue;
    n.back(*this);
  }
}

}  // namespace mopa
