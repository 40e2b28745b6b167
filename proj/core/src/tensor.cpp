#include "mopa/tensor.h"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace mopa {

static std::int64_t shape_numel(const std::vector<int>& shape) {
  std::int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

Tensor Tensor::zeros(std::vector<int> shape) {
  Tensor t;
  t.shape = std::move(shape);
  t.data.assign(static_cast<std::size_t>(shape_numel(t.shape)), 0.0f);
  return t;
}

Tensor Tensor::full(std::vector<int> shape, float value) {
  Tensor t;
  t.shape = std::move(shape);
  t.data.assign(static_cast<std::size_t>(shape_numel(t.shape)), value);
  return t;
}

Tensor Tensor::from(std::vector<int> shape, std::vector<float> values) {
  if (shape_numel(shape) != static_cast<std::int64_t>(values.size()))
    throw std::invalid_argument("Tensor::from: shape/data size mismatch");
  Tensor t;
  t.shape = std::move(shape);
  t.data = std::move(values);
  return t;
}

std::int64_t Tensor::numel() const { return shape_numel(shape); }

bool Tensor::all_finite() const {
  for (float v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << "]";
  return os.str();
}

void addmm_nn(float* c, const float* a, const float* b, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    float* crow = c + static_cast<std::size_t>(i) * n;
    const float* arow = a + static_cast<std::size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const float av = arow[p];
      if (av == 0.0f) continue;
      const float* brow = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void addmm_tn(float* c, const float* a, const float* b, int m, int k, int n) {
  for (int p = 0; p < k; ++p) {
    const float* arow = a + static_cast<std::size_t>(p) * m;
    const float* brow = b + static_cast<std::size_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      const float av = arow[i];
      if (av == 0.0f) continue;
      float* crow = c + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void addmm_nt(float* c, const float* a, const float* b, int m, int k, int n) {
  constexpr int kLanes = 16;
  const int kblocks = k / kLanes;
  for (int i = 0; i < m; ++i) {
    const float* arow = a + static_cast<std::size_t>(i) * k;
    float* crow = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const float* brow = b + static_cast<std::size_t>(j) * k;
      float acc[kLanes] = {};
      for (int blk = 0; blk < kblocks; ++blk) {
        const float* ap = arow + blk * kLanes;
        const float* bp = brow + blk * kLanes;
        for (int l = 0; l < kLanes; ++l) acc[l] += ap[l] * bp[l];
      }
      float tail = 0.0f;
      for (int p = kblocks * kLanes; p < k; ++p) tail += arow[p] * brow[p];
      float sum = tail;
      for (int l = 0; l < kLanes; ++l) sum += acc[l];
      crow[j] += sum;
    }
  }
}

void transpose(const float* in, float* out, int rows, int cols) {
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      out[static_cast<std::size_t>(c) * rows + r] = in[static_cast<std::size_t>(r) * cols + c];
}

void axpy(std::span<float> y, std::span<const float> x, float alpha) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
}

double dsum(std::span<const float> x) {
  double s = 0.0;
  for (float v : x) s += v;
  return s;
}

void im2col(const float* x, int c_in, int h, int w, int k, int stride, int pad, int oh, int ow,
            float* cols) {
  int row = 0;
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox, ++row) {
      float* dst = cols + static_cast<std::size_t>(row) * (c_in * k * k);
      int col = 0;
      for (int c = 0; c < c_in; ++c) {
        const float* plane = x + static_cast<std::size_t>(c) * h * w;
        for (int ky = 0; ky < k; ++ky) {
          const int iy = oy * stride - pad + ky;
          for (int kx = 0; kx < k; ++kx, ++col) {
            const int ix = ox * stride - pad + kx;
            dst[col] = (iy >= 0 && iy < h && ix >= 0 && ix < w)
                           ? plane[static_cast<std::size_t>(iy) * w + ix]
                           : 0.0f;
          }
        }
      }
    }
  }
}

void col2im_add(const float* cols, int c_in, int h, int w, int k, int stride, int pad, int oh,
                int ow, float* dx) {
  int row = 0;
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox, ++row) {
      const float* src = cols + static_cast<std::size_t>(row) * (c_in * k * k);
      int col = 0;
      for (int c = 0; c < c_in; ++c) {
        float* plane = dx + static_cast<std::size_t>(c) * h * w;
        for (int ky = 0; ky < k; ++ky) {
          const int iy = oy * stride - pad + ky;
          for (int kx = 0; kx < k; ++kx, ++col) {
            const int ix = ox * stride - pad + kx;
            if (iy >= 0 && iy < h && ix >= 0 && ix < w)
              plane[static_cast<std::size_t>(iy) * w + ix] += src[col];
          }
        }
      }
    }
  }
}

void im2col_t(const float* x, int batch, int sample_stride, int c_in, int h, int w, int k,
              int stride, int pad, int oh, int ow, float* cols_t) {
  const std::size_t bhw = static_cast<std::size_t>(batch) * oh * ow;
  int row = 0;
  for (int c = 0; c < c_in; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx, ++row) {
        float* dst = cols_t + static_cast<std::size_t>(row) * bhw;
        // valid output columns for this kernel offset
        int ox_lo = 0;
        while (ox_lo < ow && ox_lo * stride - pad + kx < 0) ++ox_lo;
        int ox_hi = ow - 1;
        while (ox_hi >= 0 && ox_hi * stride - pad + kx >= w) --ox_hi;
        for (int s = 0; s < batch; ++s) {
          const float* plane = x + static_cast<std::size_t>(s) * sample_stride +
                               static_cast<std::size_t>(c) * h * w;
          float* out = dst + static_cast<std::size_t>(s) * oh * ow;
          for (int oy = 0; oy < oh; ++oy, out += ow) {
            const int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= h) {
              for (int ox = 0; ox < ow; ++ox) out[ox] = 0.0f;
              continue;
            }
            const float* src = plane + static_cast<std::size_t>(iy) * w;
            for (int ox = 0; ox < ox_lo; ++ox) out[ox] = 0.0f;
            for (int ox = ox_lo; ox <= ox_hi; ++ox) out[ox] = src[ox * stride - pad + kx];
            for (int ox = ox_hi + 1; ox < ow; ++ox) out[ox] = 0.0f;
          }
        }
      }
    }
  }
}

void col2im_t_add(const float* cols_t, int batch, int sample_stride, int c_in, int h, int w, int k,
                  int stride, int pad, int oh, int ow, float* dx) {
  const std::size_t bhw = static_cast<std::size_t>(batch) * oh * ow;
  int row = 0;
  for (int c = 0; c < c_in; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx, ++row) {
        const float* src_row = cols_t + static_cast<std::size_t>(row) * bhw;
        int ox_lo = 0;
        while (ox_lo < ow && ox_lo * stride - pad + kx < 0) ++ox_lo;
        int ox_hi = ow - 1;
        while (ox_hi >= 0 && ox_hi * stride - pad + kx >= w) --ox_hi;
        for (int s = 0; s < batch; ++s) {
          float* plane = dx + static_cast<std::size_t>(s) * sample_stride +
                         static_cast<std::size_t>(c) * h * w;
          const float* in = src_row + static_cast<std::size_t>(s) * oh * ow;
          for (int oy = 0; oy < oh; ++oy, in += ow) {
            const int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= h) continue;
            float* dst = plane + static_cast<std::size_t>(iy) * w;
            for (int ox = ox_lo; ox <= ox_hi; ++ox) dst[ox * stride - pad + kx] += in[ox];
          }
        }
      }
    }
  }
}

}  // namespace mopa
