#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mopa {

// Dense row-major f32 tensor. Shapes are small (rank <= 4); data lives in a
// plain vector so copies are deep and moves are cheap.
struct Tensor {
  std::vector<int> shape;
  std::vector<float> data;

  Tensor() = default;

  static Tensor zeros(std::vector<int> shape);
  static Tensor full(std::vector<int> shape, float value);
  static Tensor from(std::vector<int> shape, std::vector<float> values);

  std::int64_t numel() const;
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool all_finite() const;

  float* ptr() { return data.data(); }
  const float* ptr() const { return data.data(); }

  std::string shape_str() const;
};

// ----- kernels ----- //
// All kernels are single-threaded and deterministic. Accumulation order is
// fixed so results are bit-stable across runs.

// C[m,n] += A[m,k] * B[k,n]
void addmm_nn(float* c, const float* a, const float* b, int m, int k, int n);
// C[m,n] += A^T * B with A[k,m], B[k,n]
void addmm_tn(float* c, const float* a, const float* b, int m, int k, int n);
// C[m,n] += A * B^T with A[m,k], B[n,k]; lane-blocked dot products with a
// fixed accumulation order
void addmm_nt(float* c, const float* a, const float* b, int m, int k, int n);
// out[c,r] = in[r,c]
void transpose(const float* in, float* out, int rows, int cols);

// y += alpha * x (same length)
void axpy(std::span<float> y, std::span<const float> x, float alpha);

// sum in double precision (stable loss reductions)
double dsum(std::span<const float> x);

// one sample CHW -> columns [OH*OW, C*K*K] (zero padded)
void im2col(const float* x, int c_in, int h, int w, int k, int stride, int pad, int oh, int ow,
            float* cols);
// scatter-add of column gradients back into a CHW sample
void col2im_add(const float* cols, int c_in, int h, int w, int k, int stride, int pad, int oh,
                int ow, float* dx);

// whole-batch transposed columns: cols_t[C*K*K, B*OH*OW]; row (c,ky,kx) holds
// the patch values for every sample and output position, zero padded
void im2col_t(const float* x, int batch, int sample_stride, int c_in, int h, int w, int k,
              int stride, int pad, int oh, int ow, float* cols_t);
void col2im_t_add(const float* cols_t, int batch, int sample_stride, int c_in, int h, int w, int k,
                  int stride, int pad, int oh, int ow, float* dx);

}  // namespace mopa
