#include <benchmark/benchmark.h>

#include "mopa/nn.h"
#include "mopa/rng.h"
#include "mopa/tensor.h"

namespace {

void BM_addmm_nn(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const int k = static_cast<int>(state.range(1));
  const int n = static_cast<int>(state.range(2));
  mopa::Rng rng(7);
  mopa::Tensor a = mopa::Tensor::zeros({m, k});
  mopa::Tensor b = mopa::Tensor::zeros({k, n});
  for (float& v : a.data) v = static_cast<float>(rng.uniform(-1, 1));
  for (float& v : b.data) v = static_cast<float>(rng.uniform(-1, 1));
  mopa::Tensor c = mopa::Tensor::zeros({m, n});
  for (auto _ : state) {
    std::fill(c.data.begin(), c.data.end(), 0.0f);
    mopa::addmm_nn(c.ptr(), a.ptr(), b.ptr(), m, k, n);
    benchmark::DoNotOptimize(c.data.data());
  }
  state.SetItemsProcessed(state.iterations() * 2ll * m * k * n);
}
BENCHMARK(BM_addmm_nn)->Args({64, 17, 256})->Args({64, 256, 256})->Args({256, 256, 256});

void BM_visual_forward_backward(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  const int image = static_cast<int>(state.range(1));
  mopa::Rng rng(3);
  auto spec = mopa::NetworkSpec::visual_actor(image, 10, 3);
  mopa::ParamSet params = mopa::init_params(spec, rng);
  mopa::Tensor images = mopa::Tensor::zeros({batch, spec.image_dim()});
  mopa::Tensor jf = mopa::Tensor::zeros({batch, 10});
  for (float& v : images.data) v = static_cast<float>(rng.uniform(0, 1));
  for (auto _ : state) {
    mopa::Tape tape;
    auto bound = mopa::bind_params(tape, params);
    const int img = tape.leaf(&images);
    const int jfn = tape.leaf(&jf);
    auto heads = mopa::forward_actor(tape, spec, bound, img, jfn);
    const int a = mopa::deterministic_action(tape, heads, {0.1, 0.1, 0.1});
    const int loss = tape.mse(a, tape.constant(mopa::Tensor::zeros({batch, 3})));
    tape.backward(loss);
    benchmark::DoNotOptimize(tape.grad_or_zeros(bound.at("conv1.w")).data.data());
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_visual_forward_backward)->Args({64, 16})->Args({64, 32})->Args({256, 32});

}  // namespace

BENCHMARK_MAIN();
