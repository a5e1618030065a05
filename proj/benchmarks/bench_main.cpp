// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "ipesr/data.hpp"
#include "ipesr/encoding.hpp"
#include "ipesr/metrics.hpp"
#include "ipesr/model.hpp"
#include "ipesr/training.hpp"

namespace {

using namespace ipesr;

void BM_Encode(benchmark::State& state) {
  EncodingConfig cfg;
  cfg.variant = static_cast<EncodingVariant>(state.range(0));
  cfg.bandwidth = static_cast<int>(state.range(1));
  std::vector<double> out(static_cast<std::size_t>(cfg.dimension()));
  double x = 0.1;
  for (auto _ : state) {
    encode_into(cfg, {x, -0.3}, {0.01, 0.02}, out);
    benchmark::DoNotOptimize(out.data());
    x = -x;
  }
  state.SetLabel(std::string(to_string(cfg.variant)));
}
BENCHMARK(BM_Encode)
    ->Args({static_cast<int>(EncodingVariant::kIpe), 10})
    ->Args({static_cast<int>(EncodingVariant::kPlainPe), 10})
    ->Args({static_cast<int>(EncodingVariant::kIpe), 16});

ModelBundle desk_bundle(ModelVariant v) {
  DecoderConfig d;
  d.hidden_width = 64;
  return ModelBundle::create(v, EncoderConfig{2, 16, 3}, d, 0);
}

void BM_RenderLiif(benchmark::State& state) {
  const auto b = desk_bundle(ModelVariant::kLiif);
  const Image lr = make_toy_image(0, 0, 32);
  const auto frame = scaled_frame(lr.frame(), static_cast<double>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(render(b, lr, frame));
  state.SetItemsProcessed(state.iterations() * frame.size());
}
BENCHMARK(BM_RenderLiif)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_RenderMeta(benchmark::State& state) {
  const auto b = desk_bundle(ModelVariant::kMetaSr);
  const Image lr = make_toy_image(0, 0, 32);
  for (auto _ : state) benchmark::DoNotOptimize(meta_render(b, lr, 4.0));
  state.SetItemsProcessed(state.iterations() * 128 * 128);
}
BENCHMARK(BM_RenderMeta)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  const auto b = desk_bundle(ModelVariant::kLiif);
  auto grad = b.zeros_like();
  const auto ds = Dataset::from_images({make_toy_image(0, 0, 128)}, "train");
  SampleSpec spec;
  spec.lr_patch = 32;
  spec.pixels_per_patch = 256;
  const auto batch = sample_batch(ds, spec, 0, 0, 8);
  for (auto _ : state) benchmark::DoNotOptimize(batch_loss_and_grad(b, batch, grad));
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

void BM_BicubicResize(benchmark::State& state) {
  const Image hr = make_toy_image(0, 1, 128);
  for (auto _ : state) benchmark::DoNotOptimize(bicubic_resize(hr, 43, 43));
}
BENCHMARK(BM_BicubicResize)->Unit(benchmark::kMicrosecond);

void BM_Ssim(benchmark::State& state) {
  const Image a = make_toy_image(0, 2, 128), b = make_toy_image(0, 3, 128);
  const EvalProtocol p;
  for (auto _ : state) benchmark::DoNotOptimize(ssim(a, b, p));
}
BENCHMARK(BM_Ssim)->Unit(benchmark::kMicrosecond);

}  // namespace

// The packaged benchmark_main archive carries LTO bytecode from another gcc.
BENCHMARK_MAIN();
