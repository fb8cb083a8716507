// Parallel kernels against their serial twins. Run with --benchmark_filter to
// pick a pair; thread count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "cdjp/codebook.hpp"
#include "cdjp/colorspace.hpp"
#include "cdjp/evalkit.hpp"
#include "cdjp/nn_ops.hpp"
#include "cdjp/permutation.hpp"
#include "cdjp/puzzlegen.hpp"
#include "cdjp/rng.hpp"
#include "cdjp/synthetic.hpp"

using namespace cdjp;

namespace {

struct ConvData {
  nn::ConvGeom g{16, 48, 48, 32, 3, 2, 1};
  std::vector<float> in, w, b, out;
  ConvData() {
    Rng rng(1);
    in.resize(static_cast<std::size_t>(g.in_c) * g.in_h * g.in_w);
    w.resize(g.weight_count());
    b.resize(g.out_c);
    for (auto& v : in) v = static_cast<float>(rng.uniform(-1, 1));
    for (auto& v : w) v = static_cast<float>(rng.uniform(-0.1, 0.1));
    out.resize(static_cast<std::size_t>(g.out_c) * g.out_h() * g.out_w());
  }
};

const SyntheticCorpus& corpus() {
  static const SyntheticCorpus c = make_synthetic_corpus(64, 3);
  return c;
}

const std::vector<LabImage>& lab_corpus() {
  static const std::vector<LabImage> labs = [] {
    std::vector<LabImage> out;
    for (const auto& im : corpus().images) out.push_back(rgb_to_lab(im));
    return out;
  }();
  return labs;
}

const ColorCodebook& codebook() {
  static const ColorCodebook cb = fit_rebalance(build_codebook(), lab_corpus());
  return cb;
}

const PermutationSet& perms() {
  static const PermutationSet p = greedy_max_hamming_set(9, 100, 5);
  return p;
}

FeatureIndex random_index(std::size_t n, int dims) {
  Rng rng(9);
  std::vector<std::string> ids;
  std::vector<float> rows(n * dims);
  for (std::size_t i = 0; i < n; ++i) ids.push_back(std::to_string(i));
  for (auto& v : rows) v = static_cast<float>(rng.normal());
  return FeatureIndex(std::move(ids), std::move(rows), dims, Metric::cosine);
}

void BM_conv_parallel(benchmark::State& st) {
  ConvData d;
  for (auto _ : st) {
    nn::conv2d_forward(d.g, d.in.data(), d.w.data(), d.b.data(), d.out.data());
    benchmark::DoNotOptimize(d.out.data());
  }
}
void BM_conv_serial(benchmark::State& st) {
  ConvData d;
  for (auto _ : st) {
    nn::conv2d_forward_serial(d.g, d.in.data(), d.w.data(), d.b.data(), d.out.data());
    benchmark::DoNotOptimize(d.out.data());
  }
}

void BM_rgb_to_lab_parallel(benchmark::State& st) {
  const auto& img = corpus().images[0];
  for (auto _ : st) benchmark::DoNotOptimize(rgb_to_lab(img));
}
void BM_rgb_to_lab_serial(benchmark::State& st) {
  const auto& img = corpus().images[0];
  for (auto _ : st) benchmark::DoNotOptimize(rgb_to_lab_serial(img));
}

void BM_generate_parallel(benchmark::State& st) {
  const auto gc = GenConfig::desk();
  for (auto _ : st)
    benchmark::DoNotOptimize(generate_batch(lab_corpus(), TaskMode::cdjp3, perms(), codebook(), gc, 1, 0, 256));
  st.SetItemsProcessed(st.iterations() * 256);
}
void BM_generate_serial(benchmark::State& st) {
  const auto gc = GenConfig::desk();
  for (auto _ : st)
    benchmark::DoNotOptimize(generate_batch_serial(lab_corpus(), TaskMode::cdjp3, perms(), codebook(), gc, 1, 0, 256));
  st.SetItemsProcessed(st.iterations() * 256);
}

void BM_min_hamming_parallel(benchmark::State& st) {
  const auto set = random_subset(9, 1000, 2);
  for (auto _ : st) benchmark::DoNotOptimize(min_pairwise_hamming(set));
}
void BM_min_hamming_serial(benchmark::State& st) {
  const auto set = random_subset(9, 1000, 2);
  for (auto _ : st) benchmark::DoNotOptimize(min_pairwise_hamming_serial(set));
}

void BM_knn_parallel(benchmark::State& st) {
  const auto index = random_index(20000, 64);
  for (auto _ : st) benchmark::DoNotOptimize(knn(index, "17", 10));
}
void BM_knn_serial(benchmark::State& st) {
  const auto index = random_index(20000, 64);
  for (auto _ : st) benchmark::DoNotOptimize(knn_serial(index, "17", 10));
}

}  // namespace

BENCHMARK(BM_conv_parallel);
BENCHMARK(BM_conv_serial);
BENCHMARK(BM_rgb_to_lab_parallel);
BENCHMARK(BM_rgb_to_lab_serial);
BENCHMARK(BM_generate_parallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_generate_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_min_hamming_parallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_min_hamming_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_knn_parallel);
BENCHMARK(BM_knn_serial);

int main(int argc, char** argv) {
  // Build the shared fixtures outside any timed loop.
  codebook();
  perms();
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
