#include <benchmark/benchmark.h>

#include "pushpull/certify.hpp"
#include "pushpull/gossip.hpp"
#include "pushpull/mixing.hpp"
#include "pushpull/push_pull.hpp"

using namespace pushpull;

namespace {

void BM_PushPullStep(benchmark::State& st) {
  const auto n = std::size_t(st.range(0));
  const auto g = random_strongly_connected(n, 2 * n, 7);
  const auto pair = make_mixing_pair(g, g);
  const auto h = huber_set(n, 4, 11);
  auto s = init_state(h, Mat::Zero(Eigen::Index(n), 4));
  const Vec a = Vec::Constant(Eigen::Index(n), 0.05);
  for (auto _ : st) {
    step(s, pair.R, pair.C, a, h, Variant::standard);
    benchmark::DoNotOptimize(s.x.data());
  }
}
BENCHMARK(BM_PushPullStep)->Arg(12)->Arg(48)->Arg(192);

void BM_GossipStep(benchmark::State& st) {
  const auto n = std::size_t(st.range(0));
  const auto g = random_strongly_connected(n, 2 * n, 7);
  const auto h = huber_set(n, 4, 11);
  auto s = init_state(h, Mat::Zero(Eigen::Index(n), 4));
  std::uint64_t k = 0;
  for (auto _ : st) {
    gossip_step(s, sample_event(g, g, 0.5, 1, k++), 0.02, h);
    benchmark::DoNotOptimize(s.y.data());
  }
}
BENCHMARK(BM_GossipStep)->Arg(12)->Arg(48)->Arg(192);

void BM_NormKit(benchmark::State& st) {
  const auto n = std::size_t(st.range(0));
  const auto g = random_strongly_connected(n, 2 * n, 3);
  const auto pair = make_mixing_pair(g, g);
  for (auto _ : st) benchmark::DoNotOptimize(build_norm_kit(pair).sigma_R);
}
BENCHMARK(BM_NormKit)->Arg(8)->Arg(32)->Arg(96);

void BM_GossipAnalysis(benchmark::State& st) {
  const auto n = std::size_t(st.range(0));
  const auto g = random_strongly_connected(n, 2 * n, 3);
  for (auto _ : st) benchmark::DoNotOptimize(analyze_gossip(g, g).eta);
}
BENCHMARK(BM_GossipAnalysis)->Arg(6)->Arg(12)->Arg(24);

void BM_Theorem1Bound(benchmark::State& st) {
  const auto g = random_strongly_connected(8, 16, 5);
  const auto pair = make_mixing_pair(g, g);
  const auto obj = random_quadratic_set(8, 2, 5);
  for (auto _ : st) benchmark::DoNotOptimize(norm_kit_for_bound(pair, obj, pair.u.dot(pair.v) / 8).sigma_C);
}
BENCHMARK(BM_Theorem1Bound);

}  // namespace

BENCHMARK_MAIN();
