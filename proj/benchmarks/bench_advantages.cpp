// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "ragrl/credit.hpp"

namespace {

void BM_NormalizeAdvantages(benchmark::State& state) {
  const auto groups = static_cast<std::size_t>(state.range(0));
  const std::size_t g = 16;
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> level(-2, 10);
  std::vector<std::vector<double>> rewards(groups, std::vector<double>(g));
  for (auto& grp : rewards)
    for (auto& r : grp) r = level(rng) * 0.5;
  for (auto _ : state) benchmark::DoNotOptimize(ragrl::credit::normalize_advantages(rewards));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(groups * g));
}
BENCHMARK(BM_NormalizeAdvantages)->Arg(16)->Arg(256)->Arg(4096);

}  // namespace
