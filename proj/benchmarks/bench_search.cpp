// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "ragrl/corpus_index.hpp"

namespace {

using ragrl::retrieval::CorpusChunk;
using ragrl::retrieval::CorpusIndex;

// Zipf-ish vocabulary so that a few terms have long postings lists.
std::string word(std::mt19937_64& rng) {
  std::geometric_distribution<int> rank(0.02);
  return "w" + std::to_string(rank(rng));
}

std::vector<CorpusChunk> corpus(std::size_t n, std::size_t words_per_chunk) {
  std::mt19937_64 rng(n);
  std::vector<CorpusChunk> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::string text;
    for (std::size_t w = 0; w < words_per_chunk; ++w) text += word(rng) + " ";
    out.push_back({"d" + std::to_string(i), "c" + std::to_string(i), text, "t"});
  }
  return out;
}

void BM_IndexBuild(benchmark::State& state) {
  auto chunks = corpus(static_cast<std::size_t>(state.range(0)), 100);
  for (auto _ : state) benchmark::DoNotOptimize(CorpusIndex::build(chunks));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_IndexBuild)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_Search(benchmark::State& state) {
  auto index = CorpusIndex::build(corpus(static_cast<std::size_t>(state.range(0)), 100));
  std::mt19937_64 rng(7);
  std::vector<std::string> queries;
  for (int i = 0; i < 64; ++i) queries.push_back(word(rng) + " " + word(rng) + " " + word(rng) + " " + word(rng));
  std::size_t q = 0;
  for (auto _ : state) benchmark::DoNotOptimize(ragrl::retrieval::search(index, queries[q++ % queries.size()], 10));
}
BENCHMARK(BM_Search)->Arg(1000)->Arg(10000)->Arg(100000)->Unit(benchmark::kMicrosecond);

}  // namespace
