// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <string>

#include "ragrl/credit.hpp"
#include "ragrl/gateway.hpp"
#include "ragrl/protocol.hpp"

namespace {

using namespace ragrl;

/// A retrieval transcript with `queries` query/documents rounds of realistic size.
std::string transcript(int queries) {
  std::string r = "Let me work through this step by step.\n";
  for (int q = 0; q < queries; ++q) {
    r += "I need one more fact. " + std::string(protocol::kBeginQuery) + " population of city number " +
         std::to_string(q) + " " + std::string(protocol::kEndQuery);
    std::string docs;
    for (int w = 0; w < 300; ++w) docs += "token" + std::to_string(w % 50) + " ";
    r += protocol::wrap_documents(docs);
    r += "\nThat settles part " + std::to_string(q) + ".\n";
  }
  return r + "So the answer is \\boxed{42}";
}

void BM_ParseTranscript(benchmark::State& state) {
  const auto r = transcript(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(parse_transcript(r, TaskFamily::Math));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(r.size()));
}
BENCHMARK(BM_ParseTranscript)->Arg(1)->Arg(4);

void BM_TokenizeAndMask(benchmark::State& state) {
  const auto r = transcript(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    auto t = parse_transcript(r, TaskFamily::Math);
    attach_tokens(t, gateway::whitespace_tokenize);
    benchmark::DoNotOptimize(credit::build_action_mask(t));
  }
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(r.size()));
}
BENCHMARK(BM_TokenizeAndMask)->Arg(1)->Arg(4);

}  // namespace
