// SPDX-License-Identifier: Apache-2.0
// The distro's benchmark_main archive carries LTO bytecode from another
// compiler release, so the entry point lives here.
#include <benchmark/benchmark.h>

BENCHMARK_MAIN();
