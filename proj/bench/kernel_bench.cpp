// Serial reference vs OpenMP kernel for decontamination and the bootstrap.
#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "tracemill/decontam.hpp"
#include "tracemill/evalharness.hpp"

using namespace tracemill;

namespace {

std::vector<corpus::Question> corpus_of(std::size_t n, std::size_t words, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<corpus::Question> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    corpus::Question q;
    q.id = "q" + std::to_string(i);
    q.gold_answer = "A";
    for (std::size_t w = 0; w < words; ++w) q.text += (w ? " w" : "w") + std::to_string(rng() % 20000);
    out.push_back(std::move(q));
  }
  return out;
}

const std::vector<corpus::Question>& bench_set() {
  static const auto b = corpus_of(2000, 80, 1);
  return b;
}

const std::vector<corpus::Question>& train_set() {
  static const auto t = corpus_of(20000, 60, 2);
  return t;
}

void BM_BuildIndexSerial(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(decontam::build_index_serial(bench_set()));
}
void BM_BuildIndex(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(decontam::build_index(bench_set()));
}

void BM_ScanSerial(benchmark::State& st) {
  const auto idx = decontam::build_index(bench_set());
  for (auto _ : st) benchmark::DoNotOptimize(decontam::filter_corpus_serial(train_set(), idx));
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(train_set().size()));
}
void BM_Scan(benchmark::State& st) {
  const auto idx = decontam::build_index(bench_set());
  for (auto _ : st) benchmark::DoNotOptimize(decontam::filter_corpus(train_set(), idx));
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(train_set().size()));
}

std::vector<int> outcomes(std::size_t n) {
  std::mt19937_64 rng(3);
  std::vector<int> x(n);
  for (auto& v : x) v = static_cast<int>(rng() % 2);
  return x;
}

void BM_BootstrapSerial(benchmark::State& st) {
  const auto x = outcomes(static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(evalharness::bootstrap_ci_serial(x));
}
void BM_Bootstrap(benchmark::State& st) {
  const auto x = outcomes(static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(evalharness::bootstrap_ci(x));
}

}  // namespace

BENCHMARK(BM_BuildIndexSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BuildIndex)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ScanSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Scan)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BootstrapSerial)->Arg(500)->Arg(5000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Bootstrap)->Arg(500)->Arg(5000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
