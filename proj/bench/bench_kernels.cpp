// OpenMP kernels against their serial references.

#include <benchmark/benchmark.h>

#include <filesystem>
#include <string>
#include <vector>

#include "klafate/bgsim.hpp"
#include "klafate/exclusivity.hpp"
#include "klafate/knowledge.hpp"

using namespace klafate;

namespace {

// Rule k holds when c_k is the first true condition: pairwise exclusive, so
// both checkers enumerate every assignment.
struct FirstTrue {
  std::vector<rules::ExprPtr> rules;
  std::vector<std::string> vars;

  explicit FirstTrue(int n) {
    for (int i = 0; i < n; ++i) vars.push_back("c" + std::to_string(i));
    for (int k = 0; k < n; ++k) {
      std::string text;
      for (int j = 0; j < k; ++j) text += "not " + vars[static_cast<std::size_t>(j)] + " and ";
      text += vars[static_cast<std::size_t>(k)];
      rules.push_back(rules::parse_rule(text));
    }
  }
};

void BM_exclusivity_openmp(benchmark::State& state) {
  const FirstTrue ft(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(rules::check_mutual_exclusivity(ft.rules, ft.vars));
  }
  state.SetItemsProcessed(state.iterations() * (std::int64_t{1} << state.range(0)));
}

void BM_exclusivity_serial(benchmark::State& state) {
  const FirstTrue ft(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(rules::check_mutual_exclusivity_serial(ft.rules, ft.vars));
  }
  state.SetItemsProcessed(state.iterations() * (std::int64_t{1} << state.range(0)));
}

struct Batch {
  fmea::Workbook wb = fmea::load_workbook(std::filesystem::path(KLAFATE_FIXTURES) / "bgs.fmea");
  knowledge::KnowledgeModel model = knowledge::KnowledgeModel::from_workbook(wb);
  std::vector<double> weights = std::vector<double>(model.frame().size(), 0.71);
  std::vector<rules::Snapshot> snapshots;

  explicit Batch(std::size_t n) {
    bgsim::Simulator sim(7);
    const auto& faults = bgsim::all_faults();
    for (std::size_t i = 0; i < n; ++i) {
      if (i % 300 == 100) sim.inject(faults[(i / 300) % faults.size()]);
      if (i % 300 == 250) sim.clear(faults[(i / 300) % faults.size()]);
      sim.step();
      snapshots.push_back(sim.snapshot());
    }
  }
};

const Batch& batch() {
  static const Batch b(20000);
  return b;
}

void BM_assess_batch_openmp(benchmark::State& state) {
  const auto& b = batch();
  for (auto _ : state) {
    benchmark::DoNotOptimize(knowledge::assess_batch(b.model, b.wb, b.weights, b.snapshots, 2));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(b.snapshots.size()));
}

void BM_assess_batch_serial(benchmark::State& state) {
  const auto& b = batch();
  for (auto _ : state) {
    benchmark::DoNotOptimize(knowledge::assess_batch_serial(b.model, b.wb, b.weights, b.snapshots, 2));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(b.snapshots.size()));
}

} // namespace

BENCHMARK(BM_exclusivity_openmp)->DenseRange(12, 20, 4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_exclusivity_serial)->DenseRange(12, 20, 4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_assess_batch_openmp)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_assess_batch_serial)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
