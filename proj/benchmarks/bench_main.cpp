#include <benchmark/benchmark.h>

#include "fluxfilter/filter.hpp"
#include "fluxfilter/forward_model.hpp"
#include "fluxfilter/rbf.hpp"
#include "fluxfilter/twin.hpp"

namespace {

using namespace fluxfilter;

const Grid& mold() {
  static const Grid grid = build_grid({1.0, 0.04, 0.8}, {20, 8, 16});
  return grid;
}

// One implicit step of the default mold under the reference flux.
void BM_HeatModelAdvance(benchmark::State& state) {
  const HeatModel model(mold(), MaterialProps{}, state.range(0) / 10.0);
  const Eigen::VectorXd t0 = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(mold().cell_count()), 400.0);
  const Eigen::VectorXd g = true_flux_field(TrueFluxSpec{}, mold(), 1.0).values;
  Eigen::VectorXd t = t0;
  int iterations = 0;
  for (auto _ : state) {
    t = t0;
    iterations = model.advance(t, g).iterations;
    benchmark::DoNotOptimize(t.data());
  }
  state.counters["cg_iterations"] = iterations;
}
BENCHMARK(BM_HeatModelAdvance)->Arg(1)->Arg(2)->Unit(benchmark::kMicrosecond);

struct Fixture {
  SensorLayout layout = default_layout(mold());
  std::vector<std::size_t> cells = sensor_cells(mold(), layout.locations);
  RbfBasis basis = build_basis(default_centers(mold(), layout.locations), mold(), {KernelKind::Multiquadric, 3.0});
  PriorSpec prior;
  NoiseSpec noise = NoiseSpec::isotropic(0.5, static_cast<Eigen::Index>(mold().cell_count()), 0.034, 100);
  MeasurementBatch batch;

  Fixture() {
    prior.weight_mean = project_flux(true_flux_field(TrueFluxSpec{}, mold(), 0.0), basis).weights.values;
    batch.time = 0.4;
    batch.readings = Eigen::VectorXd::Constant(100, 401.0);
    for (int i = 0; i < 100; ++i) batch.sensor_ids.push_back(i);
  }
};

// Forecast of the whole ensemble by one step.
void BM_EnsembleForecast(benchmark::State& state) {
  static const Fixture f;
  const HeatModel model(mold(), MaterialProps{}, 0.2);
  JointEnsemble ens = init_ensemble(f.prior, f.basis, mold(), state.range(0), 1);
  std::uint64_t step = 0;
  for (auto _ : state) forecast(ens, model, f.basis, f.noise, 1, step++);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EnsembleForecast)->Arg(100)->Arg(300)->Unit(benchmark::kMillisecond);

// One analysis with 100 sensors.
void BM_EnsembleUpdate(benchmark::State& state) {
  static const Fixture f;
  const JointEnsemble start = init_ensemble(f.prior, f.basis, mold(), state.range(0), 1);
  for (auto _ : state) {
    state.PauseTiming();
    JointEnsemble ens = start;
    state.ResumeTiming();
    benchmark::DoNotOptimize(update(ens, f.batch, f.noise, f.cells, 1, 1).condition_number);
  }
}
BENCHMARK(BM_EnsembleUpdate)->Arg(150)->Arg(300)->Arg(600)->Unit(benchmark::kMillisecond);

void BM_ProjectFlux(benchmark::State& state) {
  static const Fixture f;
  const FluxField g = true_flux_field(TrueFluxSpec{}, mold(), 0.0);
  for (auto _ : state) benchmark::DoNotOptimize(project_flux(g, f.basis).residual);
}
BENCHMARK(BM_ProjectFlux)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
