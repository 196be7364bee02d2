#pragma once

#include <string>
#include <vector>

#include "fluxfilter/config.hpp"
#include "fluxfilter/filter.hpp"
#include "fluxfilter/metrics.hpp"
#include "fluxfilter/rbf.hpp"
#include "fluxfilter/twin.hpp"

namespace fluxfilter {

/// Everything a run needs that follows from the configuration alone.
struct Scenario {
  Grid grid;
  SensorLayout layout;
  std::vector<std::size_t> observed_cells;  // cell per sensor
  RbfBasis basis;
  HeatModel model;
  PriorSpec prior;        // weight mean = projection of the reference flux at t = 0
  double projection_residual = 0.0;
  ProbeSpec probes;
  int probe_sensor = -1;  // layout index of the temperature probe
};

Scenario build_scenario(const RunConfig& config);

TwinDataset make_twin(const RunConfig& config);

AssimilationSetup make_setup(const RunConfig& config, const Scenario& scenario,
                             bool assimilate = true);

/// Temperature probe must share a cell with a sensor; flux probe must lie on the hot face.
/// Returns the probe indices and the sensor index of the temperature probe.
ProbeSpec resolve_probes(const Grid& grid, const SensorLayout& layout, const Vec3& temperature,
                         const Vec3& flux, int* probe_sensor = nullptr);

/// Posterior mean flux at each truth instant.
std::vector<FluxField> estimated_flux(const RbfBasis& basis, const AssimilationResult& result,
                                      const std::vector<double>& times);

struct ErrorReport {
  double spatiotemporal_error = 0.0;
  ErrorNorm norm = ErrorNorm::L2;
  std::vector<double> times;
  std::vector<double> per_time_errors;
  std::string config_hash;
  std::string config_snapshot;  // canonical config text
  double max_condition = 0.0;
  double mean_condition = 0.0;
  double max_gain_residual = 0.0;
};

ErrorReport score(const RunConfig& config, const RbfBasis& basis, const AssimilationResult& result,
                  const TruthSeries& truth);

struct CoverageReport {
  double temperature = 0.0;  // fraction of instants inside [p05, p95]
  double flux = 0.0;
  std::size_t instants = 0;
};

/// Coverage at the truth instants. `probe_sensor` indexes truth.sensor_temperatures.
CoverageReport coverage_report(const AssimilationResult& result, const TruthSeries& truth,
                               int probe_sensor, std::size_t flux_face);

struct RunOutcome {
  AssimilationResult result;
  ErrorReport report;
  CoverageReport coverage;
};

/// Assimilates `twin` under `config` and scores it.
RunOutcome run_experiment(const RunConfig& config, const TwinDataset& twin, bool assimilate = true);

struct SweepSpec {
  std::string parameter;  // ensemble_size | eta | kappa | shift | dt | obs_span
  std::vector<double> values;
  RunConfig fixed;
};

struct SweepPoint {
  double value = 0.0;
  bool ok = false;
  std::string failure;  // what() of the failed run
  ErrorReport report;
};

/// Copy of `base` with `parameter` set to `value`. Throws ConfigError on an unknown
/// parameter or a value that is invalid for it.
RunConfig with_parameter(RunConfig base, const std::string& parameter, double value);

/// One full run per value, in the order given. Twins are cached by twin_hash, so
/// points that share a twin are scored against identical data. Failures are
/// recorded per point and the sweep continues.
std::vector<SweepPoint> run_sweep(const SweepSpec& spec);

}  // namespace fluxfilter
