#include "fluxfilter/experiments.hpp"

#include <cmath>
#include <map>
#include <memory>

#include "fluxfilter/errors.hpp"

namespace fluxfilter {

namespace {

bool same_time(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)); }

const StepSummary* step_at(const AssimilationResult& result, double t) {
  for (const auto& s : result.steps) {
    if (same_time(s.time, t)) return &s;
  }
  return nullptr;
}

}  // namespace

ProbeSpec resolve_probes(const Grid& grid, const SensorLayout& layout, const Vec3& temperature,
                         const Vec3& flux, int* probe_sensor) {
  const auto cell = grid.locate(temperature);
  if (!cell) throw ConfigError("temperature probe lies outside the domain");
  const auto cells = sensor_cells(grid, layout.locations);
  int sensor = -1;
  for (std::size_t s = 0; s < cells.size(); ++s) {
    if (cells[s] == *cell) {
      sensor = static_cast<int>(s);
      break;
    }
  }
  if (sensor < 0) {
    throw ConfigError("temperature probe does not share a cell with any sensor of the layout");
  }
  if (std::abs(flux.y) > 1e-12 || !grid.contains(flux)) {
    throw ConfigError("flux probe must lie on the hot face (y = 0)");
  }
  if (probe_sensor) *probe_sensor = sensor;
  return {*cell, grid.nearest_hot_face(flux)};
}

Scenario build_scenario(const RunConfig& config) {
  config.validate();
  Grid grid = build_grid(config.extents, config.resolution);
  SensorLayout layout = default_layout(grid, config.sensors);
  auto observed = sensor_cells(grid, layout.locations);
  std::vector<Vec3> centers =
      config.centers.empty() ? default_centers(grid, layout.locations) : config.centers;
  RbfBasis basis = build_basis(std::move(centers), grid, config.kernel);
  const Projection projection = project_flux(true_flux_field(config.true_flux, grid, 0.0), basis);

  PriorSpec prior;
  prior.weight_mean = projection.weights.values;
  prior.kappa = config.kappa;
  prior.shift = config.shift;
  prior.state_mean = config.state_mean;
  prior.state_var = config.state_var;

  int probe_sensor = -1;
  const ProbeSpec probes =
      resolve_probes(grid, layout, config.temperature_probe, config.flux_probe, &probe_sensor);
  HeatModel model(grid, config.material, config.dt);
  return Scenario{std::move(grid),  std::move(layout), std::move(observed),
                  std::move(basis), std::move(model),  std::move(prior),
                  projection.residual, probes,        probe_sensor};
}

TwinDataset make_twin(const RunConfig& config) {
  config.validate();
  const Grid grid = build_grid(config.extents, config.resolution);
  TwinOptions options;
  options.dt = config.dt;
  options.obs_span = config.obs_span;
  options.t_final = config.t_final;
  options.r_var = config.r;
  options.seed = config.seed;
  options.refine = config.twin_refine;
  return generate_twin(grid, config.material, config.true_flux, default_layout(grid, config.sensors),
                       options);
}

AssimilationSetup make_setup(const RunConfig& config, const Scenario& scenario, bool assimilate) {
  AssimilationSetup setup;
  setup.prior = scenario.prior;
  setup.noise = NoiseSpec::isotropic(config.q, static_cast<Eigen::Index>(scenario.grid.cell_count()),
                                     config.r,
                                     static_cast<Eigen::Index>(scenario.observed_cells.size()));
  setup.observed_cells = scenario.observed_cells;
  setup.ensemble_size = config.ensemble_size;
  setup.beta_max = config.beta_max;
  setup.obs_span = config.obs_span;
  setup.t_final = config.t_final;
  setup.seed = config.seed;
  setup.workers = resolve_workers(config.workers);
  setup.probes = scenario.probes;
  setup.assimilate = assimilate;
  setup.update.max_condition = config.max_condition;
  return setup;
}

std::vector<FluxField> estimated_flux(const RbfBasis& basis, const AssimilationResult& result,
                                      const std::vector<double>& times) {
  std::vector<FluxField> out;
  out.reserve(times.size());
  for (double t : times) {
    const StepSummary* s = step_at(result, t);
    if (!s) throw ConfigError("no posterior at truth instant t=" + std::to_string(t));
    out.push_back({basis.flux(s->weight_mean), s->time});
  }
  return out;
}

ErrorReport score(const RunConfig& config, const RbfBasis& basis, const AssimilationResult& result,
                  const TruthSeries& truth) {
  ErrorReport report;
  report.norm = config.error_norm;
  report.times = truth.times;
  const auto estimate = estimated_flux(basis, result, truth.times);
  report.per_time_errors = relative_errors(estimate, truth.flux, config.error_norm);
  double sum = 0.0;
  for (double e : report.per_time_errors) sum += e;
  report.spatiotemporal_error = sum / static_cast<double>(report.per_time_errors.size());
  report.config_hash = config_hash(config);
  report.config_snapshot = serialize_config(config);

  std::size_t updates = 0;
  for (const auto& s : result.steps) {
    if (!s.updated) continue;
    ++updates;
    report.max_condition = std::max(report.max_condition, s.condition_number);
    report.mean_condition += s.condition_number;
    report.max_gain_residual = std::max(report.max_gain_residual, s.gain_residual);
  }
  if (updates) report.mean_condition /= static_cast<double>(updates);
  return report;
}

CoverageReport coverage_report(const AssimilationResult& result, const TruthSeries& truth,
                               int probe_sensor, std::size_t flux_face) {
  if (truth.times.size() != truth.sensor_temperatures.size() ||
      truth.times.size() != truth.flux.size()) {
    throw ConfigError("truth series are not aligned in time");
  }
  CoverageReport out;
  std::vector<Envelope> temp_env, flux_env;
  std::vector<double> temp_truth, flux_truth;
  for (std::size_t t = 0; t < truth.times.size(); ++t) {
    const StepSummary* s = step_at(result, truth.times[t]);
    if (!s) throw ConfigError("no posterior at truth instant t=" + std::to_string(truth.times[t]));
    const auto& sensors = truth.sensor_temperatures[t];
    if (probe_sensor < 0 || probe_sensor >= sensors.size()) {
      throw ConfigError("temperature probe is not part of the sensor layout");
    }
    if (static_cast<Eigen::Index>(flux_face) >= truth.flux[t].values.size()) {
      throw ConfigError("flux probe face out of range");
    }
    temp_env.push_back(s->probe_temperature);
    temp_truth.push_back(sensors[probe_sensor]);
    flux_env.push_back(s->probe_flux);
    flux_truth.push_back(truth.flux[t].values[static_cast<Eigen::Index>(flux_face)]);
  }
  out.instants = truth.times.size();
  out.temperature = coverage_fraction(temp_env, temp_truth);
  out.flux = coverage_fraction(flux_env, flux_truth);
  return out;
}

RunOutcome run_experiment(const RunConfig& config, const TwinDataset& twin, bool assimilate) {
  const Scenario scenario = build_scenario(config);
  const AssimilationSetup setup = make_setup(config, scenario, assimilate);
  RunOutcome out;
  out.result = run_assimilation(scenario.model, scenario.basis, setup, twin.measurements);
  out.report = score(config, scenario.basis, out.result, twin.truth);
  out.coverage = coverage_report(out.result, twin.truth, scenario.probe_sensor, scenario.probes.flux_face);
  return out;
}

RunConfig with_parameter(RunConfig base, const std::string& parameter, double value) {
  if (!std::isfinite(value)) throw ConfigError("sweep value must be finite");
  if (parameter == "ensemble_size") {
    if (value != std::floor(value) || value < 2 || value > 1e7) {
      throw ConfigError("ensemble_size sweep values must be integers >= 2");
    }
    base.ensemble_size = static_cast<int>(value);
  } else if (parameter == "eta") {
    base.kernel.eta = value;
  } else if (parameter == "kappa") {
    base.kappa = value;
  } else if (parameter == "shift") {
    base.shift = value;
  } else if (parameter == "dt") {
    base.dt = value;
  } else if (parameter == "obs_span") {
    base.obs_span = value;
  } else {
    throw ConfigError("unknown sweep parameter '" + parameter +
                      "' (expected ensemble_size, eta, kappa, shift, dt or obs_span)");
  }
  base.validate();
  return base;
}

std::vector<SweepPoint> run_sweep(const SweepSpec& spec) {
  if (spec.values.empty()) throw ConfigError("sweep needs at least one value");
  std::vector<RunConfig> configs;
  for (double v : spec.values) configs.push_back(with_parameter(spec.fixed, spec.parameter, v));

  std::map<std::string, std::shared_ptr<const TwinDataset>> twins;
  std::vector<SweepPoint> out;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    SweepPoint point;
    point.value = spec.values[i];
    try {
      auto& twin = twins[twin_hash(configs[i])];
      if (!twin) twin = std::make_shared<const TwinDataset>(make_twin(configs[i]));
      point.report = run_experiment(configs[i], *twin).report;
      point.ok = true;
    } catch (const std::exception& e) {
      point.failure = e.what();
    }
    out.push_back(std::move(point));
  }
  return out;
}

}  // namespace fluxfilter
