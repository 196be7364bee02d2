#include "fluxfilter/twin.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "fluxfilter/errors.hpp"
#include "fluxfilter/random.hpp"

namespace fluxfilter {

void TrueFluxSpec::validate() const {
  if (!(t_f > 0.0)) throw ConfigError("true flux t_f must be > 0");
  if (!(f_max >= 0.0)) throw ConfigError("true flux f_max must be >= 0");
  if (!std::isfinite(b) || !std::isfinite(c) || !std::isfinite(ks)) {
    throw ConfigError("true flux constants must be finite");
  }
}

double true_flux(const TrueFluxSpec& spec, const Vec3& x, double t) {
  const double g1 = -spec.ks * (spec.b * x.z * x.z + spec.c);
  const double g2 = -spec.ks * spec.c / (1.0 + (x.x - 1.0) * (x.x - 1.0) + x.z * x.z);
  const double phase = 2.0 * std::numbers::pi * spec.f_max * t * t / spec.t_f;
  return g1 + 0.5 * g1 * std::sin(phase) + g2 * std::exp(-0.1 * t);
}

FluxField true_flux_field(const TrueFluxSpec& spec, const Grid& grid, double t) {
  const auto& faces = grid.hot_faces();
  FluxField out{Eigen::VectorXd(static_cast<Eigen::Index>(faces.size())), t};
  for (std::size_t f = 0; f < faces.size(); ++f) {
    out.values[static_cast<Eigen::Index>(f)] = true_flux(spec, faces[f].centroid, t);
  }
  return out;
}

SensorLayout default_layout(const Grid& grid, const LayoutOptions& options) {
  const auto& e = grid.extents();
  if (!(options.plane_y >= 0.0) || options.plane_y > e.ly) {
    throw ConfigError("sensor plane y=" + std::to_string(options.plane_y) +
                      " lies outside the slab thickness " + std::to_string(e.ly));
  }
  if (options.count_x < 1 || options.count_z < 1) {
    throw ConfigError("sensor layout needs at least one sensor per direction");
  }
  if (!(options.margin_fraction >= 0.0) || options.margin_fraction >= 0.5) {
    throw ConfigError("sensor margin fraction must lie in [0, 0.5)");
  }
  const double mx = 0.5 * grid.dx() + options.margin_fraction * e.lx;
  const double mz = 0.5 * grid.dz() + options.margin_fraction * e.lz;
  auto axis = [](double lo, double hi, int n, int idx) {
    return n == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * idx / (n - 1);
  };
  SensorLayout layout;
  layout.plane_y = options.plane_y;
  for (int iz = 0; iz < options.count_z; ++iz) {
    for (int ix = 0; ix < options.count_x; ++ix) {
      layout.locations.push_back({axis(mx, e.lx - mx, options.count_x, ix), options.plane_y,
                                  axis(mz, e.lz - mz, options.count_z, iz)});
    }
  }
  return layout;
}

TwinDataset generate_twin(const Grid& grid, const MaterialProps& props, const TrueFluxSpec& spec,
                          const SensorLayout& layout, const TwinOptions& options) {
  spec.validate();
  if (options.refine != 1 && options.refine != 2) {
    throw ConfigError("twin refinement must be 1 or 2, got " + std::to_string(options.refine));
  }
  if (!(options.r_var >= 0.0)) throw ConfigError("measurement noise variance must be >= 0");
  const int per_obs = steps_in(options.obs_span, options.dt, "observation span");
  const int total = steps_in(options.t_final, options.dt, "final time");
  if (total % per_obs != 0) {
    throw ConfigError("final time is not a multiple of the observation span");
  }
  if (options.t_final > spec.t_f * (1.0 + 1e-12)) {
    throw ConfigError("run length exceeds the reference flux horizon t_f");
  }

  const Resolution& r = grid.resolution();
  const Grid truth_grid = options.refine == 1
                              ? grid
                              : build_grid(grid.extents(), {r.nx * 2, r.ny * 2, r.nz * 2});
  const HeatModel model(truth_grid, props, options.dt);
  const auto cells = sensor_cells(truth_grid, layout.locations);
  const auto m = static_cast<Eigen::Index>(cells.size());

  TwinDataset out;
  StateField state = uniform_state(truth_grid, props.t_init);
  for (int n = 1; n <= total; ++n) {
    const double t = n * options.dt;
    model.advance(state.values, true_flux_field(spec, truth_grid, t).values);
    state.time = t;
    if (n % per_obs != 0) continue;

    const auto batch_index = static_cast<std::uint64_t>(n / per_obs);
    Eigen::VectorXd clean(m);
    for (Eigen::Index s = 0; s < m; ++s) {
      clean[s] = state.values[static_cast<Eigen::Index>(cells[static_cast<std::size_t>(s)])];
    }
    auto gen = make_engine(options.seed, Stream::TwinNoise, batch_index, 0);
    MeasurementBatch batch;
    batch.time = t;
    batch.readings.resize(m);
    fill_gaussian(gen, clean, Eigen::VectorXd::Constant(m, options.r_var), batch.readings);
    batch.sensor_ids.resize(static_cast<std::size_t>(m));
    for (Eigen::Index s = 0; s < m; ++s) batch.sensor_ids[static_cast<std::size_t>(s)] = static_cast<int>(s);
    out.measurements.push_back(std::move(batch));

    out.truth.times.push_back(t);
    out.truth.flux.push_back(true_flux_field(spec, grid, t));
    out.truth.sensor_temperatures.push_back(std::move(clean));
    out.truth.states.push_back(state);
  }
  return out;
}

}  // namespace fluxfilter
