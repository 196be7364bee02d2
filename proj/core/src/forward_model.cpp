#include "fluxfilter/forward_model.hpp"

#include <cmath>
#include <string>

#include "fluxfilter/errors.hpp"

namespace fluxfilter {

void MaterialProps::validate() const {
  const std::pair<const char*, double> fields[] = {{"rho", rho}, {"cp", cp},
                                                   {"ks", ks},   {"h", h},
                                                   {"t_fluid", t_fluid}, {"t_init", t_init}};
  for (const auto& [name, value] : fields) {
    if (!std::isfinite(value) || value <= 0.0) {
      throw ConfigError(std::string("material property '") + name +
                        "' must be finite and > 0, got " + std::to_string(value));
    }
  }
}

HeatModel::HeatModel(Grid grid, MaterialProps props, double dt, SolverOptions options)
    : grid_(std::move(grid)), props_(props), dt_(dt), options_(options) {
  if (!(dt_ > 0.0) || !std::isfinite(dt_)) {
    throw ConfigError("time step must be > 0, got " + std::to_string(dt_));
  }
  if (!(props_.rho > 0.0) || !(props_.cp > 0.0) || !(props_.ks > 0.0) || !(props_.h >= 0.0)) {
    throw ConfigError("heat model needs rho, cp, ks > 0 and h >= 0");
  }
  const double hx = grid_.dx(), hy = grid_.dy(), hz = grid_.dz();
  capacity_ = props_.rho * props_.cp * grid_.cell_volume() / dt_;
  gx_ = props_.ks * hy * hz / hx;
  gy_ = props_.ks * hx * hz / hy;
  gz_ = props_.ks * hx * hy / hz;
  const double u = props_.h > 0.0 ? 1.0 / (1.0 / props_.h + 0.5 * hy / props_.ks) : 0.0;
  cold_conductance_ = u * hx * hz;

  const int nx = grid_.nx(), ny = grid_.ny(), nz = grid_.nz();
  const auto n = static_cast<Eigen::Index>(grid_.cell_count());
  diag_.resize(n);
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        double d = capacity_;
        d += gx_ * ((i > 0) + (i < nx - 1));
        d += gy_ * ((j > 0) + (j < ny - 1));
        d += gz_ * ((k > 0) + (k < nz - 1));
        if (j == ny - 1) d += cold_conductance_;
        diag_[static_cast<Eigen::Index>(grid_.cell_index(i, j, k))] = d;
      }
    }
  }

  inv_pivot_.resize(n);
  super_.resize(n);
  for (int k = 0; k < nz; ++k) {
    for (int i = 0; i < nx; ++i) {
      double prev_super = 0.0;
      for (int j = 0; j < ny; ++j) {
        const auto c = static_cast<Eigen::Index>(grid_.cell_index(i, j, k));
        const double pivot = diag_[c] - (j > 0 ? gy_ * prev_super : 0.0);
        inv_pivot_[c] = 1.0 / pivot;
        super_[c] = (j < ny - 1) ? -gy_ * inv_pivot_[c] : 0.0;
        prev_super = -super_[c];
      }
    }
  }
}

void HeatModel::apply(const Eigen::Ref<const Eigen::VectorXd>& x,
                      Eigen::Ref<Eigen::VectorXd> y) const {
  const int nx = grid_.nx(), ny = grid_.ny(), nz = grid_.nz();
  const Eigen::Index sx = 1, sy = nx, sz = static_cast<Eigen::Index>(nx) * ny;
  Eigen::Index c = 0;
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i, ++c) {
        double v = diag_[c] * x[c];
        if (i > 0) v -= gx_ * x[c - sx];
        if (i < nx - 1) v -= gx_ * x[c + sx];
        if (j > 0) v -= gy_ * x[c - sy];
        if (j < ny - 1) v -= gy_ * x[c + sy];
        if (k > 0) v -= gz_ * x[c - sz];
        if (k < nz - 1) v -= gz_ * x[c + sz];
        y[c] = v;
      }
    }
  }
}

Eigen::VectorXd HeatModel::rhs(const Eigen::Ref<const Eigen::VectorXd>& previous,
                               const Eigen::Ref<const Eigen::VectorXd>& hot_flux) const {
  Eigen::VectorXd b = capacity_ * previous;
  const auto& hot = grid_.hot_faces();
  for (std::size_t f = 0; f < hot.size(); ++f) {
    b[static_cast<Eigen::Index>(hot[f].cell)] -= hot[f].area * hot_flux[static_cast<Eigen::Index>(f)];
  }
  if (cold_conductance_ > 0.0) {
    for (const auto& face : grid_.cold_faces()) {
      b[static_cast<Eigen::Index>(face.cell)] += cold_conductance_ * props_.t_fluid;
    }
  }
  return b;
}

void HeatModel::precondition(const Eigen::VectorXd& r, Eigen::VectorXd& z) const {
  const int nx = grid_.nx(), ny = grid_.ny(), nz = grid_.nz();
  const Eigen::Index sy = nx;
  for (int k = 0; k < nz; ++k) {
    for (int i = 0; i < nx; ++i) {
      const auto base = static_cast<Eigen::Index>(grid_.cell_index(i, 0, k));
      // forward sweep
      double prev = 0.0;
      for (int j = 0; j < ny; ++j) {
        const Eigen::Index c = base + j * sy;
        prev = (r[c] + gy_ * prev * (j > 0)) * inv_pivot_[c];
        z[c] = prev;
      }
      // back substitution
      for (int j = ny - 2; j >= 0; --j) {
        const Eigen::Index c = base + j * sy;
        z[c] -= super_[c] * z[c + sy];
      }
    }
  }
}

SolverStats HeatModel::advance(Eigen::Ref<Eigen::VectorXd> temperature,
                               const Eigen::Ref<const Eigen::VectorXd>& hot_flux) const {
  const auto n = static_cast<Eigen::Index>(grid_.cell_count());
  if (temperature.size() != n) {
    throw ConfigError("state has " + std::to_string(temperature.size()) + " cells, grid has " +
                      std::to_string(n));
  }
  if (hot_flux.size() != static_cast<Eigen::Index>(grid_.hot_faces().size())) {
    throw ConfigError("flux has " + std::to_string(hot_flux.size()) + " entries, grid has " +
                      std::to_string(grid_.hot_faces().size()) + " hot faces");
  }

  const Eigen::VectorXd b = rhs(temperature, hot_flux);
  const double b_norm = b.norm();
  SolverStats stats;
  if (b_norm == 0.0) {
    temperature.setZero();
    return stats;
  }
  const double target = options_.relative_tolerance * b_norm;
  const int budget = options_.max_iterations_per_cell * static_cast<int>(n);

  Eigen::VectorXd x = temperature;
  Eigen::VectorXd r(n), z(n), p(n), ap(n);
  apply(x, ap);
  r = b - ap;
  double r_norm = r.norm();

  // Restart from the true residual if the recursive one drifts below target early.
  while (r_norm > target && stats.iterations < budget) {
    precondition(r, z);
    p = z;
    double rz = r.dot(z);
    while (stats.iterations < budget) {
      apply(p, ap);
      const double curvature = p.dot(ap);
      if (!(curvature > 0.0)) {
        throw NumericalError("CG breakdown: non-positive curvature " + std::to_string(curvature) +
                             " at iteration " + std::to_string(stats.iterations));
      }
      const double alpha = rz / curvature;
      x.noalias() += alpha * p;
      r.noalias() -= alpha * ap;
      ++stats.iterations;
      if (r.norm() <= target) break;
      precondition(r, z);
      const double rz_next = r.dot(z);
      p = z + (rz_next / rz) * p;
      rz = rz_next;
    }
    apply(x, ap);
    r = b - ap;
    r_norm = r.norm();
  }

  stats.relative_residual = r_norm / b_norm;
  if (!std::isfinite(r_norm) || r_norm > target) {
    throw NumericalError("CG did not converge: relative residual " +
                         std::to_string(stats.relative_residual) + " after " +
                         std::to_string(stats.iterations) + " iterations (tolerance " +
                         std::to_string(options_.relative_tolerance) + ")");
  }
  temperature = x;
  return stats;
}

StateField HeatModel::step(const StateField& state, const FluxField& flux,
                           SolverStats* stats) const {
  StateField next{state.values, state.time + dt_};
  const SolverStats s = advance(next.values, flux.values);
  if (stats) *stats = s;
  return next;
}

StateField step(const Grid& grid, const StateField& state, const FluxField& flux,
                const MaterialProps& props, double dt) {
  return HeatModel(grid, props, dt).step(state, flux);
}

std::vector<std::size_t> sensor_cells(const Grid& grid, std::span<const Vec3> locations) {
  std::vector<std::size_t> cells;
  cells.reserve(locations.size());
  for (std::size_t s = 0; s < locations.size(); ++s) {
    const auto cell = grid.locate(locations[s]);
    if (!cell) {
      const auto& p = locations[s];
      throw ConfigError("sensor " + std::to_string(s) + " at (" + std::to_string(p.x) + ", " +
                        std::to_string(p.y) + ", " + std::to_string(p.z) +
                        ") lies outside the domain");
    }
    cells.push_back(*cell);
  }
  return cells;
}

Eigen::VectorXd sample_sensors(const Grid& grid, const StateField& state,
                               std::span<const Vec3> locations) {
  const auto cells = sensor_cells(grid, locations);
  Eigen::VectorXd readings(static_cast<Eigen::Index>(cells.size()));
  for (std::size_t s = 0; s < cells.size(); ++s) {
    readings[static_cast<Eigen::Index>(s)] = state.values[static_cast<Eigen::Index>(cells[s])];
  }
  return readings;
}

double thermal_energy(const Grid& grid, const MaterialProps& props, const StateField& state) {
  return props.rho * props.cp * grid.cell_volume() * state.values.sum();
}

StateField uniform_state(const Grid& grid, double temperature, double time) {
  return {Eigen::VectorXd::Constant(static_cast<Eigen::Index>(grid.cell_count()), temperature),
          time};
}

}  // namespace fluxfilter
