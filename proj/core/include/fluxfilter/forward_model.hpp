#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <span>
#include <vector>

#include "fluxfilter/grid.hpp"

namespace fluxfilter {

struct MaterialProps {
  double rho = 5.0;       // kg/m^3
  double cp = 20.0;       // J/(kg K)
  double ks = 3.0;        // W/(m K)
  double h = 5.66e4;      // W/(m^2 K), cold-side convection
  double t_fluid = 350.0; // K
  double t_init = 400.0;  // K

  /// Throws ConfigError unless every property is finite and strictly positive.
  void validate() const;

  bool operator==(const MaterialProps&) const = default;
};

/// Cell-centred temperatures (K).
struct StateField {
  Eigen::VectorXd values;
  double time = 0.0;
};

/// Heat flux per hot face (W/m^2). Positive means heat leaving through the
/// outward normal, i.e. negative values heat the mold.
struct FluxField {
  Eigen::VectorXd values;
  double time = 0.0;
};

struct SolverOptions {
  double relative_tolerance = 1e-10;
  int max_iterations_per_cell = 10;
};

struct SolverStats {
  int iterations = 0;
  double relative_residual = 0.0;
};

/// Backward-Euler finite-volume operator for fixed (grid, material, dt).
///
/// Assembles the SPD system
///   (C/dt + L + U_cold) T^{n+1} = C/dt T^n - A_hot g + A_cold U T_f
/// with two-point interior fluxes, a Neumann flux g on the hot face and a
/// series Robin conductance U = 1/(1/h + dy/(2 ks)) on the cold face, and
/// solves it with conjugate gradients preconditioned by exact tridiagonal
/// solves along each through-thickness (y) line of cells.
///
/// Immutable after construction; `step` may be called concurrently.
class HeatModel {
 public:
  HeatModel(Grid grid, MaterialProps props, double dt, SolverOptions options = {});

  const Grid& grid() const { return grid_; }
  const MaterialProps& props() const { return props_; }
  double dt() const { return dt_; }

  /// Advances `state` by dt under `flux`. Throws NumericalError if CG does not reach
  /// the residual tolerance within the iteration budget.
  StateField step(const StateField& state, const FluxField& flux,
                  SolverStats* stats = nullptr) const;

  /// In-place variant used by the ensemble loop; `temperature` is both the
  /// previous state and the initial guess.
  SolverStats advance(Eigen::Ref<Eigen::VectorXd> temperature,
                      const Eigen::Ref<const Eigen::VectorXd>& hot_flux) const;

  /// y = A x for the assembled system matrix.
  void apply(const Eigen::Ref<const Eigen::VectorXd>& x, Eigen::Ref<Eigen::VectorXd> y) const;

  /// Right-hand side for a given previous state and hot-face flux.
  Eigen::VectorXd rhs(const Eigen::Ref<const Eigen::VectorXd>& previous,
                      const Eigen::Ref<const Eigen::VectorXd>& hot_flux) const;

 private:
  void precondition(const Eigen::VectorXd& r, Eigen::VectorXd& z) const;

  Grid grid_;
  MaterialProps props_;
  double dt_;
  SolverOptions options_;

  double capacity_;  // rho cp V / dt
  double gx_, gy_, gz_;
  double cold_conductance_;  // U * face area
  Eigen::VectorXd diag_;
  // Thomas factors per y-line: inverse pivots and modified super-diagonal.
  Eigen::VectorXd inv_pivot_;
  Eigen::VectorXd super_;
};

/// One backward-Euler step. Convenience wrapper that assembles a HeatModel.
StateField step(const Grid& grid, const StateField& state, const FluxField& flux,
                const MaterialProps& props, double dt);

/// Cell index per sensor by nearest cell centre. Throws ConfigError for points outside Ω.
std::vector<std::size_t> sensor_cells(const Grid& grid, std::span<const Vec3> locations);

/// Temperatures at the sensor locations, in the order given.
Eigen::VectorXd sample_sensors(const Grid& grid, const StateField& state,
                               std::span<const Vec3> locations);

/// Total thermal energy sum(rho cp V T) in J.
double thermal_energy(const Grid& grid, const MaterialProps& props, const StateField& state);

StateField uniform_state(const Grid& grid, double temperature, double time = 0.0);

}  // namespace fluxfilter
