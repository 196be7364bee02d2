#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "fluxfilter/filter.hpp"
#include "fluxfilter/forward_model.hpp"
#include "fluxfilter/grid.hpp"

namespace fluxfilter {

/// Reference hot-face flux
///   g(X, t) = g1 + (g1 / 2) sin(2 pi f_max t^2 / t_f) + g2 exp(-0.1 t)
///   g1 = -ks (b z^2 + c),  g2 = -ks c / (1 + (x - 1)^2 + z^2)
struct TrueFluxSpec {
  double b = 200.0;
  double c = 300.0;
  double f_max = 0.1;  // Hz
  double t_f = 20.0;   // s
  double ks = 3.0;     // W/(m K)

  void validate() const;

  bool operator==(const TrueFluxSpec&) const = default;
};

double true_flux(const TrueFluxSpec& spec, const Vec3& x, double t);

/// Reference flux at every hot-face centroid of `grid`.
FluxField true_flux_field(const TrueFluxSpec& spec, const Grid& grid, double t);

struct SensorLayout {
  std::vector<Vec3> locations;
  double plane_y = 0.02;
};

struct LayoutOptions {
  double plane_y = 0.02;
  int count_x = 10;
  int count_z = 10;
  double margin_fraction = 0.05;

  bool operator==(const LayoutOptions&) const = default;
};

/// count_x x count_z uniform sensors on the plane y = plane_y, inset from each
/// (x, z) edge by half a cell plus margin_fraction of the extent. Sensor
/// `ix + count_x * iz` sits at (x0 + ix * sx, plane_y, z0 + iz * sz).
SensorLayout default_layout(const Grid& grid, const LayoutOptions& options = {});

struct TwinOptions {
  double dt = 0.1;
  double obs_span = 0.4;
  double t_final = 20.0;
  double r_var = 0.034;  // K^2, per sensor
  std::uint64_t seed = 1;
  int refine = 1;        // truth grid refinement factor (1 or 2)
};

/// Noise-free reference trajectory, kept away from the filter.
struct TruthSeries {
  std::vector<double> times;
  std::vector<FluxField> flux;              // on the (coarse) hot faces, at each observation time
  std::vector<Eigen::VectorXd> sensor_temperatures;  // noise-free, layout order
  std::vector<StateField> states;           // on the truth grid
};

struct TwinDataset {
  std::vector<MeasurementBatch> measurements;
  TruthSeries truth;
};

/// Runs the forward model under the reference flux (collocated at hot-face
/// centroids, evaluated at the end of each step) and records sensor readings
/// plus N(0, R) noise at every observation instant. With refine = 2 the truth
/// runs on a grid twice as fine per axis; truth fluxes are still reported on
/// `grid`'s hot faces.
TwinDataset generate_twin(const Grid& grid, const MaterialProps& props, const TrueFluxSpec& spec,
                          const SensorLayout& layout, const TwinOptions& options);

}  // namespace fluxfilter
