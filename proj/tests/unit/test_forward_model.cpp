#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <chrono>
#include <random>

#include "fluxfilter/errors.hpp"
#include "fluxfilter/forward_model.hpp"
#include "fluxfilter/twin.hpp"
#include "support.hpp"

using namespace fluxfilter;
using fluxfilter::testing::random_vector;

namespace {

// Dense backward-Euler system assembled cell by cell from face conductances.
struct DenseSystem {
  Eigen::MatrixXd a;
  Eigen::VectorXd b;
};

DenseSystem dense_system(const Grid& g, const MaterialProps& p, double dt,
                         const Eigen::VectorXd& prev, const Eigen::VectorXd& flux) {
  const int nx = g.nx(), ny = g.ny(), nz = g.nz();
  const double dx = g.extents().lx / nx, dy = g.extents().ly / ny, dz = g.extents().lz / nz;
  const auto n = static_cast<Eigen::Index>(nx * ny * nz);
  DenseSystem s{Eigen::MatrixXd::Zero(n, n), Eigen::VectorXd::Zero(n)};
  auto id = [&](int i, int j, int k) { return static_cast<Eigen::Index>(i + nx * (j + ny * k)); };
  const double cap = p.rho * p.cp * dx * dy * dz / dt;
  const double kx = p.ks * dy * dz / dx, ky = p.ks * dx * dz / dy, kz = p.ks * dx * dy / dz;
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        const auto c = id(i, j, k);
        s.a(c, c) += cap;
        s.b[c] += cap * prev[c];
        auto link = [&](int ii, int jj, int kk, double cond) {
          if (ii < 0 || jj < 0 || kk < 0 || ii >= nx || jj >= ny || kk >= nz) return;
          s.a(c, c) += cond;
          s.a(c, id(ii, jj, kk)) -= cond;
        };
        link(i - 1, j, k, kx);
        link(i + 1, j, k, kx);
        link(i, j - 1, k, ky);
        link(i, j + 1, k, ky);
        link(i, j, k - 1, kz);
        link(i, j, k + 1, kz);
        if (j == 0) s.b[c] -= dx * dz * flux[i + nx * k];
        if (j == ny - 1 && p.h > 0) {
          const double u = 1.0 / (1.0 / p.h + dy / (2.0 * p.ks)) * dx * dz;
          s.a(c, c) += u;
          s.b[c] += u * p.t_fluid;
        }
      }
    }
  }
  return s;
}

}  // namespace

TEST(ForwardModel, MatchesDenseOracle) {
  std::mt19937_64 rng(42);
  const Grid g = build_grid({1.0, 0.04, 0.8}, {4, 3, 5});
  MaterialProps p;
  for (double dt : {0.01, 0.2, 5.0}) {
    const HeatModel model(g, p, dt);
    const Eigen::VectorXd t0 = random_vector(rng, 60, 340.0, 420.0);
    const Eigen::VectorXd flux = random_vector(rng, 20, -3000.0, 500.0);
    const DenseSystem s = dense_system(g, p, dt, t0, flux);
    const Eigen::VectorXd expected = s.a.partialPivLu().solve(s.b);
    const StateField next = model.step({t0, 1.0}, {flux, 1.0});
    EXPECT_DOUBLE_EQ(next.time, 1.0 + dt);
    EXPECT_LT((next.values - expected).cwiseAbs().maxCoeff(), 1e-7) << "dt=" << dt;

    Eigen::VectorXd ax(60);
    model.apply(t0, ax);
    EXPECT_LT((ax - s.a * t0).cwiseAbs().maxCoeff(), 1e-8 * (s.a * t0).cwiseAbs().maxCoeff());
  }
}

TEST(ForwardModel, UniformStateWithoutForcingStaysPut) {
  const Grid g = build_grid({1.0, 0.04, 0.8}, {20, 8, 16});
  MaterialProps p;
  p.h = 0.0;
  const HeatModel model(g, p, 0.2);
  const StateField next = model.step(uniform_state(g, 400.0), {Eigen::VectorXd::Zero(320), 0.0});
  EXPECT_LT((next.values.array() - 400.0).abs().maxCoeff(), 1e-7);
}

TEST(ForwardModel, ConvectiveCoolingDecreasesEveryCell) {
  const Grid g = build_grid({1.0, 0.04, 0.8}, {20, 8, 16});
  const MaterialProps p;
  const HeatModel model(g, p, 0.1);
  StateField s = uniform_state(g, 400.0);
  const FluxField zero{Eigen::VectorXd::Zero(320), 0.0};
  for (int n = 0; n < 5; ++n) {
    const StateField next = model.step(s, zero);
    EXPECT_TRUE((next.values.array() < s.values.array()).all());
    EXPECT_TRUE((next.values.array() > 350.0).all());
    s = next;
  }
}

TEST(ForwardModel, OneDimensionalSteadyProfile) {
  // Exact steady state of -k T'' = 0, k T'(0) = g, -k T'(ly) = h (T(ly) - Tf):
  // T(y) = Tf - g/h + (g/k)(y - ly).
  const auto start = std::chrono::steady_clock::now();
  const double ly = 0.04, g = -1800.0;
  const Grid grid = build_grid({0.1, ly, 0.1}, {2, 64, 2});
  const MaterialProps p;
  const HeatModel model(grid, p, 1e4);
  StateField s = uniform_state(grid, p.t_init);
  const Eigen::VectorXd flux = Eigen::VectorXd::Constant(4, g);
  for (int n = 0; n < 50; ++n) s = model.step(s, {flux, s.time});

  double worst = 0.0;
  for (std::size_t c = 0; c < grid.cell_count(); ++c) {
    const double y = grid.cell_center(c).y;
    const double exact = p.t_fluid - g / p.h + (g / p.ks) * (y - ly);
    worst = std::max(worst, std::abs(s.values[static_cast<Eigen::Index>(c)] - exact) /
                                std::abs(exact - p.t_fluid));
  }
  EXPECT_LE(worst, 1e-3);
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 10.0);
}

TEST(ForwardModel, ErrorShrinksUnderTimeRefinement) {
  // Transient 1D problem against a fine-step reference: backward Euler is first order.
  const Grid grid = build_grid({0.1, 0.04, 0.1}, {2, 16, 2});
  const MaterialProps p;
  const Eigen::VectorXd flux = Eigen::VectorXd::Constant(4, -1800.0);
  auto run = [&](double dt) {
    const HeatModel model(grid, p, dt);
    StateField s = uniform_state(grid, p.t_init);
    const int steps = static_cast<int>(std::lround(0.08 / dt));
    for (int n = 0; n < steps; ++n) s = model.step(s, {flux, s.time});
    return s.values;
  };
  const Eigen::VectorXd ref = run(0.08 / 2048);
  double prev = std::numeric_limits<double>::infinity();
  for (double dt : {0.02, 0.01, 0.005, 0.0025}) {
    const double err = (run(dt) - ref).cwiseAbs().maxCoeff();
    EXPECT_LT(err, prev) << "dt=" << dt;
    if (std::isfinite(prev)) EXPECT_GT(prev / err, 1.6) << "dt=" << dt;
    prev = err;
  }
}

TEST(ForwardModel, EnergyConservedWithoutForcing) {
  std::mt19937_64 rng(7);
  const Grid g = build_grid({1.0, 0.04, 0.8}, {20, 8, 16});
  MaterialProps p;
  p.h = 0.0;
  const HeatModel model(g, p, 0.2);
  StateField s{random_vector(rng, 2560, 300.0, 500.0), 0.0};
  const FluxField zero{Eigen::VectorXd::Zero(320), 0.0};
  double e_prev = thermal_energy(g, p, s);
  for (int n = 0; n < 20; ++n) {
    s = model.step(s, zero);
    const double e = thermal_energy(g, p, s);
    EXPECT_LE(std::abs(e - e_prev) / std::abs(e_prev), 1e-9) << "step " << n;
    e_prev = e;
  }
}

TEST(ForwardModel, EnergyBalanceWithBoundaryFluxes) {
  std::mt19937_64 rng(8);
  const Grid g = build_grid({1.0, 0.04, 0.8}, {10, 6, 8});
  const MaterialProps p;
  const double dt = 0.1;
  const HeatModel model(g, p, dt);
  StateField s{random_vector(rng, 480, 360.0, 420.0), 0.0};
  const Eigen::VectorXd flux = random_vector(rng, 80, -2500.0, 0.0);
  const double u = 1.0 / (1.0 / p.h + g.dy() / (2.0 * p.ks));
  for (int n = 0; n < 5; ++n) {
    const StateField next = model.step(s, {flux, s.time});
    double inflow = 0.0;
    for (std::size_t f = 0; f < g.hot_faces().size(); ++f) {
      inflow -= g.hot_faces()[f].area * flux[static_cast<Eigen::Index>(f)];
    }
    for (const auto& f : g.cold_faces()) {
      inflow -= f.area * u * (next.values[static_cast<Eigen::Index>(f.cell)] - p.t_fluid);
    }
    const double de = thermal_energy(g, p, next) - thermal_energy(g, p, s);
    EXPECT_NEAR(de, inflow * dt, 1e-8 * thermal_energy(g, p, s));
    s = next;
  }
}

TEST(ForwardModel, MaximumPrinciple) {
  std::mt19937_64 rng(9);
  const Grid g = build_grid({1.0, 0.04, 0.8}, {10, 6, 8});
  const MaterialProps p;  // Tf = 350
  const HeatModel model(g, p, 0.05);
  const FluxField zero{Eigen::VectorXd::Zero(80), 0.0};
  for (int trial = 0; trial < 10; ++trial) {
    StateField s{random_vector(rng, 480, 350.0, 450.0), 0.0};
    for (int n = 0; n < 10; ++n) {
      const StateField next = model.step(s, zero);
      EXPECT_LE(next.values.maxCoeff(), s.values.maxCoeff() + 1e-9);
      EXPECT_GE(next.values.minCoeff(), p.t_fluid - 1e-9);
      s = next;
    }
  }
}

TEST(ForwardModel, AffineSuperposition) {
  std::mt19937_64 rng(10);
  const Grid g = fluxfilter::testing::small_grid();
  const HeatModel model(g, MaterialProps{}, 0.2);
  const Eigen::VectorXd t1 = random_vector(rng, 60, 340, 420), t2 = random_vector(rng, 60, 340, 420);
  const Eigen::VectorXd g1 = random_vector(rng, 20, -2000, 0), g2 = random_vector(rng, 20, -2000, 0);
  const double a = 0.3, b = 0.7;
  const auto s1 = model.step({t1, 0}, {g1, 0}).values;
  const auto s2 = model.step({t2, 0}, {g2, 0}).values;
  const auto s12 = model.step({a * t1 + b * t2, 0}, {a * g1 + b * g2, 0}).values;
  EXPECT_LT((s12 - (a * s1 + b * s2)).cwiseAbs().maxCoeff(), 1e-7);
}

TEST(ForwardModel, SolverFailureIsReported) {
  const Grid g = fluxfilter::testing::small_grid();
  const HeatModel model(g, MaterialProps{}, 0.2, SolverOptions{1e-10, 0});
  EXPECT_THROW(model.step(uniform_state(g, 400), {Eigen::VectorXd::Constant(20, -1000), 0}),
               NumericalError);
}

TEST(ForwardModel, RejectsMismatchedInputs) {
  const Grid g = fluxfilter::testing::small_grid();
  const HeatModel model(g, MaterialProps{}, 0.2);
  EXPECT_THROW(model.step(uniform_state(g, 400), {Eigen::VectorXd::Zero(3), 0}), ConfigError);
  EXPECT_THROW(HeatModel(g, MaterialProps{}, 0.0), ConfigError);
  MaterialProps bad;
  bad.rho = -1;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(ForwardModel, SensorSampling) {
  const Grid g = build_grid({1.0, 0.04, 0.8}, {20, 8, 16});
  std::mt19937_64 rng(11);
  const StateField s{random_vector(rng, 2560, 300, 500), 0.0};
  EXPECT_TRUE((sample_sensors(g, uniform_state(g, 400), default_layout(g).locations).array() == 400).all());

  const Vec3 centre = g.cell_center(g.cell_index(3, 2, 7));
  const std::vector<Vec3> one = {centre};
  EXPECT_EQ(sample_sensors(g, s, one)[0], s.values[static_cast<Eigen::Index>(g.cell_index(3, 2, 7))]);

  // Direct index arithmetic for the 10 x 10 layout.
  const auto layout = default_layout(g);
  const Eigen::VectorXd readings = sample_sensors(g, s, layout.locations);
  ASSERT_EQ(readings.size(), 100);
  for (std::size_t k = 0; k < 100; ++k) {
    const Vec3& x = layout.locations[k];
    const int i = static_cast<int>(x.x / 0.05), j = static_cast<int>(x.y / 0.005),
              kk = static_cast<int>(x.z / 0.05);
    EXPECT_EQ(readings[static_cast<Eigen::Index>(k)],
              s.values[i + 20 * (j + 8 * kk)]);
  }
  const std::vector<Vec3> outside = {{2.0, 0.02, 0.4}};
  EXPECT_THROW(sample_sensors(g, s, outside), ConfigError);
}
