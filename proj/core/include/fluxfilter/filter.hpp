#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "fluxfilter/forward_model.hpp"
#include "fluxfilter/rbf.hpp"
#include "fluxfilter/stats.hpp"

namespace fluxfilter {

/// Diagonal process (per state entry) and measurement (per sensor) noise variances, K^2.
struct NoiseSpec {
  Eigen::VectorXd q_diag;
  Eigen::VectorXd r_diag;

  static NoiseSpec isotropic(double q, Eigen::Index state_size, double r, Eigen::Index sensor_count);
  void validate() const;
};

struct PriorSpec {
  Eigen::VectorXd weight_mean;  // projection of the reference flux onto the basis
  double kappa = 0.2;           // weight covariance scale
  double shift = 0.0;           // multiplicative prior-mean shift: mean = (1 + shift) * weight_mean
  double state_mean = 400.0;    // K
  double state_var = 10.0;      // K^2

  Eigen::VectorXd shifted_weight_mean() const;
  /// kappa * |weight_mean|, kept non-negative for negative weights.
  Eigen::VectorXd weight_variance() const;
  void validate() const;
};

/// S_n members stored column-wise: weights is N x S_n, states is n_cells x S_n.
struct JointEnsemble {
  Eigen::MatrixXd weights;
  Eigen::MatrixXd states;
  double time = 0.0;

  Eigen::Index size() const { return weights.cols(); }
  Eigen::VectorXd weight_mean() const { return weights.rowwise().mean(); }
  Eigen::VectorXd state_mean() const { return states.rowwise().mean(); }
};

struct MeasurementBatch {
  double time = 0.0;
  Eigen::VectorXd readings;
  std::vector<int> sensor_ids;  // layout order
};

/// Weights ~ N((1 + s) A0, diag(kappa |A0|)); states ~ N(T0, sigma_T I). Throws ConfigError if s_n < 2.
JointEnsemble init_ensemble(const PriorSpec& prior, Eigen::Index state_size, Eigen::Index s_n,
                            std::uint64_t seed);
JointEnsemble init_ensemble(const PriorSpec& prior, const RbfBasis& basis, const Grid& grid,
                            Eigen::Index s_n, std::uint64_t seed);

/// Replaces every member's weights with a fresh draw from N(center, diag(kappa |A0|)).
/// States are not touched.
void redraw_weights(JointEnsemble& ens, const Eigen::VectorXd& center, const PriorSpec& prior,
                    std::uint64_t seed, std::uint64_t draw_index);

/// Advances one member's state in place given its weights.
using Transition = std::function<void(const Eigen::Ref<const Eigen::VectorXd>& weights,
                                      Eigen::Ref<Eigen::VectorXd> state)>;

/// Advances every member by one step and adds process noise w ~ N(0, Q).
/// Weights are unchanged. Solver failures are rethrown naming the member.
void forecast(JointEnsemble& ens, const Transition& transition, const NoiseSpec& noise, double dt,
              std::uint64_t seed, std::uint64_t step_index, int workers = 1);
void forecast(JointEnsemble& ens, const HeatModel& model, const RbfBasis& basis,
              const NoiseSpec& noise, std::uint64_t seed, std::uint64_t step_index,
              int workers = 1);

struct UpdateOptions {
  double max_condition = 1e12;  // abort threshold for cond(P^y)
  bool keep_gain = false;
};

struct UpdateSummary {
  double time = 0.0;
  Eigen::VectorXd weight_mean;
  Eigen::VectorXd state_mean;
  Eigen::VectorXd weight_p05;
  Eigen::VectorXd weight_p95;
  Eigen::VectorXd predicted_mean;  // mean of the predicted observations
  double condition_number = 0.0;   // estimate of cond_1(P^y)
  double gain_residual = 0.0;      // ||K P^y - P^{psi y}||_F / ||P^{psi y}||_F
  Eigen::MatrixXd gain;            // only filled when UpdateOptions::keep_gain
};

/// One ensemble Kalman analysis of the joint (weights, state) ensemble.
///
/// Predicted observations are the observed state entries plus v ~ N(0, R) per
/// member, with v centred over the ensemble. Sample covariances use 1/S_n. The gain K = P^{psi y} (P^y)^{-1} is
/// obtained from a Cholesky solve, never an explicit inverse, and every member
/// moves by K (y - y_hat_i). Throws NumericalError when P^y is singular or its
/// condition estimate exceeds `options.max_condition`.
UpdateSummary update(JointEnsemble& ens, const MeasurementBatch& y, const NoiseSpec& noise,
                     std::span<const std::size_t> observed, std::uint64_t seed,
                     std::uint64_t step_index, const UpdateOptions& options = {});

struct ProbeSpec {
  std::size_t temperature_cell = 0;
  std::size_t flux_face = 0;
};

struct AssimilationSetup {
  PriorSpec prior;
  NoiseSpec noise;
  std::vector<std::size_t> observed_cells;
  Eigen::Index ensemble_size = 300;
  int beta_max = 1;       // analysis iterations per observation
  double obs_span = 0.4;  // s, multiple of the model dt
  double t_final = 20.0;  // s, multiple of obs_span
  std::uint64_t seed = 1;
  int workers = 1;
  ProbeSpec probes;
  bool assimilate = true;  // false: open-loop forecast, measurements ignored
  UpdateOptions update;
};

struct StepSummary {
  double time = 0.0;
  bool updated = false;
  Eigen::VectorXd weight_mean;
  Eigen::VectorXd weight_p05;
  Eigen::VectorXd weight_p95;
  Envelope probe_temperature;
  Envelope probe_flux;
  Envelope total_flux;  // sum over hot faces of flux * area, W
  double condition_number = 0.0;
  double gain_residual = 0.0;
};

struct AssimilationResult {
  std::vector<StepSummary> steps;
  /// Posterior state means at every analysis instant, in time order.
  std::vector<StateField> posterior_states;
};

/// Forecast every dt, analyse at each observation instant, until t_final.
/// Each observation cycle with a measurement redraws the weights around the
/// current posterior mean, forecasts the whole span under the redrawn weights,
/// then runs `beta_max` analyses (re-forecasting from the start of the span for
/// iterations after the first). Cycles without a measurement are plain
/// forecasts. Throws ConfigError if the schedule is inconsistent.
AssimilationResult run_assimilation(const HeatModel& model, const RbfBasis& basis,
                                    const AssimilationSetup& setup,
                                    std::span<const MeasurementBatch> measurements);

/// Number of dt steps in `span`; throws ConfigError unless span is a positive multiple of dt.
int steps_in(double span, double dt, const char* what);

}  // namespace fluxfilter
