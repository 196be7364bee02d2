#include "fluxfilter/filter.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "fluxfilter/errors.hpp"
#include "fluxfilter/random.hpp"

namespace fluxfilter {

NoiseSpec NoiseSpec::isotropic(double q, Eigen::Index state_size, double r,
                               Eigen::Index sensor_count) {
  return {Eigen::VectorXd::Constant(state_size, q), Eigen::VectorXd::Constant(sensor_count, r)};
}

void NoiseSpec::validate() const {
  if (!q_diag.allFinite() || (q_diag.array() < 0.0).any()) {
    throw ConfigError("process noise variances must be finite and >= 0");
  }
  if (!r_diag.allFinite() || (r_diag.array() < 0.0).any()) {
    throw ConfigError("measurement noise variances must be finite and >= 0");
  }
}

Eigen::VectorXd PriorSpec::shifted_weight_mean() const { return (1.0 + shift) * weight_mean; }

Eigen::VectorXd PriorSpec::weight_variance() const { return kappa * weight_mean.cwiseAbs(); }

void PriorSpec::validate() const {
  if (!(kappa >= 0.0) || !std::isfinite(kappa)) throw ConfigError("prior kappa must be >= 0");
  if (!(state_var >= 0.0) || !std::isfinite(state_var)) {
    throw ConfigError("prior state variance must be >= 0");
  }
  if (!std::isfinite(shift) || !std::isfinite(state_mean) || !weight_mean.allFinite()) {
    throw ConfigError("prior means and shift must be finite");
  }
}

JointEnsemble init_ensemble(const PriorSpec& prior, Eigen::Index state_size, Eigen::Index s_n,
                            std::uint64_t seed) {
  if (s_n < 2) throw ConfigError("ensemble needs at least 2 members, got " + std::to_string(s_n));
  prior.validate();
  const Eigen::Index n_w = prior.weight_mean.size();
  JointEnsemble ens{Eigen::MatrixXd(n_w, s_n), Eigen::MatrixXd(state_size, s_n), 0.0};
  const Eigen::VectorXd w_mean = prior.shifted_weight_mean();
  const Eigen::VectorXd w_var = prior.weight_variance();
  const Eigen::VectorXd x_mean = Eigen::VectorXd::Constant(state_size, prior.state_mean);
  const Eigen::VectorXd x_var = Eigen::VectorXd::Constant(state_size, prior.state_var);
  for (Eigen::Index i = 0; i < s_n; ++i) {
    auto wgen = make_engine(seed, Stream::PriorWeights, 0, static_cast<std::uint64_t>(i));
    fill_gaussian(wgen, w_mean, w_var, ens.weights.col(i));
    auto xgen = make_engine(seed, Stream::PriorState, 0, static_cast<std::uint64_t>(i));
    fill_gaussian(xgen, x_mean, x_var, ens.states.col(i));
  }
  return ens;
}

JointEnsemble init_ensemble(const PriorSpec& prior, const RbfBasis& basis, const Grid& grid,
                            Eigen::Index s_n, std::uint64_t seed) {
  if (prior.weight_mean.size() != basis.size()) {
    throw ConfigError("prior weight mean has " + std::to_string(prior.weight_mean.size()) +
                      " entries, basis has " + std::to_string(basis.size()));
  }
  return init_ensemble(prior, static_cast<Eigen::Index>(grid.cell_count()), s_n, seed);
}

void redraw_weights(JointEnsemble& ens, const Eigen::VectorXd& center, const PriorSpec& prior,
                    std::uint64_t seed, std::uint64_t draw_index) {
  const Eigen::VectorXd var = prior.weight_variance();
  for (Eigen::Index i = 0; i < ens.size(); ++i) {
    auto gen = make_engine(seed, Stream::WeightRedraw, draw_index, static_cast<std::uint64_t>(i));
    fill_gaussian(gen, center, var, ens.weights.col(i));
  }
}

void forecast(JointEnsemble& ens, const Transition& transition, const NoiseSpec& noise, double dt,
              std::uint64_t seed, std::uint64_t step_index, int workers) {
  if (!(dt > 0.0)) throw ConfigError("forecast time step must be > 0");
  if (noise.q_diag.size() != ens.states.rows()) {
    throw ConfigError("process noise has " + std::to_string(noise.q_diag.size()) +
                      " entries, state has " + std::to_string(ens.states.rows()));
  }
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(ens.states.rows());
  parallel_for(static_cast<std::size_t>(ens.size()), workers, [&](std::size_t member) {
    const auto i = static_cast<Eigen::Index>(member);
    try {
      transition(ens.weights.col(i), ens.states.col(i));
    } catch (const NumericalError& e) {
      throw NumericalError("forecast of member " + std::to_string(member) + " failed: " + e.what());
    }
    auto gen = make_engine(seed, Stream::ProcessNoise, step_index, member);
    Eigen::VectorXd w(ens.states.rows());
    fill_gaussian(gen, zero, noise.q_diag, w);
    ens.states.col(i) += w;
  });
  ens.time += dt;
}

void forecast(JointEnsemble& ens, const HeatModel& model, const RbfBasis& basis,
              const NoiseSpec& noise, std::uint64_t seed, std::uint64_t step_index, int workers) {
  const Transition transition = [&](const Eigen::Ref<const Eigen::VectorXd>& weights,
                                    Eigen::Ref<Eigen::VectorXd> state) {
    model.advance(state, basis.flux(weights));
  };
  forecast(ens, transition, noise, model.dt(), seed, step_index, workers);
}

UpdateSummary update(JointEnsemble& ens, const MeasurementBatch& y, const NoiseSpec& noise,
                     std::span<const std::size_t> observed, std::uint64_t seed,
                     std::uint64_t step_index, const UpdateOptions& options) {
  const Eigen::Index s_n = ens.size();
  const Eigen::Index n_w = ens.weights.rows();
  const Eigen::Index n_x = ens.states.rows();
  const auto m = static_cast<Eigen::Index>(observed.size());
  if (y.readings.size() != m || noise.r_diag.size() != m) {
    throw ConfigError("measurement batch at t=" + std::to_string(y.time) + " has " +
                      std::to_string(y.readings.size()) + " readings; expected " +
                      std::to_string(m) + " (R has " + std::to_string(noise.r_diag.size()) + ")");
  }
  if (!y.readings.allFinite()) {
    throw ConfigError("measurement batch at t=" + std::to_string(y.time) + " is not finite");
  }

  // Predicted observations y_hat_i = Theta(psi_i) + v_i. The perturbations are
  // centred over the members so the mean moves by exactly K (y - Theta(psi_mean)).
  Eigen::MatrixXd predicted(m, s_n);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(m);
  for (Eigen::Index i = 0; i < s_n; ++i) {
    auto gen = make_engine(seed, Stream::ObservationNoise, step_index, static_cast<std::uint64_t>(i));
    fill_gaussian(gen, zero, noise.r_diag, predicted.col(i));
  }
  predicted.colwise() -= Eigen::VectorXd(predicted.rowwise().mean());
  for (Eigen::Index i = 0; i < s_n; ++i) {
    for (Eigen::Index s = 0; s < m; ++s) {
      const auto cell = static_cast<Eigen::Index>(observed[static_cast<std::size_t>(s)]);
      if (cell >= n_x) throw ConfigError("observed state index out of range");
      predicted(s, i) += ens.states(cell, i);
    }
  }

  Eigen::MatrixXd psi(n_w + n_x, s_n);
  psi.topRows(n_w) = ens.weights;
  psi.bottomRows(n_x) = ens.states;

  const Eigen::VectorXd psi_mean = psi.rowwise().mean();
  const Eigen::VectorXd y_mean = predicted.rowwise().mean();
  const Eigen::MatrixXd psi_dev = psi.colwise() - psi_mean;
  const Eigen::MatrixXd y_dev = predicted.colwise() - y_mean;
  const double inv_n = 1.0 / static_cast<double>(s_n);

  const Eigen::MatrixXd p_y = inv_n * (y_dev * y_dev.transpose());
  const Eigen::MatrixXd p_psi_y = inv_n * (psi_dev * y_dev.transpose());

  const Eigen::LLT<Eigen::MatrixXd> llt(p_y);
  const double rcond = llt.info() == Eigen::Success ? llt.rcond() : 0.0;
  const double condition = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
  if (!(condition <= options.max_condition)) {
    throw NumericalError("observation covariance P^y is ill-conditioned at t=" +
                         std::to_string(y.time) + ": condition estimate " +
                         std::to_string(condition) + " exceeds " +
                         std::to_string(options.max_condition) + " (S_n=" + std::to_string(s_n) +
                         ", sensors=" + std::to_string(m) + ")");
  }

  // K^T = (P^y)^{-1} (P^{psi y})^T since P^y is symmetric.
  const Eigen::MatrixXd gain = llt.solve(p_psi_y.transpose()).transpose();
  const Eigen::MatrixXd innovations = (-predicted).colwise() + y.readings;
  psi.noalias() += gain * innovations;
  if (!psi.allFinite()) throw NumericalError("ensemble update produced non-finite values");

  ens.weights = psi.topRows(n_w);
  ens.states = psi.bottomRows(n_x);

  UpdateSummary out;
  out.time = y.time;
  out.weight_mean = ens.weight_mean();
  out.state_mean = ens.state_mean();
  out.weight_p05.resize(n_w);
  out.weight_p95.resize(n_w);
  for (Eigen::Index j = 0; j < n_w; ++j) {
    const Eigen::VectorXd row = ens.weights.row(j).transpose();
    out.weight_p05[j] = percentile(row, 0.05);
    out.weight_p95[j] = percentile(row, 0.95);
  }
  out.predicted_mean = y_mean;
  out.condition_number = condition;
  const double scale = p_psi_y.norm();
  out.gain_residual = scale > 0.0 ? (gain * p_y - p_psi_y).norm() / scale : (gain * p_y).norm();
  if (options.keep_gain) out.gain = gain;
  return out;
}

int steps_in(double span, double dt, const char* what) {
  if (!(span > 0.0) || !(dt > 0.0)) {
    throw ConfigError(std::string(what) + " and dt must be > 0");
  }
  const double ratio = span / dt;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
    throw ConfigError(std::string(what) + " (" + std::to_string(span) +
                      " s) is not a positive multiple of dt (" + std::to_string(dt) + " s)");
  }
  return static_cast<int>(rounded);
}

namespace {

struct ProbeWeights {
  Eigen::VectorXd flux_row;   // phi column of the probe face
  Eigen::VectorXd total_row;  // phi * face areas
};

StepSummary summarize(const JointEnsemble& ens, const ProbeWeights& probe, const ProbeSpec& spec) {
  StepSummary s;
  s.time = ens.time;
  s.weight_mean = ens.weight_mean();
  s.weight_p05.resize(ens.weights.rows());
  s.weight_p95.resize(ens.weights.rows());
  for (Eigen::Index j = 0; j < ens.weights.rows(); ++j) {
    const Eigen::VectorXd row = ens.weights.row(j).transpose();
    s.weight_p05[j] = percentile(row, 0.05);
    s.weight_p95[j] = percentile(row, 0.95);
  }
  s.probe_temperature =
      envelope(ens.states.row(static_cast<Eigen::Index>(spec.temperature_cell)).transpose());
  s.probe_flux = envelope(ens.weights.transpose() * probe.flux_row);
  s.total_flux = envelope(ens.weights.transpose() * probe.total_row);
  return s;
}

}  // namespace

AssimilationResult run_assimilation(const HeatModel& model, const RbfBasis& basis,
                                    const AssimilationSetup& setup,
                                    std::span<const MeasurementBatch> measurements) {
  const double dt = model.dt();
  const int per_obs = steps_in(setup.obs_span, dt, "observation span");
  const int total = steps_in(setup.t_final, dt, "final time");
  if (total % per_obs != 0) {
    throw ConfigError("final time is not a multiple of the observation span");
  }
  if (setup.beta_max < 1) throw ConfigError("beta_max must be >= 1");
  setup.noise.validate();
  const Grid& grid = model.grid();
  if (setup.probes.temperature_cell >= grid.cell_count() ||
      setup.probes.flux_face >= grid.hot_faces().size()) {
    throw ConfigError("probe index out of range");
  }

  std::map<int, const MeasurementBatch*> schedule;
  for (const auto& batch : measurements) {
    const double ratio = batch.time / dt;
    const int step = static_cast<int>(std::lround(ratio));
    if (std::abs(ratio - step) > 1e-6 || step < 1 || step > total || step % per_obs != 0) {
      throw ConfigError("measurement at t=" + std::to_string(batch.time) +
                        " does not fall on an observation instant (span " +
                        std::to_string(setup.obs_span) + " s, dt " + std::to_string(dt) + " s)");
    }
    if (!schedule.emplace(step, &batch).second) {
      throw ConfigError("duplicate measurement batch at t=" + std::to_string(batch.time));
    }
  }

  ProbeWeights probe;
  probe.flux_row = basis.phi().col(static_cast<Eigen::Index>(setup.probes.flux_face));
  Eigen::VectorXd areas(basis.face_count());
  for (Eigen::Index f = 0; f < areas.size(); ++f) {
    areas[f] = grid.hot_faces()[static_cast<std::size_t>(f)].area;
  }
  probe.total_row = basis.phi() * areas;

  JointEnsemble ens =
      init_ensemble(setup.prior, basis, grid, setup.ensemble_size, setup.seed);
  Eigen::VectorXd center = setup.prior.shifted_weight_mean();

  AssimilationResult result;
  result.steps.reserve(static_cast<std::size_t>(total));
  const int cycles = total / per_obs;
  for (int cycle = 0; cycle < cycles; ++cycle) {
    const int obs_step = (cycle + 1) * per_obs;
    const auto found = schedule.find(obs_step);
    const MeasurementBatch* batch =
        (setup.assimilate && found != schedule.end()) ? found->second : nullptr;
    const int iterations = batch ? setup.beta_max : 1;
    const JointEnsemble start = iterations > 1 ? ens : JointEnsemble{};

    std::vector<StepSummary> cycle_steps;
    for (int beta = 0; beta < iterations; ++beta) {
      if (beta > 0) ens = start;
      const auto draw = static_cast<std::uint64_t>(cycle) * 64u + static_cast<std::uint64_t>(beta);
      if (batch) redraw_weights(ens, center, setup.prior, setup.seed, draw);
      cycle_steps.clear();
      for (int s = 0; s < per_obs; ++s) {
        const auto global = static_cast<std::uint64_t>(cycle * per_obs + s);
        forecast(ens, model, basis, setup.noise, setup.seed, global * 64u + beta, setup.workers);
        ens.time = static_cast<double>(global + 1) * dt;
        cycle_steps.push_back(summarize(ens, probe, setup.probes));
      }
      if (batch) {
        const UpdateSummary u = update(ens, *batch, setup.noise, setup.observed_cells, setup.seed,
                                       static_cast<std::uint64_t>(obs_step) * 64u + beta,
                                       setup.update);
        center = u.weight_mean;
        StepSummary& last = cycle_steps.back();
        last = summarize(ens, probe, setup.probes);
        last.updated = true;
        last.condition_number = u.condition_number;
        last.gain_residual = u.gain_residual;
      }
    }
    if (batch) result.posterior_states.push_back({ens.state_mean(), ens.time});
    for (auto& s : cycle_steps) result.steps.push_back(std::move(s));
  }
  return result;
}

}  // namespace fluxfilter
