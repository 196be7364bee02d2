#include "fluxfilter/metrics.hpp"

#include <cmath>
#include <numeric>

#include "fluxfilter/errors.hpp"

namespace fluxfilter {

std::string to_string(ErrorNorm norm) { return norm == ErrorNorm::L2 ? "l2" : "mean_abs"; }

ErrorNorm parse_error_norm(const std::string& text) {
  if (text == "l2") return ErrorNorm::L2;
  if (text == "mean_abs") return ErrorNorm::MeanAbs;
  throw ConfigError("unknown error norm '" + text + "' (expected l2 or mean_abs)");
}

std::vector<double> relative_errors(std::span<const FluxField> estimated,
                                    std::span<const FluxField> truth, ErrorNorm norm) {
  if (estimated.size() != truth.size() || truth.empty()) {
    throw ConfigError("error metric needs matching, non-empty series (got " +
                      std::to_string(estimated.size()) + " estimates, " +
                      std::to_string(truth.size()) + " references)");
  }
  std::vector<double> out;
  out.reserve(truth.size());
  for (std::size_t t = 0; t < truth.size(); ++t) {
    const auto& g = truth[t].values;
    const auto& g_hat = estimated[t].values;
    if (g.size() != g_hat.size()) throw ConfigError("error metric: face sets differ");
    if (std::abs(truth[t].time - estimated[t].time) > 1e-9 * std::max(1.0, truth[t].time)) {
      throw ConfigError("error metric: time stamps differ at index " + std::to_string(t));
    }
    const double denom = norm == ErrorNorm::L2 ? g.norm() : g.cwiseAbs().sum();
    if (!(denom > 0.0)) {
      throw ConfigError("error metric undefined: reference flux is zero at t=" +
                        std::to_string(truth[t].time));
    }
    const double num = norm == ErrorNorm::L2 ? (g_hat - g).norm() : (g_hat - g).cwiseAbs().sum();
    out.push_back(num / denom);
  }
  return out;
}

double spatiotemporal_error(std::span<const FluxField> estimated, std::span<const FluxField> truth,
                            ErrorNorm norm) {
  const auto errs = relative_errors(estimated, truth, norm);
  return std::accumulate(errs.begin(), errs.end(), 0.0) / static_cast<double>(errs.size());
}

std::vector<double> total_flux_series(const Grid& grid, std::span<const FluxField> series) {
  const auto& faces = grid.hot_faces();
  std::vector<double> out;
  out.reserve(series.size());
  for (const auto& field : series) {
    if (field.values.size() != static_cast<Eigen::Index>(faces.size())) {
      throw ConfigError("flux field does not match the hot face count");
    }
    double total = 0.0;
    for (std::size_t f = 0; f < faces.size(); ++f) {
      total += faces[f].area * field.values[static_cast<Eigen::Index>(f)];
    }
    out.push_back(total);
  }
  return out;
}

double coverage_fraction(std::span<const Envelope> envelopes, std::span<const double> truth) {
  if (envelopes.size() != truth.size() || truth.empty()) {
    throw ConfigError("coverage needs envelopes and truth aligned in time");
  }
  std::size_t inside = 0;
  for (std::size_t t = 0; t < truth.size(); ++t) {
    if (truth[t] >= envelopes[t].p05 && truth[t] <= envelopes[t].p95) ++inside;
  }
  return static_cast<double>(inside) / static_cast<double>(truth.size());
}

}  // namespace fluxfilter
