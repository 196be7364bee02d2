#pragma once

#include <Eigen/Core>
#include <span>
#include <string>
#include <vector>

#include "fluxfilter/forward_model.hpp"
#include "fluxfilter/grid.hpp"
#include "fluxfilter/stats.hpp"

namespace fluxfilter {

/// L2: mean over time of ||g_hat_t - g_t||_2 / ||g_t||_2 over hot faces.
/// MeanAbs: mean over time of mean_f |g_hat - g| / mean_f |g|.
enum class ErrorNorm { L2, MeanAbs };

std::string to_string(ErrorNorm norm);
ErrorNorm parse_error_norm(const std::string& text);

/// Relative error at each instant. Throws ConfigError on mismatched sizes or
/// time stamps, and on an identically zero reference at any instant.
std::vector<double> relative_errors(std::span<const FluxField> estimated,
                                    std::span<const FluxField> truth, ErrorNorm norm = ErrorNorm::L2);

double spatiotemporal_error(std::span<const FluxField> estimated, std::span<const FluxField> truth,
                            ErrorNorm norm = ErrorNorm::L2);

/// Area-weighted sum of the hot-face flux (W) per instant.
std::vector<double> total_flux_series(const Grid& grid, std::span<const FluxField> series);

/// Fraction of instants where truth lies inside [p05, p95].
double coverage_fraction(std::span<const Envelope> envelopes, std::span<const double> truth);

}  // namespace fluxfilter
