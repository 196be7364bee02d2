#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "fluxfilter/forward_model.hpp"
#include "fluxfilter/grid.hpp"
#include "fluxfilter/metrics.hpp"
#include "fluxfilter/rbf.hpp"
#include "fluxfilter/twin.hpp"

namespace fluxfilter {

/// Every hyperparameter of one twin + assimilation run.
///
/// Text form is line oriented:
///
///     # comment
///     [section]
///     key = value
///
/// Keys are unique per section, unknown sections/keys are rejected, and
/// `serialize_config` writes a canonical form (fixed key order, shortest
/// round-trip numbers) so that parse -> serialize -> parse is the identity.
struct RunConfig {
  Extents extents;
  Resolution resolution;
  MaterialProps material;
  TrueFluxSpec true_flux;
  LayoutOptions sensors;

  KernelSpec kernel;
  std::vector<Vec3> centers;  // empty: default_centers()

  double kappa = 0.2;
  double shift = 0.3;
  double state_mean = 400.0;
  double state_var = 10.0;

  double q = 0.5;
  double r = 0.034;

  int ensemble_size = 300;
  int beta_max = 1;
  double max_condition = 1e12;

  double dt = 0.2;
  double obs_span = 0.4;
  double t_final = 20.0;

  int twin_refine = 1;

  Vec3 temperature_probe{0.91, 0.02, 0.55};
  Vec3 flux_probe{0.91, 0.0, 0.55};

  ErrorNorm error_norm = ErrorNorm::L2;

  std::string sweep_parameter;
  std::vector<double> sweep_values;

  std::uint64_t seed = 20240101;
  int workers = 0;
  std::string output = "out";

  /// Checks every module precondition that can be checked without running anything.
  void validate() const;

  bool operator==(const RunConfig&) const = default;
};

/// Multiquadric optimum with the default 20 x 8 x 16 grid.
RunConfig default_config();

/// Throws ParseError (with line number) on malformed lines and ConfigError naming
/// the first missing required key.
RunConfig parse_config(std::string_view text, const std::string& source = "<config>");
RunConfig load_config(const std::filesystem::path& path);

std::string serialize_config(const RunConfig& config);
void save_config(const RunConfig& config, const std::filesystem::path& path);

/// 16 hex digits of SHA-256 over the canonical text, excluding keys that cannot
/// change results (worker count, output directory, sweep section).
std::string config_hash(const RunConfig& config);

/// Hash over the keys that determine the twin dataset only.
std::string twin_hash(const RunConfig& config);

std::string sha256_hex(std::string_view data);

}  // namespace fluxfilter
