#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <random>
#include <string>

#include "fluxfilter/config.hpp"
#include "fluxfilter/grid.hpp"
#include "fluxfilter/twin.hpp"

namespace fluxfilter::testing {

/// Fresh, empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("fluxfilter_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline Eigen::VectorXd random_vector(std::mt19937_64& rng, Eigen::Index n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::VectorXd v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

inline Grid small_grid() { return Grid({1.0, 0.04, 0.8}, {4, 3, 5}); }

inline std::string config_dir() { return FLUXFILTER_CONFIG_DIR; }

/// Default physics on a coarse grid with a short horizon; runs in well under a second.
inline RunConfig small_config() {
  RunConfig c = default_config();
  c.resolution = {10, 4, 8};
  c.sensors = {0.02, 5, 5, 0.05};
  c.t_final = 2.0;
  c.ensemble_size = 40;
  c.workers = 1;
  const Grid grid(c.extents, c.resolution);
  const Vec3 probe = default_layout(grid, c.sensors).locations[18];
  c.temperature_probe = probe;
  c.flux_probe = {probe.x, 0.0, probe.z};
  c.validate();
  return c;
}

}  // namespace fluxfilter::testing
