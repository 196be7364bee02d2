#include "fluxfilter/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fluxfilter/errors.hpp"

namespace fluxfilter {

double distance(const Vec3& a, const Vec3& b) {
  return std::hypot(a.x - b.x, a.y - b.y, a.z - b.z);
}

namespace {

void check_inputs(const Extents& e, const Resolution& r) {
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!positive(e.lx) || !positive(e.ly) || !positive(e.lz)) {
    throw ConfigError("grid extents must be finite and > 0, got " + std::to_string(e.lx) + " x " +
                      std::to_string(e.ly) + " x " + std::to_string(e.lz));
  }
  if (r.nx < 2 || r.ny < 2 || r.nz < 2) {
    throw ConfigError("grid needs at least 2 cells per axis, got " + std::to_string(r.nx) + " x " +
                      std::to_string(r.ny) + " x " + std::to_string(r.nz));
  }
}

int clamp_index(double coord, double spacing, int n) {
  int idx = static_cast<int>(std::floor(coord / spacing));
  return std::clamp(idx, 0, n - 1);
}

}  // namespace

Grid::Grid(Extents extents, Resolution resolution) : ext_(extents), res_(resolution) {
  check_inputs(ext_, res_);
  const double hx = dx(), hy = dy(), hz = dz();

  hot_.reserve(static_cast<std::size_t>(res_.nx) * res_.nz);
  cold_.reserve(static_cast<std::size_t>(res_.nx) * res_.nz);
  for (int k = 0; k < res_.nz; ++k) {
    for (int i = 0; i < res_.nx; ++i) {
      const double xc = (i + 0.5) * hx, zc = (k + 0.5) * hz;
      hot_.push_back({cell_index(i, 0, k), {xc, 0.0, zc}, hx * hz, {0.0, -1.0, 0.0}});
      cold_.push_back({cell_index(i, res_.ny - 1, k), {xc, ext_.ly, zc}, hx * hz, {0.0, 1.0, 0.0}});
    }
  }

  // x = 0 / x = lx sides, then z = 0 / z = lz sides.
  for (int k = 0; k < res_.nz; ++k) {
    for (int j = 0; j < res_.ny; ++j) {
      const double yc = (j + 0.5) * hy, zc = (k + 0.5) * hz;
      adiabatic_.push_back({cell_index(0, j, k), {0.0, yc, zc}, hy * hz, {-1.0, 0.0, 0.0}});
      adiabatic_.push_back(
          {cell_index(res_.nx - 1, j, k), {ext_.lx, yc, zc}, hy * hz, {1.0, 0.0, 0.0}});
    }
  }
  for (int j = 0; j < res_.ny; ++j) {
    for (int i = 0; i < res_.nx; ++i) {
      const double xc = (i + 0.5) * hx, yc = (j + 0.5) * hy;
      adiabatic_.push_back({cell_index(i, j, 0), {xc, yc, 0.0}, hx * hy, {0.0, 0.0, -1.0}});
      adiabatic_.push_back(
          {cell_index(i, j, res_.nz - 1), {xc, yc, ext_.lz}, hx * hy, {0.0, 0.0, 1.0}});
    }
  }
}

std::size_t Grid::cell_count() const {
  return static_cast<std::size_t>(res_.nx) * res_.ny * res_.nz;
}

std::size_t Grid::cell_index(int i, int j, int k) const {
  return static_cast<std::size_t>(i) +
         static_cast<std::size_t>(res_.nx) *
             (static_cast<std::size_t>(j) + static_cast<std::size_t>(res_.ny) * k);
}

Vec3 Grid::cell_center(std::size_t cell) const {
  const auto nx = static_cast<std::size_t>(res_.nx), ny = static_cast<std::size_t>(res_.ny);
  const std::size_t i = cell % nx, j = (cell / nx) % ny, k = cell / (nx * ny);
  return {(i + 0.5) * dx(), (j + 0.5) * dy(), (k + 0.5) * dz()};
}

const std::vector<BoundaryFace>& Grid::faces(FaceKind kind) const {
  switch (kind) {
    case FaceKind::Hot:
      return hot_;
    case FaceKind::Cold:
      return cold_;
    case FaceKind::Adiabatic:
      break;
  }
  return adiabatic_;
}

bool Grid::contains(const Vec3& p) const {
  return p.x >= 0.0 && p.x <= ext_.lx && p.y >= 0.0 && p.y <= ext_.ly && p.z >= 0.0 &&
         p.z <= ext_.lz;
}

std::optional<std::size_t> Grid::locate(const Vec3& p) const {
  if (!contains(p)) return std::nullopt;
  return cell_index(clamp_index(p.x, dx(), res_.nx), clamp_index(p.y, dy(), res_.ny),
                    clamp_index(p.z, dz(), res_.nz));
}

std::size_t Grid::nearest_hot_face(const Vec3& p) const {
  const int i = clamp_index(p.x, dx(), res_.nx);
  const int k = clamp_index(p.z, dz(), res_.nz);
  return static_cast<std::size_t>(i) + static_cast<std::size_t>(res_.nx) * k;
}

Grid build_grid(const Extents& extents, const Resolution& resolution) {
  return Grid(extents, resolution);
}

}  // namespace fluxfilter
