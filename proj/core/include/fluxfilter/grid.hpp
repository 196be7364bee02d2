#pragma once

#include <cstddef>
#include <optional>
#include <vector>

namespace fluxfilter {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  bool operator==(const Vec3&) const = default;
};

double distance(const Vec3& a, const Vec3& b);

struct Extents {
  double lx = 1.0;
  double ly = 0.04;
  double lz = 0.8;

  bool operator==(const Extents&) const = default;
};

struct Resolution {
  int nx = 20;
  int ny = 8;
  int nz = 16;

  bool operator==(const Resolution&) const = default;
};

enum class FaceKind { Hot, Cold, Adiabatic };

struct BoundaryFace {
  std::size_t cell = 0;
  Vec3 centroid;
  double area = 0.0;
  Vec3 normal;  // outward unit normal
};

/// Uniform structured hexahedral mesh of the mold slab.
///
/// Cells are indexed `i + nx * (j + ny * k)` with i along x, j across the
/// thickness (y) and k along z. The hot face is the y = 0 plane, the cold
/// (water-cooled) face the y = ly plane; the four remaining sides are
/// adiabatic. Hot faces are ordered with i fastest, so hot face id
/// `i + nx * k` sits under cell (i, 0, k).
class Grid {
 public:
  Grid(Extents extents, Resolution resolution);

  int nx() const { return res_.nx; }
  int ny() const { return res_.ny; }
  int nz() const { return res_.nz; }
  const Extents& extents() const { return ext_; }
  const Resolution& resolution() const { return res_; }

  double dx() const { return ext_.lx / res_.nx; }
  double dy() const { return ext_.ly / res_.ny; }
  double dz() const { return ext_.lz / res_.nz; }

  std::size_t cell_count() const;
  std::size_t cell_index(int i, int j, int k) const;
  Vec3 cell_center(std::size_t cell) const;
  double cell_volume() const { return dx() * dy() * dz(); }

  const std::vector<BoundaryFace>& hot_faces() const { return hot_; }
  const std::vector<BoundaryFace>& cold_faces() const { return cold_; }
  const std::vector<BoundaryFace>& adiabatic_faces() const { return adiabatic_; }
  const std::vector<BoundaryFace>& faces(FaceKind kind) const;

  bool contains(const Vec3& p) const;

  /// Cell whose box contains p (closed on the domain boundary), or nullopt outside Ω.
  std::optional<std::size_t> locate(const Vec3& p) const;

  /// Hot face whose centroid is nearest to p in the (x, z) plane.
  std::size_t nearest_hot_face(const Vec3& p) const;

 private:
  Extents ext_;
  Resolution res_;
  std::vector<BoundaryFace> hot_;
  std::vector<BoundaryFace> cold_;
  std::vector<BoundaryFace> adiabatic_;
};

/// Throws ConfigError on non-positive extents or fewer than two cells per axis.
Grid build_grid(const Extents& extents, const Resolution& resolution);

}  // namespace fluxfilter
