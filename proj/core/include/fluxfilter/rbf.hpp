#pragma once

#include <Eigen/Core>
#include <span>
#include <string>
#include <vector>

#include "fluxfilter/forward_model.hpp"
#include "fluxfilter/grid.hpp"

namespace fluxfilter {

enum class KernelKind { Gaussian, Multiquadric };

std::string to_string(KernelKind kind);
/// Accepts "gaussian" or "multiquadric" (case-insensitive). Throws ConfigError otherwise.
KernelKind parse_kernel_kind(const std::string& text);

struct KernelSpec {
  KernelKind kind = KernelKind::Multiquadric;
  double eta = 3.0;  // shape parameter, shared by every kernel

  bool operator==(const KernelSpec&) const = default;
};

/// Gaussian: exp(-(eta r)^2). Multiquadric: sqrt(1 + (eta r)^2).
double eval_kernel(const KernelSpec& spec, double r);

struct WeightVector {
  Eigen::VectorXd values;
  double time = 0.0;
};

/// Kernel centres on the hot face and the N x M basis matrix over hot-face centroids.
class RbfBasis {
 public:
  RbfBasis(std::vector<Vec3> centers, KernelSpec spec, Eigen::MatrixXd phi);

  const std::vector<Vec3>& centers() const { return centers_; }
  const KernelSpec& spec() const { return spec_; }
  /// Row j holds kernel j evaluated at every hot-face centroid.
  const Eigen::MatrixXd& phi() const { return phi_; }
  Eigen::Index size() const { return phi_.rows(); }
  Eigen::Index face_count() const { return phi_.cols(); }

  /// Flux per face for a single weight vector without allocating a FluxField.
  Eigen::VectorXd flux(const Eigen::Ref<const Eigen::VectorXd>& weights) const;

 private:
  std::vector<Vec3> centers_;
  KernelSpec spec_;
  Eigen::MatrixXd phi_;
};

/// Throws ConfigError when a centre is off the y = 0 plane, duplicated, outside the
/// hot face, or when there are more centres than hot faces.
RbfBasis build_basis(std::vector<Vec3> centers, const Grid& grid, const KernelSpec& spec);

FluxField reconstruct_flux(const WeightVector& weights, const RbfBasis& basis);

struct Projection {
  WeightVector weights;
  double residual = 0.0;          // ||phi^T w - g||_2
  double reciprocal_condition = 0.0;  // of phi phi^T
};

/// Least-squares weights via the normal equations (phi phi^T) w = phi g, Cholesky
/// factored, with iterative refinement on the residual g - phi^T w.
/// Throws NumericalError when phi phi^T is numerically singular.
Projection project_flux(const FluxField& target, const RbfBasis& basis);

/// Sensors nearest the normalised (x, z) positions (1/4,1/4), (1/4,3/4),
/// (3/4,1/4), (3/4,3/4) and (1/2,1/2), projected onto the hot face. Ties go to
/// the lower sensor index.
std::vector<Vec3> default_centers(const Grid& grid, std::span<const Vec3> sensors);

}  // namespace fluxfilter
