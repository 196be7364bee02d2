#include "fluxfilter/rbf.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

#include "fluxfilter/errors.hpp"

namespace fluxfilter {

std::string to_string(KernelKind kind) {
  return kind == KernelKind::Gaussian ? "gaussian" : "multiquadric";
}

KernelKind parse_kernel_kind(const std::string& text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "gaussian") return KernelKind::Gaussian;
  if (lower == "multiquadric") return KernelKind::Multiquadric;
  throw ConfigError("unknown kernel '" + text + "' (expected gaussian or multiquadric)");
}

double eval_kernel(const KernelSpec& spec, double r) {
  const double s = spec.eta * r;
  switch (spec.kind) {
    case KernelKind::Gaussian:
      return std::exp(-s * s);
    case KernelKind::Multiquadric:
      break;
  }
  return std::sqrt(1.0 + s * s);
}

RbfBasis::RbfBasis(std::vector<Vec3> centers, KernelSpec spec, Eigen::MatrixXd phi)
    : centers_(std::move(centers)), spec_(spec), phi_(std::move(phi)) {}

Eigen::VectorXd RbfBasis::flux(const Eigen::Ref<const Eigen::VectorXd>& weights) const {
  return phi_.transpose() * weights;
}

RbfBasis build_basis(std::vector<Vec3> centers, const Grid& grid, const KernelSpec& spec) {
  if (!(spec.eta > 0.0) || !std::isfinite(spec.eta)) {
    throw ConfigError("kernel shape parameter eta must be > 0, got " + std::to_string(spec.eta));
  }
  const auto& faces = grid.hot_faces();
  if (centers.empty()) throw ConfigError("at least one RBF centre is required");
  if (centers.size() > faces.size()) {
    throw ConfigError("more RBF centres (" + std::to_string(centers.size()) + ") than hot faces (" +
                      std::to_string(faces.size()) + ")");
  }
  constexpr double plane_tol = 1e-12;
  for (std::size_t j = 0; j < centers.size(); ++j) {
    const auto& c = centers[j];
    if (std::abs(c.y) > plane_tol || c.x < 0.0 || c.x > grid.extents().lx || c.z < 0.0 ||
        c.z > grid.extents().lz) {
      throw ConfigError("RBF centre " + std::to_string(j) + " is not on the hot face (y = 0)");
    }
    for (std::size_t other = 0; other < j; ++other) {
      if (distance(c, centers[other]) < 1e-12) {
        throw ConfigError("RBF centres " + std::to_string(other) + " and " + std::to_string(j) +
                          " coincide; the basis would be rank deficient");
      }
    }
  }

  Eigen::MatrixXd phi(static_cast<Eigen::Index>(centers.size()),
                      static_cast<Eigen::Index>(faces.size()));
  for (std::size_t j = 0; j < centers.size(); ++j) {
    for (std::size_t f = 0; f < faces.size(); ++f) {
      phi(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(f)) =
          eval_kernel(spec, distance(faces[f].centroid, centers[j]));
    }
  }
  return RbfBasis(std::move(centers), spec, std::move(phi));
}

FluxField reconstruct_flux(const WeightVector& weights, const RbfBasis& basis) {
  if (weights.values.size() != basis.size()) {
    throw ConfigError("weight vector has " + std::to_string(weights.values.size()) +
                      " entries, basis has " + std::to_string(basis.size()) + " kernels");
  }
  return {basis.flux(weights.values), weights.time};
}

Projection project_flux(const FluxField& target, const RbfBasis& basis) {
  if (target.values.size() != basis.face_count()) {
    throw ConfigError("flux has " + std::to_string(target.values.size()) + " faces, basis has " +
                      std::to_string(basis.face_count()));
  }
  const Eigen::MatrixXd& phi = basis.phi();
  const Eigen::MatrixXd gram = phi * phi.transpose();
  const Eigen::LLT<Eigen::MatrixXd> llt(gram);
  const double rcond = llt.info() == Eigen::Success ? llt.rcond() : 0.0;
  if (!(rcond > 16.0 * std::numeric_limits<double>::epsilon())) {
    throw NumericalError("RBF Gram matrix phi phi^T is singular (reciprocal condition " +
                         std::to_string(rcond) + "); reduce eta overlap or move centres apart");
  }
  Projection out;
  out.weights.values = llt.solve(phi * target.values);
  // Refinement on the true residual recovers the accuracy the Gram matrix squares away.
  for (int iter = 0; iter < 4; ++iter) {
    const Eigen::VectorXd correction =
        llt.solve(phi * (target.values - phi.transpose() * out.weights.values));
    out.weights.values += correction;
    if (correction.norm() <= std::numeric_limits<double>::epsilon() * out.weights.values.norm()) break;
  }
  out.weights.time = target.time;
  out.residual = (phi.transpose() * out.weights.values - target.values).norm();
  out.reciprocal_condition = rcond;
  return out;
}

std::vector<Vec3> default_centers(const Grid& grid, std::span<const Vec3> sensors) {
  if (sensors.empty()) throw ConfigError("default RBF centres need a sensor layout");
  constexpr double anchors[5][2] = {{0.25, 0.25}, {0.25, 0.75}, {0.75, 0.25}, {0.75, 0.75},
                                    {0.5, 0.5}};
  const double lx = grid.extents().lx, lz = grid.extents().lz;
  std::vector<Vec3> centers;
  for (const auto& a : anchors) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < sensors.size(); ++s) {
      const double d = std::hypot(sensors[s].x / lx - a[0], sensors[s].z / lz - a[1]);
      if (d < best_d - 1e-12) {
        best_d = d;
        best = s;
      }
    }
    centers.push_back({sensors[best].x, 0.0, sensors[best].z});
  }
  return centers;
}

}  // namespace fluxfilter
