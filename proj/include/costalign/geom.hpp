#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace costalign {

/// Millimetre coordinates.
using Point3 = Eigen::Vector3d;

namespace label {
inline constexpr int kUnassigned = -1;
inline constexpr int kSternum = 0;
inline constexpr int kMaxBranch = 8;
}  // namespace label

/// Ordered points with optional per-point branch labels. When `labels` is
/// non-empty it is index-aligned with `points`.
struct PointCloud {
  std::vector<Point3> points;
  std::vector<int> labels;

  std::size_t size() const noexcept { return points.size(); }
  bool empty() const noexcept { return points.empty(); }
  bool has_labels() const noexcept { return !labels.empty(); }
  int label_at(std::size_t i) const { return labels.empty() ? label::kUnassigned : labels[i]; }

  void push_back(const Point3& p, int lab = label::kUnassigned);

  /// Points carrying `lab`, labels preserved.
  PointCloud subset_with_label(int lab) const;
  /// Throws InvalidParams when a label is outside [-1, 8] or a coordinate is not finite.
  void validate() const;
};

struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static RigidTransform identity() { return {}; }

  Point3 operator()(const Point3& p) const { return rotation * p + translation; }
  /// (*this) ∘ rhs: apply rhs first.
  RigidTransform compose(const RigidTransform& rhs) const;
  RigidTransform inverse() const;
  /// Orthonormality and det(R) = +1, both within `tol`.
  bool is_valid(double tol = 1e-9) const;
};

struct PrincipalAxes {
  /// Columns are unit axes ordered by descending eigenvalue; right-handed.
  Eigen::Matrix3d axes;
  Eigen::Vector3d eigenvalues;
  Point3 mean;
};

Point3 centroid(const PointCloud& cloud);
Point3 centroid(std::span<const Point3> points);

/// Least-squares rigid fit mapping source[i] onto target[i] (SVD of the
/// cross-covariance with reflection correction).
RigidTransform fit_rigid(std::span<const Point3> source, std::span<const Point3> target);
RigidTransform fit_rigid(const PointCloud& source, const PointCloud& target);

/// Mean squared paired distance ||T(source[i]) - target[i]||^2.
double rigid_residual(const RigidTransform& t, std::span<const Point3> source,
                      std::span<const Point3> target);

PointCloud apply(const RigidTransform& t, const PointCloud& cloud);
std::vector<Point3> apply(const RigidTransform& t, std::span<const Point3> points);

/// Population covariance of the points.
Eigen::Matrix3d covariance(std::span<const Point3> points);

PrincipalAxes pca_axes(const PointCloud& cloud);
PrincipalAxes pca_axes(std::span<const Point3> points);

/// Rotation angle of R in radians.
double rotation_angle(const Eigen::Matrix3d& r);

}  // namespace costalign
