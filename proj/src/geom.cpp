#include "costalign/geom.hpp"

#include "costalign/error.hpp"

#include <algorithm>
#include <cmath>

namespace costalign {

void PointCloud::push_back(const Point3& p, int lab) {
  if (labels.size() == points.size() && (!labels.empty() || lab != label::kUnassigned)) {
    labels.push_back(lab);
  } else if (lab != label::kUnassigned) {
    labels.assign(points.size(), label::kUnassigned);
    labels.push_back(lab);
  }
  points.push_back(p);
}

PointCloud PointCloud::subset_with_label(int lab) const {
  PointCloud out;
  if (labels.empty()) return out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (labels[i] == lab) {
      out.points.push_back(points[i]);
      out.labels.push_back(lab);
    }
  }
  return out;
}

void PointCloud::validate() const {
  if (!labels.empty() && labels.size() != points.size()) {
    throw Error(ErrorCode::InvalidParams, "label count does not match point count");
  }
  for (const auto& p : points) {
    if (!p.allFinite()) throw Error(ErrorCode::InvalidParams, "non-finite coordinate");
  }
  for (int l : labels) {
    if (l < label::kUnassigned || l > label::kMaxBranch) {
      throw Error(ErrorCode::InvalidParams, "label out of range",
                  {{"label", std::to_string(l)}});
    }
  }
}

RigidTransform RigidTransform::compose(const RigidTransform& rhs) const {
  RigidTransform out;
  out.rotation = rotation * rhs.rotation;
  out.translation = rotation * rhs.translation + translation;
  return out;
}

RigidTransform RigidTransform::inverse() const {
  RigidTransform out;
  out.rotation = rotation.transpose();
  out.translation = -(out.rotation * translation);
  return out;
}

bool RigidTransform::is_valid(double tol) const {
  if (!rotation.allFinite() || !translation.allFinite()) return false;
  const double ortho = (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  return ortho <= tol && std::abs(rotation.determinant() - 1.0) <= tol;
}

Point3 centroid(std::span<const Point3> points) {
  if (points.empty()) throw Error(ErrorCode::EmptyInput, "centroid of empty point set");
  Point3 sum = Point3::Zero();
  for (const auto& p : points) sum += p;
  return sum / static_cast<double>(points.size());
}

Point3 centroid(const PointCloud& cloud) { return centroid(std::span<const Point3>(cloud.points)); }

RigidTransform fit_rigid(std::span<const Point3> source, std::span<const Point3> target) {
  if (source.size() != target.size()) {
    throw Error(ErrorCode::PairMismatch, "source and target point counts differ",
                {{"source", std::to_string(source.size())}, {"target", std::to_string(target.size())}});
  }
  if (source.size() < 3) {
    throw Error(ErrorCode::DegenerateGeometry, "rigid fit needs at least 3 pairs");
  }
  const Point3 cs = centroid(source);
  const Point3 ct = centroid(target);

  Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d cross = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < source.size(); ++i) {
    const Eigen::Vector3d a = source[i] - cs;
    const Eigen::Vector3d b = target[i] - ct;
    scatter += a * a.transpose();
    cross += a * b.transpose();
  }

  // Rank of the centered source must be at least 2.
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(scatter);
  const Eigen::Vector3d ev = eig.eigenvalues();  // ascending
  if (!(ev(2) > 0.0) || ev(1) <= 1e-12 * ev(2)) {
    throw Error(ErrorCode::DegenerateGeometry, "source points are collinear or coincident");
  }

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Matrix3d u = svd.matrixU();
  const Eigen::Matrix3d v = svd.matrixV();
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  d(2, 2) = (v * u.transpose()).determinant() < 0.0 ? -1.0 : 1.0;

  RigidTransform out;
  out.rotation = v * d * u.transpose();
  out.translation = ct - out.rotation * cs;
  return out;
}

RigidTransform fit_rigid(const PointCloud& source, const PointCloud& target) {
  return fit_rigid(std::span<const Point3>(source.points), std::span<const Point3>(target.points));
}

double rigid_residual(const RigidTransform& t, std::span<const Point3> source,
                      std::span<const Point3> target) {
  if (source.size() != target.size()) throw Error(ErrorCode::PairMismatch, "residual of unpaired sets");
  if (source.empty()) throw Error(ErrorCode::EmptyInput, "residual of empty sets");
  double acc = 0.0;
  for (std::size_t i = 0; i < source.size(); ++i) acc += (t(source[i]) - target[i]).squaredNorm();
  return acc / static_cast<double>(source.size());
}

std::vector<Point3> apply(const RigidTransform& t, std::span<const Point3> points) {
  std::vector<Point3> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(t(p));
  return out;
}

PointCloud apply(const RigidTransform& t, const PointCloud& cloud) {
  PointCloud out;
  out.points = apply(t, std::span<const Point3>(cloud.points));
  out.labels = cloud.labels;
  return out;
}

Eigen::Matrix3d covariance(std::span<const Point3> points) {
  const Point3 c = centroid(points);
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : points) {
    const Eigen::Vector3d d = p - c;
    cov += d * d.transpose();
  }
  return cov / static_cast<double>(points.size());
}

PrincipalAxes pca_axes(std::span<const Point3> points) {
  if (points.size() < 3) throw Error(ErrorCode::DegenerateGeometry, "PCA needs at least 3 points");
  const Eigen::Matrix3d cov = covariance(points);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  if (eig.info() != Eigen::Success || !(eig.eigenvalues()(2) > 0.0)) {
    throw Error(ErrorCode::DegenerateGeometry, "covariance is zero");
  }
  PrincipalAxes out;
  out.mean = centroid(points);
  for (int k = 0; k < 3; ++k) {
    out.eigenvalues(k) = std::max(0.0, eig.eigenvalues()(2 - k));
    out.axes.col(k) = eig.eigenvectors().col(2 - k);
  }
  // Deterministic sign: largest-magnitude component positive.
  for (int k = 0; k < 2; ++k) {
    Eigen::Index idx = 0;
    out.axes.col(k).cwiseAbs().maxCoeff(&idx);
    if (out.axes(idx, k) < 0.0) out.axes.col(k) = -out.axes.col(k);
  }
  out.axes.col(2) = out.axes.col(0).cross(out.axes.col(1)).normalized();
  return out;
}

PrincipalAxes pca_axes(const PointCloud& cloud) { return pca_axes(std::span<const Point3>(cloud.points)); }

double rotation_angle(const Eigen::Matrix3d& r) {
  const double c = std::clamp((r.trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c);
}

}  // namespace costalign
