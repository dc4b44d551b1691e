#include "costalign/synth.hpp"

#include "costalign/error.hpp"
#include "costalign/kdtree.hpp"
#include "costalign/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace costalign::synth {

void DeformParams::validate() const {
  if (!(global_scale > 0.0)) throw Error(ErrorCode::InvalidParams, "global_scale must be > 0");
  if (!(outlier_fraction >= 0.0 && outlier_fraction < 0.5)) {
    throw Error(ErrorCode::InvalidParams, "outlier_fraction must lie in [0, 0.5)");
  }
  if (bend_amplitude < 0.0 || per_branch_jitter < 0.0 || noise_sigma < 0.0) {
    throw Error(ErrorCode::InvalidParams, "deformation magnitudes must be non-negative");
  }
  if (!offset.allFinite()) throw Error(ErrorCode::InvalidParams, "offset must be finite");
}

DeformParams deform_profile(const std::string& name) {
  DeformParams d;
  if (name == "none") return d;
  if (name == "mild") {
    d.global_scale = 1.05;
    d.bend_amplitude = 5.0;
    d.per_branch_jitter = 0.5;
    d.outlier_fraction = 0.05;
    d.noise_sigma = 0.5;
    return d;
  }
  if (name == "severe") {
    d.global_scale = 1.12;
    d.bend_amplitude = 12.0;
    d.per_branch_jitter = 2.0;
    d.outlier_fraction = 0.15;
    d.noise_sigma = 1.0;
    return d;
  }
  throw Error(ErrorCode::InvalidParams, "unknown deform profile", {{"profile", name}});
}

void AnatomyParams::validate() const {
  if (branch_count < 2 || branch_count % 2 != 0 || branch_count > label::kMaxBranch) {
    throw Error(ErrorCode::InvalidParams, "branch_count must be even, >= 2 and <= 8");
  }
  if (!(branch_length > 0.0) || !(branch_spacing > 0.0) || !(sternum_width > 0.0)) {
    throw Error(ErrorCode::InvalidParams, "lengths and spacings must be > 0");
  }
  if (points_per_branch < 10) throw Error(ErrorCode::InvalidParams, "points_per_branch must be >= 10");
  if (curvature < 0.0) throw Error(ErrorCode::InvalidParams, "curvature must be >= 0");
  deform.validate();
}

int branch_id(int side, int level, int levels_per_side) { return side * levels_per_side + level + 1; }

int waypoint_count(int branch_count) {
  const int levels = branch_count / 2;
  int per_side = 0;
  for (int s = 0; s + 1 < levels; ++s) per_side += s + 2;
  return 2 * per_side;
}

namespace {

struct CageLayout {
  int levels = 4;
  double spacing = 25.0;
  double sternum_width = 30.0;
  double z_top = 0.0;
  double z_bottom = 0.0;

  double level_z(int level) const { return -spacing * level; }
  double sternum_half_width(double z) const {
    const double t = std::clamp((z_top - z) / (z_top - z_bottom), 0.0, 1.0);
    return 0.5 * sternum_width * (1.0 - kSternumTaper * t);
  }
};

double smoothstep(double t) {
  t = std::clamp(t, 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

/// Smooth subject deformation; identity when every magnitude is zero.
class DeformField {
 public:
  DeformField(const DeformParams& d, const CageLayout& layout, const Point3& center, double half_extent,
              std::vector<Point3> jitter)
      : d_(d), layout_(layout), center_(center), half_extent_(half_extent), jitter_(std::move(jitter)) {}

  Point3 operator()(const Point3& p) const {
    Point3 q = p;
    if (d_.global_scale != 1.0) q += (d_.global_scale - 1.0) * (p - center_);
    if (d_.bend_amplitude != 0.0) {
      const double u = (p.x() - center_.x()) / half_extent_;
      q.y() += d_.bend_amplitude * u * u;
      q.z() += 0.5 * d_.bend_amplitude * std::sin(0.5 * std::numbers::pi * u);
    }
    if (!jitter_.empty()) q += jitter_at(p);
    q += d_.offset;
    return q;
  }

 private:
  Point3 jitter_at(const Point3& p) const {
    const double lateral = std::abs(p.x() - center_.x());
    const double ramp = smoothstep((lateral - 0.5 * layout_.sternum_width) / kJitterRampWidth);
    if (ramp == 0.0) return Point3::Zero();
    const int side = p.x() < center_.x() ? 0 : 1;
    const double lam = std::clamp(-p.z() / layout_.spacing, 0.0, static_cast<double>(layout_.levels - 1));
    const int lo = std::min(static_cast<int>(std::floor(lam)), layout_.levels - 1);
    const int hi = std::min(lo + 1, layout_.levels - 1);
    const double f = lam - lo;
    const Point3& a = jitter_[static_cast<std::size_t>(side * layout_.levels + lo)];
    const Point3& b = jitter_[static_cast<std::size_t>(side * layout_.levels + hi)];
    return ramp * ((1.0 - f) * a + f * b);
  }

  DeformParams d_;
  CageLayout layout_;
  Point3 center_;
  double half_extent_;
  std::vector<Point3> jitter_;
};

std::vector<Point3> kmeans_ordered(std::span<const Point3> pts, int clusters, const Point3& outward_ref) {
  const PrincipalAxes pa = pca_axes(pts);
  Eigen::Vector3d axis = pa.axes.col(0);
  if (axis.dot(pa.mean - outward_ref) < 0.0) axis = -axis;

  std::vector<std::size_t> order(pts.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> proj(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) proj[i] = axis.dot(pts[i] - pa.mean);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return proj[a] < proj[b]; });

  const auto k = static_cast<std::size_t>(clusters);
  std::vector<Point3> centers(k, Point3::Zero());
  std::vector<std::size_t> assign(pts.size());
  for (std::size_t c = 0; c < k; ++c) {
    const std::size_t b = c * pts.size() / k, e = (c + 1) * pts.size() / k;
    for (std::size_t i = b; i < e; ++i) {
      centers[c] += pts[order[i]];
      assign[order[i]] = c;
    }
    centers[c] /= static_cast<double>(e - b);
  }

  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      std::size_t best = 0;
      double bd = (pts[i] - centers[0]).squaredNorm();
      for (std::size_t c = 1; c < k; ++c) {
        const double d = (pts[i] - centers[c]).squaredNorm();
        if (d < bd) {
          bd = d;
          best = c;
        }
      }
      if (best != assign[i]) {
        assign[i] = best;
        changed = true;
      }
    }
    if (!changed && iter > 0) break;
    std::vector<Point3> sum(k, Point3::Zero());
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      sum[assign[i]] += pts[i];
      ++count[assign[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (count[c] > 0) centers[c] = sum[c] / static_cast<double>(count[c]);
    }
  }

  std::stable_sort(centers.begin(), centers.end(),
                   [&](const Point3& a, const Point3& b) { return axis.dot(a) < axis.dot(b); });
  return centers;
}

}  // namespace

std::vector<Point3> pair_cluster_midpoints(std::span<const Point3> upper, std::span<const Point3> lower,
                                           int clusters, const Point3& center) {
  if (clusters < 1) throw Error(ErrorCode::InvalidParams, "cluster count must be >= 1");
  if (upper.size() < static_cast<std::size_t>(clusters) || lower.size() < static_cast<std::size_t>(clusters)) {
    throw Error(ErrorCode::MissingBranch, "branch has fewer points than clusters");
  }
  const auto a = kmeans_ordered(upper, clusters, center);
  const auto b = kmeans_ordered(lower, clusters, center);
  std::vector<Point3> mids;
  for (int c = 0; c < clusters; ++c) mids.push_back(0.5 * (a[static_cast<std::size_t>(c)] + b[static_cast<std::size_t>(c)]));
  return mids;
}

std::vector<Point3> waypoints_from_cloud(const PointCloud& cloud, int branch_count) {
  if (branch_count < 2 || branch_count % 2 != 0) throw Error(ErrorCode::InvalidParams, "branch_count must be even");
  if (!cloud.has_labels()) throw Error(ErrorCode::MissingBranch, "cloud carries no branch labels");
  const int levels = branch_count / 2;

  std::vector<std::vector<Point3>> branches(static_cast<std::size_t>(branch_count + 1));
  std::vector<Point3> labeled;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const int l = cloud.labels[i];
    if (l < 0) continue;
    labeled.push_back(cloud.points[i]);
    if (l >= 1 && l <= branch_count) branches[static_cast<std::size_t>(l)].push_back(cloud.points[i]);
  }
  for (int b = 1; b <= branch_count; ++b) {
    if (branches[static_cast<std::size_t>(b)].size() < 3) {
      throw Error(ErrorCode::MissingBranch, "branch label missing from cloud", {{"branch", std::to_string(b)}});
    }
  }
  const Point3 center = centroid(std::span<const Point3>(labeled));

  std::vector<Point3> out;
  for (int side = 0; side < 2; ++side) {
    for (int s = 0; s + 1 < levels; ++s) {
      const auto& up = branches[static_cast<std::size_t>(branch_id(side, s, levels))];
      const auto& lo = branches[static_cast<std::size_t>(branch_id(side, s + 1, levels))];
      const auto mids = pair_cluster_midpoints(up, lo, s + 2, center);
      out.insert(out.end(), mids.begin(), mids.end());
    }
  }
  return out;
}

GeneratedPair generate_pair(const AnatomyParams& params) {
  params.validate();
  Rng rng = make_rng(params.rng_seed, "synth.template");
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  CageLayout layout;
  layout.levels = params.branch_count / 2;
  layout.spacing = params.branch_spacing;
  layout.sternum_width = params.sternum_width;
  layout.z_top = 0.5 * params.branch_spacing;
  layout.z_bottom = layout.level_z(layout.levels - 1) - 0.5 * params.branch_spacing;

  GeneratedPair out;
  PointCloud& tmpl = out.template_cloud;

  // Sternum: tapered plate with an anterior bow, label 0.
  const int sternum_points = 2 * params.points_per_branch;
  for (int n = 0; n < sternum_points;) {
    const double z = layout.z_bottom + unit(rng) * (layout.z_top - layout.z_bottom);
    const double x = (2.0 * unit(rng) - 1.0) * 0.5 * params.sternum_width;
    const double hw = layout.sternum_half_width(z);
    if (std::abs(x) > hw) continue;
    const double r = x / hw;
    tmpl.push_back(Point3(x, kSternumBulge * (1.0 - r * r), z), label::kSternum);
    ++n;
  }

  // Cartilage branches: planar quadratic arcs swept into tubes.
  for (int side = 0; side < 2; ++side) {
    const double sign = side == 0 ? -1.0 : 1.0;
    for (int level = 0; level < layout.levels; ++level) {
      const double z0 = layout.level_z(level);
      const double length = params.branch_length * (1.0 + kBranchGrowth * level);
      const double x0 = layout.sternum_half_width(z0);
      const int id = branch_id(side, level, layout.levels);
      for (int n = 0; n < params.points_per_branch; ++n) {
        const double u = (n + unit(rng)) / params.points_per_branch * length;
        const double phi = unit(rng) * 2.0 * std::numbers::pi;
        const Point3 c(sign * (x0 + u), -params.curvature * u * u / length, z0);
        const Eigen::Vector3d tangent =
            Eigen::Vector3d(sign, -2.0 * params.curvature * u / length, 0.0).normalized();
        const Eigen::Vector3d up = Eigen::Vector3d::UnitZ();
        const Eigen::Vector3d side_dir = up.cross(tangent).normalized();
        tmpl.push_back(c + kTubeRadius * (std::cos(phi) * up + std::sin(phi) * side_dir), id);
      }
    }
  }

  out.truth.waypoints_template = waypoints_from_cloud(tmpl, params.branch_count);

  // Subject: smooth deformation of every template point, then noise and outliers.
  const DeformParams& d = params.deform;
  Rng drng = make_rng(params.rng_seed, "synth.deform");
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Point3> jitter;
  if (d.per_branch_jitter > 0.0) {
    for (int b = 0; b < params.branch_count; ++b) {
      jitter.emplace_back(gauss(drng), gauss(drng), gauss(drng));
      jitter.back() *= d.per_branch_jitter;
    }
  }
  const Point3 center = centroid(tmpl);
  double half_extent = 0.0;
  for (const auto& p : tmpl.points) half_extent = std::max(half_extent, std::abs(p.x() - center.x()));
  const DeformField field(d, layout, center, half_extent, std::move(jitter));

  PointCloud& subj = out.subject;
  subj.points.reserve(tmpl.size());
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    Point3 q = field(tmpl.points[i]);
    if (d.noise_sigma > 0.0) q += d.noise_sigma * Point3(gauss(drng), gauss(drng), gauss(drng));
    subj.points.push_back(q);
  }
  subj.labels = tmpl.labels;
  out.truth.correspondence.resize(tmpl.size());
  std::iota(out.truth.correspondence.begin(), out.truth.correspondence.end(), std::size_t{0});
  for (const auto& w : out.truth.waypoints_template) out.truth.waypoints_subject.push_back(field(w));

  const auto n_out = static_cast<std::size_t>(std::llround(d.outlier_fraction * static_cast<double>(tmpl.size())));
  if (n_out > 0) {
    Eigen::Vector3d lo = subj.points.front(), hi = lo;
    for (const auto& p : subj.points) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    lo.array() -= 30.0;
    hi.array() += 30.0;
    const std::vector<Point3> inliers = subj.points;
    const KdTree inlier_tree(inliers);
    // Half scattered clutter, half compact isolated specks below the cage.
    const std::size_t scattered = n_out / 2;
    std::size_t placed = 0;
    while (placed < scattered) {
      const Point3 p(lo.x() + unit(drng) * (hi.x() - lo.x()), lo.y() + unit(drng) * (hi.y() - lo.y()),
                     lo.z() + unit(drng) * (hi.z() - lo.z()));
      if (inlier_tree.nearest(p).dist2 < 100.0) continue;
      subj.push_back(p, label::kUnassigned);
      ++placed;
    }
    constexpr std::size_t kSpeckSize = 12;
    while (placed < n_out) {
      const Point3 c(lo.x() + 30.0 + unit(drng) * (hi.x() - lo.x() - 60.0),
                     lo.y() + 30.0 + unit(drng) * (hi.y() - lo.y() - 60.0),
                     layout.z_bottom - 25.0 - unit(drng) * 25.0);
      for (std::size_t k = 0; k < kSpeckSize && placed < n_out; ++k, ++placed) {
        subj.push_back(c + 2.5 * Point3(gauss(drng), gauss(drng), gauss(drng)).cwiseMin(1.0).cwiseMax(-1.0),
                       label::kUnassigned);
      }
    }
  }
  return out;
}

}  // namespace costalign::synth
