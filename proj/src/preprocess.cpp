#include "costalign/preprocess.hpp"

#include "costalign/error.hpp"
#include "costalign/kdtree.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <unordered_map>

namespace costalign::preprocess {

void ClusteringParams::validate() const {
  if (!(eps > 0.0)) throw Error(ErrorCode::InvalidParams, "eps must be > 0");
  if (min_points < 1) throw Error(ErrorCode::InvalidParams, "min_points must be >= 1");
  if (!(min_cluster_fraction >= 0.0 && min_cluster_fraction <= 1.0)) {
    throw Error(ErrorCode::InvalidParams, "min_cluster_fraction must lie in [0, 1]");
  }
}

std::size_t ClusteringParams::cluster_threshold(std::size_t cloud_size) const {
  if (min_cluster_size) return *min_cluster_size;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(min_cluster_fraction * static_cast<double>(cloud_size))));
}

namespace {

/// Uniform grid with cell size eps; neighbour queries scan the 27 adjacent cells.
class EpsGrid {
 public:
  EpsGrid(std::span<const Point3> pts, double eps) : pts_(pts), eps_(eps) {
    for (std::size_t i = 0; i < pts.size(); ++i) cells_[key(cell_of(pts[i]))].push_back(i);
  }

  template <class F>
  void for_each_neighbor(std::size_t i, F&& f) const {
    const auto c = cell_of(pts_[i]);
    const double eps2 = eps_ * eps_;
    for (long dx = -1; dx <= 1; ++dx)
      for (long dy = -1; dy <= 1; ++dy)
        for (long dz = -1; dz <= 1; ++dz) {
          const auto it = cells_.find(key({c[0] + dx, c[1] + dy, c[2] + dz}));
          if (it == cells_.end()) continue;
          for (std::size_t j : it->second) {
            const double d2 = (pts_[j] - pts_[i]).squaredNorm();
            if (d2 <= eps2) f(j, d2);
          }
        }
  }

 private:
  std::array<long, 3> cell_of(const Point3& p) const {
    return {static_cast<long>(std::floor(p.x() / eps_)), static_cast<long>(std::floor(p.y() / eps_)),
            static_cast<long>(std::floor(p.z() / eps_))};
  }
  static std::uint64_t key(const std::array<long, 3>& c) {
    const auto h = [](long v) { return static_cast<std::uint64_t>(v + (1L << 20)) & 0x1fffffULL; };
    return (h(c[0]) << 42) | (h(c[1]) << 21) | h(c[2]);
  }

  std::span<const Point3> pts_;
  double eps_;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> cells_;
};

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

bool lex_less(const Point3& a, const Point3& b) {
  return std::lexicographical_compare(a.data(), a.data() + 3, b.data(), b.data() + 3);
}

}  // namespace

std::vector<int> dbscan(const PointCloud& cloud, const ClusteringParams& params) {
  params.validate();
  if (cloud.empty()) throw Error(ErrorCode::EmptyInput, "dbscan on empty cloud");
  const std::size_t n = cloud.size();
  const EpsGrid grid(cloud.points, params.eps);

  std::vector<char> core(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    int count = 0;
    grid.for_each_neighbor(i, [&](std::size_t, double) { ++count; });
    core[i] = count >= params.min_points ? 1 : 0;
  }

  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  for (std::size_t i = 0; i < n; ++i) {
    if (!core[i]) continue;
    grid.for_each_neighbor(i, [&](std::size_t j, double) {
      if (!core[j]) return;
      const std::size_t a = find_root(parent, i), b = find_root(parent, j);
      if (a != b) parent[std::max(a, b)] = std::min(a, b);
    });
  }

  std::vector<long> owner(n, -1);  // root index of the owning core component
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) {
      owner[i] = static_cast<long>(find_root(parent, i));
      continue;
    }
    std::size_t best = n;
    double best_d2 = std::numeric_limits<double>::infinity();
    grid.for_each_neighbor(i, [&](std::size_t j, double d2) {
      if (!core[j]) return;
      if (d2 < best_d2 || (d2 == best_d2 && lex_less(cloud.points[j], cloud.points[best]))) {
        best = j;
        best_d2 = d2;
      }
    });
    if (best < n) owner[i] = static_cast<long>(find_root(parent, best));
  }

  // Number clusters by smallest member index.
  std::map<long, int> remap;
  std::vector<int> ids(n, kNoise);
  for (std::size_t i = 0; i < n; ++i) {
    if (owner[i] < 0) continue;
    auto [it, inserted] = remap.try_emplace(owner[i], static_cast<int>(remap.size()));
    ids[i] = it->second;
  }
  return ids;
}

PointCloud filter_small_clusters(const PointCloud& cloud, const std::vector<int>& ids,
                                 std::size_t min_cluster_size) {
  if (ids.size() != cloud.size()) throw Error(ErrorCode::PairMismatch, "cluster ids not aligned with cloud");
  std::map<int, std::size_t> sizes;
  for (int id : ids) {
    if (id != kNoise) ++sizes[id];
  }
  PointCloud out;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (ids[i] == kNoise || sizes[ids[i]] < min_cluster_size) continue;
    out.points.push_back(cloud.points[i]);
    if (cloud.has_labels()) out.labels.push_back(cloud.labels[i]);
  }
  if (out.empty()) {
    throw Error(ErrorCode::EmptyAfterFilter, "no cluster reaches the size threshold",
                {{"threshold", std::to_string(min_cluster_size)}});
  }
  return out;
}

RigidTransform canonical_frame(const PointCloud& cloud) {
  const PrincipalAxes pa = pca_axes(cloud);
  const Eigen::Vector3d ex = pa.axes.col(0);
  const Eigen::Vector3d ez = pa.axes.col(1);
  const Eigen::Vector3d ey = ez.cross(ex);
  RigidTransform t;
  t.rotation.row(0) = ex.transpose();
  t.rotation.row(1) = ey.transpose();
  t.rotation.row(2) = ez.transpose();
  t.translation = -(t.rotation * pa.mean);
  return t;
}

SideSplit split_left_right(const PointCloud& cloud, const std::vector<int>& ids) {
  if (ids.size() != cloud.size()) throw Error(ErrorCode::PairMismatch, "cluster ids not aligned with cloud");
  if (cloud.empty()) throw Error(ErrorCode::EmptyInput, "split of empty cloud");
  const Point3 center = centroid(cloud);
  std::map<int, std::pair<Point3, std::size_t>> acc;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (ids[i] == kNoise) continue;
    auto& [sum, count] = acc.try_emplace(ids[i], Point3::Zero(), 0).first->second;
    sum += cloud.points[i];
    ++count;
  }
  SideSplit out;
  for (const auto& [id, sc] : acc) {
    const double x = sc.first.x() / static_cast<double>(sc.second) - center.x();
    if (std::abs(x) <= 1e-9) {
      throw Error(ErrorCode::AmbiguousSide, "cluster centroid lies on the dividing plane",
                  {{"cluster", std::to_string(id)}});
    }
    (x < 0.0 ? out.left : out.right).push_back(id);
  }
  return out;
}

namespace {
double median(std::vector<double> v) {
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double hi = *mid;
  const double lo = *std::max_element(v.begin(), mid);
  return 0.5 * (lo + hi);
}

void collect_nn_spacing(const PointCloud& side, std::vector<double>& out) {
  if (side.size() < 2) return;
  const KdTree tree(side.points);
  for (const auto& p : side.points) {
    const auto hits = tree.knn(p, 2);
    out.push_back(std::sqrt(hits[1].dist2));
  }
}
}  // namespace

PointCloud synth_sternum(const PointCloud& left, const PointCloud& right) {
  if (left.empty() || right.empty()) throw Error(ErrorCode::MissingSide, "fake sternum needs both sides");
  double x0 = -std::numeric_limits<double>::infinity();
  double x1 = std::numeric_limits<double>::infinity();
  double z0 = std::numeric_limits<double>::infinity();
  double z1 = -std::numeric_limits<double>::infinity();
  std::vector<double> ys;
  for (const auto& p : left.points) {
    x0 = std::max(x0, p.x());
    z0 = std::min(z0, p.z());
    z1 = std::max(z1, p.z());
    ys.push_back(p.y());
  }
  for (const auto& p : right.points) {
    x1 = std::min(x1, p.x());
    z0 = std::min(z0, p.z());
    z1 = std::max(z1, p.z());
    ys.push_back(p.y());
  }
  const double y = median(ys);

  std::vector<double> spacing;
  collect_nn_spacing(left, spacing);
  collect_nn_spacing(right, spacing);
  const double pitch = spacing.empty() ? std::numeric_limits<double>::infinity() : median(spacing);

  const auto intervals = [&](double extent) -> int {
    if (!(pitch > 0.0) || !std::isfinite(pitch) || extent <= 0.0) return 0;
    return std::max(1, static_cast<int>(std::lround(extent / pitch)));
  };
  const int mx = intervals(x1 - x0);
  const int mz = intervals(z1 - z0);

  PointCloud out;
  for (int iz = 0; iz <= mz; ++iz) {
    const double z = mz == 0 ? 0.5 * (z0 + z1) : z0 + (z1 - z0) * iz / mz;
    for (int ix = 0; ix <= mx; ++ix) {
      const double x = mx == 0 ? 0.5 * (x0 + x1) : x0 + (x1 - x0) * ix / mx;
      out.push_back(Point3(x, y, z), label::kSternum);
    }
  }
  return out;
}

double sternum_rms(const PointCloud& subject, const PointCloud& template_cloud) {
  const PointCloud s = subject.subset_with_label(label::kSternum);
  const PointCloud t = template_cloud.subset_with_label(label::kSternum);
  if (s.empty() || t.empty()) throw Error(ErrorCode::MissingSternum, "cloud carries no sternum label");
  return rms_nearest_distance(s.points, t.points);
}

RigidTransform coarse_align(const PointCloud& subject, const PointCloud& template_cloud) {
  const PointCloud s = subject.subset_with_label(label::kSternum);
  const PointCloud t = template_cloud.subset_with_label(label::kSternum);
  if (s.size() < 3 || t.size() < 3) {
    throw Error(ErrorCode::MissingSternum, "both clouds need sternum (label 0) points");
  }
  const PrincipalAxes ps = pca_axes(s);
  const PrincipalAxes pt = pca_axes(t);
  const KdTree tree(t.points);

  const auto score = [&](const RigidTransform& cand) {
    double acc = 0.0;
    for (const auto& p : s.points) acc += tree.nearest(cand(p)).dist2;
    return std::sqrt(acc / static_cast<double>(s.size()));
  };

  std::vector<RigidTransform> candidates{RigidTransform::identity()};
  constexpr std::array<std::array<double, 3>, 4> kSigns{{{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}}};
  for (const auto& sg : kSigns) {
    const Eigen::Matrix3d d = Eigen::Vector3d(sg[0], sg[1], sg[2]).asDiagonal();
    RigidTransform cand;
    cand.rotation = pt.axes * d * ps.axes.transpose();
    cand.translation = pt.mean - cand.rotation * ps.mean;
    candidates.push_back(cand);
  }

  std::size_t best = 0;
  double best_score = score(candidates[0]);
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const double sc = score(candidates[i]);
    const double tie = 1e-9 * std::max(1.0, best_score);
    if (sc < best_score - tie ||
        (std::abs(sc - best_score) <= tie &&
         rotation_angle(candidates[i].rotation) < rotation_angle(candidates[best].rotation))) {
      best = i;
      best_score = sc;
    }
  }
  return candidates[best];
}

PointCloud clean_subject(const PointCloud& raw, const ClusteringParams& params, PreprocessReport* report) {
  const std::vector<int> ids = dbscan(raw, params);
  const std::size_t threshold = params.cluster_threshold(raw.size());

  PointCloud kept;
  std::vector<int> kept_ids;
  {
    std::map<int, std::size_t> sizes;
    for (int id : ids) {
      if (id != kNoise) ++sizes[id];
    }
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (ids[i] == kNoise || sizes[ids[i]] < threshold) continue;
      kept_ids.push_back(ids[i]);
    }
    kept = filter_small_clusters(raw, ids, threshold);
  }

  PreprocessReport rep;
  rep.removed_points = raw.size() - kept.size();
  {
    std::vector<int> uniq = kept_ids;
    std::sort(uniq.begin(), uniq.end());
    rep.cluster_count = static_cast<std::size_t>(std::unique(uniq.begin(), uniq.end()) - uniq.begin());
  }

  const bool has_sternum = kept.has_labels() &&
                           std::count(kept.labels.begin(), kept.labels.end(), label::kSternum) >= 3;
  if (!has_sternum) {
    // Branch labels by vertical order per side, then a fake sternum.
    const RigidTransform frame = canonical_frame(kept);
    const PointCloud canon = apply(frame, kept);
    const SideSplit split = split_left_right(canon, kept_ids);
    std::map<int, double> height;
    std::map<int, std::size_t> count;
    for (std::size_t i = 0; i < canon.size(); ++i) {
      height[kept_ids[i]] += canon.points[i].z();
      ++count[kept_ids[i]];
    }
    for (auto& [id, h] : height) h /= static_cast<double>(count[id]);

    std::map<int, int> branch_of;
    const auto label_side = [&](std::vector<int> side, int side_index) {
      std::sort(side.begin(), side.end(), [&](int a, int b) { return height[a] > height[b]; });
      const int per_side = label::kMaxBranch / 2;
      for (std::size_t k = 0; k < side.size(); ++k) {
        const int level = std::min(static_cast<int>(k), per_side - 1);
        branch_of[side[k]] = side_index * per_side + level + 1;
      }
    };
    label_side(split.left, 0);
    label_side(split.right, 1);

    PointCloud left, right;
    kept.labels.assign(kept.size(), label::kUnassigned);
    for (std::size_t i = 0; i < kept.size(); ++i) {
      kept.labels[i] = branch_of[kept_ids[i]];
      const bool is_left = std::find(split.left.begin(), split.left.end(), kept_ids[i]) != split.left.end();
      (is_left ? left : right).points.push_back(canon.points[i]);
    }
    const PointCloud sternum = apply(frame.inverse(), synth_sternum(left, right));
    for (std::size_t i = 0; i < sternum.size(); ++i) kept.push_back(sternum.points[i], label::kSternum);
    rep.sternum_synthesized = true;
  }
  if (report) *report = rep;
  return kept;
}

}  // namespace costalign::preprocess
