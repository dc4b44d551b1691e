#pragma once

#include "costalign/geom.hpp"

#include <cstddef>
#include <optional>
#include <vector>

namespace costalign::preprocess {

struct ClusteringParams {
  double eps = 8.0;  // mm
  int min_points = 16;
  /// Absolute threshold; when unset, `min_cluster_fraction` of the cloud size.
  std::optional<std::size_t> min_cluster_size;
  double min_cluster_fraction = 0.05;

  void validate() const;
  std::size_t cluster_threshold(std::size_t cloud_size) const;
};

inline constexpr int kNoise = -1;

/// Density clustering. A point is core when at least `min_points` points
/// (itself included) lie within `eps`. Core points sharing an eps-edge form
/// one cluster; a non-core point joins the cluster of its nearest core
/// neighbour. Cluster ids are numbered by smallest member index.
std::vector<int> dbscan(const PointCloud& cloud, const ClusteringParams& params);

/// Keeps points of clusters with at least `min_cluster_size` members.
PointCloud filter_small_clusters(const PointCloud& cloud, const std::vector<int>& ids,
                                 std::size_t min_cluster_size);

/// Rotation taking a cloud into its principal frame: x along the largest
/// axis (medio-lateral for a cage), z along the second (cranio-caudal),
/// y = z cross x; origin at the centroid.
RigidTransform canonical_frame(const PointCloud& cloud);

struct SideSplit {
  std::vector<int> left;   // cluster ids with centroid x < 0
  std::vector<int> right;  // cluster ids with centroid x > 0
};

/// Assigns clusters to sides by the sign of their centroid x relative to the
/// cloud centroid. Expects a canonicalized cloud.
SideSplit split_left_right(const PointCloud& cloud, const std::vector<int>& ids);

/// Fake sternum: a label-0 grid spanning the medial-most x of each side, the
/// joint z extent, at the median y. Pitch is the median same-side
/// nearest-neighbour spacing; a 1x1 grid when no spacing is defined.
PointCloud synth_sternum(const PointCloud& left, const PointCloud& right);

/// Sternum-to-sternum rigid alignment mapping `subject` into `template_cloud`.
/// Candidates are the identity and the four right-handed sign hypotheses of
/// the principal-frame match; the lowest RMS nearest-neighbour distance wins,
/// ties broken by smaller rotation angle.
RigidTransform coarse_align(const PointCloud& subject, const PointCloud& template_cloud);

/// RMS nearest-neighbour distance from subject sternum to template sternum.
double sternum_rms(const PointCloud& subject, const PointCloud& template_cloud);

struct PreprocessReport {
  std::size_t cluster_count = 0;
  std::size_t removed_points = 0;
  bool sternum_synthesized = false;
};

/// Clusters, drops small clusters and noise, and, when no label-0 points
/// survive, labels branches by vertical order per side and adds a fake sternum.
PointCloud clean_subject(const PointCloud& raw, const ClusteringParams& params, PreprocessReport* report = nullptr);

}  // namespace costalign::preprocess
