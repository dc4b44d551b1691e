#pragma once

#include "costalign/geom.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace costalign::synth {

/// Subject deformation applied to the template. All-zero fields with
/// global_scale 1 and zero offset reproduce the template exactly.
struct DeformParams {
  double global_scale = 1.0;
  double bend_amplitude = 0.0;    // mm
  double per_branch_jitter = 0.0; // mm std-dev
  double outlier_fraction = 0.0;  // [0, 0.5)
  double noise_sigma = 0.0;       // mm
  Point3 offset = Point3::Zero(); // mm, global translation

  void validate() const;
};

/// Named profiles used by the CLI and the benchmark: "none", "mild", "severe".
DeformParams deform_profile(const std::string& name);

struct AnatomyParams {
  std::uint64_t rng_seed = 0;
  int branch_count = 8;
  double branch_length = 70.0;   // mm, topmost branch; lower ones grow
  double branch_spacing = 25.0;  // mm
  double sternum_width = 30.0;   // mm
  int points_per_branch = 200;
  double curvature = 0.3;
  DeformParams deform;

  void validate() const;
};

// Fixed shape constants of the generator.
inline constexpr double kTubeRadius = 3.0;         // mm
inline constexpr double kBranchGrowth = 0.2;       // length gain per level
inline constexpr double kSternumTaper = 0.3;       // relative width loss top to bottom
inline constexpr double kSternumBulge = 3.0;       // mm, anterior bow of the plate
inline constexpr double kJitterRampWidth = 15.0;   // mm

struct GroundTruth {
  /// correspondence[i] = subject index of template point i.
  std::vector<std::size_t> correspondence;
  std::vector<Point3> waypoints_template;
  std::vector<Point3> waypoints_subject;
};

struct GeneratedPair {
  PointCloud template_cloud;
  PointCloud subject;
  GroundTruth truth;
};

/// Branch id for (side, level): left side 1..n top to bottom, right side n+1..2n.
int branch_id(int side, int level, int levels_per_side);

GeneratedPair generate_pair(const AnatomyParams& params);

/// Splits each of two adjacent branches into `clusters` k-means clusters,
/// orders centroids outward from `center`, and returns the midpoints of
/// corresponding centroids.
std::vector<Point3> pair_cluster_midpoints(std::span<const Point3> upper, std::span<const Point3> lower,
                                           int clusters, const Point3& center);

/// Intercostal waypoints of a labeled cage: per side and per intercostal
/// space s (top to bottom), both bounding branches are split into s+2
/// clusters, centroids are paired medial to lateral, and the midpoints are
/// returned. Eight branches give 2+3+4 per side, 18 in total.
std::vector<Point3> waypoints_from_cloud(const PointCloud& cloud, int branch_count = 8);

/// Number of waypoints the protocol yields for `branch_count` branches.
int waypoint_count(int branch_count);

}  // namespace costalign::synth
