#pragma once

#include "costalign/geom.hpp"
#include "costalign/preprocess.hpp"
#include "costalign/somgraph.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace costalign::reg {

enum class BlendMode {
  InverseDistance,  // w_i proportional to 1/d_i
  Literal,          // w_i proportional to d_i
};

struct RegisterParams {
  int n_reg = 3;
  int n_blend = 3;
  double sphere_radius = 20.0;  // mm
  BlendMode blend = BlendMode::InverseDistance;
  /// A local node set whose second-to-first singular value ratio falls below
  /// this counts as collinear and is widened by one node.
  double collinearity_tol = 1e-3;

  void validate() const;
};

struct LocalTransformField {
  std::vector<Point3> nodes;  // G_ct positions
  std::vector<RigidTransform> transforms;

  std::size_t size() const noexcept { return nodes.size(); }
};

using NodePairs = std::vector<std::pair<std::size_t, std::size_t>>;

/// Per G_ct node, a rigid fit from its n_reg geodesically nearest paired
/// nodes (itself included) in G_ct onto their partners in G_us.
LocalTransformField local_transforms(const NodePairs& pairs, const somgraph::SkeletonGraph& g_ct,
                                     const somgraph::SkeletonGraph& g_us, const RegisterParams& params);

struct BlendWeights {
  std::vector<std::size_t> nodes;
  std::vector<double> weights;
};

/// Weights of the n_blend nearest nodes for point p. A node closer than
/// 1e-9 mm takes the full weight.
BlendWeights blend_weights(const Point3& p, const LocalTransformField& field, const RegisterParams& params);

PointCloud warp_cloud(const PointCloud& cloud, const LocalTransformField& field, const RegisterParams& params);

/// Maps each waypoint with a rigid fit of the cloud_ct points inside a
/// sphere onto their warped counterparts. Sparse or collinear spheres grow
/// by 1.5x up to three times.
std::vector<Point3> map_waypoints(const std::vector<Point3>& waypoints, const PointCloud& cloud_ct,
                                  const PointCloud& warped, const RegisterParams& params);

struct StageInfo {
  std::string name;
  double residual = 0.0;  // stage-specific, mm
  double ms = 0.0;
};

struct PipelineParams {
  std::uint64_t seed = 0;
  bool clean_subject = true;
  preprocess::ClusteringParams clustering;
  int graph_nodes = somgraph::kDefaultNodeCount;
  somgraph::SomParams som;  // rng_seed is derived per fit from `seed`
  RegisterParams reg;
};

struct PipelineResult {
  PointCloud warped;                // template warped into the subject frame
  std::vector<Point3> waypoints;    // mapped waypoints, subject frame
  RigidTransform coarse;            // subject -> template frame
  somgraph::SkeletonGraph g_ct, g_us;  // g_ct is the reference refit
  std::vector<StageInfo> stages;
};

/// Subject after optional cleaning and sternum coarse alignment, in the
/// template frame.
struct AlignedSubject {
  PointCloud cloud;
  RigidTransform coarse;  // subject -> template frame
  std::vector<StageInfo> stages;
};

AlignedSubject prepare_subject(const PointCloud& template_cloud, const PointCloud& subject, const PipelineParams& params);

/// Subject cleaning, sternum coarse alignment, SOM fits (template graph onto
/// the template giving G_ct, G_ct onto the aligned subject giving G_us, and
/// G_ct once more onto the template as the pairing reference), node pairing,
/// local transforms, blended warp, and sphere-based waypoint mapping.
PipelineResult register_pipeline(const PointCloud& template_cloud, const PointCloud& subject,
                                 const std::vector<Point3>& waypoints_template, const PipelineParams& params);

/// Stages shared by the dense and sparse methods once a template graph exists.
PipelineResult register_with_graph(const PointCloud& template_cloud, const PointCloud& subject,
                                   const std::vector<Point3>& waypoints_template,
                                   const somgraph::SkeletonGraph& template_graph, const PipelineParams& params);

}  // namespace costalign::reg
