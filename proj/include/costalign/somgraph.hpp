#pragma once

#include "costalign/geom.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace costalign::somgraph {

/// Node/edge skeleton with frozen all-pairs geodesic distances. Edges are
/// directed (medial to lateral along branches, top to bottom along the
/// sternum) but geodesics ignore direction.
struct SkeletonGraph {
  std::vector<Point3> positions;
  std::vector<int> branch;
  std::vector<std::pair<int, int>> edges;
  Eigen::MatrixXd geodesic;

  std::size_t size() const noexcept { return positions.size(); }
};

inline constexpr int kDefaultNodeCount = 245;

/// Dijkstra from every node over undirected edges weighted by Euclidean
/// length. Unreachable pairs are +inf.
Eigen::MatrixXd all_pairs_geodesic(const std::vector<Point3>& positions,
                                   const std::vector<std::pair<int, int>>& edges);

/// One node chain per branch and one along the sternum, evenly spaced in arc
/// length, each branch chain attached to its nearest sternum node. Node
/// counts are split across chains in proportion to chain length.
SkeletonGraph build_template_graph(const PointCloud& template_cloud, int node_count = kDefaultNodeCount,
                                   int branch_count = 8);

enum class Neighborhood { Geodesic, Euclidean };

struct SomParams {
  int iterations = 30;  // epochs over the cloud
  double lr0 = 0.5;
  double lr_decay = 0.9;
  std::optional<double> sigma0;  // mm; default kSigma0EdgeFactor x mean edge length
  double sigma_decay = 1.0;
  std::uint64_t rng_seed = 0;
  Neighborhood neighborhood = Neighborhood::Geodesic;

  void validate() const;
};

inline constexpr double kSigma0EdgeFactor = 2.0;

double default_sigma0(const SkeletonGraph& graph);

/// Sample order used by epoch `epoch` of a fit over `n` points.
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch);

/// Neighbourhood weight exp(-d^2 / (2 sigma^2)).
double neighborhood_weight(double distance, double sigma);

/// Online SOM over the cloud. For each sampled point the best matching unit
/// is the Euclidean-nearest node; every node moves toward the point by
/// lr * theta(BMU, node). Only positions change.
SkeletonGraph som_fit(const SkeletonGraph& graph, const PointCloud& cloud, const SomParams& params);

/// Mean distance from cloud points to their nearest node.
double quantization_error(const SkeletonGraph& graph, const PointCloud& cloud);

/// Identity pairing of two graphs with identical topology.
std::vector<std::pair<std::size_t, std::size_t>> pair_nodes(const SkeletonGraph& g_ct, const SkeletonGraph& g_us);

nlohmann::json to_json(const SkeletonGraph& graph, bool include_geodesic = true);
/// Geodesics are read when present, otherwise recomputed from positions.
SkeletonGraph graph_from_json(const nlohmann::json& j);

}  // namespace costalign::somgraph
