#pragma once

#include "costalign/geom.hpp"
#include "costalign/rng.hpp"
#include "costalign/shaperepair.hpp"
#include "costalign/somgraph.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace fixtures {

using costalign::Point3;
using costalign::PointCloud;
using costalign::RigidTransform;

inline RigidTransform rotation_about(const Eigen::Vector3d& axis, double radians, const Eigen::Vector3d& t) {
  RigidTransform r;
  r.rotation = Eigen::AngleAxisd(radians, axis.normalized()).toRotationMatrix();
  r.translation = t;
  return r;
}

/// Uniform random rotation (unit quaternion) with angle capped by `max_angle`
/// and a translation uniform in a cube of half-size `max_shift`.
inline RigidTransform random_rigid(std::mt19937_64& rng, double max_angle, double max_shift) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(-1.0, 1.0), a(0.0, 1.0);
  Eigen::Vector3d axis(g(rng), g(rng), g(rng));
  return rotation_about(axis, max_angle * a(rng), Eigen::Vector3d(u(rng), u(rng), u(rng)) * max_shift);
}

inline std::vector<Point3> random_points(std::mt19937_64& rng, std::size_t n, double half_size) {
  std::uniform_real_distribution<double> u(-half_size, half_size);
  std::vector<Point3> out;
  for (std::size_t i = 0; i < n; ++i) out.emplace_back(u(rng), u(rng), u(rng));
  return out;
}

/// Two straight point branches along x at y = 0 (label 1) and y = 40
/// (label 2), and a graph of two node chains starting between them at
/// y = 17 (branch 1) and y = 23 (branch 2). The chains are joined by one
/// edge from the first node of chain 1 to the last node of chain 2, so
/// nodes facing each other across the 6 mm gap are far apart along edges.
struct TwoBranchInstance {
  PointCloud cloud;
  costalign::somgraph::SkeletonGraph graph;
};

inline TwoBranchInstance two_branch_instance(std::uint64_t seed, int nodes_per_chain = 11) {
  TwoBranchInstance inst;
  auto rng = costalign::make_rng(seed, "two_branch");
  std::uniform_real_distribution<double> along(0.0, 100.0), jitter(-0.5, 0.5);
  for (int i = 0; i < 200; ++i) {
    inst.cloud.push_back(Point3(along(rng), jitter(rng), jitter(rng)), 1);
    inst.cloud.push_back(Point3(along(rng), 40.0 + jitter(rng), jitter(rng)), 2);
  }
  auto& g = inst.graph;
  for (int b = 0; b < 2; ++b) {
    for (int i = 0; i < nodes_per_chain; ++i) {
      g.positions.emplace_back(100.0 * i / (nodes_per_chain - 1), b == 0 ? 17.0 : 23.0, 0.0);
      g.branch.push_back(b + 1);
      if (i > 0) g.edges.emplace_back(b * nodes_per_chain + i - 1, b * nodes_per_chain + i);
    }
  }
  g.edges.emplace_back(0, 2 * nodes_per_chain - 1);
  g.geodesic = costalign::somgraph::all_pairs_geodesic(g.positions, g.edges);
  return inst;
}

/// Nodes whose nearest branch line (y = 0 or y = 40) differs from their chain.
inline int cross_branch_nodes(const costalign::somgraph::SkeletonGraph& g) {
  int bad = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const int nearest = std::abs(g.positions[i].y()) < std::abs(g.positions[i].y() - 40.0) ? 1 : 2;
    bad += nearest != g.branch[i];
  }
  return bad;
}

/// Counting oracle for mask overlap.
inline double dice_count(const costalign::shape::BinaryMask& a, const costalign::shape::BinaryMask& b) {
  long inter = 0, sa = 0, sb = 0;
  for (int y = 0; y < a.height; ++y) {
    for (int x = 0; x < a.width; ++x) {
      inter += a.at(x, y) && b.at(x, y);
      sa += a.at(x, y);
      sb += b.at(x, y);
    }
  }
  return sa + sb == 0 ? 1.0 : 2.0 * static_cast<double>(inter) / static_cast<double>(sa + sb);
}

inline costalign::shape::BinaryMask random_mask(std::mt19937_64& rng, int w, int h, double density) {
  std::bernoulli_distribution on(density);
  costalign::shape::BinaryMask m(w, h);
  for (auto& v : m.data) v = on(rng) ? 1 : 0;
  return m;
}

}  // namespace fixtures
