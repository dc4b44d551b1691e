#pragma once

#include "costalign/geom.hpp"

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace costalign {

/// Static 3-d tree over a borrowed point array. The points must outlive the
/// tree. Queries are exact; ties are broken by lower point index.
class KdTree {
 public:
  explicit KdTree(std::span<const Point3> points);

  struct Hit {
    std::size_t index;
    double dist2;
  };

  Hit nearest(const Point3& q) const;
  /// k nearest, ascending by (distance, index).
  std::vector<Hit> knn(const Point3& q, std::size_t k) const;
  /// All points with distance <= radius, ascending by index.
  std::vector<std::size_t> radius(const Point3& q, double radius) const;

  std::size_t size() const noexcept { return points_.size(); }

 private:
  struct Node {
    std::size_t begin, end;  // range in order_
    int axis;                // -1 for leaf
    double split;
    int left, right;
  };

  int build(std::size_t begin, std::size_t end, int depth);
  void nearest_rec(int node, const Point3& q, Hit& best) const;
  void knn_rec(int node, const Point3& q, std::size_t k, std::vector<Hit>& heap) const;
  void radius_rec(int node, const Point3& q, double r2, std::vector<std::size_t>& out) const;

  std::span<const Point3> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

/// Root-mean-square distance from each point of `from` to its nearest point of `to`.
double rms_nearest_distance(std::span<const Point3> from, std::span<const Point3> to);

}  // namespace costalign
