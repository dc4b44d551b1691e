#include "costalign/kdtree.hpp"

#include "costalign/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace costalign {

namespace {
constexpr std::size_t kLeafSize = 12;

bool hit_less(const KdTree::Hit& a, const KdTree::Hit& b) {
  return a.dist2 < b.dist2 || (a.dist2 == b.dist2 && a.index < b.index);
}
}  // namespace

KdTree::KdTree(std::span<const Point3> points) : points_(points), order_(points.size()) {
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / kLeafSize + 2);
    build(0, points_.size(), 0);
  }
}

int KdTree::build(std::size_t begin, std::size_t end, int depth) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({begin, end, -1, 0.0, -1, -1});
  if (end - begin <= kLeafSize) return id;

  Eigen::Vector3d lo = points_[order_[begin]], hi = lo;
  for (std::size_t i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  Eigen::Index axis = 0;
  (hi - lo).maxCoeff(&axis);
  const std::size_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                   order_.begin() + static_cast<std::ptrdiff_t>(mid),
                   order_.begin() + static_cast<std::ptrdiff_t>(end),
                   [&](std::size_t a, std::size_t b) {
                     const double va = points_[a](axis), vb = points_[b](axis);
                     return va < vb || (va == vb && a < b);
                   });
  const double split = points_[order_[mid]](axis);
  const int left = build(begin, mid, depth + 1);
  const int right = build(mid, end, depth + 1);
  nodes_[id].axis = static_cast<int>(axis);
  nodes_[id].split = split;
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void KdTree::nearest_rec(int node, const Point3& q, Hit& best) const {
  const Node& n = nodes_[node];
  if (n.axis < 0) {
    for (std::size_t i = n.begin; i < n.end; ++i) {
      const std::size_t idx = order_[i];
      const Hit h{idx, (points_[idx] - q).squaredNorm()};
      if (hit_less(h, best)) best = h;
    }
    return;
  }
  const double diff = q(n.axis) - n.split;
  const int first = diff < 0.0 ? n.left : n.right;
  const int second = diff < 0.0 ? n.right : n.left;
  nearest_rec(first, q, best);
  if (diff * diff <= best.dist2) nearest_rec(second, q, best);
}

KdTree::Hit KdTree::nearest(const Point3& q) const {
  if (points_.empty()) throw Error(ErrorCode::EmptyInput, "nearest-neighbour query on empty tree");
  Hit best{std::numeric_limits<std::size_t>::max(), std::numeric_limits<double>::infinity()};
  nearest_rec(0, q, best);
  return best;
}

void KdTree::knn_rec(int node, const Point3& q, std::size_t k, std::vector<Hit>& heap) const {
  const Node& n = nodes_[node];
  if (n.axis < 0) {
    for (std::size_t i = n.begin; i < n.end; ++i) {
      const std::size_t idx = order_[i];
      const Hit h{idx, (points_[idx] - q).squaredNorm()};
      if (heap.size() < k) {
        heap.push_back(h);
        std::push_heap(heap.begin(), heap.end(), hit_less);
      } else if (hit_less(h, heap.front())) {
        std::pop_heap(heap.begin(), heap.end(), hit_less);
        heap.back() = h;
        std::push_heap(heap.begin(), heap.end(), hit_less);
      }
    }
    return;
  }
  const double diff = q(n.axis) - n.split;
  const int first = diff < 0.0 ? n.left : n.right;
  const int second = diff < 0.0 ? n.right : n.left;
  knn_rec(first, q, k, heap);
  if (heap.size() < k || diff * diff <= heap.front().dist2) knn_rec(second, q, k, heap);
}

std::vector<KdTree::Hit> KdTree::knn(const Point3& q, std::size_t k) const {
  std::vector<Hit> heap;
  if (points_.empty() || k == 0) return heap;
  k = std::min(k, points_.size());
  heap.reserve(k);
  knn_rec(0, q, k, heap);
  std::sort_heap(heap.begin(), heap.end(), hit_less);
  return heap;
}

void KdTree::radius_rec(int node, const Point3& q, double r2, std::vector<std::size_t>& out) const {
  const Node& n = nodes_[node];
  if (n.axis < 0) {
    for (std::size_t i = n.begin; i < n.end; ++i) {
      const std::size_t idx = order_[i];
      if ((points_[idx] - q).squaredNorm() <= r2) out.push_back(idx);
    }
    return;
  }
  const double diff = q(n.axis) - n.split;
  if (diff <= 0.0 || diff * diff <= r2) radius_rec(n.left, q, r2, out);
  if (diff >= 0.0 || diff * diff <= r2) radius_rec(n.right, q, r2, out);
}

std::vector<std::size_t> KdTree::radius(const Point3& q, double r) const {
  std::vector<std::size_t> out;
  if (points_.empty()) return out;
  radius_rec(0, q, r * r, out);
  std::sort(out.begin(), out.end());
  return out;
}

double rms_nearest_distance(std::span<const Point3> from, std::span<const Point3> to) {
  if (from.empty() || to.empty()) throw Error(ErrorCode::EmptyInput, "RMS distance of empty set");
  const KdTree tree(to);
  double acc = 0.0;
  for (const auto& p : from) acc += tree.nearest(p).dist2;
  return std::sqrt(acc / static_cast<double>(from.size()));
}

}  // namespace costalign
