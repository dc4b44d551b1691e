#include "costalign/somgraph.hpp"

#include "costalign/error.hpp"
#include "costalign/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <string>

namespace costalign::somgraph {

Eigen::MatrixXd all_pairs_geodesic(const std::vector<Point3>& positions,
                                   const std::vector<std::pair<int, int>>& edges) {
  const auto n = static_cast<int>(positions.size());
  std::vector<std::vector<std::pair<int, double>>> adj(static_cast<std::size_t>(n));
  for (const auto& [a, b] : edges) {
    if (a < 0 || b < 0 || a >= n || b >= n) throw Error(ErrorCode::InvalidParams, "edge index out of range");
    const double w = (positions[static_cast<std::size_t>(a)] - positions[static_cast<std::size_t>(b)]).norm();
    adj[static_cast<std::size_t>(a)].emplace_back(b, w);
    adj[static_cast<std::size_t>(b)].emplace_back(a, w);
  }
  Eigen::MatrixXd dist = Eigen::MatrixXd::Constant(n, n, std::numeric_limits<double>::infinity());
  using Item = std::pair<double, int>;
  for (int src = 0; src < n; ++src) {
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    dist(src, src) = 0.0;
    pq.emplace(0.0, src);
    while (!pq.empty()) {
      const auto [d, u] = pq.top();
      pq.pop();
      if (d > dist(src, u)) continue;
      for (const auto& [v, w] : adj[static_cast<std::size_t>(u)]) {
        if (d + w < dist(src, v)) {
          dist(src, v) = d + w;
          pq.emplace(d + w, v);
        }
      }
    }
  }
  // Symmetrize exactly; shortest paths agree up to summation order.
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double v = std::min(dist(i, j), dist(j, i));
      dist(i, j) = dist(j, i) = v;
    }
  return dist;
}

namespace {

/// Centerline of a point set along its principal axis: equal-width bins of
/// the projection, bin centroids in axis order.
std::vector<Point3> centerline(const std::vector<Point3>& pts, const Eigen::Vector3d& axis) {
  const Point3 c = centroid(std::span<const Point3>(pts));
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& p : pts) {
    const double t = axis.dot(p - c);
    lo = std::min(lo, t);
    hi = std::max(hi, t);
  }
  const int bins = std::clamp(static_cast<int>(pts.size() / 10), 4, 40);
  std::vector<Point3> sum(static_cast<std::size_t>(bins), Point3::Zero());
  std::vector<int> count(static_cast<std::size_t>(bins), 0);
  const double width = std::max(hi - lo, 1e-12) / bins;
  for (const auto& p : pts) {
    const int b = std::clamp(static_cast<int>((axis.dot(p - c) - lo) / width), 0, bins - 1);
    sum[static_cast<std::size_t>(b)] += p;
    ++count[static_cast<std::size_t>(b)];
  }
  std::vector<Point3> line;
  for (int b = 0; b < bins; ++b) {
    if (count[static_cast<std::size_t>(b)] > 0) line.push_back(sum[static_cast<std::size_t>(b)] / count[static_cast<std::size_t>(b)]);
  }
  return line;
}

double polyline_length(const std::vector<Point3>& line) {
  double len = 0.0;
  for (std::size_t i = 1; i < line.size(); ++i) len += (line[i] - line[i - 1]).norm();
  return len;
}

std::vector<Point3> resample(const std::vector<Point3>& line, int count) {
  std::vector<Point3> out;
  if (line.size() == 1 || count == 1) {
    out.assign(static_cast<std::size_t>(count), line.front());
    return out;
  }
  std::vector<double> cum(line.size(), 0.0);
  for (std::size_t i = 1; i < line.size(); ++i) cum[i] = cum[i - 1] + (line[i] - line[i - 1]).norm();
  const double total = cum.back();
  std::size_t seg = 1;
  for (int k = 0; k < count; ++k) {
    const double s = total * k / (count - 1);
    while (seg + 1 < line.size() && cum[seg] < s) ++seg;
    const double span = cum[seg] - cum[seg - 1];
    const double f = span > 0.0 ? std::clamp((s - cum[seg - 1]) / span, 0.0, 1.0) : 0.0;
    out.push_back(line[seg - 1] + f * (line[seg] - line[seg - 1]));
  }
  return out;
}

}  // namespace

SkeletonGraph build_template_graph(const PointCloud& template_cloud, int node_count, int branch_count) {
  if (!template_cloud.has_labels()) throw Error(ErrorCode::MissingBranch, "template cloud is unlabeled");
  const int chains = branch_count + 1;
  if (node_count < 2 * chains) {
    throw Error(ErrorCode::InvalidParams, "node_count must allow two nodes per chain",
                {{"node_count", std::to_string(node_count)}});
  }

  std::vector<std::vector<Point3>> groups(static_cast<std::size_t>(chains));
  for (std::size_t i = 0; i < template_cloud.size(); ++i) {
    const int l = template_cloud.labels[i];
    if (l >= 0 && l < chains) groups[static_cast<std::size_t>(l)].push_back(template_cloud.points[i]);
  }
  if (groups[0].size() < 3) throw Error(ErrorCode::MissingSternum, "template has no sternum points");
  for (int b = 1; b < chains; ++b) {
    if (groups[static_cast<std::size_t>(b)].size() < 3) {
      throw Error(ErrorCode::MissingBranch, "template branch missing", {{"branch", std::to_string(b)}});
    }
  }

  const Point3 sternum_center = centroid(std::span<const Point3>(groups[0]));
  std::vector<std::vector<Point3>> lines(static_cast<std::size_t>(chains));
  {
    const PrincipalAxes pa = pca_axes(std::span<const Point3>(groups[0]));
    lines[0] = centerline(groups[0], pa.axes.col(0));
  }
  for (int b = 1; b < chains; ++b) {
    const auto& g = groups[static_cast<std::size_t>(b)];
    const PrincipalAxes pa = pca_axes(std::span<const Point3>(g));
    Eigen::Vector3d axis = pa.axes.col(0);
    if (axis.dot(pa.mean - sternum_center) < 0.0) axis = -axis;  // medial to lateral
    lines[static_cast<std::size_t>(b)] = centerline(g, axis);
  }

  // Largest-remainder split of node_count, at least two per chain.
  std::vector<double> lengths(static_cast<std::size_t>(chains));
  for (int c = 0; c < chains; ++c) lengths[static_cast<std::size_t>(c)] = std::max(polyline_length(lines[static_cast<std::size_t>(c)]), 1e-9);
  const double total = std::accumulate(lengths.begin(), lengths.end(), 0.0);
  const int spare = node_count - 2 * chains;
  std::vector<int> counts(static_cast<std::size_t>(chains), 2);
  std::vector<std::pair<double, int>> remainders;
  int assigned = 0;
  for (int c = 0; c < chains; ++c) {
    const double share = spare * lengths[static_cast<std::size_t>(c)] / total;
    const int whole = static_cast<int>(std::floor(share));
    counts[static_cast<std::size_t>(c)] += whole;
    assigned += whole;
    remainders.emplace_back(share - whole, c);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (int k = 0; k < spare - assigned; ++k) ++counts[static_cast<std::size_t>(remainders[static_cast<std::size_t>(k)].second)];

  SkeletonGraph g;
  std::vector<int> chain_start(static_cast<std::size_t>(chains));
  for (int c = 0; c < chains; ++c) {
    chain_start[static_cast<std::size_t>(c)] = static_cast<int>(g.positions.size());
    const auto nodes = resample(lines[static_cast<std::size_t>(c)], counts[static_cast<std::size_t>(c)]);
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      g.positions.push_back(nodes[k]);
      g.branch.push_back(c);
      if (k > 0) {
        const int cur = static_cast<int>(g.positions.size()) - 1;
        if (c == 0) g.edges.emplace_back(cur - 1, cur);
      }
    }
    if (c > 0) {
      // Junction from the nearest sternum node to the medial end, then the chain.
      const int first = chain_start[static_cast<std::size_t>(c)];
      int best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (int s = 0; s < counts[0]; ++s) {
        const double d = (g.positions[static_cast<std::size_t>(s)] - g.positions[static_cast<std::size_t>(first)]).squaredNorm();
        if (d < bd) {
          bd = d;
          best = s;
        }
      }
      g.edges.emplace_back(best, first);
      for (int k = 1; k < counts[static_cast<std::size_t>(c)]; ++k) g.edges.emplace_back(first + k - 1, first + k);
    }
  }
  g.geodesic = all_pairs_geodesic(g.positions, g.edges);
  return g;
}

void SomParams::validate() const {
  if (iterations < 1) throw Error(ErrorCode::InvalidParams, "iterations must be >= 1");
  if (!(lr0 > 0.0 && lr0 <= 1.0)) throw Error(ErrorCode::InvalidParams, "lr0 must lie in (0, 1]");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw Error(ErrorCode::InvalidParams, "lr_decay must lie in (0, 1]");
  if (!(sigma_decay > 0.0 && sigma_decay <= 1.0)) throw Error(ErrorCode::InvalidParams, "sigma_decay must lie in (0, 1]");
  if (sigma0 && !(*sigma0 > 0.0)) throw Error(ErrorCode::InvalidParams, "sigma0 must be > 0");
}

double default_sigma0(const SkeletonGraph& graph) {
  if (graph.edges.empty()) return 1.0;
  double acc = 0.0;
  for (const auto& [a, b] : graph.edges) {
    acc += (graph.positions[static_cast<std::size_t>(a)] - graph.positions[static_cast<std::size_t>(b)]).norm();
  }
  return kSigma0EdgeFactor * acc / static_cast<double>(graph.edges.size());
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = make_rng(seed, "som.epoch." + std::to_string(epoch));
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

double neighborhood_weight(double distance, double sigma) {
  return std::exp(-(distance * distance) / (2.0 * sigma * sigma));
}

namespace {
std::size_t best_matching_unit(const std::vector<Point3>& nodes, const Point3& p) {
  std::size_t best = 0;
  double bd = (nodes[0] - p).squaredNorm();
  for (std::size_t s = 1; s < nodes.size(); ++s) {
    const double d = (nodes[s] - p).squaredNorm();
    if (d < bd) {
      bd = d;
      best = s;
    }
  }
  return best;
}

constexpr double kThetaFloor = 1e-16;
}  // namespace

SkeletonGraph som_fit(const SkeletonGraph& graph, const PointCloud& cloud, const SomParams& params) {
  params.validate();
  if (cloud.empty()) throw Error(ErrorCode::EmptyInput, "SOM fit on empty cloud");
  if (graph.size() == 0) throw Error(ErrorCode::EmptyInput, "SOM fit of empty graph");
  const auto n = graph.size();
  if (params.neighborhood == Neighborhood::Geodesic &&
      (graph.geodesic.rows() != static_cast<Eigen::Index>(n) || graph.geodesic.cols() != static_cast<Eigen::Index>(n))) {
    throw Error(ErrorCode::InvalidParams, "graph has no geodesic matrix");
  }

  SkeletonGraph out = graph;
  std::vector<Point3>& w = out.positions;
  const double sigma0 = params.sigma0.value_or(default_sigma0(graph));

  std::vector<std::vector<std::pair<std::size_t, double>>> reach(n);
  for (int epoch = 0; epoch < params.iterations; ++epoch) {
    const double lr = params.lr0 * std::pow(params.lr_decay, epoch);
    const double sigma = sigma0 * std::pow(params.sigma_decay, epoch);

    if (params.neighborhood == Neighborhood::Geodesic) {
      for (std::size_t b = 0; b < n; ++b) {
        reach[b].clear();
        for (std::size_t s = 0; s < n; ++s) {
          const double theta = neighborhood_weight(graph.geodesic(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(s)), sigma);
          if (theta >= kThetaFloor) reach[b].emplace_back(s, theta);
        }
      }
    }

    for (std::size_t k : epoch_order(cloud.size(), params.rng_seed, epoch)) {
      const Point3& p = cloud.points[k];
      const std::size_t bmu = best_matching_unit(w, p);
      if (params.neighborhood == Neighborhood::Geodesic) {
        for (const auto& [s, theta] : reach[bmu]) w[s] += theta * lr * (p - w[s]);
      } else {
        const Point3 anchor = w[bmu];
        for (std::size_t s = 0; s < n; ++s) {
          const double theta = neighborhood_weight((w[s] - anchor).norm(), sigma);
          if (theta >= kThetaFloor) w[s] += theta * lr * (p - w[s]);
        }
      }
    }
  }
  return out;
}

double quantization_error(const SkeletonGraph& graph, const PointCloud& cloud) {
  if (cloud.empty() || graph.size() == 0) throw Error(ErrorCode::EmptyInput, "quantization error of empty input");
  double acc = 0.0;
  for (const auto& p : cloud.points) acc += (graph.positions[best_matching_unit(graph.positions, p)] - p).norm();
  return acc / static_cast<double>(cloud.size());
}

std::vector<std::pair<std::size_t, std::size_t>> pair_nodes(const SkeletonGraph& g_ct, const SkeletonGraph& g_us) {
  if (g_ct.size() != g_us.size() || g_ct.edges != g_us.edges || g_ct.branch != g_us.branch) {
    throw Error(ErrorCode::GraphMismatch, "graphs differ in topology",
                {{"ct_nodes", std::to_string(g_ct.size())}, {"us_nodes", std::to_string(g_us.size())}});
  }
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(g_ct.size());
  for (std::size_t i = 0; i < g_ct.size(); ++i) pairs.emplace_back(i, i);
  return pairs;
}

nlohmann::json to_json(const SkeletonGraph& graph, bool include_geodesic) {
  nlohmann::json j;
  j["nodes"] = nlohmann::json::array();
  for (std::size_t i = 0; i < graph.size(); ++i) {
    const auto& p = graph.positions[i];
    j["nodes"].push_back({{"x", p.x()}, {"y", p.y()}, {"z", p.z()}, {"branch", graph.branch[i]}});
  }
  j["edges"] = nlohmann::json::array();
  for (const auto& [a, b] : graph.edges) j["edges"].push_back({a, b});
  if (include_geodesic && graph.geodesic.size() > 0) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < graph.geodesic.rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index c = 0; c < graph.geodesic.cols(); ++c) row.push_back(graph.geodesic(r, c));
      rows.push_back(std::move(row));
    }
    j["geodesic"] = std::move(rows);
  }
  return j;
}

SkeletonGraph graph_from_json(const nlohmann::json& j) {
  try {
    SkeletonGraph g;
    for (const auto& node : j.at("nodes")) {
      g.positions.emplace_back(node.at("x").get<double>(), node.at("y").get<double>(), node.at("z").get<double>());
      g.branch.push_back(node.value("branch", label::kUnassigned));
    }
    for (const auto& e : j.at("edges")) g.edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    const auto n = static_cast<Eigen::Index>(g.size());
    if (j.contains("geodesic")) {
      const auto& rows = j.at("geodesic");
      if (static_cast<Eigen::Index>(rows.size()) != n) throw Error(ErrorCode::ParseError, "geodesic matrix size mismatch");
      g.geodesic.resize(n, n);
      for (Eigen::Index r = 0; r < n; ++r) {
        if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(r)].size()) != n) {
          throw Error(ErrorCode::ParseError, "geodesic matrix size mismatch");
        }
        for (Eigen::Index c = 0; c < n; ++c) g.geodesic(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
      }
    } else {
      g.geodesic = all_pairs_geodesic(g.positions, g.edges);
    }
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("malformed graph JSON: ") + e.what());
  }
}

}  // namespace costalign::somgraph
