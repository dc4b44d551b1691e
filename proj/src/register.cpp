#include "costalign/register.hpp"

#include "costalign/error.hpp"
#include "costalign/kdtree.hpp"
#include "costalign/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>

namespace costalign::reg {

void RegisterParams::validate() const {
  if (n_reg < 3) throw Error(ErrorCode::InvalidParams, "n_reg must be >= 3");
  if (n_blend < 1) throw Error(ErrorCode::InvalidParams, "n_blend must be >= 1");
  if (!(sphere_radius > 0.0)) throw Error(ErrorCode::InvalidParams, "sphere_radius must be > 0");
  if (!(collinearity_tol >= 0.0 && collinearity_tol < 1.0)) {
    throw Error(ErrorCode::InvalidParams, "collinearity_tol must lie in [0, 1)");
  }
}

namespace {

bool nearly_collinear(std::span<const Point3> pts, double tol) {
  const Eigen::Matrix3d cov = covariance(pts);
  const Eigen::Vector3d ev = Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(cov, Eigen::EigenvaluesOnly).eigenvalues();
  if (!(ev(2) > 0.0)) return true;
  return std::sqrt(std::max(ev(1), 0.0) / ev(2)) < tol;
}

/// Rigid fit that reports degeneracy instead of throwing.
bool try_fit(std::span<const Point3> src, std::span<const Point3> dst, double tol, RigidTransform& out) {
  if (src.size() < 3 || nearly_collinear(src, tol)) return false;
  try {
    out = fit_rigid(src, dst);
    return true;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::DegenerateGeometry) return false;
    throw;
  }
}

}  // namespace

LocalTransformField local_transforms(const NodePairs& pairs, const somgraph::SkeletonGraph& g_ct,
                                     const somgraph::SkeletonGraph& g_us, const RegisterParams& params) {
  params.validate();
  if (pairs.size() < static_cast<std::size_t>(params.n_reg)) {
    throw Error(ErrorCode::DegenerateGeometry, "fewer node pairs than n_reg");
  }
  const auto n = static_cast<Eigen::Index>(g_ct.size());
  if (g_ct.geodesic.rows() != n || g_ct.geodesic.cols() != n) {
    throw Error(ErrorCode::InvalidParams, "G_ct has no geodesic matrix");
  }
  std::map<std::size_t, std::size_t> partner;
  for (const auto& [c, u] : pairs) {
    if (c >= g_ct.size() || u >= g_us.size()) throw Error(ErrorCode::GraphMismatch, "pair index out of range");
    partner.emplace(c, u);
  }
  std::vector<std::size_t> paired;
  for (const auto& [c, u] : partner) paired.push_back(c);

  LocalTransformField field;
  field.nodes = g_ct.positions;
  field.transforms.resize(g_ct.size());
  std::vector<std::size_t> order = paired;
  for (std::size_t i = 0; i < g_ct.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const double da = g_ct.geodesic(row, static_cast<Eigen::Index>(a));
      const double db = g_ct.geodesic(row, static_cast<Eigen::Index>(b));
      return da < db || (da == db && a < b);
    });
    std::vector<Point3> src, dst;
    bool ok = false;
    for (std::size_t k = 0; k < order.size(); ++k) {
      src.push_back(g_ct.positions[order[k]]);
      dst.push_back(g_us.positions[partner.at(order[k])]);
      if (k + 1 < static_cast<std::size_t>(params.n_reg)) continue;
      if (try_fit(src, dst, params.collinearity_tol, field.transforms[i])) {
        ok = true;
        break;
      }
    }
    if (!ok) {
      throw Error(ErrorCode::DegenerateGeometry, "all paired nodes are collinear",
                  {{"node", std::to_string(i)}});
    }
  }
  return field;
}

BlendWeights blend_weights(const Point3& p, const LocalTransformField& field, const RegisterParams& params) {
  BlendWeights bw;
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(params.n_blend), field.size());
  // Brute-force selection keeps the helper usable without a prebuilt index.
  std::vector<std::pair<double, std::size_t>> d;
  d.reserve(field.size());
  for (std::size_t i = 0; i < field.size(); ++i) d.emplace_back((field.nodes[i] - p).norm(), i);
  std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
  if (d[0].first < 1e-9) {
    bw.nodes = {d[0].second};
    bw.weights = {1.0};
    return bw;
  }
  double total = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    const double w = params.blend == BlendMode::InverseDistance ? 1.0 / d[j].first : d[j].first;
    bw.nodes.push_back(d[j].second);
    bw.weights.push_back(w);
    total += w;
  }
  for (double& w : bw.weights) w /= total;
  return bw;
}

PointCloud warp_cloud(const PointCloud& cloud, const LocalTransformField& field, const RegisterParams& params) {
  params.validate();
  if (field.size() == 0) throw Error(ErrorCode::EmptyInput, "empty transform field");
  const KdTree tree(field.nodes);
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(params.n_blend), field.size());
  PointCloud out;
  out.labels = cloud.labels;
  out.points.reserve(cloud.size());
  for (const auto& p : cloud.points) {
    const auto hits = tree.knn(p, k);
    if (hits[0].dist2 < 1e-18) {
      out.points.push_back(field.transforms[hits[0].index](p));
      continue;
    }
    double total = 0.0;
    Point3 acc = Point3::Zero();
    for (const auto& h : hits) {
      const double d = std::sqrt(h.dist2);
      const double w = params.blend == BlendMode::InverseDistance ? 1.0 / d : d;
      acc += w * field.transforms[h.index](p);
      total += w;
    }
    out.points.push_back(acc / total);
  }
  return out;
}

std::vector<Point3> map_waypoints(const std::vector<Point3>& waypoints, const PointCloud& cloud_ct,
                                  const PointCloud& warped, const RegisterParams& params) {
  params.validate();
  if (cloud_ct.size() != warped.size()) {
    throw Error(ErrorCode::PairMismatch, "warped cloud is not index-aligned with the CT cloud");
  }
  const KdTree tree(cloud_ct.points);
  std::vector<Point3> out;
  out.reserve(waypoints.size());
  for (std::size_t w = 0; w < waypoints.size(); ++w) {
    double radius = params.sphere_radius;
    bool mapped = false;
    for (int attempt = 0; attempt <= 3 && !mapped; ++attempt, radius *= 1.5) {
      const auto idx = tree.radius(waypoints[w], radius);
      std::vector<Point3> src, dst;
      src.reserve(idx.size());
      dst.reserve(idx.size());
      for (std::size_t i : idx) {
        src.push_back(cloud_ct.points[i]);
        dst.push_back(warped.points[i]);
      }
      RigidTransform t;
      if (try_fit(src, dst, params.collinearity_tol, t)) {
        out.push_back(t(waypoints[w]));
        mapped = true;
      }
    }
    if (!mapped) {
      throw Error(ErrorCode::SparseNeighborhood, "too few points around waypoint",
                  {{"waypoint", std::to_string(w)}});
    }
  }
  return out;
}

namespace {
class StageClock {
 public:
  StageClock() : start_(std::chrono::steady_clock::now()) {}
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double ms = std::chrono::duration<double, std::milli>(now - start_).count();
    start_ = now;
    return ms;
  }

 private:
  std::chrono::steady_clock::time_point start_;
};
}  // namespace

AlignedSubject prepare_subject(const PointCloud& template_cloud, const PointCloud& subject, const PipelineParams& params) {
  if (template_cloud.empty() || subject.empty()) throw Error(ErrorCode::EmptyInput, "empty registration input");
  AlignedSubject out;
  StageClock clock;
  PointCloud subj = subject;
  if (params.clean_subject) {
    preprocess::PreprocessReport rep;
    subj = preprocess::clean_subject(subject, params.clustering, &rep);
    out.stages.push_back({"clean", static_cast<double>(rep.removed_points), clock.lap()});
  }
  out.coarse = preprocess::coarse_align(subj, template_cloud);
  out.cloud = apply(out.coarse, subj);
  out.stages.push_back({"coarse", preprocess::sternum_rms(out.cloud, template_cloud), clock.lap()});
  return out;
}

PipelineResult register_with_graph(const PointCloud& template_cloud, const PointCloud& subject,
                                   const std::vector<Point3>& waypoints_template,
                                   const somgraph::SkeletonGraph& template_graph, const PipelineParams& params) {
  params.reg.validate();
  AlignedSubject prep = prepare_subject(template_cloud, subject, params);
  const PointCloud& aligned = prep.cloud;
  PipelineResult res;
  res.coarse = prep.coarse;
  res.stages = std::move(prep.stages);
  StageClock clock;

  somgraph::SomParams som = params.som;
  if (!som.sigma0) som.sigma0 = somgraph::default_sigma0(template_graph);
  som.rng_seed = derive_seed(params.seed, "som");
  res.g_ct = somgraph::som_fit(template_graph, template_cloud, som);
  res.stages.push_back({"som_ct", somgraph::quantization_error(res.g_ct, template_cloud), clock.lap()});

  res.g_us = somgraph::som_fit(res.g_ct, aligned, som);
  res.stages.push_back({"som_us", somgraph::quantization_error(res.g_us, aligned), clock.lap()});

  res.g_ct = somgraph::som_fit(res.g_ct, template_cloud, som);
  res.stages.push_back({"som_ct_ref", somgraph::quantization_error(res.g_ct, template_cloud), clock.lap()});

  const auto pairs = somgraph::pair_nodes(res.g_ct, res.g_us);
  const LocalTransformField field = local_transforms(pairs, res.g_ct, res.g_us, params.reg);
  double node_res = 0.0;
  for (std::size_t i = 0; i < field.size(); ++i) {
    node_res += (field.transforms[i](res.g_ct.positions[i]) - res.g_us.positions[i]).squaredNorm();
  }
  res.stages.push_back({"local_transforms", std::sqrt(node_res / static_cast<double>(field.size())), clock.lap()});

  const PointCloud warped = warp_cloud(template_cloud, field, params.reg);
  res.stages.push_back({"warp", rms_nearest_distance(warped.points, aligned.points), clock.lap()});

  const auto mapped = map_waypoints(waypoints_template, template_cloud, warped, params.reg);
  const RigidTransform back = res.coarse.inverse();
  res.waypoints = apply(back, std::span<const Point3>(mapped));
  res.warped = apply(back, warped);
  res.stages.push_back({"map_waypoints", 0.0, clock.lap()});
  return res;
}

PipelineResult register_pipeline(const PointCloud& template_cloud, const PointCloud& subject,
                                 const std::vector<Point3>& waypoints_template, const PipelineParams& params) {
  StageClock clock;
  const auto graph = somgraph::build_template_graph(template_cloud, params.graph_nodes);
  const double graph_ms = clock.lap();
  PipelineResult res = register_with_graph(template_cloud, subject, waypoints_template, graph, params);
  res.stages.insert(res.stages.begin(), StageInfo{"template_graph", 0.0, graph_ms});
  return res;
}

}  // namespace costalign::reg
