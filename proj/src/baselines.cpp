#include "costalign/baselines.hpp"

#include "costalign/error.hpp"
#include "costalign/kdtree.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>

namespace costalign::baselines {

void IcpParams::validate() const {
  if (max_iterations < 1) throw Error(ErrorCode::InvalidParams, "ICP max_iterations must be >= 1");
  if (!(convergence_tol > 0.0)) throw Error(ErrorCode::InvalidParams, "ICP convergence_tol must be > 0");
  if (!(max_pair_distance > 0.0)) throw Error(ErrorCode::InvalidParams, "ICP max_pair_distance must be > 0");
}

void CpdParams::validate() const {
  if (!(beta > 0.0)) throw Error(ErrorCode::InvalidParams, "CPD beta must be > 0");
  if (!(lambda > 0.0)) throw Error(ErrorCode::InvalidParams, "CPD lambda must be > 0");
  if (!(outlier_w >= 0.0 && outlier_w < 1.0)) throw Error(ErrorCode::InvalidParams, "CPD outlier_w must lie in [0, 1)");
  if (max_iterations < 1) throw Error(ErrorCode::InvalidParams, "CPD max_iterations must be >= 1");
  if (!(tol > 0.0)) throw Error(ErrorCode::InvalidParams, "CPD tol must be > 0");
  if (max_control_points < 3) throw Error(ErrorCode::InvalidParams, "CPD max_control_points must be >= 3");
}

namespace {

struct Pairing {
  std::vector<Point3> src, dst;
  double rms = 0.0;
};

Pairing pair_nearest(const PointCloud& source, const RigidTransform& t, const KdTree& tree,
                     const PointCloud& target, double gate) {
  Pairing p;
  const double gate2 = gate * gate;
  double acc = 0.0;
  for (const auto& s : source.points) {
    const auto hit = tree.nearest(t(s));
    if (hit.dist2 > gate2) continue;
    p.src.push_back(s);
    p.dst.push_back(target.points[hit.index]);
    acc += hit.dist2;
  }
  if (p.src.size() < 3) throw Error(ErrorCode::DegenerateGeometry, "ICP pairing left fewer than 3 pairs");
  p.rms = std::sqrt(acc / static_cast<double>(p.src.size()));
  return p;
}

}  // namespace

IcpResult icp(const PointCloud& source, const PointCloud& target, const IcpParams& params) {
  params.validate();
  if (source.size() < 3 || target.size() < 3) {
    throw Error(ErrorCode::DegenerateGeometry, "ICP needs at least 3 points per cloud");
  }
  const KdTree tree(target.points);
  IcpResult res;
  Pairing cur = pair_nearest(source, res.transform, tree, target, params.max_pair_distance);
  res.rms_trace.push_back(cur.rms);
  for (int it = 0; it < params.max_iterations; ++it) {
    const RigidTransform next = fit_rigid(cur.src, cur.dst);
    Pairing np = pair_nearest(source, next, tree, target, params.max_pair_distance);
    // A gated pairing can lose pairs and raise the RMS; keep the last good state then.
    if (np.rms > cur.rms) break;
    res.transform = next;
    res.iterations = it + 1;
    res.rms_trace.push_back(np.rms);
    const double drop = cur.rms - np.rms;
    cur = std::move(np);
    if (drop < params.convergence_tol) break;
  }
  return res;
}

std::vector<std::size_t> farthest_point_subset(std::span<const Point3> points, std::size_t count) {
  const std::size_t n = points.size();
  count = std::min(count, n);
  std::vector<std::size_t> out;
  if (count == 0) return out;
  if (count == n) {
    out.resize(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = i;
    return out;
  }
  std::vector<double> d(n, std::numeric_limits<double>::infinity());
  std::size_t cur = 0;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    out.push_back(cur);
    std::size_t best = 0;
    double best_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      d[i] = std::min(d[i], (points[i] - points[cur]).squaredNorm());
      if (d[i] > best_d) {
        best_d = d[i];
        best = i;
      }
    }
    cur = best;
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

using Mat = Eigen::MatrixXd;

Mat to_matrix(std::span<const Point3> pts, const std::vector<std::size_t>& idx) {
  Mat m(static_cast<Eigen::Index>(idx.size()), 3);
  for (std::size_t i = 0; i < idx.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = pts[idx[i]].transpose();
  return m;
}

Mat gaussian_kernel(const Mat& a, const Mat& b, double beta) {
  Mat g(a.rows(), b.rows());
  const double inv = 1.0 / (2.0 * beta * beta);
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) g(i, j) = std::exp(-(a.row(i) - b.row(j)).squaredNorm() * inv);
  }
  return g;
}

struct EStep {
  Mat p;  // M x N posteriors
  double nll = 0.0;
};

EStep expectation(const Mat& x, const Mat& t, double sigma2, double w) {
  const Eigen::Index n = x.rows(), m = t.rows();
  constexpr double kD = 3.0;
  EStep e;
  e.p.resize(m, n);
  const double log_norm = 0.5 * kD * std::log(2.0 * std::numbers::pi * sigma2);
  const double log_c = w > 0.0 ? log_norm + std::log(w / (1.0 - w)) + std::log(static_cast<double>(m) / static_cast<double>(n))
                               : -std::numeric_limits<double>::infinity();
  const double log_mix = std::log((1.0 - w) / static_cast<double>(m)) - log_norm;
  Eigen::VectorXd a(m);
  for (Eigen::Index j = 0; j < n; ++j) {
    double mx = log_c;
    for (Eigen::Index i = 0; i < m; ++i) {
      a(i) = -(x.row(j) - t.row(i)).squaredNorm() / (2.0 * sigma2);
      mx = std::max(mx, a(i));
    }
    double s = std::isfinite(log_c) ? std::exp(log_c - mx) : 0.0;
    for (Eigen::Index i = 0; i < m; ++i) s += std::exp(a(i) - mx);
    const double lse = mx + std::log(s);
    for (Eigen::Index i = 0; i < m; ++i) e.p(i, j) = std::exp(a(i) - lse);
    e.nll -= log_mix + lse;
  }
  return e;
}

Mat solve_field(const Mat& g, const Eigen::VectorXd& p1, const Mat& rhs, double reg) {
  const Eigen::Index m = g.rows();
  for (double jitter : {0.0, 1e-8}) {
    Mat a = p1.asDiagonal() * g;
    a.diagonal().array() += reg + jitter;
    const Eigen::PartialPivLU<Mat> lu(a);
    Mat w = lu.solve(rhs);
    if (!w.allFinite()) continue;
    const double scale = std::max(rhs.norm(), 1e-300);
    if ((a * w - rhs).norm() <= 1e-6 * scale + 1e-12) return w;
  }
  throw Error(ErrorCode::NumericalFailure, "CPD kernel system is singular", {{"size", std::to_string(m)}});
}

}  // namespace

CpdResult cpd_nonrigid(const PointCloud& source, const PointCloud& target, const CpdParams& params) {
  params.validate();
  if (source.size() < 3 || target.size() < 3) {
    throw Error(ErrorCode::DegenerateGeometry, "CPD needs at least 3 points per cloud");
  }
  const auto cap = static_cast<std::size_t>(params.max_control_points);
  const Mat y = to_matrix(source.points, farthest_point_subset(source.points, cap));
  const Mat x = to_matrix(target.points, farthest_point_subset(target.points, cap));
  const Eigen::Index m = y.rows(), n = x.rows();
  constexpr double kD = 3.0;

  const Mat g = gaussian_kernel(y, y, params.beta);
  Mat w = Mat::Zero(m, 3);
  Mat t = y;
  double sigma2 = (static_cast<double>(m) * x.squaredNorm() + static_cast<double>(n) * y.squaredNorm() -
                   2.0 * x.colwise().sum().dot(y.colwise().sum())) /
                  (kD * static_cast<double>(m) * static_cast<double>(n));
  if (!(sigma2 > 0.0)) sigma2 = 1.0;

  CpdResult res;
  auto objective = [&](const EStep& e) { return e.nll + 0.5 * params.lambda * (w.transpose() * g * w).trace(); };
  EStep e = expectation(x, t, sigma2, params.outlier_w);
  res.objective_trace.push_back(objective(e));

  for (int it = 0; it < params.max_iterations; ++it) {
    const Eigen::VectorXd p1 = e.p.rowwise().sum();
    const Eigen::VectorXd pt1 = e.p.colwise().sum().transpose();
    const Mat px = e.p * x;
    const double np = p1.sum();
    if (!(np > 0.0)) break;

    w = solve_field(g, p1, px - p1.asDiagonal() * y, params.lambda * sigma2);
    t = y + g * w;
    const double num = (pt1.array() * x.rowwise().squaredNorm().array()).sum() - 2.0 * (px.array() * t.array()).sum() +
                       (p1.array() * t.rowwise().squaredNorm().array()).sum();
    const double next_sigma2 = num / (np * kD);
    res.iterations = it + 1;
    if (!(next_sigma2 > 1e-10) || !std::isfinite(next_sigma2)) {
      // Exact fit: the likelihood is unbounded, keep the field and stop.
      sigma2 = 1e-10;
      break;
    }
    sigma2 = next_sigma2;

    e = expectation(x, t, sigma2, params.outlier_w);
    const double prev = res.objective_trace.back();
    res.objective_trace.push_back(objective(e));
    if (std::abs(prev - res.objective_trace.back()) <= params.tol * std::max(std::abs(prev), 1.0)) break;
  }
  res.sigma2 = sigma2;

  res.displaced.labels = source.labels;
  res.displaced.points.reserve(source.size());
  const double inv = 1.0 / (2.0 * params.beta * params.beta);
  for (const auto& z : source.points) {
    Eigen::RowVector3d v = Eigen::RowVector3d::Zero();
    for (Eigen::Index i = 0; i < m; ++i) v += std::exp(-(z.transpose() - y.row(i)).squaredNorm() * inv) * w.row(i);
    res.displaced.points.push_back(z + v.transpose());
  }
  return res;
}

namespace {
double elapsed_ms(std::chrono::steady_clock::time_point& start) {
  const auto now = std::chrono::steady_clock::now();
  const double ms = std::chrono::duration<double, std::milli>(now - start).count();
  start = now;
  return ms;
}
}  // namespace

reg::PipelineResult icp_register(const PointCloud& template_cloud, const PointCloud& subject,
                                 const std::vector<Point3>& waypoints_template, const reg::PipelineParams& params,
                                 const IcpParams& icp_params) {
  reg::AlignedSubject prep = reg::prepare_subject(template_cloud, subject, params);
  reg::PipelineResult res;
  res.coarse = prep.coarse;
  res.stages = std::move(prep.stages);
  auto clock = std::chrono::steady_clock::now();
  const IcpResult fit = icp(template_cloud, prep.cloud, icp_params);
  res.stages.push_back({"icp", fit.rms_trace.back(), elapsed_ms(clock)});
  const RigidTransform full = res.coarse.inverse().compose(fit.transform);
  res.warped = apply(full, template_cloud);
  res.waypoints = apply(full, std::span<const Point3>(waypoints_template));
  res.stages.push_back({"map_waypoints", 0.0, elapsed_ms(clock)});
  return res;
}

reg::PipelineResult cpd_register(const PointCloud& template_cloud, const PointCloud& subject,
                                 const std::vector<Point3>& waypoints_template, const reg::PipelineParams& params,
                                 const CpdParams& cpd_params) {
  reg::AlignedSubject prep = reg::prepare_subject(template_cloud, subject, params);
  reg::PipelineResult res;
  res.coarse = prep.coarse;
  res.stages = std::move(prep.stages);
  auto clock = std::chrono::steady_clock::now();
  const CpdResult fit = cpd_nonrigid(template_cloud, prep.cloud, cpd_params);
  res.stages.push_back({"cpd", rms_nearest_distance(fit.displaced.points, prep.cloud.points), elapsed_ms(clock)});
  const auto mapped = reg::map_waypoints(waypoints_template, template_cloud, fit.displaced, params.reg);
  const RigidTransform back = res.coarse.inverse();
  res.waypoints = apply(back, std::span<const Point3>(mapped));
  res.warped = apply(back, fit.displaced);
  res.stages.push_back({"map_waypoints", 0.0, elapsed_ms(clock)});
  return res;
}

reg::PipelineResult sparse_graph_register(const PointCloud& template_cloud, const PointCloud& subject,
                                          const std::vector<Point3>& waypoints_template,
                                          const reg::PipelineParams& params, int keypoint_count) {
  reg::PipelineParams sparse = params;
  sparse.graph_nodes = keypoint_count;
  if (!sparse.som.sigma0) {
    sparse.som.sigma0 = somgraph::default_sigma0(somgraph::build_template_graph(template_cloud, params.graph_nodes));
  }
  return reg::register_pipeline(template_cloud, subject, waypoints_template, sparse);
}

}  // namespace costalign::baselines
