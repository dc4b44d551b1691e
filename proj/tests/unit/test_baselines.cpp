#include "costalign/baselines.hpp"
#include "costalign/synth.hpp"

#include "../support/expect_error.hpp"
#include "../support/fixtures.hpp"

#include <doctest.h>

#include <set>

using namespace costalign;
using namespace costalign::baselines;

namespace {

PointCloud random_cloud(std::mt19937_64& rng, std::size_t n, double half) {
  PointCloud c;
  for (const auto& p : fixtures::random_points(rng, n, half)) c.push_back(p);
  return c;
}

bool non_increasing(const std::vector<double>& v, double slack) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[i - 1] + slack) return false;
  }
  return true;
}

PointCloud grid_toy() {
  PointCloud c;
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 4; ++j) c.push_back(Point3(10.0 * i, 10.0 * j, 0.0));
  }
  return c;
}

Point3 smooth_warp(const Point3& p) {
  return p + Point3(1.5 * std::sin(p.y() / 15.0), 1.0 * std::cos(p.x() / 20.0), 0.0);
}

}  // namespace

TEST_CASE("icp on identical clouds") {
  std::mt19937_64 rng(1);
  const auto c = random_cloud(rng, 200, 20.0);
  const auto r = icp(c, c);
  CHECK((r.transform.rotation - Eigen::Matrix3d::Identity()).norm() < 1e-12);
  CHECK(r.transform.translation.norm() < 1e-12);
  CHECK(r.rms_trace.front() == 0.0);
}

TEST_CASE("icp recovers a small rigid motion") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 5; ++trial) {
    const auto c = random_cloud(rng, 400, 30.0);
    const auto t = fixtures::random_rigid(rng, 10.0 * std::numbers::pi / 180.0, 2.0);
    IcpParams p;
    p.convergence_tol = 1e-10;
    p.max_iterations = 200;
    const auto r = icp(c, costalign::apply(t, c), p);
    CHECK((r.transform.rotation - t.rotation).norm() < 1e-3);
    CHECK((r.transform.translation - t.translation).norm() < 1e-3);
  }
}

TEST_CASE("icp is hurt by outliers") {
  std::mt19937_64 rng(3);
  const auto c = random_cloud(rng, 300, 20.0);
  const auto t = fixtures::random_rigid(rng, 0.1, 2.0);
  const auto target = costalign::apply(t, c);
  auto noisy = c;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 90; ++i) noisy.push_back(Point3(150 + 30 * u(rng), 30 * u(rng), 30 * u(rng)));
  CHECK(icp(noisy, target).rms_trace.back() > icp(c, target).rms_trace.back());
}

TEST_CASE("icp rms trace is monotone") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const auto src = random_cloud(rng, 150, 25.0);
    auto dst = costalign::apply(fixtures::random_rigid(rng, 0.6, 10.0), random_cloud(rng, 150, 25.0));
    IcpParams p;
    p.max_pair_distance = trial % 2 ? 15.0 : std::numeric_limits<double>::infinity();
    CHECK(non_increasing(icp(src, dst, p).rms_trace, 1e-12));
  }
}

TEST_CASE("icp errors") {
  PointCloud two;
  two.push_back(Point3::Zero());
  two.push_back(Point3::UnitX());
  CHECK_ERROR_CODE(icp(two, two), ErrorCode::DegenerateGeometry);
  std::mt19937_64 rng(5);
  const auto c = random_cloud(rng, 20, 5.0);
  IcpParams p;
  p.max_pair_distance = 1e-9;
  CHECK_ERROR_CODE(icp(c, costalign::apply(fixtures::rotation_about(Point3::UnitZ(), 0.0, Point3(50, 0, 0)), c), p),
                   ErrorCode::DegenerateGeometry);
  p = {};
  p.max_iterations = 0;
  CHECK_ERROR_CODE(icp(c, c, p), ErrorCode::InvalidParams);
}

TEST_CASE("cpd on identical clouds barely moves") {
  std::mt19937_64 rng(6);
  const auto c = random_cloud(rng, 60, 20.0);
  const auto r = cpd_nonrigid(c, c);
  for (std::size_t i = 0; i < c.size(); ++i) CHECK((r.displaced.points[i] - c.points[i]).norm() <= 1e-3);
}

TEST_CASE("cpd recovers a smooth warp of a toy grid") {
  const auto src = grid_toy();
  PointCloud dst;
  double initial = 0.0;
  for (const auto& p : src.points) {
    dst.push_back(smooth_warp(p));
    initial = std::max(initial, (dst.points.back() - p).norm());
  }
  CHECK(initial > 1.0);
  CpdParams p;
  p.outlier_w = 0.0;
  p.max_iterations = 500;
  p.tol = 1e-10;
  const auto r = cpd_nonrigid(src, dst, p);
  for (std::size_t i = 0; i < src.size(); ++i) CHECK((r.displaced.points[i] - dst.points[i]).norm() <= 0.5);
  CHECK(non_increasing(r.objective_trace, 1e-9));
}

TEST_CASE("cpd objective is monotone") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    const auto src = random_cloud(rng, 40, 15.0);
    auto dst = random_cloud(rng, 50, 15.0);
    const auto r = cpd_nonrigid(src, dst);
    CHECK(r.objective_trace.size() >= 2);
    CHECK(non_increasing(r.objective_trace, 1e-9));
  }
}

TEST_CASE("cpd parameter validation") {
  std::mt19937_64 rng(8);
  const auto c = random_cloud(rng, 10, 5.0);
  CpdParams p;
  p.beta = 0.0;
  CHECK_ERROR_CODE(cpd_nonrigid(c, c, p), ErrorCode::InvalidParams);
  p = {};
  p.lambda = -1.0;
  CHECK_ERROR_CODE(cpd_nonrigid(c, c, p), ErrorCode::InvalidParams);
}

TEST_CASE("farthest_point_subset") {
  const std::vector<Point3> pts{{0, 0, 0}, {1, 0, 0}, {10, 0, 0}, {5, 0, 0}, {2, 0, 0}};
  CHECK(farthest_point_subset(pts, 2) == std::vector<std::size_t>{0, 2});
  CHECK(farthest_point_subset(pts, 3) == std::vector<std::size_t>{0, 2, 3});
  CHECK(farthest_point_subset(pts, 9).size() == 5);
  CHECK(farthest_point_subset(pts, 0).empty());
}

TEST_CASE("baseline methods on an undeformed pair are exact") {
  const auto pair = synth::generate_pair(synth::AnatomyParams{});
  const reg::PipelineParams params;
  const auto& wt = pair.truth.waypoints_template;
  for (const auto& res : {icp_register(pair.template_cloud, pair.subject, wt, params),
                          sparse_graph_register(pair.template_cloud, pair.subject, wt, params)}) {
    REQUIRE(res.waypoints.size() == wt.size());
    for (std::size_t i = 0; i < wt.size(); ++i) CHECK((res.waypoints[i] - pair.truth.waypoints_subject[i]).norm() < 1e-6);
  }
}

TEST_CASE("sparse graph does not beat the dense graph on a mild instance") {
  synth::AnatomyParams a;
  a.rng_seed = 7;
  a.deform = synth::deform_profile("mild");
  const auto pair = synth::generate_pair(a);
  reg::PipelineParams params;
  params.seed = 7;
  const auto& wt = pair.truth.waypoints_template;
  const auto mean_error = [&](const reg::PipelineResult& r) {
    double m = 0.0;
    for (std::size_t i = 0; i < wt.size(); ++i) m += (r.waypoints[i] - pair.truth.waypoints_subject[i]).norm();
    return m / static_cast<double>(wt.size());
  };
  const double dense = mean_error(reg::register_pipeline(pair.template_cloud, pair.subject, wt, params));
  const double sparse = mean_error(sparse_graph_register(pair.template_cloud, pair.subject, wt, params));
  CHECK(sparse >= dense);
}
