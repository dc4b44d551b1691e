#include "costalign/somgraph.hpp"
#include "costalign/synth.hpp"

#include "../support/expect_error.hpp"
#include "../support/fixtures.hpp"

#include <doctest.h>

#include <limits>

using namespace costalign;
using somgraph::SkeletonGraph;

namespace {

const PointCloud& template_cloud() {
  static const PointCloud cloud = synth::generate_pair(synth::AnatomyParams{}).template_cloud;
  return cloud;
}

const SkeletonGraph& template_graph() {
  static const SkeletonGraph g = somgraph::build_template_graph(template_cloud());
  return g;
}

SkeletonGraph single_node(const Point3& p) {
  SkeletonGraph g;
  g.positions = {p};
  g.branch = {0};
  g.geodesic = Eigen::MatrixXd::Zero(1, 1);
  return g;
}

}  // namespace

TEST_CASE("default template graph is a 245-node tree") {
  const auto& g = template_graph();
  CHECK(g.size() == 245);
  CHECK(g.edges.size() == 244);
  CHECK(g.branch.size() == 245);
  CHECK(std::isfinite(g.geodesic.maxCoeff()));
}

TEST_CASE("geodesic matrix properties") {
  const auto& g = template_graph();
  const auto n = static_cast<Eigen::Index>(g.size());
  CHECK((g.geodesic - g.geodesic.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(g.geodesic.diagonal().cwiseAbs().maxCoeff() == 0.0);

  for (Eigen::Index i = 0; i < n; i += 7) {
    for (Eigen::Index j = 0; j < n; j += 5) {
      if (g.branch[i] == g.branch[j] || g.branch[i] == label::kSternum || g.branch[j] == label::kSternum) continue;
      double via = std::numeric_limits<double>::infinity();
      for (Eigen::Index k = 0; k < n; ++k) {
        if (g.branch[k] == label::kSternum) via = std::min(via, g.geodesic(i, k) + g.geodesic(k, j));
      }
      CHECK(g.geodesic(i, j) == doctest::Approx(via).epsilon(1e-12));
    }
  }
}

TEST_CASE("all_pairs_geodesic on a small graph") {
  const std::vector<Point3> pos{{0, 0, 0}, {3, 0, 0}, {3, 4, 0}, {50, 0, 0}};
  const auto d = somgraph::all_pairs_geodesic(pos, {{0, 1}, {2, 1}});
  CHECK(d(0, 2) == doctest::Approx(7.0));
  CHECK(d(2, 0) == doctest::Approx(7.0));
  CHECK(std::isinf(d(0, 3)));
  CHECK_ERROR_CODE(somgraph::all_pairs_geodesic(pos, {{0, 9}}), ErrorCode::InvalidParams);
}

TEST_CASE("build_template_graph errors") {
  PointCloud missing = template_cloud();
  for (auto& l : missing.labels) {
    if (l == 5) l = 6;
  }
  CHECK_ERROR_CODE(somgraph::build_template_graph(missing), ErrorCode::MissingBranch);
}

TEST_CASE("single node with lr 1 lands on the last sample") {
  std::mt19937_64 rng(5);
  PointCloud cloud;
  for (const auto& p : fixtures::random_points(rng, 40, 10.0)) cloud.push_back(p);
  somgraph::SomParams p;
  p.iterations = 1;
  p.lr0 = 1.0;
  p.sigma0 = 1.0;
  p.rng_seed = 17;
  const auto fit = somgraph::som_fit(single_node(Point3(100, 0, 0)), cloud, p);
  const auto last = somgraph::epoch_order(cloud.size(), p.rng_seed, 0).back();
  CHECK(fit.positions[0] == cloud.points[last]);
}

TEST_CASE("single node with small steps converges to the centroid") {
  std::mt19937_64 rng(6);
  PointCloud cloud;
  for (const auto& p : fixtures::random_points(rng, 200, 10.0)) cloud.push_back(p);
  somgraph::SomParams p;
  p.iterations = 200;
  p.lr0 = 0.002;
  p.lr_decay = 1.0;
  p.sigma0 = 1.0;
  const auto fit = somgraph::som_fit(single_node(Point3(30, 30, 30)), cloud, p);
  CHECK((fit.positions[0] - centroid(cloud)).norm() < 0.5);
}

TEST_CASE("nodes on the cloud are a fixed point for vanishing sigma") {
  const auto& g = template_graph();
  PointCloud cloud;
  for (const auto& p : g.positions) cloud.push_back(p);
  somgraph::SomParams p;
  p.iterations = 1;
  p.sigma0 = 1e-6;
  const auto fit = somgraph::som_fit(g, cloud, p);
  double max_move = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) max_move = std::max(max_move, (fit.positions[i] - g.positions[i]).norm());
  CHECK(max_move <= 1e-9);
}

TEST_CASE("geodesic neighbourhood keeps nodes on their branch") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto inst = fixtures::two_branch_instance(seed);
    somgraph::SomParams p;
    p.sigma0 = 5.0;
    p.rng_seed = seed;
    CHECK(fixtures::cross_branch_nodes(somgraph::som_fit(inst.graph, inst.cloud, p)) == 0);
    p.neighborhood = somgraph::Neighborhood::Euclidean;
    CHECK(fixtures::cross_branch_nodes(somgraph::som_fit(inst.graph, inst.cloud, p)) >= 1);
  }
}

TEST_CASE("som_fit is deterministic and reduces quantization error") {
  synth::AnatomyParams a;
  a.rng_seed = 2;
  a.deform = synth::deform_profile("mild");
  const auto subject = synth::generate_pair(a).subject;
  somgraph::SomParams p;
  p.rng_seed = 99;
  const auto f1 = somgraph::som_fit(template_graph(), subject, p);
  const auto f2 = somgraph::som_fit(template_graph(), subject, p);
  CHECK(f1.positions == f2.positions);
  CHECK(somgraph::quantization_error(f1, subject) < somgraph::quantization_error(template_graph(), subject));
  CHECK(f1.edges == template_graph().edges);
}

TEST_CASE("som parameter validation") {
  PointCloud cloud;
  cloud.push_back(Point3::Zero());
  somgraph::SomParams p;
  p.lr0 = 0.0;
  CHECK_ERROR_CODE(somgraph::som_fit(template_graph(), cloud, p), ErrorCode::InvalidParams);
  p = {};
  p.sigma0 = -1.0;
  CHECK_ERROR_CODE(somgraph::som_fit(template_graph(), cloud, p), ErrorCode::InvalidParams);
  p = {};
  p.iterations = 0;
  CHECK_ERROR_CODE(somgraph::som_fit(template_graph(), cloud, p), ErrorCode::InvalidParams);
  CHECK_ERROR_CODE(somgraph::som_fit(template_graph(), PointCloud{}, somgraph::SomParams{}), ErrorCode::EmptyInput);
}

TEST_CASE("epoch_order is a permutation") {
  auto o = somgraph::epoch_order(100, 3, 2);
  CHECK(o == somgraph::epoch_order(100, 3, 2));
  CHECK(o != somgraph::epoch_order(100, 3, 3));
  std::sort(o.begin(), o.end());
  for (std::size_t i = 0; i < o.size(); ++i) CHECK(o[i] == i);
  CHECK(somgraph::neighborhood_weight(0.0, 2.0) == 1.0);
  CHECK(somgraph::neighborhood_weight(2.0, 2.0) == doctest::Approx(std::exp(-0.5)));
}

TEST_CASE("pair_nodes") {
  const auto& g = template_graph();
  const auto pairs = somgraph::pair_nodes(g, g);
  REQUIRE(pairs.size() == 245);
  for (std::size_t i = 0; i < pairs.size(); ++i) CHECK(pairs[i] == std::pair<std::size_t, std::size_t>(i, i));
  SkeletonGraph smaller = g;
  smaller.positions.pop_back();
  smaller.branch.pop_back();
  CHECK_ERROR_CODE(somgraph::pair_nodes(g, smaller), ErrorCode::GraphMismatch);
}

TEST_CASE("graph json round trip") {
  const auto& g = template_graph();
  const auto back = somgraph::graph_from_json(somgraph::to_json(g));
  CHECK(back.positions == g.positions);
  CHECK(back.edges == g.edges);
  CHECK(back.branch == g.branch);
  CHECK((back.geodesic - g.geodesic).cwiseAbs().maxCoeff() == 0.0);
  const auto recomputed = somgraph::graph_from_json(somgraph::to_json(g, false));
  CHECK((recomputed.geodesic - g.geodesic).cwiseAbs().maxCoeff() < 1e-9);
  CHECK_ERROR_CODE(somgraph::graph_from_json(nlohmann::json{{"positions", 3}}), ErrorCode::ParseError);
}
