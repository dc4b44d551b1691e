#include "costalign/io.hpp"
#include "costalign/synth.hpp"

#include "../support/expect_error.hpp"

#include <doctest.h>

#include <set>
#include <sstream>

using namespace costalign;

namespace {

synth::AnatomyParams anatomy(std::uint64_t seed, const std::string& profile) {
  synth::AnatomyParams a;
  a.rng_seed = seed;
  a.deform = synth::deform_profile(profile);
  return a;
}

}  // namespace

TEST_CASE("zero deformation reproduces the template") {
  const auto pair = synth::generate_pair(anatomy(3, "none"));
  CHECK(pair.subject.points == pair.template_cloud.points);
  CHECK(pair.subject.labels == pair.template_cloud.labels);
  REQUIRE(pair.truth.waypoints_template.size() == 18);
  for (std::size_t i = 0; i < 18; ++i) {
    CHECK((pair.truth.waypoints_template[i] - pair.truth.waypoints_subject[i]).norm() == 0.0);
  }
}

TEST_CASE("pure offset moves every waypoint by the offset") {
  auto a = anatomy(3, "none");
  a.deform.offset = Point3(4, -7, 2.5);
  const auto pair = synth::generate_pair(a);
  for (std::size_t i = 0; i < pair.truth.waypoints_template.size(); ++i) {
    CHECK((pair.truth.waypoints_subject[i] - pair.truth.waypoints_template[i] - a.deform.offset).norm() < 1e-9);
  }
}

TEST_CASE("generator is deterministic and labels every branch") {
  const auto a = anatomy(7, "mild");
  const auto p1 = synth::generate_pair(a);
  const auto p2 = synth::generate_pair(a);
  std::ostringstream s1, s2;
  io::write_xyzl(s1, p1.subject);
  io::write_xyzl(s2, p2.subject);
  CHECK(s1.str() == s2.str());

  const std::set<int> labels(p1.template_cloud.labels.begin(), p1.template_cloud.labels.end());
  CHECK(labels == std::set<int>{0, 1, 2, 3, 4, 5, 6, 7, 8});
  CHECK(p1.template_cloud.subset_with_label(0).size() > 0);

  const std::set<std::size_t> image(p1.truth.correspondence.begin(), p1.truth.correspondence.end());
  CHECK(p1.truth.correspondence.size() == p1.template_cloud.size());
  CHECK(image.size() == p1.truth.correspondence.size());
  CHECK(p1.truth.waypoints_template.size() == p1.truth.waypoints_subject.size());
}

TEST_CASE("waypoints of the undeformed template match the truth") {
  const auto pair = synth::generate_pair(anatomy(1, "none"));
  const auto w = synth::waypoints_from_cloud(pair.template_cloud);
  REQUIRE(w.size() == pair.truth.waypoints_template.size());
  for (std::size_t i = 0; i < w.size(); ++i) CHECK((w[i] - pair.truth.waypoints_template[i]).norm() < 1e-6);
  CHECK(synth::waypoint_count(8) == 18);
}

TEST_CASE("cluster midpoints of two parallel branches") {
  std::vector<Point3> upper, lower;
  for (int i = 0; i <= 40; ++i) {
    upper.emplace_back(i, 0, 10);
    lower.emplace_back(i, 0, 0);
  }
  const auto mids = synth::pair_cluster_midpoints(upper, lower, 2, Point3(-10, 0, 5));
  REQUIRE(mids.size() == 2);
  for (const auto& m : mids) CHECK(m.z() == doctest::Approx(5.0));
  CHECK(mids[0].x() < mids[1].x());
}

TEST_CASE("synth errors") {
  auto a = anatomy(0, "none");
  a.branch_count = 3;
  CHECK_ERROR_CODE(synth::generate_pair(a), ErrorCode::InvalidParams);
  a = anatomy(0, "none");
  a.deform.global_scale = 0.0;
  CHECK_ERROR_CODE(synth::generate_pair(a), ErrorCode::InvalidParams);
  a = anatomy(0, "none");
  a.deform.outlier_fraction = 0.5;
  CHECK_ERROR_CODE(synth::generate_pair(a), ErrorCode::InvalidParams);
  CHECK_ERROR_CODE(synth::deform_profile("wild"), ErrorCode::InvalidParams);

  auto pair = synth::generate_pair(anatomy(0, "none"));
  for (auto& l : pair.template_cloud.labels) {
    if (l == 3) l = 4;
  }
  CHECK_ERROR_CODE(synth::waypoints_from_cloud(pair.template_cloud), ErrorCode::MissingBranch);
}
