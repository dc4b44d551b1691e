#include "costalign/eval.hpp"

#include "../support/expect_error.hpp"
#include "../support/fixtures.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace costalign;
using shape::BinaryMask;

namespace {

BinaryMask rect(int w, int h, int x0, int y0, int x1, int y1) {
  BinaryMask m(w, h);
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) m.set(x, y, true);
  }
  return m;
}

/// Brute-force squared distance to the nearest pixel equal to `target`.
double brute_d2(const BinaryMask& m, int x, int y, bool target) {
  double best = std::numeric_limits<double>::infinity();
  for (int v = 0; v < m.height; ++v) {
    for (int u = 0; u < m.width; ++u) {
      if (static_cast<bool>(m.at(u, v)) == target) best = std::min(best, double((u - x) * (u - x) + (v - y) * (v - y)));
    }
  }
  return best;
}

}  // namespace

TEST_CASE("dice and iou examples") {
  const auto a = rect(20, 20, 0, 0, 10, 10);
  CHECK(eval::dice(a, a) == 1.0);
  CHECK(eval::iou(a, a) == 1.0);
  const auto b = rect(20, 20, 10, 10, 20, 20);
  CHECK(eval::dice(a, b) == 0.0);
  CHECK(eval::iou(a, b) == 0.0);
  const auto c = rect(20, 20, 5, 0, 15, 10);
  CHECK(eval::dice(a, c) == doctest::Approx(0.5));
  CHECK(eval::iou(a, c) == doctest::Approx(1.0 / 3.0));
  CHECK(eval::dice(BinaryMask(3, 3), BinaryMask(3, 3)) == 1.0);
  CHECK(eval::iou(BinaryMask(3, 3), BinaryMask(3, 3)) == 1.0);
  CHECK_ERROR_CODE(eval::dice(a, BinaryMask(3, 3)), ErrorCode::DimensionMismatch);
  CHECK_ERROR_CODE(eval::iou(a, BinaryMask(3, 3)), ErrorCode::DimensionMismatch);
}

TEST_CASE("iou equals dice over two minus dice on random masks") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 200; ++i) {
    const auto a = fixtures::random_mask(rng, 16, 12, 0.3);
    const auto b = fixtures::random_mask(rng, 16, 12, 0.6);
    const double d = eval::dice(a, b);
    CHECK(d == doctest::Approx(fixtures::dice_count(a, b)).epsilon(1e-14));
    CHECK(std::abs(eval::iou(a, b) - d / (2.0 - d)) <= 1e-12);
  }
}

TEST_CASE("labelled cloud overlap") {
  PointCloud a, b;
  for (int i = 0; i < 4; ++i) {
    a.push_back(Point3(i, 0, 0), i < 2 ? 1 : 2);
    b.push_back(Point3(i, 0, 0), i < 3 ? 1 : 2);
  }
  CHECK(eval::dice(a, b, 1) == doctest::Approx(0.8));
  CHECK(eval::iou(a, b, 1) == doctest::Approx(2.0 / 3.0));
  b.push_back(Point3::Zero(), 1);
  CHECK_ERROR_CODE(eval::dice(a, b, 1), ErrorCode::DimensionMismatch);
}

TEST_CASE("distance transform matches brute force") {
  std::mt19937_64 rng(2);
  const auto m = fixtures::random_mask(rng, 13, 9, 0.2);
  for (bool target : {false, true}) {
    const auto d = eval::squared_distance_to(m, target);
    for (int y = 0; y < m.height; ++y) {
      for (int x = 0; x < m.width; ++x) CHECK(d[static_cast<std::size_t>(y * m.width + x)] == brute_d2(m, x, y, target));
    }
  }
  const auto none = eval::squared_distance_to(BinaryMask(3, 3), true);
  CHECK(std::isinf(none[0]));
}

TEST_CASE("boundary loss") {
  const auto truth = rect(5, 3, 1, 1, 4, 2);
  const auto shifted = rect(5, 3, 2, 1, 5, 2);
  CHECK(eval::boundary_loss(truth, truth) == 0.0);
  CHECK(eval::boundary_loss(shifted, truth) == doctest::Approx(4.0));

  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    const auto t = fixtures::random_mask(rng, 10, 10, 0.5);
    auto p = t;
    CHECK(eval::boundary_loss(p, t) == 0.0);
    p.data[rng() % p.data.size()] ^= 1;
    CHECK(eval::boundary_loss(p, t) > 0.0);
  }
  CHECK_ERROR_CODE(eval::boundary_loss(truth, BinaryMask(5, 3)), ErrorCode::UndefinedBoundary);
  CHECK_ERROR_CODE(eval::boundary_loss(truth, rect(5, 3, 0, 0, 5, 3)), ErrorCode::UndefinedBoundary);
  CHECK_ERROR_CODE(eval::boundary_loss(truth, BinaryMask(2, 2)), ErrorCode::DimensionMismatch);
}

TEST_CASE("classification metrics") {
  const auto perfect = eval::classification_metrics({50, 50, 0, 0});
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.sensitivity == 1.0);
  CHECK(perfect.specificity == 1.0);
  const auto rib = eval::classification_metrics({35, 950, 0, 65});
  CHECK(rib.sensitivity == doctest::Approx(0.35));
  CHECK(rib.specificity == 1.0);
  CHECK(rib.accuracy == doctest::Approx(985.0 / 1050.0));
  CHECK_ERROR_CODE(eval::classification_metrics({0, 0, 0, 0}), ErrorCode::UndefinedMetric);
  CHECK_ERROR_CODE(eval::classification_metrics({0, 5, 1, 0}), ErrorCode::UndefinedMetric);
  CHECK_ERROR_CODE(eval::classification_metrics({5, 0, 0, 1}), ErrorCode::UndefinedMetric);
}

TEST_CASE("registration report statistics") {
  const std::vector<Point3> truth{{0, 0, 0}, {1, 1, 1}, {5, 0, 0}};
  const std::vector<Point3> mapped{{3, 4, 0}, {1, 1, 1}, {5, 0, 2}};
  const auto r = eval::make_report("dense", mapped, truth, {{"warp", 0.5, 12.0}}, nlohmann::json::object());
  CHECK(r.errors == std::vector<double>{5.0, 0.0, 2.0});
  CHECK(r.mean == doctest::Approx(7.0 / 3.0).epsilon(1e-12));
  const double var = ((5 - 7.0 / 3) * (5 - 7.0 / 3) + (7.0 / 3) * (7.0 / 3) + (2 - 7.0 / 3) * (2 - 7.0 / 3)) / 3.0;
  CHECK(r.sd == doctest::Approx(std::sqrt(var)).epsilon(1e-12));
  const auto quiet = eval::to_json(r, false);
  CHECK_FALSE(quiet["stages"][0].contains("ms"));
  CHECK(eval::to_json(r, true)["stages"][0]["ms"] == 12.0);
  CHECK(quiet["errors_mm"].size() == 3);
  CHECK_ERROR_CODE(eval::make_report("dense", mapped, {truth[0]}, {}, {}), ErrorCode::PairMismatch);
}

TEST_CASE("run_method rejects unknown methods") {
  CHECK_ERROR_CODE(eval::run_method("magic", PointCloud{}, PointCloud{}, {}, config::MethodParams{}),
                   ErrorCode::InvalidParams);
}

TEST_CASE("benchmark on undeformed pairs is exact") {
  eval::BenchmarkConfig c;
  c.seeds = {0, 1};
  c.profiles = {"none"};
  c.methods = {"dense", "icp"};
  const auto rows = eval::run_benchmark(c);
  REQUIRE(rows.size() == 4);
  for (const auto& r : rows) {
    CHECK(r.status == "ok");
    CHECK(std::abs(r.report.mean) <= 1e-6);
  }
  CHECK(rows[0].method == "dense");
  CHECK(rows[0].seed == 0);
  CHECK(rows[3].method == "icp");
  CHECK(rows[3].seed == 1);
}

TEST_CASE("benchmark rows are independent of job count and record failures") {
  eval::BenchmarkConfig c;
  c.seeds = {3, 1};
  c.profiles = {"mild"};
  c.methods = {"icp", "dense"};
  c.params.icp.max_pair_distance = 1e-6;
  const auto serial = eval::run_benchmark(c);
  c.jobs = 3;
  const auto parallel = eval::run_benchmark(c);
  CHECK(eval::summary_csv(serial, false) == eval::summary_csv(parallel, false));
  CHECK(eval::scatter_svg(serial) == eval::scatter_svg(parallel));

  const auto csv = eval::summary_csv(serial, false);
  CHECK(csv.rfind("method,profile,seed,mean_mm,sd_mm,runtime_ms,status\n", 0) == 0);
  CHECK(csv.find("icp,mild,1,NA,NA,NA,DegenerateGeometry\n") != std::string::npos);
  CHECK(csv.find("literature:dense,clinical,NA,2.2,1.1,NA,reference\n") != std::string::npos);
  CHECK(csv.find("dense,mild,1,") != std::string::npos);
  CHECK(serial[0].status == "ok");
  CHECK(serial[2].status == "DegenerateGeometry");
}

TEST_CASE("benchmark configuration") {
  const auto c = eval::benchmark_config_from_json(nlohmann::json::parse(
      R"({"seeds":[1,2],"profiles":["mild"],"methods":["dense"],"params":{"som":{"iterations":5}},"anatomy":{"branch_length":60}})"));
  CHECK(c.seeds == std::vector<std::uint64_t>{1, 2});
  CHECK(c.params.pipeline.som.iterations == 5);
  CHECK(c.anatomy.branch_length == 60.0);
  CHECK_ERROR_CODE(eval::benchmark_config_from_json(nlohmann::json::parse(
                       R"({"seeds":[1],"profiles":["mild"],"methods":["dense"],"extra":1})")),
                   ErrorCode::InvalidParams);
  CHECK_ERROR_CODE(eval::benchmark_config_from_json(
                       nlohmann::json::parse(R"({"seeds":[1],"profiles":["mild"],"methods":["nope"]})")),
                   ErrorCode::InvalidParams);
  CHECK_ERROR_CODE(eval::benchmark_config_from_json(
                       nlohmann::json::parse(R"({"seeds":[1],"profiles":["wild"],"methods":["dense"]})")),
                   ErrorCode::InvalidParams);
}

TEST_CASE("write_benchmark layout") {
  eval::BenchmarkConfig c;
  c.seeds = {0};
  c.profiles = {"none"};
  c.methods = {"dense"};
  const auto rows = eval::run_benchmark(c);
  const auto dir = std::filesystem::temp_directory_path() / "costalign_eval_layout";
  std::filesystem::remove_all(dir);
  eval::write_benchmark(rows, dir, false);
  CHECK(std::filesystem::exists(dir / "summary.csv"));
  CHECK(std::filesystem::exists(dir / "scatter.svg"));
  const auto report = dir / "runs" / "dense" / "none" / "seed_0" / "report.json";
  REQUIRE(std::filesystem::exists(report));
  std::ifstream in(report);
  const auto j = nlohmann::json::parse(in);
  CHECK(j["status"] == "ok");
  CHECK(j["seed"] == 0);
  CHECK_FALSE(j.contains("runtime_ms"));
  std::filesystem::remove_all(dir);
}
