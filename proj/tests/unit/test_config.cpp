#include "costalign/config.hpp"

#include "../support/expect_error.hpp"

#include <doctest.h>

using namespace costalign;
using nlohmann::json;

TEST_CASE("method params round trip") {
  config::MethodParams p;
  p.pipeline.graph_nodes = 120;
  p.pipeline.som.sigma0 = 4.5;
  p.pipeline.som.neighborhood = somgraph::Neighborhood::Euclidean;
  p.pipeline.reg.blend = reg::BlendMode::Literal;
  p.pipeline.clustering.min_cluster_size = 30;
  p.icp.max_pair_distance = 12.0;
  p.cpd.beta = 7.0;
  p.sparse_nodes = 20;
  const auto j = config::to_json(p);
  const auto back = config::method_params_from_json(j);
  CHECK(config::to_json(back) == j);
  CHECK(back.pipeline.som.sigma0 == 4.5);
  CHECK(back.pipeline.som.neighborhood == somgraph::Neighborhood::Euclidean);
  CHECK(back.pipeline.reg.blend == reg::BlendMode::Literal);
  CHECK(back.pipeline.clustering.min_cluster_size == std::size_t{30});
  CHECK(back.icp.max_pair_distance == 12.0);

  const auto defaults = config::to_json(config::MethodParams{});
  CHECK(defaults["som"]["sigma0"].is_null());
  CHECK(defaults["icp"]["max_pair_distance"].is_null());
  CHECK(std::isinf(config::method_params_from_json(defaults).icp.max_pair_distance));
}

TEST_CASE("partial params keep the base") {
  const auto p = config::method_params_from_json(json::parse(R"({"register":{"n_reg":5}})"));
  CHECK(p.pipeline.reg.n_reg == 5);
  CHECK(p.pipeline.reg.n_blend == reg::RegisterParams{}.n_blend);
  CHECK(p.pipeline.graph_nodes == somgraph::kDefaultNodeCount);
}

TEST_CASE("unknown keys and bad values are rejected") {
  CHECK_ERROR_CODE(config::method_params_from_json(json::parse(R"({"speed":1})")), ErrorCode::InvalidParams);
  CHECK_ERROR_CODE(config::method_params_from_json(json::parse(R"({"som":{"lr":0.3}})")), ErrorCode::InvalidParams);
  CHECK_ERROR_CODE(config::method_params_from_json(json::parse(R"({"som":{"lr0":"fast"}})")), ErrorCode::InvalidParams);
  CHECK_ERROR_CODE(config::method_params_from_json(json::parse(R"({"som":{"lr0":1.5}})")), ErrorCode::InvalidParams);
  CHECK_ERROR_CODE(config::method_params_from_json(json::parse(R"({"register":{"blend":"max"}})")),
                   ErrorCode::InvalidParams);
  CHECK_ERROR_CODE(config::method_params_from_json(json::parse(R"({"register":{"n_reg":2}})")),
                   ErrorCode::InvalidParams);
  CHECK_ERROR_CODE(config::method_params_from_json(json::parse(R"({"clustering":[]})")), ErrorCode::InvalidParams);
  CHECK_ERROR_CODE(config::method_params_from_json(json::parse(R"({"graph_nodes":2})")), ErrorCode::InvalidParams);

  try {
    config::method_params_from_json(json::parse(R"({"cpd":{"betta":1}})"));
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.context().at("section") == "cpd");
    CHECK(e.context().at("key") == "betta");
  }
}

TEST_CASE("anatomy params") {
  synth::AnatomyParams a;
  a.branch_count = 6;
  a.curvature = 0.1;
  const auto back = config::anatomy_from_json(config::to_json(a));
  CHECK(back.branch_count == 6);
  CHECK(back.curvature == 0.1);
  CHECK_ERROR_CODE(config::anatomy_from_json(json::parse(R"({"ribs":8})")), ErrorCode::InvalidParams);
  CHECK_ERROR_CODE(config::anatomy_from_json(json::parse(R"({"branch_count":5})")), ErrorCode::InvalidParams);
}
