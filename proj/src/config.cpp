#include "costalign/config.hpp"

#include "costalign/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace costalign::config {

using nlohmann::json;

void reject_unknown_keys(const json& j, std::initializer_list<std::string_view> allowed, std::string_view where) {
  if (!j.is_object()) {
    throw Error(ErrorCode::InvalidParams, "config section must be an object", {{"section", std::string(where)}});
  }
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw Error(ErrorCode::InvalidParams, "unknown config key", {{"section", std::string(where)}, {"key", key}});
    }
  }
}

namespace {

template <typename T>
void read(const json& j, const char* key, T& out, std::string_view where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::InvalidParams, "config value has wrong type", {{"section", std::string(where)}, {"key", key}});
  }
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

MethodParams method_params_from_json(const json& j, MethodParams base) {
  reject_unknown_keys(j, {"clean_subject", "graph_nodes", "sparse_nodes", "clustering", "som", "register", "icp", "cpd"},
                      "params");
  auto& p = base.pipeline;
  read(j, "clean_subject", p.clean_subject, "params");
  read(j, "graph_nodes", p.graph_nodes, "params");
  read(j, "sparse_nodes", base.sparse_nodes, "params");

  if (j.contains("clustering")) {
    const auto& c = j.at("clustering");
    reject_unknown_keys(c, {"eps", "min_points", "min_cluster_size", "min_cluster_fraction"}, "clustering");
    read(c, "eps", p.clustering.eps, "clustering");
    read(c, "min_points", p.clustering.min_points, "clustering");
    read(c, "min_cluster_fraction", p.clustering.min_cluster_fraction, "clustering");
    if (c.contains("min_cluster_size")) {
      if (c.at("min_cluster_size").is_null()) {
        p.clustering.min_cluster_size.reset();
      } else {
        std::size_t v = 0;
        read(c, "min_cluster_size", v, "clustering");
        p.clustering.min_cluster_size = v;
      }
    }
  }
  if (j.contains("som")) {
    const auto& s = j.at("som");
    reject_unknown_keys(s, {"iterations", "lr0", "lr_decay", "sigma0", "sigma_decay", "neighborhood"}, "som");
    read(s, "iterations", p.som.iterations, "som");
    read(s, "lr0", p.som.lr0, "som");
    read(s, "lr_decay", p.som.lr_decay, "som");
    read(s, "sigma_decay", p.som.sigma_decay, "som");
    if (s.contains("sigma0")) {
      if (s.at("sigma0").is_null()) {
        p.som.sigma0.reset();
      } else {
        double v = 0.0;
        read(s, "sigma0", v, "som");
        p.som.sigma0 = v;
      }
    }
    if (s.contains("neighborhood")) {
      std::string v;
      read(s, "neighborhood", v, "som");
      if (v == "geodesic") {
        p.som.neighborhood = somgraph::Neighborhood::Geodesic;
      } else if (v == "euclidean") {
        p.som.neighborhood = somgraph::Neighborhood::Euclidean;
      } else {
        throw Error(ErrorCode::InvalidParams, "neighborhood must be geodesic or euclidean", {{"value", v}});
      }
    }
  }
  if (j.contains("register")) {
    const auto& r = j.at("register");
    reject_unknown_keys(r, {"n_reg", "n_blend", "sphere_radius", "blend", "collinearity_tol"}, "register");
    read(r, "n_reg", p.reg.n_reg, "register");
    read(r, "n_blend", p.reg.n_blend, "register");
    read(r, "sphere_radius", p.reg.sphere_radius, "register");
    read(r, "collinearity_tol", p.reg.collinearity_tol, "register");
    if (r.contains("blend")) {
      std::string v;
      read(r, "blend", v, "register");
      if (v == "inverse") {
        p.reg.blend = reg::BlendMode::InverseDistance;
      } else if (v == "literal") {
        p.reg.blend = reg::BlendMode::Literal;
      } else {
        throw Error(ErrorCode::InvalidParams, "blend must be inverse or literal", {{"value", v}});
      }
    }
  }
  if (j.contains("icp")) {
    const auto& i = j.at("icp");
    reject_unknown_keys(i, {"max_iterations", "convergence_tol", "max_pair_distance"}, "icp");
    read(i, "max_iterations", base.icp.max_iterations, "icp");
    read(i, "convergence_tol", base.icp.convergence_tol, "icp");
    if (i.contains("max_pair_distance")) {
      if (i.at("max_pair_distance").is_null()) {
        base.icp.max_pair_distance = std::numeric_limits<double>::infinity();
      } else {
        read(i, "max_pair_distance", base.icp.max_pair_distance, "icp");
      }
    }
  }
  if (j.contains("cpd")) {
    const auto& c = j.at("cpd");
    reject_unknown_keys(c, {"beta", "lambda", "outlier_w", "max_iterations", "tol", "max_control_points"}, "cpd");
    read(c, "beta", base.cpd.beta, "cpd");
    read(c, "lambda", base.cpd.lambda, "cpd");
    read(c, "outlier_w", base.cpd.outlier_w, "cpd");
    read(c, "max_iterations", base.cpd.max_iterations, "cpd");
    read(c, "tol", base.cpd.tol, "cpd");
    read(c, "max_control_points", base.cpd.max_control_points, "cpd");
  }

  p.clustering.validate();
  p.som.validate();
  p.reg.validate();
  base.icp.validate();
  base.cpd.validate();
  if (p.graph_nodes < 3) throw Error(ErrorCode::InvalidParams, "graph_nodes must be >= 3");
  if (base.sparse_nodes < 3) throw Error(ErrorCode::InvalidParams, "sparse_nodes must be >= 3");
  return base;
}

json to_json(const MethodParams& params) {
  const auto& p = params.pipeline;
  json j;
  j["clean_subject"] = p.clean_subject;
  j["graph_nodes"] = p.graph_nodes;
  j["sparse_nodes"] = params.sparse_nodes;
  j["clustering"] = {
      {"eps", p.clustering.eps},
      {"min_points", p.clustering.min_points},
      {"min_cluster_size", p.clustering.min_cluster_size ? json(*p.clustering.min_cluster_size) : json(nullptr)},
      {"min_cluster_fraction", p.clustering.min_cluster_fraction},
  };
  j["som"] = {
      {"iterations", p.som.iterations},
      {"lr0", p.som.lr0},
      {"lr_decay", p.som.lr_decay},
      {"sigma0", p.som.sigma0 ? json(*p.som.sigma0) : json(nullptr)},
      {"sigma_decay", p.som.sigma_decay},
      {"neighborhood", p.som.neighborhood == somgraph::Neighborhood::Geodesic ? "geodesic" : "euclidean"},
  };
  j["register"] = {
      {"n_reg", p.reg.n_reg},
      {"n_blend", p.reg.n_blend},
      {"sphere_radius", p.reg.sphere_radius},
      {"blend", p.reg.blend == reg::BlendMode::InverseDistance ? "inverse" : "literal"},
      {"collinearity_tol", p.reg.collinearity_tol},
  };
  j["icp"] = {
      {"max_iterations", params.icp.max_iterations},
      {"convergence_tol", params.icp.convergence_tol},
      {"max_pair_distance", finite_or_null(params.icp.max_pair_distance)},
  };
  j["cpd"] = {
      {"beta", params.cpd.beta},
      {"lambda", params.cpd.lambda},
      {"outlier_w", params.cpd.outlier_w},
      {"max_iterations", params.cpd.max_iterations},
      {"tol", params.cpd.tol},
      {"max_control_points", params.cpd.max_control_points},
  };
  return j;
}

synth::AnatomyParams anatomy_from_json(const json& j, synth::AnatomyParams base) {
  reject_unknown_keys(j, {"branch_count", "branch_length", "branch_spacing", "sternum_width", "points_per_branch",
                          "curvature"},
                      "anatomy");
  read(j, "branch_count", base.branch_count, "anatomy");
  read(j, "branch_length", base.branch_length, "anatomy");
  read(j, "branch_spacing", base.branch_spacing, "anatomy");
  read(j, "sternum_width", base.sternum_width, "anatomy");
  read(j, "points_per_branch", base.points_per_branch, "anatomy");
  read(j, "curvature", base.curvature, "anatomy");
  base.validate();
  return base;
}

json to_json(const synth::AnatomyParams& p) {
  return {
      {"branch_count", p.branch_count},     {"branch_length", p.branch_length},
      {"branch_spacing", p.branch_spacing}, {"sternum_width", p.sternum_width},
      {"points_per_branch", p.points_per_branch}, {"curvature", p.curvature},
  };
}

}  // namespace costalign::config
