#pragma once

#include "costalign/baselines.hpp"
#include "costalign/register.hpp"
#include "costalign/synth.hpp"

#include <nlohmann/json.hpp>

#include <initializer_list>
#include <string_view>

namespace costalign::config {

/// Parameters of every registration method in one record.
struct MethodParams {
  reg::PipelineParams pipeline;
  baselines::IcpParams icp;
  baselines::CpdParams cpd;
  int sparse_nodes = baselines::kSparseNodeCount;
};

/// Throws InvalidParams naming the first key of `j` outside `allowed`.
void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<std::string_view> allowed,
                         std::string_view where);

/// Reads the keys present in `j` on top of `base`. Schema:
/// {clean_subject, graph_nodes, sparse_nodes,
///  clustering:{eps, min_points, min_cluster_size, min_cluster_fraction},
///  som:{iterations, lr0, lr_decay, sigma0, sigma_decay, neighborhood},
///  register:{n_reg, n_blend, sphere_radius, blend, collinearity_tol},
///  icp:{max_iterations, convergence_tol, max_pair_distance},
///  cpd:{beta, lambda, outlier_w, max_iterations, tol, max_control_points}}
MethodParams method_params_from_json(const nlohmann::json& j, MethodParams base = {});
nlohmann::json to_json(const MethodParams& params);

synth::AnatomyParams anatomy_from_json(const nlohmann::json& j, synth::AnatomyParams base = {});
nlohmann::json to_json(const synth::AnatomyParams& params);

}  // namespace costalign::config
