#pragma once

#include "costalign/geom.hpp"
#include "costalign/register.hpp"

#include <limits>
#include <vector>

namespace costalign::baselines {

struct IcpParams {
  int max_iterations = 100;
  double convergence_tol = 1e-4;  // mm change in RMS
  double max_pair_distance = std::numeric_limits<double>::infinity();

  void validate() const;
};

struct IcpResult {
  RigidTransform transform;  // source -> target
  /// RMS of the nearest-neighbour pairing at each iteration, starting with
  /// the untransformed source.
  std::vector<double> rms_trace;
  int iterations = 0;
};

IcpResult icp(const PointCloud& source, const PointCloud& target, const IcpParams& params = {});

struct CpdParams {
  double beta = 20.0;    // kernel width, mm
  double lambda = 2.0;
  double outlier_w = 0.1;
  int max_iterations = 100;
  double tol = 1e-6;     // relative objective change
  /// Control points carrying the displacement field. Larger sources are
  /// reduced to this many by a deterministic farthest-point pick; the field
  /// is then evaluated at every source point.
  int max_control_points = 600;

  void validate() const;
};

struct CpdResult {
  PointCloud displaced;
  /// Negative log-likelihood plus lambda/2 tr(W'GW) after each EM step,
  /// starting with the initial state.
  std::vector<double> objective_trace;
  double sigma2 = 0.0;
  int iterations = 0;
};

CpdResult cpd_nonrigid(const PointCloud& source, const PointCloud& target, const CpdParams& params = {});

/// Indices of a farthest-point subset of size min(count, n), starting from
/// point 0; ties go to the lower index.
std::vector<std::size_t> farthest_point_subset(std::span<const Point3> points, std::size_t count);

inline constexpr int kSparseNodeCount = 35;

/// Rigid ICP of the template onto the cleaned, coarse-aligned subject;
/// waypoints follow the single rigid transform.
reg::PipelineResult icp_register(const PointCloud& template_cloud, const PointCloud& subject,
                                 const std::vector<Point3>& waypoints_template, const reg::PipelineParams& params,
                                 const IcpParams& icp_params = {});

/// CPD of the template onto the cleaned, coarse-aligned subject; waypoints
/// are mapped over the displaced cloud with the sphere fit.
reg::PipelineResult cpd_register(const PointCloud& template_cloud, const PointCloud& subject,
                                 const std::vector<Point3>& waypoints_template, const reg::PipelineParams& params,
                                 const CpdParams& cpd_params = {});

/// Dense pipeline over a sparse template graph. Unless set, the SOM
/// neighbourhood width is the one the dense graph would get, so only node
/// density differs from the dense method.
reg::PipelineResult sparse_graph_register(const PointCloud& template_cloud, const PointCloud& subject,
                                          const std::vector<Point3>& waypoints_template,
                                          const reg::PipelineParams& params, int keypoint_count = kSparseNodeCount);

}  // namespace costalign::baselines
