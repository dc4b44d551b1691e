#pragma once

#include "costalign/config.hpp"
#include "costalign/geom.hpp"
#include "costalign/register.hpp"
#include "costalign/shaperepair.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace costalign::eval {

/// 2|A∩B| / (|A|+|B|); 1 when both are empty.
double dice(const shape::BinaryMask& a, const shape::BinaryMask& b);
/// |A∩B| / |A∪B|; 1 when both are empty.
double iou(const shape::BinaryMask& a, const shape::BinaryMask& b);
/// Overlap of the point sets {i : a.labels[i] == label} and
/// {i : b.labels[i] == label} of two index-aligned labelled clouds.
double dice(const PointCloud& a, const PointCloud& b, int label);
double iou(const PointCloud& a, const PointCloud& b, int label);

/// Squared Euclidean distance from every pixel to the nearest pixel whose
/// value equals `target` (exact separable transform); +inf when none.
std::vector<double> squared_distance_to(const shape::BinaryMask& mask, bool target);

/// 2 x sum over the symmetric difference of the distance to the truth
/// boundary: a missed truth pixel counts its distance to the nearest truth
/// background pixel, a spurious pixel its distance to the nearest truth
/// foreground pixel. Pixel units.
double boundary_loss(const shape::BinaryMask& pred, const shape::BinaryMask& truth);

struct ConfusionCounts {
  std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;
};

struct ClassificationMetrics {
  double accuracy = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
};

ClassificationMetrics classification_metrics(const ConfusionCounts& c);

struct RegistrationReport {
  std::string method;
  std::vector<double> errors;  // per waypoint, mm
  double mean = 0.0;
  double sd = 0.0;             // population
  std::vector<reg::StageInfo> stages;
  nlohmann::json params;
};

/// Per-waypoint Euclidean errors and their mean and population SD.
RegistrationReport make_report(const std::string& method, const std::vector<Point3>& mapped,
                               const std::vector<Point3>& truth, std::vector<reg::StageInfo> stages,
                               nlohmann::json params);

/// Stage timings are written only when `timing` is set so that reports
/// stay byte-identical across runs.
nlohmann::json to_json(const RegistrationReport& report, bool timing);

inline const std::vector<std::string>& method_names() {
  static const std::vector<std::string> names{"cpd", "dense", "icp", "sparse"};
  return names;
}

/// Runs one registration method ("dense", "sparse", "icp" or "cpd").
reg::PipelineResult run_method(const std::string& method, const PointCloud& template_cloud, const PointCloud& subject,
                               const std::vector<Point3>& waypoints_template, const config::MethodParams& params);

struct BenchmarkConfig {
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> profiles;
  std::vector<std::string> methods;
  config::MethodParams params;
  synth::AnatomyParams anatomy;  // seed and deformation are set per row
  int jobs = 1;
  bool timing = false;

  void validate() const;
};

/// Schema: {seeds:[...], profiles:[...], methods:[...], params:{...}, anatomy:{...}}.
BenchmarkConfig benchmark_config_from_json(const nlohmann::json& j);

struct BenchmarkRow {
  std::string method;
  std::string profile;
  std::uint64_t seed = 0;
  std::string status = "ok";  // "ok" or the error code of the failing stage
  std::string message;
  RegistrationReport report;
  double runtime_ms = 0.0;
};

/// Literature reference rows (mean, SD in mm) reported with every summary.
struct ReferenceRow {
  const char* method;
  double mean;
  double sd;
};
inline constexpr ReferenceRow kReferenceRows[] = {
    {"dense", 2.2, 1.1}, {"nr-icp", 5.6, 2.0}, {"keypoint", 5.6, 2.5}, {"cpd", 6.6, 3.9}, {"icp", 13.2, 9.6},
};

/// Executes every (seed, profile, method) row; a failing row records its
/// status and the run continues. Rows come back sorted by method, profile,
/// seed regardless of `jobs`.
std::vector<BenchmarkRow> run_benchmark(const BenchmarkConfig& config);

/// Columns method,profile,seed,mean_mm,sd_mm,runtime_ms,status followed by
/// the literature reference rows.
std::string summary_csv(const std::vector<BenchmarkRow>& rows, bool timing);

/// Per-method strip plot of per-run mean errors.
std::string scatter_svg(const std::vector<BenchmarkRow>& rows);

/// Writes summary.csv, scatter.svg and runs/<method>/<profile>/<seed>/report.json.
void write_benchmark(const std::vector<BenchmarkRow>& rows, const std::filesystem::path& out_dir, bool timing);

}  // namespace costalign::eval
