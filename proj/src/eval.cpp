#include "costalign/eval.hpp"

#include "costalign/baselines.hpp"
#include "costalign/error.hpp"
#include "costalign/io.hpp"
#include "costalign/synth.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <thread>
#include <tuple>

namespace costalign::eval {

using shape::BinaryMask;

namespace {

void require_same_shape(const BinaryMask& a, const BinaryMask& b) {
  if (!a.same_shape(b)) {
    throw Error(ErrorCode::DimensionMismatch, "mask dimensions differ",
                {{"a", std::to_string(a.width) + "x" + std::to_string(a.height)},
                 {"b", std::to_string(b.width) + "x" + std::to_string(b.height)}});
  }
}

struct Overlap {
  std::size_t a = 0, b = 0, both = 0;
};

Overlap overlap(const BinaryMask& a, const BinaryMask& b) {
  require_same_shape(a, b);
  Overlap o;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    o.a += a.data[i];
    o.b += b.data[i];
    o.both += a.data[i] & b.data[i];
  }
  return o;
}

Overlap overlap(const PointCloud& a, const PointCloud& b, int label) {
  if (a.size() != b.size() || a.labels.size() != a.size() || b.labels.size() != b.size()) {
    throw Error(ErrorCode::DimensionMismatch, "labelled clouds must be index-aligned",
                {{"a", std::to_string(a.size())}, {"b", std::to_string(b.size())}});
  }
  Overlap o;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool in_a = a.labels[i] == label, in_b = b.labels[i] == label;
    o.a += in_a;
    o.b += in_b;
    o.both += in_a && in_b;
  }
  return o;
}

double dice_of(const Overlap& o) {
  if (o.a + o.b == 0) return 1.0;
  return 2.0 * static_cast<double>(o.both) / static_cast<double>(o.a + o.b);
}

double iou_of(const Overlap& o) {
  const std::size_t uni = o.a + o.b - o.both;
  if (uni == 0) return 1.0;
  return static_cast<double>(o.both) / static_cast<double>(uni);
}

constexpr double kFar = 1e20;

/// Lower envelope of parabolas over one line.
void edt_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v, std::vector<double>& z) {
  const auto n = f.size();
  auto intersect = [&](std::size_t q, std::size_t p) {
    const double dq = static_cast<double>(q), dp = static_cast<double>(p);
    return ((f[q] + dq * dq) - (f[p] + dp * dp)) / (2.0 * dq - 2.0 * dp);
  };
  std::size_t k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  for (std::size_t q = 1; q < n; ++q) {
    double s = intersect(q, static_cast<std::size_t>(v[k]));
    while (s <= z[k]) {
      --k;
      s = intersect(q, static_cast<std::size_t>(v[k]));
    }
    ++k;
    v[k] = static_cast<int>(q);
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (std::size_t q = 0; q < n; ++q) {
    while (z[k + 1] < static_cast<double>(q)) ++k;
    const double dq = static_cast<double>(q) - v[k];
    d[q] = dq * dq + f[static_cast<std::size_t>(v[k])];
  }
}

}  // namespace

double dice(const BinaryMask& a, const BinaryMask& b) { return dice_of(overlap(a, b)); }
double iou(const BinaryMask& a, const BinaryMask& b) { return iou_of(overlap(a, b)); }
double dice(const PointCloud& a, const PointCloud& b, int label) { return dice_of(overlap(a, b, label)); }
double iou(const PointCloud& a, const PointCloud& b, int label) { return iou_of(overlap(a, b, label)); }

std::vector<double> squared_distance_to(const BinaryMask& mask, bool target) {
  const int w = mask.width, h = mask.height;
  const int n = std::max(w, h);
  std::vector<double> grid(mask.data.size());
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = (mask.data[i] != 0) == target ? 0.0 : kFar;
  std::vector<double> f(static_cast<std::size_t>(n)), d(static_cast<std::size_t>(n));
  std::vector<int> v(static_cast<std::size_t>(n));
  std::vector<double> z(static_cast<std::size_t>(n) + 1);
  for (int x = 0; x < w; ++x) {
    f.resize(static_cast<std::size_t>(h));
    d.resize(static_cast<std::size_t>(h));
    for (int y = 0; y < h; ++y) f[static_cast<std::size_t>(y)] = grid[static_cast<std::size_t>(y) * w + x];
    edt_1d(f, d, v, z);
    for (int y = 0; y < h; ++y) grid[static_cast<std::size_t>(y) * w + x] = d[static_cast<std::size_t>(y)];
  }
  for (int y = 0; y < h; ++y) {
    f.resize(static_cast<std::size_t>(w));
    d.resize(static_cast<std::size_t>(w));
    for (int x = 0; x < w; ++x) f[static_cast<std::size_t>(x)] = grid[static_cast<std::size_t>(y) * w + x];
    edt_1d(f, d, v, z);
    for (int x = 0; x < w; ++x) grid[static_cast<std::size_t>(y) * w + x] = d[static_cast<std::size_t>(x)];
  }
  for (double& g : grid) {
    if (g >= kFar / 2) g = std::numeric_limits<double>::infinity();
  }
  return grid;
}

double boundary_loss(const BinaryMask& pred, const BinaryMask& truth) {
  require_same_shape(pred, truth);
  const std::size_t area = truth.area();
  if (area == 0 || area == truth.pixel_count()) {
    throw Error(ErrorCode::UndefinedBoundary, "truth mask has no boundary");
  }
  const auto to_fg = squared_distance_to(truth, true);
  const auto to_bg = squared_distance_to(truth, false);
  double sum = 0.0;
  for (std::size_t i = 0; i < truth.data.size(); ++i) {
    if (pred.data[i] == truth.data[i]) continue;
    sum += std::sqrt(truth.data[i] ? to_bg[i] : to_fg[i]);
  }
  return 2.0 * sum;
}

ClassificationMetrics classification_metrics(const ConfusionCounts& c) {
  const auto total = c.tp + c.tn + c.fp + c.fn;
  const auto pos = c.tp + c.fn;
  const auto neg = c.tn + c.fp;
  if (total == 0 || pos == 0 || neg == 0) {
    throw Error(ErrorCode::UndefinedMetric, "confusion counts leave a metric undefined",
                {{"tp", std::to_string(c.tp)}, {"tn", std::to_string(c.tn)},
                 {"fp", std::to_string(c.fp)}, {"fn", std::to_string(c.fn)}});
  }
  return {static_cast<double>(c.tp + c.tn) / static_cast<double>(total),
          static_cast<double>(c.tp) / static_cast<double>(pos), static_cast<double>(c.tn) / static_cast<double>(neg)};
}

RegistrationReport make_report(const std::string& method, const std::vector<Point3>& mapped,
                               const std::vector<Point3>& truth, std::vector<reg::StageInfo> stages,
                               nlohmann::json params) {
  if (mapped.size() != truth.size()) {
    throw Error(ErrorCode::PairMismatch, "mapped and truth waypoint counts differ",
                {{"mapped", std::to_string(mapped.size())}, {"truth", std::to_string(truth.size())}});
  }
  RegistrationReport r;
  r.method = method;
  r.stages = std::move(stages);
  r.params = std::move(params);
  r.errors.reserve(mapped.size());
  for (std::size_t i = 0; i < mapped.size(); ++i) r.errors.push_back((mapped[i] - truth[i]).norm());
  if (!r.errors.empty()) {
    double s = 0.0;
    for (double e : r.errors) s += e;
    r.mean = s / static_cast<double>(r.errors.size());
    double v = 0.0;
    for (double e : r.errors) v += (e - r.mean) * (e - r.mean);
    r.sd = std::sqrt(v / static_cast<double>(r.errors.size()));
  }
  return r;
}

nlohmann::json to_json(const RegistrationReport& report, bool timing) {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& s : report.stages) {
    nlohmann::json j{{"name", s.name}, {"residual", s.residual}};
    if (timing) j["ms"] = s.ms;
    stages.push_back(j);
  }
  return {{"method", report.method}, {"errors_mm", report.errors}, {"mean_mm", report.mean},
          {"sd_mm", report.sd},      {"stages", stages},           {"params", report.params}};
}

reg::PipelineResult run_method(const std::string& method, const PointCloud& template_cloud, const PointCloud& subject,
                               const std::vector<Point3>& waypoints_template, const config::MethodParams& params) {
  if (method == "dense") return reg::register_pipeline(template_cloud, subject, waypoints_template, params.pipeline);
  if (method == "sparse") {
    return baselines::sparse_graph_register(template_cloud, subject, waypoints_template, params.pipeline,
                                            params.sparse_nodes);
  }
  if (method == "icp") return baselines::icp_register(template_cloud, subject, waypoints_template, params.pipeline, params.icp);
  if (method == "cpd") return baselines::cpd_register(template_cloud, subject, waypoints_template, params.pipeline, params.cpd);
  throw Error(ErrorCode::InvalidParams, "unknown method", {{"method", method}});
}

void BenchmarkConfig::validate() const {
  if (seeds.empty() || profiles.empty() || methods.empty()) {
    throw Error(ErrorCode::InvalidParams, "benchmark needs at least one seed, profile and method");
  }
  for (const auto& m : methods) {
    const auto& names = method_names();
    if (std::find(names.begin(), names.end(), m) == names.end()) {
      throw Error(ErrorCode::InvalidParams, "unknown method", {{"method", m}});
    }
  }
  for (const auto& p : profiles) synth::deform_profile(p);
  if (jobs < 1) throw Error(ErrorCode::InvalidParams, "jobs must be >= 1");
}

BenchmarkConfig benchmark_config_from_json(const nlohmann::json& j) {
  config::reject_unknown_keys(j, {"seeds", "profiles", "methods", "params", "anatomy"}, "benchmark");
  BenchmarkConfig c;
  try {
    c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    c.profiles = j.at("profiles").get<std::vector<std::string>>();
    c.methods = j.at("methods").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidParams, std::string("benchmark config: ") + e.what());
  }
  if (j.contains("params")) c.params = config::method_params_from_json(j.at("params"));
  if (j.contains("anatomy")) c.anatomy = config::anatomy_from_json(j.at("anatomy"));
  c.validate();
  return c;
}

namespace {

BenchmarkRow run_row(const BenchmarkConfig& config, const std::string& method, const std::string& profile,
                     std::uint64_t seed) {
  BenchmarkRow row;
  row.method = method;
  row.profile = profile;
  row.seed = seed;
  auto echo = config::to_json(config.params);
  echo["seed"] = seed;
  echo["profile"] = profile;
  row.report.method = method;
  row.report.params = echo;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    synth::AnatomyParams anatomy = config.anatomy;
    anatomy.rng_seed = seed;
    anatomy.deform = synth::deform_profile(profile);
    const auto pair = synth::generate_pair(anatomy);
    config::MethodParams params = config.params;
    params.pipeline.seed = seed;
    const auto result = run_method(method, pair.template_cloud, pair.subject, pair.truth.waypoints_template, params);
    row.report = make_report(method, result.waypoints, pair.truth.waypoints_subject, result.stages, echo);
  } catch (const Error& e) {
    row.status = std::string(to_string(e.code()));
    row.message = e.what();
  } catch (const std::exception& e) {
    row.status = "InternalError";
    row.message = e.what();
  }
  row.runtime_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return row;
}

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::vector<BenchmarkRow> run_benchmark(const BenchmarkConfig& config) {
  config.validate();
  struct Job {
    std::string method, profile;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (const auto& m : config.methods) {
    for (const auto& p : config.profiles) {
      for (auto s : config.seeds) jobs.push_back({m, p, s});
    }
  }
  std::vector<BenchmarkRow> rows(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      rows[i] = run_row(config, jobs[i].method, jobs[i].profile, jobs[i].seed);
    }
  };
  const auto threads = std::min<std::size_t>(static_cast<std::size_t>(config.jobs), jobs.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  std::stable_sort(rows.begin(), rows.end(), [](const BenchmarkRow& a, const BenchmarkRow& b) {
    return std::tie(a.method, a.profile, a.seed) < std::tie(b.method, b.profile, b.seed);
  });
  return rows;
}

std::string summary_csv(const std::vector<BenchmarkRow>& rows, bool timing) {
  std::ostringstream out;
  out << "method,profile,seed,mean_mm,sd_mm,runtime_ms,status\n";
  for (const auto& r : rows) {
    const bool ok = r.status == "ok";
    out << r.method << ',' << r.profile << ',' << r.seed << ',' << (ok ? fixed(r.report.mean) : "NA") << ','
        << (ok ? fixed(r.report.sd) : "NA") << ',' << (timing ? fixed(r.runtime_ms, 1) : "NA") << ',' << r.status
        << '\n';
  }
  for (const auto& ref : kReferenceRows) {
    out << "literature:" << ref.method << ",clinical,NA," << fixed(ref.mean, 1) << ',' << fixed(ref.sd, 1)
        << ",NA,reference\n";
  }
  return out.str();
}

std::string scatter_svg(const std::vector<BenchmarkRow>& rows) {
  std::vector<std::string> methods;
  for (const auto& r : rows) {
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
  }
  double ymax = 1.0;
  for (const auto& r : rows) {
    if (r.status == "ok") ymax = std::max(ymax, r.report.mean);
  }
  ymax = std::ceil(ymax * 1.1);
  const double left = 60, top = 20, plot_w = 120.0 * std::max<std::size_t>(methods.size(), 1), plot_h = 300;
  const double width = left + plot_w + 20, height = top + plot_h + 50;
  auto ypix = [&](double v) { return top + plot_h * (1.0 - v / ymax); };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fixed(width, 0) << "\" height=\"" << fixed(height, 0)
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect x=\"0\" y=\"0\" width=\"" << fixed(width, 0) << "\" height=\"" << fixed(height, 0)
      << "\" fill=\"white\"/>\n";
  out << "<line x1=\"" << fixed(left, 1) << "\" y1=\"" << fixed(top, 1) << "\" x2=\"" << fixed(left, 1) << "\" y2=\""
      << fixed(top + plot_h, 1) << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << fixed(left, 1) << "\" y1=\"" << fixed(top + plot_h, 1) << "\" x2=\""
      << fixed(left + plot_w, 1) << "\" y2=\"" << fixed(top + plot_h, 1) << "\" stroke=\"black\"/>\n";
  const int ticks = 5;
  for (int t = 0; t <= ticks; ++t) {
    const double v = ymax * t / ticks;
    out << "<text x=\"" << fixed(left - 6, 1) << "\" y=\"" << fixed(ypix(v) + 4, 1) << "\" text-anchor=\"end\">"
        << fixed(v, 1) << "</text>\n";
  }
  out << "<text x=\"14\" y=\"" << fixed(top + plot_h / 2, 1) << "\" transform=\"rotate(-90 14 "
      << fixed(top + plot_h / 2, 1) << ")\" text-anchor=\"middle\">mean waypoint error (mm)</text>\n";
  for (std::size_t m = 0; m < methods.size(); ++m) {
    const double cx = left + 120.0 * (static_cast<double>(m) + 0.5);
    out << "<text x=\"" << fixed(cx, 1) << "\" y=\"" << fixed(top + plot_h + 20, 1) << "\" text-anchor=\"middle\">"
        << methods[m] << "</text>\n";
    std::size_t k = 0;
    double sum = 0.0;
    for (const auto& r : rows) {
      if (r.method != methods[m] || r.status != "ok") continue;
      const double jitter = 30.0 * (static_cast<double>((r.seed * 2654435761ULL + k * 40503ULL) % 1000) / 1000.0 - 0.5);
      out << "<circle cx=\"" << fixed(cx + jitter, 2) << "\" cy=\"" << fixed(ypix(r.report.mean), 2)
          << "\" r=\"3\" fill=\"steelblue\" fill-opacity=\"0.7\"/>\n";
      sum += r.report.mean;
      ++k;
    }
    if (k > 0) {
      const double y = ypix(sum / static_cast<double>(k));
      out << "<line x1=\"" << fixed(cx - 25, 1) << "\" y1=\"" << fixed(y, 2) << "\" x2=\"" << fixed(cx + 25, 1)
          << "\" y2=\"" << fixed(y, 2) << "\" stroke=\"firebrick\" stroke-width=\"2\"/>\n";
    }
  }
  out << "</svg>\n";
  return out.str();
}

void write_benchmark(const std::vector<BenchmarkRow>& rows, const std::filesystem::path& out_dir, bool timing) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create output directory", {{"path", out_dir.string()}});
  io::write_text(out_dir / "summary.csv", summary_csv(rows, timing));
  io::write_text(out_dir / "scatter.svg", scatter_svg(rows));
  for (const auto& r : rows) {
    const auto dir = out_dir / "runs" / r.method / r.profile / ("seed_" + std::to_string(r.seed));
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create output directory", {{"path", dir.string()}});
    auto j = to_json(r.report, timing);
    j["profile"] = r.profile;
    j["seed"] = r.seed;
    j["status"] = r.status;
    if (!r.message.empty()) j["message"] = r.message;
    if (timing) j["runtime_ms"] = r.runtime_ms;
    io::write_text(dir / "report.json", j.dump(2) + "\n");
  }
}

}  // namespace costalign::eval
