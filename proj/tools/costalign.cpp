#include "costalign/baselines.hpp"
#include "costalign/config.hpp"
#include "costalign/error.hpp"
#include "costalign/eval.hpp"
#include "costalign/io.hpp"
#include "costalign/preprocess.hpp"
#include "costalign/register.hpp"
#include "costalign/rng.hpp"
#include "costalign/shaperepair.hpp"
#include "costalign/somgraph.hpp"
#include "costalign/synth.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace costalign;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json points_json(const std::vector<Point3>& pts) {
  json a = json::array();
  for (const auto& p : pts) a.push_back({p.x(), p.y(), p.z()});
  return a;
}

std::vector<Point3> points_from_json(const json& j, const std::string& where) {
  std::vector<Point3> out;
  try {
    for (const auto& p : j) {
      if (p.size() != 3) throw Error(ErrorCode::ParseError, "waypoint must have three coordinates", {{"file", where}});
      out.emplace_back(p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>());
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("bad waypoint list: ") + e.what(), {{"file", where}});
  }
  return out;
}

json read_json(const fs::path& path) {
  const std::string text = io::read_text(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("invalid JSON: ") + e.what(), {{"path", path.string()}});
  }
}

void write_json(const fs::path& path, const json& j) { io::write_text(path, j.dump(2) + "\n"); }

/// A JSON array of [x,y,z], or an object holding one under "waypoints" or
/// "waypoints_template".
std::vector<Point3> read_waypoints(const fs::path& path) {
  const json j = read_json(path);
  if (j.is_array()) return points_from_json(j, path.string());
  if (j.is_object()) {
    for (const char* key : {"waypoints", "waypoints_template"}) {
      if (j.contains(key)) return points_from_json(j.at(key), path.string());
    }
  }
  throw Error(ErrorCode::ParseError, "no waypoint list found", {{"path", path.string()}});
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create output directory", {{"path", dir.string()}});
}

json transform_json(const RigidTransform& t) {
  json r = json::array();
  for (int i = 0; i < 3; ++i) {
    for (int k = 0; k < 3; ++k) r.push_back(t.rotation(i, k));
  }
  return {{"rotation", r}, {"translation", {t.translation.x(), t.translation.y(), t.translation.z()}}};
}

json stages_json(const std::vector<reg::StageInfo>& stages, bool timing) {
  json a = json::array();
  for (const auto& s : stages) {
    json j{{"name", s.name}, {"residual", s.residual}};
    if (timing) j["ms"] = s.ms;
    a.push_back(j);
  }
  return a;
}

/// Shared run configuration: {seed, params:{...}, anatomy:{...}, deform_profile}.
struct RunConfig {
  std::optional<std::uint64_t> seed;
  config::MethodParams params;
  synth::AnatomyParams anatomy;
  std::string deform_profile = "mild";
};

RunConfig load_run_config(const std::string& path) {
  RunConfig rc;
  if (path.empty()) return rc;
  const json j = read_json(path);
  config::reject_unknown_keys(j, {"seed", "params", "anatomy", "deform_profile"}, "config");
  try {
    if (j.contains("seed")) rc.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("deform_profile")) rc.deform_profile = j.at("deform_profile").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidParams, std::string("config value has wrong type: ") + e.what(), {{"path", path}});
  }
  if (j.contains("params")) rc.params = config::method_params_from_json(j.at("params"));
  if (j.contains("anatomy")) rc.anatomy = config::anatomy_from_json(j.at("anatomy"));
  return rc;
}

std::uint64_t require_seed(const std::optional<std::uint64_t>& flag, const RunConfig& rc) {
  if (flag) return *flag;
  if (rc.seed) return *rc.seed;
  throw UsageError("--seed is required (or `seed` in --config)");
}

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("costalign");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::err);
  if (const char* env = std::getenv("COSTALIGN_LOG")) {
    const std::string v = env;
    if (v == "error") {
      spdlog::set_level(spdlog::level::err);
    } else if (v == "info") {
      spdlog::set_level(spdlog::level::info);
    } else if (v == "debug") {
      spdlog::set_level(spdlog::level::debug);
    }
  }
}

void log_stages(const std::vector<reg::StageInfo>& stages) {
  for (const auto& s : stages) spdlog::info("stage {}: residual {:.4f}, {:.1f} ms", s.name, s.residual, s.ms);
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();

  CLI::App app{"Template-to-subject rib cage registration and scan path transfer"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  app.add_option("--config", config_path, "JSON run configuration; flags take precedence");

  // generate
  auto* gen = app.add_subcommand("generate", "Synthetic template/subject pair with ground truth");
  std::optional<std::uint64_t> gen_seed;
  std::string gen_profile;
  std::string gen_out;
  gen->add_option("--seed", gen_seed, "Random seed");
  gen->add_option("--deform-profile", gen_profile, "none | mild | severe");
  gen->add_option("--out-dir", gen_out, "Output directory")->required();

  // preprocess
  auto* pre = app.add_subcommand("preprocess", "Clean a subject cloud and align it to the template sternum");
  std::string pre_in, pre_template, pre_out, pre_report;
  pre->add_option("--in", pre_in, "Subject cloud (xyzl)")->required();
  pre->add_option("--template", pre_template, "Template cloud (xyzl)")->required();
  pre->add_option("--out", pre_out, "Cleaned, aligned cloud (xyzl)")->required();
  pre->add_option("--report", pre_report, "Report (json)")->required();

  // fit-graph
  auto* fit = app.add_subcommand("fit-graph", "Fit a skeleton graph to a cloud with the geodesic SOM");
  std::string fit_cloud, fit_graph, fit_out;
  std::optional<std::uint64_t> fit_seed;
  std::optional<int> fit_nodes;
  fit->add_option("--cloud", fit_cloud, "Cloud to fit (xyzl)")->required();
  fit->add_option("--graph", fit_graph, "Initial graph (json); built from the labelled cloud when omitted");
  fit->add_option("--out", fit_out, "Fitted graph (json)")->required();
  fit->add_option("--seed", fit_seed, "Random seed");
  fit->add_option("--nodes", fit_nodes, "Node count of a newly built graph");

  // register
  auto* regc = app.add_subcommand("register", "Register the template to a subject and transfer waypoints");
  std::string reg_template, reg_subject, reg_waypoints, reg_out, reg_truth, reg_method = "dense", reg_blend;
  std::optional<std::uint64_t> reg_seed;
  bool reg_timing = false;
  regc->add_option("--template", reg_template, "Template cloud (xyzl)")->required();
  regc->add_option("--subject", reg_subject, "Subject cloud (xyzl)")->required();
  regc->add_option("--waypoints", reg_waypoints, "Template waypoints (json)")->required();
  regc->add_option("--out-dir", reg_out, "Output directory")->required();
  regc->add_option("--truth", reg_truth, "Ground truth (json) for per-waypoint errors");
  regc->add_option("--method", reg_method, "dense | sparse | icp | cpd")
      ->check(CLI::IsMember({"dense", "sparse", "icp", "cpd"}));
  regc->add_option("--blend", reg_blend, "inverse | literal")->check(CLI::IsMember({"inverse", "literal"}));
  regc->add_option("--seed", reg_seed, "Random seed");
  regc->add_flag("--timing", reg_timing, "Record stage timings");

  // map-path
  auto* mp = app.add_subcommand("map-path", "Map waypoints through an index-aligned warped template");
  std::string mp_template, mp_warped, mp_waypoints, mp_out;
  std::optional<double> mp_radius;
  mp->add_option("--template", mp_template, "Template cloud (xyzl)")->required();
  mp->add_option("--warped", mp_warped, "Warped template (xyzl)")->required();
  mp->add_option("--waypoints", mp_waypoints, "Template waypoints (json)")->required();
  mp->add_option("--out", mp_out, "Mapped waypoints (json)")->required();
  mp->add_option("--sphere-radius", mp_radius, "Sphere radius in mm");

  // benchmark
  auto* bench = app.add_subcommand("benchmark", "Run the method comparison over seeds and profiles");
  std::string bench_config, bench_out;
  std::vector<std::string> bench_methods, bench_profiles;
  std::vector<std::uint64_t> bench_seeds;
  std::optional<int> bench_jobs;
  bool bench_timing = false;
  bench->add_option("--config", bench_config, "Benchmark configuration (json)");
  bench->add_option("--out", bench_out, "Output directory")->required();
  bench->add_option("--methods", bench_methods, "Methods to run")->delimiter(',');
  bench->add_option("--profiles", bench_profiles, "Deformation profiles")->delimiter(',');
  bench->add_option("--seeds", bench_seeds, "Seeds")->delimiter(',');
  bench->add_option("--jobs", bench_jobs, "Worker threads");
  bench->add_flag("--timing", bench_timing, "Record runtimes");

  // train-shape-model
  auto* train = app.add_subcommand("train-shape-model", "Train a latent embedding and valid-shape manifold");
  std::string train_out, train_masks;
  std::optional<std::uint64_t> train_seed;
  int train_dim = shape::kDefaultModelDim, train_count = 200, train_size = 32;
  std::size_t train_samples = 110000;
  train->add_option("--out", train_out, "Model file (json)")->required();
  train->add_option("--masks", train_masks, "Directory of training masks (pgm); synthetic ellipses when omitted");
  train->add_option("--seed", train_seed, "Random seed");
  train->add_option("--dim", train_dim, "Latent dimension")->check(CLI::PositiveNumber);
  train->add_option("--count", train_count, "Synthetic training masks")->check(CLI::PositiveNumber);
  train->add_option("--size", train_size, "Synthetic raster side in pixels")->check(CLI::PositiveNumber);
  train->add_option("--samples", train_samples, "Manifold samples to accept")->check(CLI::PositiveNumber);

  // repair-mask
  auto* rep = app.add_subcommand("repair-mask", "Project a mask onto the valid-shape manifold");
  std::string rep_model, rep_in, rep_out;
  int rep_k = 1;
  rep->add_option("--model", rep_model, "Model file (json)")->required();
  rep->add_option("--in", rep_in, "Input mask (pgm)")->required();
  rep->add_option("--out", rep_out, "Repaired mask (pgm)")->required();
  rep->add_option("--k", rep_k, "Nearest manifold samples to average")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*gen) {
      const RunConfig rc = load_run_config(config_path);
      synth::AnatomyParams ap = rc.anatomy;
      ap.rng_seed = require_seed(gen_seed, rc);
      ap.deform = synth::deform_profile(gen_profile.empty() ? rc.deform_profile : gen_profile);
      const auto pair = synth::generate_pair(ap);
      const fs::path out = gen_out;
      ensure_dir(out);
      io::write_xyzl(out / "template.xyzl", pair.template_cloud);
      io::write_xyzl(out / "subject.xyzl", pair.subject);
      write_json(out / "truth.json", {{"correspondence", pair.truth.correspondence},
                                      {"waypoints_template", points_json(pair.truth.waypoints_template)},
                                      {"waypoints_subject", points_json(pair.truth.waypoints_subject)}});
      write_json(out / "waypoints.json", points_json(pair.truth.waypoints_template));
      spdlog::info("generated {} template and {} subject points", pair.template_cloud.size(), pair.subject.size());
    } else if (*pre) {
      const RunConfig rc = load_run_config(config_path);
      const PointCloud subject = io::read_xyzl(pre_in);
      const PointCloud tmpl = io::read_xyzl(pre_template);
      preprocess::PreprocessReport report;
      const PointCloud cleaned = preprocess::clean_subject(subject, rc.params.pipeline.clustering, &report);
      const RigidTransform coarse = preprocess::coarse_align(cleaned, tmpl);
      const PointCloud aligned = apply(coarse, cleaned);
      io::write_xyzl(pre_out, aligned);
      write_json(pre_report, {{"cluster_count", report.cluster_count},
                              {"removed_points", report.removed_points},
                              {"sternum_synthesized", report.sternum_synthesized},
                              {"coarse_transform", transform_json(coarse)},
                              {"sternum_rms", preprocess::sternum_rms(aligned, tmpl)}});
    } else if (*fit) {
      const RunConfig rc = load_run_config(config_path);
      const PointCloud cloud = io::read_xyzl(fit_cloud);
      const somgraph::SkeletonGraph init =
          fit_graph.empty() ? somgraph::build_template_graph(cloud, fit_nodes.value_or(rc.params.pipeline.graph_nodes))
                            : somgraph::graph_from_json(read_json(fit_graph));
      somgraph::SomParams som = rc.params.pipeline.som;
      som.rng_seed = derive_seed(require_seed(fit_seed, rc), "som");
      const auto fitted = somgraph::som_fit(init, cloud, som);
      spdlog::info("quantization error {:.4f} mm", somgraph::quantization_error(fitted, cloud));
      write_json(fit_out, somgraph::to_json(fitted));
    } else if (*regc) {
      const RunConfig rc = load_run_config(config_path);
      config::MethodParams params = rc.params;
      params.pipeline.seed = require_seed(reg_seed, rc);
      if (reg_blend == "literal") params.pipeline.reg.blend = reg::BlendMode::Literal;
      if (reg_blend == "inverse") params.pipeline.reg.blend = reg::BlendMode::InverseDistance;
      const PointCloud tmpl = io::read_xyzl(reg_template);
      const PointCloud subject = io::read_xyzl(reg_subject);
      const auto waypoints = read_waypoints(reg_waypoints);
      std::optional<std::vector<Point3>> truth;
      if (!reg_truth.empty()) {
        const json t = read_json(reg_truth);
        if (!t.contains("waypoints_subject")) {
          throw Error(ErrorCode::ParseError, "truth file has no waypoints_subject", {{"path", reg_truth}});
        }
        truth = points_from_json(t.at("waypoints_subject"), reg_truth);
      }
      const auto result = eval::run_method(reg_method, tmpl, subject, waypoints, params);
      log_stages(result.stages);
      const fs::path out = reg_out;
      ensure_dir(out);
      io::write_xyzl(out / "warped.xyzl", result.warped);
      write_json(out / "mapped_waypoints.json", points_json(result.waypoints));
      auto echo = config::to_json(params);
      echo["seed"] = params.pipeline.seed;
      json report;
      if (truth) {
        const auto r = eval::make_report(reg_method, result.waypoints, *truth, result.stages, echo);
        report = eval::to_json(r, reg_timing);
        spdlog::info("mean waypoint error {:.4f} mm (sd {:.4f})", r.mean, r.sd);
      } else {
        report = {{"method", reg_method}, {"errors_mm", nullptr}, {"mean_mm", nullptr}, {"sd_mm", nullptr},
                  {"stages", stages_json(result.stages, reg_timing)}, {"params", echo}};
      }
      report["coarse_transform"] = transform_json(result.coarse);
      write_json(out / "report.json", report);
    } else if (*mp) {
      const RunConfig rc = load_run_config(config_path);
      reg::RegisterParams rp = rc.params.pipeline.reg;
      if (mp_radius) rp.sphere_radius = *mp_radius;
      rp.validate();
      const PointCloud tmpl = io::read_xyzl(mp_template);
      const PointCloud warped = io::read_xyzl(mp_warped);
      if (tmpl.size() != warped.size()) {
        throw Error(ErrorCode::PairMismatch, "template and warped clouds differ in size",
                    {{"template", std::to_string(tmpl.size())}, {"warped", std::to_string(warped.size())}});
      }
      const auto mapped = reg::map_waypoints(read_waypoints(mp_waypoints), tmpl, warped, rp);
      write_json(mp_out, points_json(mapped));
    } else if (*bench) {
      eval::BenchmarkConfig bc;
      if (!bench_config.empty()) {
        const json j = read_json(bench_config);
        json complete = j;
        if (!complete.contains("seeds")) complete["seeds"] = json::array({0});
        if (!complete.contains("profiles")) complete["profiles"] = json::array({"mild"});
        if (!complete.contains("methods")) complete["methods"] = eval::method_names();
        bc = eval::benchmark_config_from_json(complete);
      } else {
        bc.seeds = {0};
        bc.profiles = {"mild"};
        bc.methods = eval::method_names();
      }
      if (!bench_methods.empty()) bc.methods = bench_methods;
      if (!bench_profiles.empty()) bc.profiles = bench_profiles;
      if (!bench_seeds.empty()) bc.seeds = bench_seeds;
      bc.jobs = bench_jobs.value_or(std::max(1, static_cast<int>(std::thread::hardware_concurrency())));
      bc.timing = bench_timing;
      const auto rows = eval::run_benchmark(bc);
      eval::write_benchmark(rows, bench_out, bench_timing);
      for (const auto& r : rows) {
        spdlog::info("{} {} seed {}: {} {:.4f} mm", r.method, r.profile, r.seed, r.status, r.report.mean);
      }
    } else if (*train) {
      const RunConfig rc = load_run_config(config_path);
      const std::uint64_t seed = require_seed(train_seed, rc);
      std::vector<shape::BinaryMask> masks;
      if (!train_masks.empty()) {
        std::vector<fs::path> files;
        std::error_code ec;
        for (const auto& entry : fs::directory_iterator(train_masks, ec)) {
          if (entry.path().extension() == ".pgm") files.push_back(entry.path());
        }
        if (ec) throw Error(ErrorCode::IoError, "cannot read mask directory", {{"path", train_masks}});
        std::sort(files.begin(), files.end());
        for (const auto& f : files) masks.push_back(shape::read_pgm(f));
        if (masks.empty()) throw Error(ErrorCode::EmptyInput, "no .pgm masks found", {{"path", train_masks}});
      } else {
        masks = shape::random_ellipses(static_cast<std::size_t>(train_count), train_size, train_size, seed);
      }
      std::vector<shape::BinaryMask> valid;
      std::copy_if(masks.begin(), masks.end(), std::back_inserter(valid), shape::shape_valid);
      shape::ShapeModel model;
      model.embedding = shape::train_embedding(masks, train_dim);
      shape::ManifoldParams mparams;
      mparams.target_count = train_samples;
      mparams.rng_seed = seed;
      model.manifold = shape::build_manifold(model.embedding, valid, mparams);
      spdlog::info("manifold: {} samples from {} proposals", model.manifold.size(), model.manifold.proposals);
      io::write_text(train_out, shape::to_json(model).dump() + "\n");
    } else if (*rep) {
      const auto model = shape::shape_model_from_json(read_json(rep_model));
      const auto mask = shape::read_pgm(fs::path(rep_in));
      const auto repaired = shape::repair(mask, model.embedding, model.manifold, rep_k);
      shape::write_pgm(fs::path(rep_out), repaired);
    }
  } catch (const UsageError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 2;
  } catch (const Error& e) {
    json err{{"code", std::string(to_string(e.code()))}, {"message", e.what()}, {"context", e.context()}};
    std::cerr << err.dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    json err{{"code", "InternalError"}, {"message", e.what()}, {"context", json::object()}};
    std::cerr << err.dump() << "\n";
    return 1;
  }
  return 0;
}
