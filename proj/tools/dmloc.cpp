// dmloc: dataset generation, prior-map building, localization and evaluation.
//
// Exit codes: 0 success, 1 invalid configuration or arguments, 2 runtime or
// data error.

#include "dmloc/config.hpp"
#include "dmloc/eval.hpp"
#include "dmloc/io.hpp"
#include "dmloc/pipeline.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <fstream>
#include <iostream>

namespace {

using namespace dmloc;

constexpr int kExitValidation = 1;
constexpr int kExitData = 2;

struct Common {
  std::string config;
  std::vector<std::string> overrides;
};

RunConfig load(const Common& c) {
  return c.config.empty() ? parse_config("", c.overrides) : load_config(c.config, c.overrides);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out << text;
  if (!out) throw DataError("write failed for " + path);
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("-c,--config", c.config, "JSON run configuration");
  app->add_option("--set", c.overrides, "override one key, e.g. --set filter.max_iterations=6");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-map LiDAR-inertial localization toolkit"};
  app.require_subcommand(1);
  std::string log_level = "warn";
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off");

  Common sim_c;
  std::string sim_out;
  auto* simgen = app.add_subcommand("simgen", "generate a synthetic dataset");
  add_common(simgen, sim_c);
  simgen->add_option("-o,--out", sim_out, "output directory")->required();

  Common map_c;
  std::string map_dataset, map_out;
  bool map_text = false;
  auto* mapbuild = app.add_subcommand("mapbuild", "build a prior map from ground-truth-posed scans");
  add_common(mapbuild, map_c);
  mapbuild->add_option("-d,--dataset", map_dataset, "dataset directory")->required();
  mapbuild->add_option("-o,--out", map_out, "output map file")->required();
  mapbuild->add_flag("--text", map_text, "write PM1 text instead of PMB1 binary");

  Common loc_c;
  std::string loc_dataset, loc_out, loc_summary;
  auto* localize = app.add_subcommand("localize", "run the localizer over a dataset");
  add_common(localize, loc_c);
  localize->add_option("-d,--dataset", loc_dataset, "dataset directory")->required();
  localize->add_option("-o,--out", loc_out, "estimated trajectory (TUM)")->required();
  localize->add_option("--summary", loc_summary, "also write the run summary here");

  std::string ev_est, ev_gt, ev_table, ev_report;
  double ev_max_dt = 0.02;
  bool ev_align = false;
  auto* evalc = app.add_subcommand("eval", "compare an estimate against ground truth");
  evalc->add_option("--est", ev_est, "estimated trajectory (TUM)")->required();
  evalc->add_option("--gt", ev_gt, "ground-truth trajectory (TUM)")->required();
  evalc->add_option("--max-dt", ev_max_dt, "association window in seconds")->check(CLI::PositiveNumber);
  evalc->add_flag("--align", ev_align, "rigidly align the estimate first (odometry-style)");
  evalc->add_option("--table", ev_table, "write the per-pair error CSV here");
  evalc->add_option("--report", ev_report, "also write the report here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*simgen) {
      const RunConfig cfg = load(sim_c);
      const Dataset ds = generate_dataset(cfg);
      write_dataset(sim_out, ds, cfg);
      std::cout << "wrote dataset to " << sim_out << " (" << ds.imu.size() << " IMU samples, " << ds.scans.size()
                << " scans, " << ds.prior_points.size() << " prior points)\n";
    } else if (*mapbuild) {
      const RunConfig cfg = load(map_c);
      const Dataset ds = read_dataset(map_dataset, false);
      if (ds.truth.empty()) throw DataError(map_dataset + ": ground truth is required for mapbuild");
      const auto pts = build_prior_map(cfg, ds.scans, ds.truth);
      write_map_points(map_out, pts, map_text ? MapFormat::kText : MapFormat::kBinary);
      std::cout << "wrote " << pts.size() << " map points to " << map_out << '\n';
    } else if (*localize) {
      const RunConfig cfg = load(loc_c);
      const Dataset ds = read_dataset(loc_dataset, cfg.map.use_prior_map);
      const LocalizeResult res = run_localization(cfg, ds);
      eval::write_tum(loc_out, res.trajectory);
      const std::string summary = format_summary(res.summary);
      std::cout << summary;
      if (!loc_summary.empty()) write_text(loc_summary, summary);
    } else if (*evalc) {
      const auto est = eval::read_tum(ev_est);
      const auto gt = eval::read_tum(ev_gt);
      const auto assoc = eval::associate_by_time(est, gt, ev_max_dt);
      const auto pairs = ev_align ? eval::align_rigid(assoc.pairs) : assoc.pairs;
      eval::ErrorReport rep = eval::compute_report(pairs);
      rep.unmatched_count = assoc.unmatched;
      const std::string text = eval::format_report(rep);
      std::cout << text;
      if (!ev_report.empty()) write_text(ev_report, text);
      if (!ev_table.empty()) write_text(ev_table, eval::format_pair_table(pairs));
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return 0;
}
