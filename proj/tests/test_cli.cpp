#include "dmloc/eval.hpp"
#include "dmloc/map.hpp"

#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using namespace dmloc;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "dmloc_test_cli";

int run(const std::string& args) {
  const std::string cmd = std::string(DMLOC_CLI) + " " + args + " > /dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t data_lines(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) n += (!line.empty() && line[0] != '#') ? 1 : 0;
  return n;
}

double summary_value(const std::string& text, const std::string& key) {
  const auto pos = text.find(key + ": ");
  REQUIRE(pos != std::string::npos);
  return std::stod(text.substr(pos + key.size() + 2));
}

// 30 s box dataset shared by the localize tests.
const fs::path& box_dataset() {
  static const fs::path dir = [] {
    const fs::path d = kRoot / "box30";
    fs::remove_all(d);
    REQUIRE(run("simgen --set sim.duration=30 -o " + d.string()) == 0);
    return d;
  }();
  return dir;
}

fs::path copy_dataset(const std::string& name) {
  const fs::path d = kRoot / name;
  fs::remove_all(d);
  fs::copy(box_dataset(), d);
  return d;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("simgen writes a complete, reproducible dataset") {
  const fs::path& d = box_dataset();
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(d)) files += e.is_regular_file() ? 1 : 0;
  CHECK(files == 5);
  const fs::path again = kRoot / "box30_again";
  fs::remove_all(again);
  REQUIRE(run("simgen --set sim.duration=30 -o " + again.string()) == 0);
  for (const char* f : {"manifest.json", "imu.csv", "scans.sc1", "groundtruth.tum", "prior_map.pmb"}) {
    CHECK_MESSAGE(slurp(d / f) == slurp(again / f), f);
  }
  CHECK(data_lines(d / "groundtruth.tum") == 6001);
}

TEST_CASE("invalid configuration exits 1 and writes nothing") {
  const fs::path d = kRoot / "invalid";
  fs::remove_all(d);
  CHECK(run("simgen --set sim.duration=0 -o " + d.string()) == 1);
  CHECK_FALSE(fs::exists(d));
  CHECK(run("simgen --set filter.bogus=1 -o " + d.string()) == 1);
  CHECK(run("simgen -c /nonexistent.json -o " + d.string()) == 1);
  CHECK_FALSE(fs::exists(d));
  CHECK(run("") == 1);
}

TEST_CASE("port dataset ground truth is sampled at 200 Hz") {
  const fs::path d = kRoot / "port120";
  fs::remove_all(d);
  REQUIRE(run("simgen --set sim.world=port_like --set sim.duration=120 --set sim.speed=2 -o " + d.string()) == 0);
  CHECK(data_lines(d / "groundtruth.tum") == 24001);
}

TEST_CASE("localize bridges an IMU dropout and is deterministic") {
  const fs::path d = kRoot / "box_dropout";
  fs::remove_all(d);
  REQUIRE(run("simgen --set sim.duration=30 --set sim.sensors.dropout_windows=[[10,11]] -o " + d.string()) == 0);
  const fs::path a = kRoot / "drop_a.tum", b = kRoot / "drop_b.tum", sa = kRoot / "drop_a.txt";
  REQUIRE(run("localize -d " + d.string() + " -o " + a.string() + " --summary " + sa.string()) == 0);
  REQUIRE(run("localize -d " + d.string() + " -o " + b.string()) == 0);
  CHECK(slurp(a) == slurp(b));
  const std::string summary = slurp(sa);
  CHECK(summary_value(summary, "max_output_gap") <= 0.02);
  CHECK(summary_value(summary, "cv_steps") > 0);
  CHECK(summary_value(summary, "mode_transitions") >= 2);
}

TEST_CASE("eval agrees with the library") {
  const fs::path gt = box_dataset() / "groundtruth.tum";
  const fs::path self_report = kRoot / "self.txt";
  REQUIRE(run("eval --est " + gt.string() + " --gt " + gt.string() + " --report " + self_report.string()) == 0);
  const std::string self = slurp(self_report);
  CHECK(summary_value(self, "max_abs_pose_err") == 0.0);
  CHECK(summary_value(self, "mean_lateral") == 0.0);

  // Shift every pose 0.1 m to the left of its heading.
  auto traj = eval::read_tum(gt);
  for (auto& p : traj) {
    const double yaw = std::atan2(p.rot(1, 0), p.rot(0, 0));
    p.pos += 0.1 * Vec3(-std::sin(yaw), std::cos(yaw), 0.0);
  }
  const fs::path shifted = kRoot / "shifted.tum";
  eval::write_tum(shifted, traj);
  const fs::path rep = kRoot / "shifted.txt";
  REQUIRE(run("eval --est " + shifted.string() + " --gt " + gt.string() + " --report " + rep.string()) == 0);
  const std::string text = slurp(rep);
  CHECK(summary_value(text, "mean_lateral") == doctest::Approx(0.1).epsilon(1e-6));
  CHECK(summary_value(text, "max_longitudinal") < 1e-6);

  const auto assoc = eval::associate_by_time(eval::read_tum(shifted), eval::read_tum(gt));
  auto lib = eval::compute_report(assoc.pairs);
  lib.unmatched_count = assoc.unmatched;
  CHECK(text == eval::format_report(lib));

  // No stamp within the window.
  for (auto& p : traj) p.t += 1000.0;
  eval::write_tum(shifted, traj);
  CHECK(run("eval --est " + shifted.string() + " --gt " + gt.string()) == 2);
}

TEST_CASE("out-of-order IMU records are counted as stale") {
  const fs::path d = copy_dataset("box_stale");
  std::istringstream in(slurp(d / "imu.csv"));
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  REQUIRE(lines.size() > 600);
  std::swap(lines[500], lines[502]);
  {
    std::ofstream out(d / "imu.csv", std::ios::binary | std::ios::trunc);
    for (const auto& l : lines) out << l << '\n';
  }
  const fs::path s = kRoot / "stale.txt";
  REQUIRE(run("localize -d " + d.string() + " -o " + (kRoot / "stale.tum").string() + " --summary " + s.string()) ==
          0);
  CHECK(summary_value(slurp(s), "stale_imu") >= 1);
}

TEST_CASE("data errors exit 2") {
  const fs::path no_prior = copy_dataset("box_no_prior");
  fs::remove(no_prior / "prior_map.pmb");
  CHECK(run("localize -d " + no_prior.string() + " -o " + (kRoot / "x.tum").string()) == 2);
  CHECK(run("localize --set map.use_prior_map=false -d " + no_prior.string() + " -o " +
            (kRoot / "x.tum").string()) == 0);

  const fs::path corrupt = copy_dataset("box_corrupt");
  fs::resize_file(corrupt / "scans.sc1", fs::file_size(corrupt / "scans.sc1") - 3);
  CHECK(run("localize -d " + corrupt.string() + " -o " + (kRoot / "y.tum").string()) == 2);
  CHECK(run("localize -d " + (kRoot / "nonexistent").string() + " -o " + (kRoot / "z.tum").string()) == 2);
}

TEST_CASE("mapbuild output has a stable checksum") {
  const fs::path a = kRoot / "built_a.pmb", b = kRoot / "built_b.pmb", t = kRoot / "built.pm1";
  REQUIRE(run("mapbuild -d " + box_dataset().string() + " -o " + a.string()) == 0);
  REQUIRE(run("mapbuild -d " + box_dataset().string() + " -o " + b.string()) == 0);
  REQUIRE(run("mapbuild -d " + box_dataset().string() + " -o " + t.string() + " --text") == 0);
  const PriorMap ma(read_map_points(a), 1), mb(read_map_points(b), 1), mt(read_map_points(t), 1);
  CHECK(ma.size() > 1000);
  CHECK(ma.checksum() == mb.checksum());
  CHECK(ma.checksum() == mt.checksum());
}

}  // TEST_SUITE
