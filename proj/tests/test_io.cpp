#include "oracles.hpp"

#include "dmloc/io.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace dmloc;
using oracle::Rng;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "dmloc_test_io";
  std::filesystem::create_directories(dir);
  return dir / name;
}

std::vector<Scan> random_scans(Rng& rng, int n) {
  std::vector<Scan> scans(n);
  for (int i = 0; i < n; ++i) {
    scans[i].t_end = 0.1 * (i + 1);
    const int m = rng.integer(0, 50);
    for (int k = 0; k < m; ++k) scans[i].points.push_back({rng.vec(30.0), 0.1 * k / 50.0});
  }
  return scans;
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("IMU CSV round trip is exact") {
  Rng rng(70);
  std::vector<ImuSample> s(200);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = {0.01 * i + 1e-9 * rng.uniform(), rng.vec(1.0), rng.vec(20.0)};
  const auto path = temp_file("imu.csv");
  io::write_imu_csv(path, s);
  const auto back = io::read_imu_csv(path);
  REQUIRE(back.size() == s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(back[i].t == s[i].t);
    CHECK(back[i].gyro == s[i].gyro);
    CHECK(back[i].acc == s[i].acc);
  }
  CHECK(io::format_imu_csv(back) == io::format_imu_csv(s));
}

TEST_CASE("IMU CSV errors name the line") {
  CHECK_THROWS_WITH_AS(io::parse_imu_csv("", "a.csv"), doctest::Contains("missing IMU header"), DataError);
  CHECK_THROWS_WITH_AS(io::parse_imu_csv("t,x\n", "a.csv"), doctest::Contains("a.csv:1"), DataError);
  const std::string good = std::string(io::kImuHeader) + "\n0,0,0,0,0,0,9.8\n";
  CHECK(io::parse_imu_csv(good).size() == 1);
  CHECK_THROWS_WITH_AS(io::parse_imu_csv(good + "0.01,0,0,0,0,9.8\n", "a.csv"), doctest::Contains("a.csv:3"),
                       DataError);
  CHECK_THROWS_WITH_AS(io::parse_imu_csv(good + "0.01,0,0,x,0,0,9.8\n", "a.csv"), doctest::Contains("a.csv:3"),
                       DataError);
  CHECK_THROWS_AS(io::read_imu_csv(temp_file("does_not_exist.csv")), DataError);
}

TEST_CASE("scan file round trip is exact") {
  Rng rng(71);
  const auto scans = random_scans(rng, 40);
  const auto path = temp_file("scans.sc1");
  io::write_scans(path, scans);
  const auto back = io::read_scans(path);
  REQUIRE(back.size() == scans.size());
  for (std::size_t i = 0; i < scans.size(); ++i) {
    CHECK(back[i].t_end == scans[i].t_end);
    REQUIRE(back[i].points.size() == scans[i].points.size());
    for (std::size_t k = 0; k < scans[i].points.size(); ++k) {
      CHECK(back[i].points[k].xyz == scans[i].points[k].xyz);
      CHECK(back[i].points[k].dt == scans[i].points[k].dt);
    }
  }
  io::write_scans(path, {});
  CHECK(io::read_scans(path).empty());
}

TEST_CASE("corrupt scan files report the record and byte offset") {
  Rng rng(72);
  std::vector<Scan> scans(3);
  for (auto& s : scans) s.points.push_back({rng.vec(5.0), 0.0});
  scans[0].t_end = 0.1;
  scans[1].t_end = 0.2;
  scans[2].t_end = 0.3;
  const auto path = temp_file("bad.sc1");
  io::write_scans(path, scans);
  const auto size = std::filesystem::file_size(path);
  const std::size_t record = 15 + 32;
  REQUIRE(size == 3 * record);

  std::filesystem::resize_file(path, size - 5);
  CHECK_THROWS_WITH_AS(io::read_scans(path), doctest::Contains("record 2 at byte 94: truncated points"), DataError);
  std::filesystem::resize_file(path, 2 * record + 7);
  CHECK_THROWS_WITH_AS(io::read_scans(path), doctest::Contains("record 2 at byte 94: truncated header"), DataError);

  io::write_scans(path, scans);
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(record);
    f.write("XX1", 3);
  }
  CHECK_THROWS_WITH_AS(io::read_scans(path), doctest::Contains("record 1 at byte 47: bad magic"), DataError);

  io::write_scans(path, scans);
  {
    // Negative dt of the only point in record 0.
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    const double neg = -1.0;
    f.seekp(15 + 24);
    f.write(reinterpret_cast<const char*>(&neg), 8);
  }
  CHECK_THROWS_WITH_AS(io::read_scans(path), doctest::Contains("record 0 at byte 0: invalid point"), DataError);
  CHECK_THROWS_AS(io::read_scans(temp_file("missing.sc1")), DataError);
}

}  // TEST_SUITE
