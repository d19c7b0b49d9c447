#pragma once

// Dataset stream files.
//   IMU:   CSV, header `t,gx,gy,gz,ax,ay,az`, SI units.
//   Scans: concatenated records `SC1` | f64 t_end | u32 count |
//          count x (f64 x, f64 y, f64 z, f64 dt), little-endian.

#include "dmloc/estimator.hpp"
#include "dmloc/lidar_meas.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace dmloc::io {

inline constexpr const char* kImuHeader = "t,gx,gy,gz,ax,ay,az";

std::string format_imu_csv(std::span<const ImuSample> samples);
void write_imu_csv(const std::filesystem::path& path, std::span<const ImuSample> samples);

/// Samples in file order; ordering is checked by the consumer. Throws
/// DataError naming the line on malformed input.
std::vector<ImuSample> parse_imu_csv(std::string_view text, const std::string& name = "<text>");
std::vector<ImuSample> read_imu_csv(const std::filesystem::path& path);

void write_scans(const std::filesystem::path& path, std::span<const Scan> scans);

/// Throws DataError naming the record index and byte offset of the first
/// corrupt or truncated record.
std::vector<Scan> read_scans(const std::filesystem::path& path);

}  // namespace dmloc::io
