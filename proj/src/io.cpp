#include "dmloc/io.hpp"

#include "text_util.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace dmloc::io {
namespace {

constexpr char kScanMagic[3] = {'S', 'C', '1'};

template <class U>
U to_le(U v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    U r = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) r |= ((v >> (8 * i)) & 0xFF) << (8 * (sizeof(U) - 1 - i));
    return r;
  }
}

void put_f64(std::string& s, double v) {
  const auto bits = to_le(std::bit_cast<std::uint64_t>(v));
  s.append(reinterpret_cast<const char*>(&bits), 8);
}

}  // namespace

std::string format_imu_csv(std::span<const ImuSample> samples) {
  std::string s = std::string(kImuHeader) + "\n";
  for (const auto& m : samples) {
    const double v[7] = {m.t, m.gyro.x(), m.gyro.y(), m.gyro.z(), m.acc.x(), m.acc.y(), m.acc.z()};
    for (int i = 0; i < 7; ++i) {
      if (i) s += ',';
      detail::append_double(s, v[i]);
    }
    s += '\n';
  }
  return s;
}

void write_imu_csv(const std::filesystem::path& path, std::span<const ImuSample> samples) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write IMU file " + path.string());
  out << format_imu_csv(samples);
  if (!out) throw DataError("write failed for " + path.string());
}

std::vector<ImuSample> parse_imu_csv(std::string_view text, const std::string& name) {
  std::vector<ImuSample> out;
  std::size_t line_no = 0;
  bool have_header = false;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const std::string_view line = detail::trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty()) continue;
    if (!have_header) {
      if (line != kImuHeader) {
        throw DataError(name + ":" + std::to_string(line_no) + ": expected header `" + kImuHeader + "`");
      }
      have_header = true;
      continue;
    }
    double v[7];
    if (!detail::parse_doubles(line, v, ',')) {
      throw DataError(name + ":" + std::to_string(line_no) + ": malformed IMU record " +
                      std::to_string(out.size() + 1));
    }
    out.push_back({v[0], Vec3(v[1], v[2], v[3]), Vec3(v[4], v[5], v[6])});
  }
  if (!have_header) throw DataError(name + ": missing IMU header");
  return out;
}

std::vector<ImuSample> read_imu_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open IMU file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_imu_csv(ss.str(), path.string());
}

void write_scans(const std::filesystem::path& path, std::span<const Scan> scans) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write scan file " + path.string());
  std::string rec;
  for (const auto& s : scans) {
    rec.clear();
    rec.append(kScanMagic, 3);
    put_f64(rec, s.t_end);
    const auto n = to_le(static_cast<std::uint32_t>(s.points.size()));
    rec.append(reinterpret_cast<const char*>(&n), 4);
    for (const auto& p : s.points) {
      put_f64(rec, p.xyz.x());
      put_f64(rec, p.xyz.y());
      put_f64(rec, p.xyz.z());
      put_f64(rec, p.dt);
    }
    out.write(rec.data(), static_cast<std::streamsize>(rec.size()));
  }
  if (!out) throw DataError("write failed for " + path.string());
}

std::vector<Scan> read_scans(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open scan file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string buf = ss.str();
  std::vector<Scan> scans;
  std::size_t off = 0;
  auto fail = [&](const std::string& what) {
    throw DataError(path.string() + ": record " + std::to_string(scans.size()) + " at byte " +
                    std::to_string(off) + ": " + what);
  };
  auto f64_at = [&](std::size_t pos) {
    std::uint64_t raw;
    std::memcpy(&raw, buf.data() + pos, 8);
    return std::bit_cast<double>(to_le(raw));
  };
  while (off < buf.size()) {
    if (buf.size() - off < 15) fail("truncated header");
    if (std::memcmp(buf.data() + off, kScanMagic, 3) != 0) fail("bad magic");
    Scan s;
    s.t_end = f64_at(off + 3);
    std::uint32_t n;
    std::memcpy(&n, buf.data() + off + 11, 4);
    n = to_le(n);
    if (!std::isfinite(s.t_end)) fail("non-finite t_end");
    const std::size_t body = static_cast<std::size_t>(n) * 32;
    if (buf.size() - off - 15 < body) fail("truncated points");
    s.points.resize(n);
    std::size_t pos = off + 15;
    for (auto& p : s.points) {
      p.xyz = Vec3(f64_at(pos), f64_at(pos + 8), f64_at(pos + 16));
      p.dt = f64_at(pos + 24);
      if (!p.xyz.allFinite() || !std::isfinite(p.dt) || p.dt < 0.0) fail("invalid point");
      pos += 32;
    }
    scans.push_back(std::move(s));
    off = pos;
  }
  return scans;
}

}  // namespace dmloc::io
