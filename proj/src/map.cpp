#include "dmloc/map.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>

namespace dmloc {
namespace {

constexpr char kBinaryMagic[4] = {'P', 'M', 'B', '1'};

std::uint64_t to_le(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  std::uint64_t r = 0;
  for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xFF) << (8 * (7 - i));
  return r;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// Parses exactly three finite decimals separated by whitespace.
bool parse_xyz(std::string_view line, Vec3& out) {
  const char* p = line.data();
  const char* end = p + line.size();
  for (int i = 0; i < 3; ++i) {
    while (p < end && (*p == ' ' || *p == '\t')) ++p;
    double v = 0.0;
    auto [next, ec] = std::from_chars(p, end, v);
    if (ec != std::errc() || next == p || !std::isfinite(v)) return false;
    out[i] = v;
    p = next;
  }
  while (p < end && (*p == ' ' || *p == '\t' || *p == '\r')) ++p;
  return p == end;
}

std::vector<Vec3> read_text(std::istream& in, const std::string& name) {
  std::string line;
  std::size_t line_no = 0;
  std::size_t count = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') continue;
    std::istringstream hs(t);
    std::string magic;
    long long n = -1;
    std::string rest;
    if (!(hs >> magic >> n) || magic != "PM1" || n < 0 || (hs >> rest)) {
      throw DataError(name + ":" + std::to_string(line_no) + ": expected header 'PM1 <count>'");
    }
    count = static_cast<std::size_t>(n);
    have_header = true;
    break;
  }
  if (!have_header) throw DataError(name + ": empty map file");

  std::vector<Vec3> pts;
  pts.reserve(count);
  while (pts.size() < count && std::getline(in, line)) {
    ++line_no;
    Vec3 p;
    if (!parse_xyz(line, p)) {
      throw DataError(name + ":" + std::to_string(line_no) + ": malformed record " +
                      std::to_string(pts.size() + 1));
    }
    pts.push_back(p);
  }
  if (pts.size() != count) {
    throw DataError(name + ": header declares " + std::to_string(count) + " points, found " +
                    std::to_string(pts.size()));
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      throw DataError(name + ":" + std::to_string(line_no) + ": trailing data after " +
                      std::to_string(count) + " records");
    }
  }
  return pts;
}

std::vector<Vec3> read_binary(std::istream& in, const std::string& name) {
  std::uint64_t raw = 0;
  if (!in.read(reinterpret_cast<char*>(&raw), 8)) throw DataError(name + ": truncated PMB1 header");
  const std::uint64_t count = to_le(raw);
  std::vector<Vec3> pts;
  pts.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 26)));
  for (std::uint64_t i = 0; i < count; ++i) {
    Vec3 p;
    for (int c = 0; c < 3; ++c) {
      if (!in.read(reinterpret_cast<char*>(&raw), 8)) {
        throw DataError(name + ": truncated at record " + std::to_string(i + 1));
      }
      p[c] = std::bit_cast<double>(to_le(raw));
    }
    if (!p.allFinite()) throw DataError(name + ": non-finite record " + std::to_string(i + 1));
    pts.push_back(p);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw DataError(name + ": trailing bytes");
  return pts;
}

void append_double(std::string& s, double v) {
  std::array<char, 32> buf;
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  s.append(buf.data(), end);
}

}  // namespace

std::vector<Vec3> read_map_points(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open map file " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() == 0) throw DataError(path.string() + ": empty map file");
  if (in.gcount() == 4 && std::memcmp(magic, kBinaryMagic, 4) == 0) {
    return read_binary(in, path.string());
  }
  in.clear();
  in.seekg(0);
  return read_text(in, path.string());
}

void write_map_points(const std::filesystem::path& path, const std::vector<Vec3>& pts,
                      MapFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write map file " + path.string());
  if (format == MapFormat::kBinary) {
    out.write(kBinaryMagic, 4);
    const std::uint64_t n = to_le(pts.size());
    out.write(reinterpret_cast<const char*>(&n), 8);
    for (const auto& p : pts) {
      for (int c = 0; c < 3; ++c) {
        const std::uint64_t v = to_le(std::bit_cast<std::uint64_t>(p[c]));
        out.write(reinterpret_cast<const char*>(&v), 8);
      }
    }
  } else {
    std::string s = "PM1 " + std::to_string(pts.size()) + "\n";
    for (const auto& p : pts) {
      append_double(s, p.x());
      s += ' ';
      append_double(s, p.y());
      s += ' ';
      append_double(s, p.z());
      s += '\n';
    }
    out << s;
  }
  if (!out) throw DataError("write failed for " + path.string());
}

PriorMap::PriorMap(std::vector<Vec3> points, int stride)
    : points_(interval_downsample(points, stride)) {
  for (const auto& p : points_) bounds_.extend(p);
  index_.build(points_);
}

std::uint64_t PriorMap::checksum() const {
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& p : points_) {
    for (int c = 0; c < 3; ++c) {
      const auto bits = std::bit_cast<std::uint64_t>(p[c]);
      for (int b = 0; b < 8; ++b) {
        h ^= (bits >> (8 * b)) & 0xFF;
        h *= 1099511628211ull;
      }
    }
  }
  return h;
}

PriorMap load_prior(const std::filesystem::path& path, int stride) {
  auto pts = read_map_points(path);
  if (pts.empty()) throw DataError(path.string() + ": map contains no points");
  return PriorMap(std::move(pts), stride);
}

LocalMap::LocalMap() : LocalMap(Options{}) {}
LocalMap::LocalMap(Options opt) : opt_(opt) {}

std::size_t LocalMap::KeyHash::operator()(const Eigen::Vector3i& k) const {
  std::size_t h = static_cast<std::size_t>(k.x()) * 73856093u;
  h ^= static_cast<std::size_t>(k.y()) * 19349663u;
  h ^= static_cast<std::size_t>(k.z()) * 83492791u;
  return h;
}

Eigen::Vector3i LocalMap::key_of(const Vec3& p) const {
  return (p / opt_.voxel).array().floor().cast<int>();
}

std::size_t LocalMap::insert(const std::vector<Vec3>& world_pts) {
  std::vector<Vec3> fresh;
  fresh.reserve(world_pts.size());
  for (const auto& p : world_pts) {
    if (!p.allFinite()) continue;
    auto [it, added] = voxels_.try_emplace(key_of(p), p);
    if (added) fresh.push_back(p);
  }
  const std::size_t n = tree_.insert(fresh);
  return n;
}

std::size_t LocalMap::prune(const Vec3& center) {
  center_ = center;
  has_center_ = true;
  const Vec3 lo = center.array() - opt_.radius;
  const Vec3 hi = center.array() + opt_.radius;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::size_t removed = 0;
  for (int axis = 0; axis < 3; ++axis) {
    Aabb below = Aabb::of(Vec3::Constant(-kInf), Vec3::Constant(kInf));
    below.max[axis] = std::nextafter(lo[axis], -kInf);
    Aabb above = Aabb::of(Vec3::Constant(-kInf), Vec3::Constant(kInf));
    above.min[axis] = std::nextafter(hi[axis], kInf);
    removed += tree_.delete_box(below);
    removed += tree_.delete_box(above);
  }
  const Aabb keep = Aabb::of(lo, hi);
  std::erase_if(voxels_, [&keep](const auto& kv) { return !keep.contains(kv.second); });
  return removed;
}

bool LocalMap::needs_prune(const Vec3& pose) const {
  return !has_center_ || (pose - center_).cwiseAbs().maxCoeff() > 0.5 * opt_.radius;
}

}  // namespace dmloc
