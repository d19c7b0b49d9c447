#include "dmloc/config.hpp"

#include "dmloc/so3.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace dmloc {
namespace {

using nlohmann::json;

template <class V> void visit_fields(FilterConfig& c, V& v);
template <class V> void visit_fields(InitialUncertainty& c, V& v);
template <class V> void visit_fields(InitConfig& c, V& v);
template <class V> void visit_fields(AssociationConfig& c, V& v);
template <class V> void visit_fields(MovableProfile& c, V& v);
template <class V> void visit_fields(MapConfig& c, V& v);
template <class V> void visit_fields(sim::SensorSpec& c, V& v);
template <class V> void visit_fields(SimConfig& c, V& v);
template <class V> void visit_fields(EvalConfig& c, V& v);
template <class V> void visit_fields(ExtrinsicConfig& c, V& v);
template <class V> void visit_fields(RunConfig& c, V& v);

template <class T>
inline constexpr bool is_section_v =
    std::is_same_v<T, FilterConfig> || std::is_same_v<T, InitialUncertainty> || std::is_same_v<T, InitConfig> ||
    std::is_same_v<T, AssociationConfig> || std::is_same_v<T, MovableProfile> || std::is_same_v<T, MapConfig> ||
    std::is_same_v<T, sim::SensorSpec> || std::is_same_v<T, SimConfig> || std::is_same_v<T, EvalConfig> ||
    std::is_same_v<T, ExtrinsicConfig> || std::is_same_v<T, RunConfig>;

[[noreturn]] void bad(const std::string& path, const std::string& what) {
  throw ValidationError("config key '" + path + "': " + what);
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) bad(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) bad(path, "must be finite");
  return v;
}

void read_value(const json& j, const std::string& path, double& out) { out = number(j, path); }

void read_value(const json& j, const std::string& path, int& out) {
  if (!j.is_number_integer()) bad(path, "expected an integer");
  out = j.get<int>();
}

void read_value(const json& j, const std::string& path, std::uint64_t& out) {
  if (!j.is_number_integer() || (j.is_number_integer() && !j.is_number_unsigned() && j.get<long long>() < 0)) {
    bad(path, "expected a non-negative integer");
  }
  out = j.get<std::uint64_t>();
}

void read_value(const json& j, const std::string& path, bool& out) {
  if (!j.is_boolean()) bad(path, "expected true or false");
  out = j.get<bool>();
}

void read_value(const json& j, const std::string& path, Vec3& out) {
  if (!j.is_array() || j.size() != 3) bad(path, "expected [x, y, z]");
  for (int i = 0; i < 3; ++i) out[i] = number(j[static_cast<std::size_t>(i)], path);
}

void read_value(const json& j, const std::string& path, sim::WorldKind& out) {
  const std::string s = j.is_string() ? j.get<std::string>() : "";
  if (s == "box_room") out = sim::WorldKind::kBoxRoom;
  else if (s == "port_like") out = sim::WorldKind::kPortLike;
  else bad(path, "expected \"box_room\" or \"port_like\"");
}

void read_value(const json& j, const std::string& path, sim::Profile& out) {
  const std::string s = j.is_string() ? j.get<std::string>() : "";
  if (s == "smooth_spline") out = sim::Profile::kSmoothSpline;
  else if (s == "piecewise_arc") out = sim::Profile::kPiecewiseArc;
  else bad(path, "expected \"smooth_spline\" or \"piecewise_arc\"");
}

void read_value(const json& j, const std::string& path, std::vector<std::pair<double, double>>& out) {
  if (!j.is_array()) bad(path, "expected [[t0, t1], ...]");
  out.clear();
  for (const auto& w : j) {
    if (!w.is_array() || w.size() != 2) bad(path, "expected [[t0, t1], ...]");
    out.emplace_back(number(w[0], path), number(w[1], path));
  }
}

void read_value(const json& j, const std::string& path, std::vector<sim::Waypoint>& out) {
  if (!j.is_array()) bad(path, "expected [[x, y, z, yaw], ...]");
  out.clear();
  for (const auto& w : j) {
    if (!w.is_array() || w.size() != 4) bad(path, "expected [[x, y, z, yaw], ...]");
    out.push_back({Vec3(number(w[0], path), number(w[1], path), number(w[2], path)), number(w[3], path)});
  }
}

json write_value(double v) { return v; }
json write_value(int v) { return v; }
json write_value(std::uint64_t v) { return v; }
json write_value(bool v) { return v; }
json write_value(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
json write_value(sim::WorldKind k) { return k == sim::WorldKind::kBoxRoom ? "box_room" : "port_like"; }
json write_value(sim::Profile p) { return p == sim::Profile::kSmoothSpline ? "smooth_spline" : "piecewise_arc"; }
json write_value(const std::vector<std::pair<double, double>>& ws) {
  json a = json::array();
  for (const auto& [t0, t1] : ws) a.push_back({t0, t1});
  return a;
}
json write_value(const std::vector<sim::Waypoint>& ws) {
  json a = json::array();
  for (const auto& w : ws) a.push_back({w.position.x(), w.position.y(), w.position.z(), w.yaw});
  return a;
}

class Reader {
 public:
  Reader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) bad(path_.empty() ? "<root>" : path_, "expected an object");
  }

  template <class T>
  void operator()(const char* key, T& field) {
    used_.insert(key);
    const auto it = obj_.find(key);
    if (it == obj_.end()) return;
    const std::string p = path_.empty() ? key : path_ + "." + key;
    if constexpr (is_section_v<T>) {
      Reader sub(*it, p);
      visit_fields(field, sub);
      sub.finish();
    } else {
      read_value(*it, p, field);
    }
  }

  void finish() const {
    for (const auto& [k, v] : obj_.items()) {
      if (!used_.count(k)) bad(path_.empty() ? k : path_ + "." + k, "unknown key");
    }
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> used_;
};

class Writer {
 public:
  template <class T>
  void operator()(const char* key, T& field) {
    if constexpr (is_section_v<T>) {
      Writer sub;
      visit_fields(field, sub);
      obj[key] = std::move(sub.obj);
    } else {
      obj[key] = write_value(field);
    }
  }

  json obj = json::object();
};

template <class V>
void visit_fields(FilterConfig& c, V& v) {
  v("std_n_gyro", c.std_n_gyro);
  v("std_n_acc", c.std_n_acc);
  v("std_nb_gyro", c.std_nb_gyro);
  v("std_nb_acc", c.std_nb_acc);
  v("std_extrinsic", c.std_extrinsic);
  v("lidar_point_noise_std", c.lidar_point_noise_std);
  v("imu_meas_gyro_std", c.imu_meas_gyro_std);
  v("imu_meas_acc_std", c.imu_meas_acc_std);
  v("max_iterations", c.max_iterations);
  v("convergence_eps", c.convergence_eps);
  v("cv_timer_period", c.cv_timer_period);
  v("imu_timeout", c.imu_timeout);
  v("history_horizon", c.history_horizon);
  v("cv_noise_inflation", c.cv_noise_inflation);
  v("estimate_extrinsics", c.estimate_extrinsics);
}

template <class V>
void visit_fields(InitialUncertainty& c, V& v) {
  v("rot", c.rot);
  v("pos", c.pos);
  v("vel", c.vel);
  v("omega", c.omega);
  v("acc", c.acc);
  v("bias_gyro", c.bias_gyro);
  v("bias_acc", c.bias_acc);
  v("gravity", c.gravity);
  v("rot_il", c.rot_il);
  v("pos_il", c.pos_il);
}

template <class V>
void visit_fields(InitConfig& c, V& v) {
  v("sigma", c.sigma);
  v("pos_offset", c.pos_offset);
  v("rpy_offset_deg", c.rpy_offset_deg);
  v("gravity_window", c.gravity_window);
}

template <class V>
void visit_fields(AssociationConfig& c, V& v) {
  v("plane_min_points", c.plane_min_points);
  v("plane_fit_threshold", c.plane_fit_threshold);
  v("assoc_gate", c.assoc_gate);
  v("knn_max_dist", c.knn_max_dist);
  v("downsample_stride", c.downsample_stride);
  v("global_weight", c.global_weight);
  v("local_weight", c.local_weight);
}

template <class V>
void visit_fields(MovableProfile& c, V& v) {
  v("ground_z", c.ground_z);
  v("ground_tolerance", c.ground_tolerance);
  v("cell", c.cell);
  v("min_height", c.min_height);
  v("max_height", c.max_height);
  v("max_length", c.max_length);
  v("max_width", c.max_width);
}

template <class V>
void visit_fields(MapConfig& c, V& v) {
  v("use_prior_map", c.use_prior_map);
  v("use_local_map", c.use_local_map);
  v("prior_stride", c.prior_stride);
  v("local_radius", c.local_radius);
  v("local_voxel", c.local_voxel);
  v("prior_spacing", c.prior_spacing);
  v("prior_hole_fraction", c.prior_hole_fraction);
  v("prior_binary", c.prior_binary);
  v("prior_from_survey", c.prior_from_survey);
  v("build_voxel", c.build_voxel);
  v("movable", c.movable);
}

template <class V>
void visit_fields(sim::SensorSpec& c, V& v) {
  v("lidar_rate", c.lidar_rate);
  v("imu_rate", c.imu_rate);
  v("lidar_channels", c.lidar_channels);
  v("vertical_fov_deg", c.vertical_fov_deg);
  v("horizontal_samples", c.horizontal_samples);
  v("min_range", c.min_range);
  v("max_range", c.max_range);
  v("lidar_noise_std", c.lidar_noise_std);
  v("gyro_noise_std", c.gyro_noise_std);
  v("acc_noise_std", c.acc_noise_std);
  v("gyro_bias", c.gyro_bias);
  v("acc_bias", c.acc_bias);
  v("dropout_windows", c.dropout_windows);
}

template <class V>
void visit_fields(SimConfig& c, V& v) {
  v("world", c.world);
  v("seed", c.seed);
  v("noise_seed", c.noise_seed);
  v("survey_seed", c.survey_seed);
  v("duration", c.duration);
  v("speed", c.speed);
  v("profile", c.profile);
  v("closed", c.closed);
  v("waypoints", c.waypoints);
  v("gt_rate", c.gt_rate);
  v("sensors", c.sensors);
}

template <class V>
void visit_fields(EvalConfig& c, V& v) {
  v("max_dt", c.max_dt);
  v("align", c.align);
}

template <class V>
void visit_fields(ExtrinsicConfig& c, V& v) {
  v("rpy_deg", c.rpy_deg);
  v("pos", c.pos);
}

template <class V>
void visit_fields(RunConfig& c, V& v) {
  v("filter", c.filter);
  v("init", c.init);
  v("association", c.association);
  v("map", c.map);
  v("sim", c.sim);
  v("eval", c.eval);
  v("extrinsic", c.extrinsic);
}

void require(bool ok, const char* key, const char* what) {
  if (!ok) bad(key, what);
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ValidationError("override '" + assignment + "': expected key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ValidationError("override '" + assignment + "': empty key segment");
    if (!node->is_object()) throw ValidationError("override '" + assignment + "': '" + part + "' is not in a section");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

}  // namespace

Mat3 ExtrinsicConfig::rot() const { return so3::from_rpy(rpy_deg * (std::numbers::pi / 180.0)); }

void RunConfig::validate() const {
  filter.validate();
  association.validate();
  require(init.gravity_window >= 1, "init.gravity_window", "must be >= 1");
  require(init.sigma.rot > 0 && init.sigma.pos > 0 && init.sigma.vel > 0 && init.sigma.omega > 0 &&
              init.sigma.acc > 0 && init.sigma.bias_gyro > 0 && init.sigma.bias_acc > 0 &&
              init.sigma.gravity > 0 && init.sigma.rot_il > 0 && init.sigma.pos_il > 0,
          "init.sigma", "every standard deviation must be > 0");
  require(map.use_prior_map || map.use_local_map, "map", "at least one of use_prior_map / use_local_map");
  require(map.prior_stride >= 1, "map.prior_stride", "must be >= 1");
  require(map.local_radius > 0, "map.local_radius", "must be > 0");
  require(map.local_voxel > 0, "map.local_voxel", "must be > 0");
  require(map.prior_spacing > 0, "map.prior_spacing", "must be > 0");
  require(map.prior_hole_fraction >= 0 && map.prior_hole_fraction < 1, "map.prior_hole_fraction",
          "must be in [0, 1)");
  require(map.build_voxel > 0, "map.build_voxel", "must be > 0");
  require(map.movable.cell > 0, "map.movable.cell", "must be > 0");
  require(sim.duration > 0, "sim.duration", "must be > 0");
  require(sim.speed > 0, "sim.speed", "must be > 0");
  require(sim.gt_rate >= 200, "sim.gt_rate", "must be >= 200");
  require(sim.waypoints.empty() || sim.waypoints.size() >= 2, "sim.waypoints", "need at least 2");
  require(eval.max_dt > 0, "eval.max_dt", "must be > 0");
  sim.sensors.validate(sim.duration);
}

std::vector<sim::Waypoint> RunConfig::effective_waypoints() const {
  if (!sim.waypoints.empty()) return sim.waypoints;
  std::vector<sim::Waypoint> w;
  if (sim.world == sim::WorldKind::kBoxRoom) {
    const double xy[8][2] = {{-6, -3}, {0, -4}, {6, -3}, {8, 0}, {6, 3}, {0, 4}, {-6, 3}, {-8, 0}};
    for (const auto& p : xy) w.push_back({Vec3(p[0], p[1], 1.0), 0.0});
  } else {
    const double xy[12][2] = {{8, 0},   {40, 0},  {72, 0}, {80, 8}, {80, 20}, {80, 32},
                              {72, 40}, {40, 40}, {8, 40}, {0, 32}, {0, 20},  {0, 8}};
    for (const auto& p : xy) w.push_back({Vec3(p[0], p[1], 1.8), 0.0});
  }
  return w;
}

RunConfig parse_config(const std::string& text, const std::vector<std::string>& overrides) {
  json doc = json::object();
  if (text.find_first_not_of(" \t\r\n") != std::string::npos) {
    try {
      doc = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ValidationError(std::string("config is not valid JSON: ") + e.what());
    }
  }
  for (const auto& o : overrides) apply_override(doc, o);
  RunConfig cfg;
  Reader r(doc, "");
  visit_fields(cfg, r);
  r.finish();
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), overrides);
}

std::string to_json(const RunConfig& cfg) {
  RunConfig copy = cfg;
  Writer w;
  visit_fields(copy, w);
  return w.obj.dump(2);
}

std::uint64_t config_hash(const RunConfig& cfg) {
  std::uint64_t h = 1469598103934665603ull;
  for (const unsigned char c : to_json(cfg)) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace dmloc
