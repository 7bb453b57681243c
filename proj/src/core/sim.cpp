#include "sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "util.hpp"

namespace wmatch {

StepResult step_kinematics(const VehicleState& s, double u_v, double u_omega,
                           const NoiseConfig& noise, std::mt19937_64& rng,
                           double dt) {
  static thread_local std::normal_distribution<double> normal(0.0, 1.0);
  double w_v = noise.sigma2_w_v > 0.0
                   ? std::sqrt(noise.sigma2_w_v) * normal(rng)
                   : 0.0;
  double w_omega = noise.sigma2_w_omega > 0.0
                       ? std::sqrt(noise.sigma2_w_omega) * normal(rng)
                       : 0.0;

  StepResult r;
  r.v_achieved = u_v + w_v;
  r.omega_achieved = u_omega + w_omega;
  r.w_v_effective = r.v_achieved - u_v;
  r.w_omega_effective = r.omega_achieved - u_omega;
  r.state.x = s.x + dt * std::cos(s.theta) * r.v_achieved;
  r.state.y = s.y + dt * std::sin(s.theta) * r.v_achieved;
  r.state.theta = wrap_angle(s.theta + dt * r.omega_achieved);
  r.state.tick = s.tick + 1;
  return r;
}

Path::Path(std::vector<std::pair<double, double>> points, bool closed)
    : points_(std::move(points)), closed_(closed) {
  if (points_.size() < 2)
    throw std::invalid_argument("path needs at least 2 waypoints");
  cum_.resize(points_.size(), 0.0);
  for (std::size_t i = 1; i < points_.size(); ++i) {
    double dx = points_[i].first - points_[i - 1].first;
    double dy = points_[i].second - points_[i - 1].second;
    cum_[i] = cum_[i - 1] + std::hypot(dx, dy);
  }
  total_length_ = cum_.back();
  if (closed_) {
    double dx = points_.front().first - points_.back().first;
    double dy = points_.front().second - points_.back().second;
    total_length_ += std::hypot(dx, dy);
  }
  if (total_length_ <= 0.0)
    throw std::invalid_argument("path has zero length");
}

std::pair<double, double> Path::point_at(double s) const {
  if (closed_) {
    s = std::fmod(s, total_length_);
    if (s < 0.0) s += total_length_;
  } else {
    s = clamp(s, 0.0, total_length_);
  }
  // Segment i runs from cum_[i] to cum_[i+1] (closing segment for loops).
  std::size_t n = points_.size();
  auto it = std::upper_bound(cum_.begin(), cum_.end(), s);
  std::size_t i = it == cum_.begin() ? 0 : (it - cum_.begin()) - 1;
  std::size_t j = i + 1;
  double seg_start = cum_[i];
  double seg_len;
  std::pair<double, double> a = points_[i], b;
  if (j < n) {
    b = points_[j];
    seg_len = cum_[j] - cum_[i];
  } else {
    b = points_.front();
    seg_len = total_length_ - cum_[i];
  }
  double f = seg_len > 0.0 ? (s - seg_start) / seg_len : 0.0;
  return {a.first + f * (b.first - a.first),
          a.second + f * (b.second - a.second)};
}

double Path::project(double x, double y) const {
  double best_d2 = std::numeric_limits<double>::infinity();
  double best_s = 0.0;
  std::size_t n = points_.size();
  std::size_t seg_count = closed_ ? n : n - 1;
  for (std::size_t i = 0; i < seg_count; ++i) {
    const auto& a = points_[i];
    const auto& b = points_[(i + 1) % n];
    double vx = b.first - a.first, vy = b.second - a.second;
    double len2 = vx * vx + vy * vy;
    double t = 0.0;
    if (len2 > 0.0)
      t = clamp(((x - a.first) * vx + (y - a.second) * vy) / len2, 0.0, 1.0);
    double px = a.first + t * vx, py = a.second + t * vy;
    double d2 = (x - px) * (x - px) + (y - py) * (y - py);
    if (d2 < best_d2) {
      best_d2 = d2;
      double seg_len = i + 1 < n ? cum_[i + 1] - cum_[i] : total_length_ - cum_[i];
      best_s = cum_[i] + t * seg_len;
    }
  }
  return best_s;
}

Path oval_path(double half_length, double radius, double spacing) {
  if (radius <= 0.0 || spacing <= 0.0 || half_length < 0.0)
    throw std::invalid_argument("oval parameters must be positive");

  std::vector<std::pair<double, double>> pts;
  auto emit_straight = [&](double x0, double y0, double x1, double y1) {
    double len = std::hypot(x1 - x0, y1 - y0);
    if (len <= 0.0) return;
    int n = std::max(1, static_cast<int>(std::round(len / spacing)));
    for (int k = 0; k < n; ++k) {
      double f = static_cast<double>(k) / n;
      pts.emplace_back(x0 + f * (x1 - x0), y0 + f * (y1 - y0));
    }
  };
  auto emit_arc = [&](double cx, double cy, double a0, double a1) {
    double arc = (a1 - a0) * radius;
    int n = std::max(2, static_cast<int>(std::round(arc / spacing)));
    for (int k = 0; k < n; ++k) {
      double a = a0 + (a1 - a0) * k / n;
      pts.emplace_back(cx + radius * std::cos(a), cy + radius * std::sin(a));
    }
  };

  const double pi = std::numbers::pi;
  emit_straight(-half_length, -radius, half_length, -radius);
  emit_arc(half_length, 0.0, -pi / 2.0, pi / 2.0);
  emit_straight(half_length, radius, -half_length, radius);
  emit_arc(-half_length, 0.0, pi / 2.0, 3.0 * pi / 2.0);
  return Path(std::move(pts), true);
}

Path straight_path(double length, double spacing) {
  if (length <= 0.0 || spacing <= 0.0)
    throw std::invalid_argument("straight-path parameters must be positive");
  int n = std::max(1, static_cast<int>(std::round(length / spacing)));
  std::vector<std::pair<double, double>> pts;
  for (int k = 0; k <= n; ++k)
    pts.emplace_back(length * k / n, 0.0);
  return Path(std::move(pts), false);
}

std::pair<double, double> track_controller(const VehicleState& s,
                                           const Path& path,
                                           double target_speed,
                                           const ControllerLimits& limits) {
  double lookahead = limits.lookahead > 0.0
                         ? limits.lookahead
                         : std::max(0.5, 0.5 * target_speed);
  double sp = path.project(s.x, s.y);
  auto [lx, ly] = path.point_at(sp + lookahead);
  double alpha = wrap_angle(std::atan2(ly - s.y, lx - s.x) - s.theta);

  double u_v = clamp(target_speed, 0.0, limits.max_speed);
  double u_omega = u_v * 2.0 * std::sin(alpha) / lookahead;
  u_omega = clamp(u_omega, -limits.max_omega, limits.max_omega);
  return {u_v, u_omega};
}

void validate(const ScenarioConfig& cfg) {
  if (!(cfg.dt > 0.0)) throw std::invalid_argument("dt must be > 0");
  if (!(cfg.duration >= 0.0))
    throw std::invalid_argument("duration must be >= 0");
  if (!(cfg.sensor.rate_hz > 0.0))
    throw std::invalid_argument("sensor rate must be > 0");
  if (cfg.sensor.rate_hz > 1.0 / cfg.dt + 1e-9)
    throw std::invalid_argument("sensor rate cannot exceed 1/dt");
  if (cfg.vehicles.empty())
    throw std::invalid_argument("scenario needs at least one vehicle");
  for (std::size_t i = 0; i < cfg.vehicles.size(); ++i) {
    const auto& v = cfg.vehicles[i];
    if (v.address.empty())
      throw std::invalid_argument("vehicle address must be non-empty");
    for (std::size_t j = 0; j < i; ++j)
      if (cfg.vehicles[j].address == v.address)
        throw std::invalid_argument("duplicate vehicle address: " + v.address);
    if (v.watermark.sigma2_e_v < 0.0 || v.watermark.sigma2_e_omega < 0.0)
      throw std::invalid_argument("watermark variance must be >= 0");
    if (v.noise.sigma2_w_v < 0.0 || v.noise.sigma2_w_omega < 0.0)
      throw std::invalid_argument("process-noise variance must be >= 0");
    if (v.transmit &&
        v.watermark.sigma2_e_v + v.watermark.sigma2_e_omega <= 0.0)
      throw std::invalid_argument(
          "transmitting vehicle needs a strictly positive watermark "
          "variance: " +
          v.address);
    if (v.mode == VehicleMode::Follow && i == 0)
      throw std::invalid_argument("first vehicle cannot be a follower");
  }
}

namespace {

std::string visual_id_for(std::size_t index) {
  if (index < 26) return std::string("ID_") + static_cast<char>('A' + index);
  return "ID_T" + std::to_string(index);
}

struct VehicleRuntime {
  VehicleState state;
  WatermarkGenerator gen;
  std::mt19937_64 noise_rng;
  double v_achieved = 0.0;
  double omega_achieved = 0.0;
  std::uint32_t seq = 0;
};

}  // namespace

ScenarioResult run_scenario(const ScenarioConfig& cfg) {
  validate(cfg);

  Path path = cfg.path.kind == "straight"
                  ? straight_path(cfg.path.length > 0.0
                                      ? cfg.path.length
                                      : cfg.duration * 20.0 + 100.0,
                                  cfg.path.spacing)
                  : oval_path(cfg.path.half_length, cfg.path.radius,
                              cfg.path.spacing);

  std::uint64_t seed_state = cfg.seed;
  std::vector<VehicleRuntime> rt;
  rt.reserve(cfg.vehicles.size());
  for (const auto& spec : cfg.vehicles) {
    WatermarkConfig wm = spec.watermark;
    std::uint64_t noise_seed = splitmix64(seed_state);
    if (wm.seed == 0) wm.seed = splitmix64(seed_state);
    VehicleRuntime v{VehicleState{}, WatermarkGenerator(wm),
                     std::mt19937_64(noise_seed)};
    auto [px, py] = path.point_at(spec.start_s);
    auto [qx, qy] = path.point_at(spec.start_s + 0.05);
    v.state.x = px;
    v.state.y = py;
    v.state.theta = std::atan2(qy - py, qx - px);
    rt.push_back(std::move(v));
  }
  std::mt19937_64 sensor_rng(splitmix64(seed_state));
  std::normal_distribution<double> normal(0.0, 1.0);

  ScenarioResult result;
  for (std::size_t i = 0; i < cfg.vehicles.size(); ++i) {
    result.truth[cfg.vehicles[i].address] = visual_id_for(i);
    if (cfg.vehicles[i].transmit)
      result.packets[cfg.vehicles[i].address] = {};
  }

  ControllerLimits limits;
  const std::int64_t n_ticks =
      static_cast<std::int64_t>(std::floor(cfg.duration / cfg.dt + 1e-9));
  const double sensor_period = 1.0 / cfg.sensor.rate_hz;
  double next_sensor_t = sensor_period;

  for (std::int64_t k = 0; k < n_ticks; ++k) {
    // Lead vehicle state before this tick's updates, for followers.
    VehicleState lead_state = rt[0].state;
    double lead_speed = rt[0].v_achieved;

    for (std::size_t i = 0; i < cfg.vehicles.size(); ++i) {
      const VehicleSpec& spec = cfg.vehicles[i];
      VehicleRuntime& v = rt[i];

      double u_g_v, u_g_omega;
      if (spec.mode == VehicleMode::Follow) {
        double s_lead = path.project(lead_state.x, lead_state.y);
        double s_self = path.project(v.state.x, v.state.y);
        double gap = s_lead - s_self;
        if (path.total_length() > 0.0 && gap < -0.5 * path.total_length())
          gap += path.total_length();
        double ref = lead_speed > 0.0 ? lead_speed : spec.target_speed;
        u_g_v = clamp(ref + 1.0 * (gap - spec.follow_gap), 0.0,
                      limits.max_speed);
        auto [uv_pp, uo_pp] = track_controller(v.state, path, u_g_v, limits);
        (void)uv_pp;
        u_g_omega = uo_pp;
      } else {
        auto [uv, uo] =
            track_controller(v.state, path, spec.target_speed, limits);
        u_g_v = uv;
        u_g_omega = uo;
      }

      ExcitationSample e = v.gen.draw();
      double u_v, u_omega;
      inject(u_g_v, u_g_omega, e, u_v, u_omega);

      StepResult step = step_kinematics(v.state, u_v, u_omega, spec.noise,
                                        v.noise_rng, cfg.dt);
      v.state = step.state;
      v.v_achieved = step.v_achieved;
      v.omega_achieved = step.omega_achieved;

      if (spec.transmit) {
        PacketRecord p;
        p.t = static_cast<double>(k) * cfg.dt;
        p.seq = v.seq++;
        p.u_g_v = u_g_v;
        p.u_g_omega = u_g_omega;
        p.e_v = e.e_v;
        p.e_omega = e.e_omega;
        result.packets[spec.address].push_back(p);
      }
    }

    const double t_now = static_cast<double>(k + 1) * cfg.dt;
    if (t_now + 1e-9 >= next_sensor_t) {
      next_sensor_t += sensor_period;
      for (std::size_t i = 0; i < cfg.vehicles.size(); ++i) {
        const VehicleRuntime& v = rt[i];
        Observation o;
        o.visual_id = visual_id_for(i);
        o.t = t_now;
        o.x = v.state.x + cfg.sensor.pos_noise_std * (cfg.sensor.pos_noise_std > 0.0 ? normal(sensor_rng) : 0.0);
        o.y = v.state.y + cfg.sensor.pos_noise_std * (cfg.sensor.pos_noise_std > 0.0 ? normal(sensor_rng) : 0.0);
        o.theta = wrap_angle(
            v.state.theta +
            (cfg.sensor.heading_noise_std > 0.0
                 ? cfg.sensor.heading_noise_std * normal(sensor_rng)
                 : 0.0));
        o.v = v.v_achieved + (cfg.sensor.vel_noise_std > 0.0
                                  ? cfg.sensor.vel_noise_std * normal(sensor_rng)
                                  : 0.0);
        o.omega = v.omega_achieved +
                  (cfg.sensor.vel_noise_std > 0.0
                       ? cfg.sensor.vel_noise_std * normal(sensor_rng)
                       : 0.0);
        result.observations.push_back(std::move(o));
      }
    }
  }
  return result;
}

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& v, const std::string& origin, int line) {
  try {
    std::size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return d;
  } catch (...) {
    throw std::invalid_argument(origin + ":" + std::to_string(line) +
                                ": expected a number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& v, const std::string& origin, int line) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument(origin + ":" + std::to_string(line) +
                              ": expected true/false, got '" + v + "'");
}

}  // namespace

ScenarioConfig parse_scenario_text(const std::string& text,
                                   const std::string& origin) {
  ScenarioConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  std::string section;       // "", "sensor", "path", "vehicle"
  VehicleSpec* vehicle = nullptr;

  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;

    if (t.front() == '[') {
      if (t.back() != ']')
        throw std::invalid_argument(origin + ":" + std::to_string(lineno) +
                                    ": unterminated section header");
      std::string name = trim(t.substr(1, t.size() - 2));
      if (name == "sensor" || name == "path") {
        section = name;
        vehicle = nullptr;
      } else if (name.rfind("vehicle", 0) == 0) {
        std::string addr = trim(name.substr(7));
        if (addr.empty())
          throw std::invalid_argument(origin + ":" + std::to_string(lineno) +
                                      ": vehicle section needs an address");
        cfg.vehicles.emplace_back();
        vehicle = &cfg.vehicles.back();
        vehicle->address = addr;
        section = "vehicle";
      } else {
        throw std::invalid_argument(origin + ":" + std::to_string(lineno) +
                                    ": unknown section '" + name + "'");
      }
      continue;
    }

    std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(origin + ":" + std::to_string(lineno) +
                                  ": expected 'key = value'");
    std::string key = trim(t.substr(0, eq));
    std::string val = trim(t.substr(eq + 1));

    auto num = [&] { return parse_double(val, origin, lineno); };
    auto unknown = [&]() -> std::invalid_argument {
      return std::invalid_argument(origin + ":" + std::to_string(lineno) +
                                   ": unknown key '" + key + "' in section '" +
                                   section + "'");
    };

    if (section.empty()) {
      if (key == "dt") cfg.dt = num();
      else if (key == "duration") cfg.duration = num();
      else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(num());
      else throw unknown();
    } else if (section == "sensor") {
      if (key == "rate") cfg.sensor.rate_hz = num();
      else if (key == "pos_noise_std") cfg.sensor.pos_noise_std = num();
      else if (key == "heading_noise_std") cfg.sensor.heading_noise_std = num();
      else if (key == "vel_noise_std") cfg.sensor.vel_noise_std = num();
      else throw unknown();
    } else if (section == "path") {
      if (key == "kind") cfg.path.kind = val;
      else if (key == "half_length") cfg.path.half_length = num();
      else if (key == "radius") cfg.path.radius = num();
      else if (key == "length") cfg.path.length = num();
      else if (key == "spacing") cfg.path.spacing = num();
      else throw unknown();
    } else {  // vehicle
      if (key == "sigma2_e_v") vehicle->watermark.sigma2_e_v = num();
      else if (key == "sigma2_e_omega") vehicle->watermark.sigma2_e_omega = num();
      else if (key == "watermark_seed")
        vehicle->watermark.seed = static_cast<std::uint64_t>(num());
      else if (key == "sigma2_w_v") vehicle->noise.sigma2_w_v = num();
      else if (key == "sigma2_w_omega") vehicle->noise.sigma2_w_omega = num();
      else if (key == "target_speed") vehicle->target_speed = num();
      else if (key == "start_s") vehicle->start_s = num();
      else if (key == "transmit") vehicle->transmit = parse_bool(val, origin, lineno);
      else if (key == "follow_gap") vehicle->follow_gap = num();
      else if (key == "mode") {
        if (val == "track") vehicle->mode = VehicleMode::Track;
        else if (val == "follow") vehicle->mode = VehicleMode::Follow;
        else
          throw std::invalid_argument(origin + ":" + std::to_string(lineno) +
                                      ": mode must be track or follow");
      } else throw unknown();
    }
  }

  if (cfg.path.kind != "oval" && cfg.path.kind != "straight")
    throw std::invalid_argument(origin + ": path kind must be oval or straight");
  return cfg;
}

ScenarioConfig parse_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario_text(buf.str(), path);
}

}  // namespace wmatch
