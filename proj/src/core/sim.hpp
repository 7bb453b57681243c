#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "detector.hpp"
#include "watermark.hpp"

namespace wmatch {

struct VehicleState {
  double x = 0.0;      // m
  double y = 0.0;      // m
  double theta = 0.0;  // rad, wrapped to (-pi, pi]
  std::int64_t tick = 0;
};

struct StepResult {
  VehicleState state;
  double v_achieved = 0.0;      // u_v + w_v actually applied this step
  double omega_achieved = 0.0;  // u_omega + w_omega
  double w_v_effective = 0.0;   // v_achieved - u_v, the recoverable noise
  double w_omega_effective = 0.0;
};

// One Euler step of the kinematic model. The same translational noise draw
// perturbs both the x and y updates.
StepResult step_kinematics(const VehicleState& s, double u_v, double u_omega,
                           const NoiseConfig& noise, std::mt19937_64& rng,
                           double dt);

// Closed or open polyline with arc-length lookup.
class Path {
 public:
  Path(std::vector<std::pair<double, double>> points, bool closed);

  double total_length() const { return total_length_; }
  std::size_t size() const { return points_.size(); }
  const std::vector<std::pair<double, double>>& points() const {
    return points_;
  }

  // Point at arc length s (wrapped for closed paths, clamped for open).
  std::pair<double, double> point_at(double s) const;

  // Arc length of the closest point on the path to (x, y).
  double project(double x, double y) const;

 private:
  std::vector<std::pair<double, double>> points_;
  std::vector<double> cum_;  // cumulative arc length per vertex
  bool closed_;
  double total_length_;
};

// Two straights joined by two semicircles. half_length = 0 degenerates to a
// circle.
Path oval_path(double half_length, double radius, double spacing);

Path straight_path(double length, double spacing);

struct ControllerLimits {
  double max_speed = 50.0;   // m/s
  double max_omega = 4.0;    // rad/s
  double lookahead = 0.0;    // m; 0 = pick from speed
};

// Pure-pursuit steering toward a lookahead point plus saturated speed
// command. Deterministic in (state, path, target).
std::pair<double, double> track_controller(const VehicleState& s,
                                           const Path& path,
                                           double target_speed,
                                           const ControllerLimits& limits);

struct SensorConfig {
  double rate_hz = 20.0;
  double pos_noise_std = 0.0;      // m
  double heading_noise_std = 0.0;  // rad
  double vel_noise_std = 0.0;      // m/s
};

struct Observation {
  std::string visual_id;
  double t = 0.0;  // s
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
  double v = 0.0;      // m/s
  double omega = 0.0;  // rad/s
};

enum class VehicleMode { Track, Follow };

struct VehicleSpec {
  std::string address;
  WatermarkConfig watermark;  // seed 0 = derive from scenario seed
  NoiseConfig noise;
  VehicleMode mode = VehicleMode::Track;
  double target_speed = 0.5;  // m/s
  double start_s = 0.0;       // initial arc-length position on the path
  bool transmit = true;
  double follow_gap = 2.0;  // m, Follow mode only
};

struct PathSpec {
  std::string kind = "oval";  // "oval" | "straight"
  double half_length = 2.0;
  double radius = 1.5;
  double length = 0.0;  // straight; 0 = sized from duration and speed
  double spacing = 0.1;
};

struct ScenarioConfig {
  double dt = 0.05;       // s
  double duration = 60.0; // s
  std::uint64_t seed = 0;
  SensorConfig sensor;
  PathSpec path;
  std::vector<VehicleSpec> vehicles;
};

struct PacketRecord {
  double t = 0.0;  // s since scenario epoch
  std::uint32_t seq = 0;
  double u_g_v = 0.0;
  double u_g_omega = 0.0;
  double e_v = 0.0;
  double e_omega = 0.0;
};

struct ScenarioResult {
  std::vector<Observation> observations;
  std::map<std::string, std::vector<PacketRecord>> packets;  // by address
  std::map<std::string, std::string> truth;  // address -> visual_id
};

// Validates the config; throws std::invalid_argument with a diagnostic on
// violation.
void validate(const ScenarioConfig& cfg);

// Closed-loop run: controller -> watermark injection -> kinematic step ->
// sensor, all from one seed. Identical config gives identical logs.
ScenarioResult run_scenario(const ScenarioConfig& cfg);

// Key/value scenario file with [sensor], [path] and [vehicle <address>]
// sections. Throws std::invalid_argument with a line number on bad input.
ScenarioConfig parse_scenario_file(const std::string& path);
ScenarioConfig parse_scenario_text(const std::string& text,
                                   const std::string& origin = "<config>");

}  // namespace wmatch
