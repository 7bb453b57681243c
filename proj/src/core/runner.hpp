#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "align.hpp"
#include "matcher.hpp"
#include "sim.hpp"

namespace wmatch {

// Exit-code contract shared by all commands:
//   0 = success (mapping correct / unambiguous), 1 = mapping failure,
//   2 = configuration or input error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitMismatch = 1;
inline constexpr int kExitConfig = 2;

struct SimulateOptions {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed_override;
  std::size_t window = 20;
  // Streaming mode: send packets to "host:port" over UDP and append
  // observations to obs_stream_path as they happen (for cmd_listen demos).
  std::string emit_udp;
  std::string obs_stream_path;
  std::uint32_t pace_us = 0;  // per-event sleep while streaming
};

struct ReplayOptions {
  std::string observations_csv;
  std::string packets_csv;
  std::string out_dir;
  std::size_t window = 20;
  std::string truth_json;  // optional ground-truth mapping to check against
  double dt = 0.0;         // 0 = infer from packet timestamps
};

struct ListenOptions {
  std::uint16_t port = 47808;
  std::string observations_csv;  // tailed in time order
  double duration_s = 10.0;
  std::string out_dir;  // optional; final report.json written here
  double dt = 0.0;      // 0 = infer
};

int run_simulate(const SimulateOptions& opt);
int run_replay(const ReplayOptions& opt);
int run_listen(const ListenOptions& opt);

// Feeds aligned samples through a ScoreMatrix, recording the per-pair
// running and windowed series for both tests and both channels.
struct SeriesRow {
  std::uint64_t idx = 0;
  double t = 0.0;
  std::string address;
  std::string visual_id;
  double t1_v_running = 0.0, t1_v_windowed = 0.0;
  double t2_v_running = 0.0, t2_v_windowed = 0.0;
  double t1_omega_running = 0.0, t1_omega_windowed = 0.0;
  double t2_omega_running = 0.0, t2_omega_windowed = 0.0;
};

void accumulate(const std::vector<AlignedSample>& samples, ScoreMatrix& matrix,
                std::size_t window, std::vector<SeriesRow>* series);

void write_series_csv(const std::string& path,
                      const std::vector<SeriesRow>& series);

}  // namespace wmatch
