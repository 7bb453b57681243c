// wmatch command-line front end. Talks to the library strictly through the
// C API in wmatch.h.

#include <cstdint>
#include <string>

#include <CLI11.hpp>

#include "wmatch.h"

int main(int argc, char** argv) {
  CLI::App app{"Dynamic-watermark vehicle identification"};
  app.require_subcommand(1);

  // simulate
  std::string sim_config, sim_out, sim_emit, sim_obs_stream;
  std::uint64_t sim_seed = 0;
  bool sim_seed_set = false;
  std::size_t sim_window = 20;
  std::uint32_t sim_pace = 0;
  auto* sim = app.add_subcommand("simulate", "Run a scenario and match");
  sim->add_option("--config", sim_config, "Scenario config file")->required();
  sim->add_option("--out", sim_out, "Output directory")->required();
  sim->add_option("--seed", sim_seed, "Override the config seed")
      ->each([&](const std::string&) { sim_seed_set = true; });
  sim->add_option("--window", sim_window, "Moving-window length");
  sim->add_option("--emit-udp", sim_emit,
                  "Also stream packets to host:port over UDP");
  sim->add_option("--obs-stream", sim_obs_stream,
                  "Also append observations to this file while streaming");
  sim->add_option("--pace-us", sim_pace, "Per-event sleep when streaming");

  // replay
  std::string rep_obs, rep_pkts, rep_out, rep_truth;
  std::size_t rep_window = 20;
  double rep_dt = 0.0;
  auto* rep = app.add_subcommand("replay", "Match from recorded CSV streams");
  rep->add_option("--obs", rep_obs, "Observations CSV")->required();
  rep->add_option("--packets", rep_pkts, "Packets CSV")->required();
  rep->add_option("--out", rep_out, "Output directory (default: stdout)");
  rep->add_option("--window", rep_window, "Moving-window length");
  rep->add_option("--truth", rep_truth, "Ground-truth mapping JSON to check");
  rep->add_option("--dt", rep_dt, "Control period (default: inferred)");

  // listen
  std::uint16_t lis_port = 47808;
  std::string lis_obs, lis_out;
  double lis_duration = 10.0, lis_dt = 0.0;
  auto* lis = app.add_subcommand("listen", "Live UDP ingestion and matching");
  lis->add_option("--port", lis_port, "UDP port");
  lis->add_option("--obs", lis_obs, "Observation CSV tailed in time order")
      ->required();
  lis->add_option("--duration", lis_duration, "Seconds to run");
  lis->add_option("--out", lis_out, "Output directory for the final report");
  lis->add_option("--dt", lis_dt, "Control period");

  CLI11_PARSE(app, argc, argv);

  if (sim->parsed()) {
    wmatch_simulate_opts o{};
    o.config_path = sim_config.c_str();
    o.out_dir = sim_out.c_str();
    o.seed_override = sim_seed_set ? &sim_seed : nullptr;
    o.window = sim_window;
    o.emit_udp = sim_emit.empty() ? nullptr : sim_emit.c_str();
    o.obs_stream_path = sim_obs_stream.empty() ? nullptr : sim_obs_stream.c_str();
    o.pace_us = sim_pace;
    return wmatch_cmd_simulate(&o);
  }
  if (rep->parsed()) {
    wmatch_replay_opts o{};
    o.observations_csv = rep_obs.c_str();
    o.packets_csv = rep_pkts.c_str();
    o.out_dir = rep_out.empty() ? nullptr : rep_out.c_str();
    o.window = rep_window;
    o.truth_json = rep_truth.empty() ? nullptr : rep_truth.c_str();
    o.dt = rep_dt;
    return wmatch_cmd_replay(&o);
  }
  wmatch_listen_opts o{};
  o.port = lis_port;
  o.observations_csv = lis_obs.c_str();
  o.duration_s = lis_duration;
  o.out_dir = lis_out.empty() ? nullptr : lis_out.c_str();
  o.dt = lis_dt;
  return wmatch_cmd_listen(&o);
}
