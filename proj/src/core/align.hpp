#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "sim.hpp"

namespace wmatch {

struct AlignedSample {
  std::string address;
  std::string visual_id;
  double t = 0.0;  // observation time
  double o_v = 0.0;
  double o_omega = 0.0;
  double u_g_v = 0.0;
  double u_g_omega = 0.0;
  double e_v = 0.0;
  double e_omega = 0.0;
  std::uint32_t tick = 0;  // seq of the paired packet
};

struct AlignPolicy {
  double dt = 0.05;             // control sampling period
  double staleness = 0.0;       // 0 = 3 * dt
  std::size_t reorder_buffer = 8;

  double staleness_bound() const { return staleness > 0.0 ? staleness : 3.0 * dt; }
};

// Pairs each observation with, per address, the packet whose timestamp is
// the latest one at most t_obs - dt/2. Duplicate seqs are dropped, arrival
// order does not matter, and observations with only stale packets are
// counted as drops for that address.
class Aligner {
 public:
  explicit Aligner(AlignPolicy policy) : policy_(policy) {}

  void add_packet(const std::string& address, const PacketRecord& pkt);
  void add_observation(const Observation& obs);

  // Deterministic: output ordered by observation time, then address. Safe to
  // call repeatedly as data accumulates.
  std::vector<AlignedSample> align() const;

  const std::map<std::string, std::uint64_t>& drops() const { return drops_; }
  std::uint64_t duplicate_packets() const { return duplicates_; }
  std::size_t observation_count() const { return observations_.size(); }
  std::size_t address_count() const { return packets_.size(); }

 private:
  AlignPolicy policy_;
  std::map<std::string, std::vector<PacketRecord>> packets_;
  std::map<std::string, std::set<std::uint32_t>> seen_seq_;
  std::vector<Observation> observations_;
  std::uint64_t duplicates_ = 0;
  mutable std::map<std::string, std::uint64_t> drops_;
};

// Replay CSV schemas (headers exactly as written by the writers below):
//   observations: t_s,visual_id,x_m,y_m,theta_rad,v_mps,omega_radps
//   packets:      t_s,address,seq,u_g_v,u_g_omega,e_v,e_omega
struct ReplayData {
  std::vector<Observation> observations;
  std::map<std::string, std::vector<PacketRecord>> packets;
};

ReplayData load_replay(const std::string& observations_csv,
                       const std::string& packets_csv);

void write_observations_csv(const std::string& path,
                            const std::vector<Observation>& observations);
void write_packets_csv(
    const std::string& path,
    const std::map<std::string, std::vector<PacketRecord>>& packets);

std::string observation_csv_row(const Observation& o);
std::string packet_csv_row(const std::string& address, const PacketRecord& p);

inline constexpr const char* kObservationsHeader =
    "t_s,visual_id,x_m,y_m,theta_rad,v_mps,omega_radps";
inline constexpr const char* kPacketsHeader =
    "t_s,address,seq,u_g_v,u_g_omega,e_v,e_omega";

}  // namespace wmatch
