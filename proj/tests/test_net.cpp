#include <doctest.h>

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "core/align.hpp"
#include "core/protocol.hpp"
#include "core/sim.hpp"

using namespace wmatch;

namespace {

WatermarkPacket reference_packet() {
  WatermarkPacket p;
  p.seq = 42;
  p.timestamp_us = 123456789;
  p.u_g_v = 0.5;
  p.u_g_omega = -0.125;
  p.e_v = 0.0625;
  p.e_omega = -1e-9;
  return p;
}

std::filesystem::path temp_dir() {
  auto d = std::filesystem::temp_directory_path() / "wmatch_test_net";
  std::filesystem::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("encode produces the fixed 56-byte layout") {
  WatermarkPacket zero;
  zero.version = kProtocolVersion;
  auto buf = encode(zero);
  CHECK(buf.size() == 56);
  CHECK(buf[0] == 0x57);  // 'W'
  CHECK(buf[1] == 0x4D);  // 'M'
  CHECK(buf[2] == 0x4B);  // 'K'
  CHECK(buf[3] == 0x31);  // '1'
  CHECK(buf[4] == kProtocolVersion);
  CHECK(buf[5] == 0x01);
  for (int i = 8; i < 12; ++i) CHECK(buf[i] == 0x00);  // seq
}

TEST_CASE("decode round-trip over random packets incl. extreme doubles") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::uint64_t> bits;
  auto random_double = [&] {
    std::uint64_t b = bits(rng);
    double d;
    std::memcpy(&d, &b, sizeof(d));
    if (std::isnan(d)) d = 0.0;  // NaN != NaN breaks equality, not layout
    return d;
  };
  std::vector<double> specials = {0.0, -0.0, 5e-324, -5e-324, 1e308,
                                  std::numeric_limits<double>::infinity()};
  for (int i = 0; i < 100000; ++i) {
    WatermarkPacket p;
    p.seq = static_cast<std::uint32_t>(bits(rng));
    p.timestamp_us = bits(rng);
    p.u_g_v = i < 100 ? specials[i % specials.size()] : random_double();
    p.u_g_omega = random_double();
    p.e_v = random_double();
    p.e_omega = random_double();
    auto buf = encode(p);
    WatermarkPacket q;
    REQUIRE(decode(buf, q) == DecodeError::None);
    REQUIRE(q == p);
  }
}

TEST_CASE("decode rejects short buffers as truncated") {
  auto buf = encode(reference_packet());
  WatermarkPacket out;
  CHECK(decode({buf.data(), 55}, out) == DecodeError::Truncated);
  CHECK(decode({buf.data(), std::size_t{0}}, out) == DecodeError::Truncated);
}

TEST_CASE("every single-bit flip is reported as corruption") {
  auto buf = encode(reference_packet());
  for (std::size_t byte = 0; byte < buf.size(); ++byte) {
    for (int bit = 0; bit < 8; ++bit) {
      auto copy = buf;
      copy[byte] ^= static_cast<std::uint8_t>(1u << bit);
      WatermarkPacket out;
      CHECK(decode(copy, out) == DecodeError::Corrupted);
    }
  }
}

TEST_CASE("foreign and unsupported-version frames are distinguished") {
  // A frame with a different magic but a valid CRC is foreign, not corrupt.
  auto buf = encode(reference_packet());
  buf[0] = 'X';
  std::uint32_t crc = static_cast<std::uint32_t>(
      crc32(0L, buf.data(), static_cast<uInt>(kPacketSize - 4)));
  for (int i = 0; i < 4; ++i)
    buf[52 + i] = static_cast<std::uint8_t>(crc >> (8 * i));
  WatermarkPacket out;
  CHECK(decode(buf, out) == DecodeError::BadMagic);

  auto buf2 = encode(reference_packet());
  buf2[4] = 9;
  crc = static_cast<std::uint32_t>(
      crc32(0L, buf2.data(), static_cast<uInt>(kPacketSize - 4)));
  for (int i = 0; i < 4; ++i)
    buf2[52 + i] = static_cast<std::uint8_t>(crc >> (8 * i));
  CHECK(decode(buf2, out) == DecodeError::BadVersion);
}

namespace {

// Synthetic interleaved streams: packet tick k at t = k dt, observation at
// t = (k+1) dt.
struct Streams {
  std::vector<Observation> obs;
  std::map<std::string, std::vector<PacketRecord>> pkts;
};

Streams make_streams(int n_ticks, double dt,
                     const std::vector<std::string>& addrs) {
  Streams s;
  for (int k = 0; k < n_ticks; ++k) {
    for (const auto& a : addrs) {
      PacketRecord p;
      p.t = k * dt;
      p.seq = static_cast<std::uint32_t>(k);
      p.u_g_v = 0.5;
      p.e_v = 0.01 * k;
      s.pkts[a].push_back(p);
    }
    Observation o;
    o.visual_id = "ID_A";
    o.t = (k + 1) * dt;
    o.v = 0.5;
    s.obs.push_back(o);
  }
  return s;
}

}  // namespace

TEST_CASE("perfect interleaving aligns every observation with zero drops") {
  auto st = make_streams(100, 0.05, {"IP_1", "IP_2"});
  Aligner al(AlignPolicy{.dt = 0.05});
  for (const auto& [a, v] : st.pkts)
    for (const auto& p : v) al.add_packet(a, p);
  for (const auto& o : st.obs) al.add_observation(o);

  auto samples = al.align();
  CHECK(samples.size() == 200);  // 100 observations x 2 addresses
  for (const auto& [a, d] : al.drops()) CHECK(d == 0);
  // The paired packet is the one whose inputs produced the observation.
  for (const auto& s : samples)
    CHECK(s.tick == static_cast<std::uint32_t>(std::llround(s.t / 0.05)) - 1);
}

TEST_CASE("one lost packet drops exactly one aligned sample for that address") {
  auto st = make_streams(100, 0.05, {"IP_1", "IP_2"});
  st.pkts["IP_1"].erase(st.pkts["IP_1"].begin() + 50);

  Aligner al(AlignPolicy{.dt = 0.05});
  for (const auto& [a, v] : st.pkts)
    for (const auto& p : v) al.add_packet(a, p);
  for (const auto& o : st.obs) al.add_observation(o);

  auto samples = al.align();
  std::size_t ip1 = 0, ip2 = 0;
  for (const auto& s : samples) (s.address == "IP_1" ? ip1 : ip2)++;
  CHECK(ip2 == 100);
  CHECK(ip1 == 99);  // each packet pairs with at most one observation
  CHECK(al.drops().at("IP_1") == 1);
  // Loss accounting holds: aligned + dropped = observations, per address.
  for (const auto& [a, d] : al.drops())
    CHECK((a == "IP_1" ? ip1 : ip2) + d == st.obs.size());
}

TEST_CASE("staleness bound drops observations with only old packets") {
  auto st = make_streams(100, 0.05, {"IP_1"});
  // Remove packets 50..59: a 10-tick outage exceeds the 3 dt bound.
  st.pkts["IP_1"].erase(st.pkts["IP_1"].begin() + 50,
                        st.pkts["IP_1"].begin() + 60);
  Aligner al(AlignPolicy{.dt = 0.05});
  for (const auto& p : st.pkts["IP_1"]) al.add_packet("IP_1", p);
  for (const auto& o : st.obs) al.add_observation(o);
  auto samples = al.align();
  CHECK(al.drops().at("IP_1") > 0);
  CHECK(samples.size() + al.drops().at("IP_1") == st.obs.size());
}

TEST_CASE("permuted delivery within the reorder bound is identical") {
  auto st = make_streams(60, 0.05, {"IP_1"});
  Aligner in_order(AlignPolicy{.dt = 0.05});
  Aligner reversed_pairs(AlignPolicy{.dt = 0.05});
  for (const auto& p : st.pkts["IP_1"]) in_order.add_packet("IP_1", p);
  auto pkts = st.pkts["IP_1"];
  for (std::size_t i = 0; i + 1 < pkts.size(); i += 2)
    std::swap(pkts[i], pkts[i + 1]);
  for (const auto& p : pkts) reversed_pairs.add_packet("IP_1", p);
  for (const auto& o : st.obs) {
    in_order.add_observation(o);
    reversed_pairs.add_observation(o);
  }
  auto a = in_order.align();
  auto b = reversed_pairs.align();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].tick == b[i].tick);
    CHECK(a[i].e_v == b[i].e_v);
  }
}

TEST_CASE("duplicate seqs are discarded and counted") {
  Aligner al(AlignPolicy{.dt = 0.05});
  PacketRecord p;
  p.t = 0.0;
  p.seq = 7;
  al.add_packet("IP_1", p);
  p.e_v = 99.0;  // different payload, same seq
  al.add_packet("IP_1", p);
  CHECK(al.duplicate_packets() == 1);
}

TEST_CASE("replay CSV round-trip preserves the streams") {
  ScenarioConfig cfg = parse_scenario_file(std::string(WMATCH_CONFIG_DIR) +
                                           "/lab_two_vehicle.cfg");
  cfg.duration = 5.0;
  auto r = run_scenario(cfg);

  auto dir = temp_dir();
  auto obs_path = (dir / "obs.csv").string();
  auto pkt_path = (dir / "pkt.csv").string();
  write_observations_csv(obs_path, r.observations);
  write_packets_csv(pkt_path, r.packets);

  auto loaded = load_replay(obs_path, pkt_path);
  REQUIRE(loaded.observations.size() == r.observations.size());
  for (std::size_t i = 0; i < r.observations.size(); ++i) {
    CHECK(loaded.observations[i].t == r.observations[i].t);
    CHECK(loaded.observations[i].v == r.observations[i].v);
    CHECK(loaded.observations[i].visual_id == r.observations[i].visual_id);
  }
  for (const auto& [addr, pkts] : r.packets) {
    REQUIRE(loaded.packets.count(addr));
    REQUIRE(loaded.packets.at(addr).size() == pkts.size());
    for (std::size_t i = 0; i < pkts.size(); ++i) {
      CHECK(loaded.packets.at(addr)[i].e_v == pkts[i].e_v);
      CHECK(loaded.packets.at(addr)[i].t == pkts[i].t);
      CHECK(loaded.packets.at(addr)[i].seq == pkts[i].seq);
    }
  }
}

TEST_CASE("empty and header-only replay files load as empty streams") {
  auto dir = temp_dir();
  auto obs_path = (dir / "empty_obs.csv").string();
  auto pkt_path = (dir / "empty_pkt.csv").string();
  {
    std::ofstream o{obs_path};
    std::ofstream p{pkt_path};
  }
  auto empty = load_replay(obs_path, pkt_path);
  CHECK(empty.observations.empty());
  CHECK(empty.packets.empty());

  {
    std::ofstream o(obs_path);
    o << kObservationsHeader << "\n";
    std::ofstream p(pkt_path);
    p << kPacketsHeader << "\n";
  }
  auto header_only = load_replay(obs_path, pkt_path);
  CHECK(header_only.observations.empty());
  CHECK(header_only.packets.empty());
}

TEST_CASE("malformed rows and non-monotonic timestamps are rejected") {
  auto dir = temp_dir();
  auto obs_path = (dir / "bad_obs.csv").string();
  auto pkt_path = (dir / "ok_pkt.csv").string();
  {
    std::ofstream p(pkt_path);
    p << kPacketsHeader << "\n0.0,IP_1,0,0.5,0,0.1,0\n";
  }
  {
    std::ofstream o(obs_path);
    o << kObservationsHeader << "\n0.05,ID_A,0,0,0,not_a_number,0\n";
  }
  try {
    load_replay(obs_path, pkt_path);
    FAIL("expected parse error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }

  {
    std::ofstream o(obs_path);
    o << kObservationsHeader << "\n0.10,ID_A,0,0,0,0.5,0\n0.05,ID_A,0,0,0,0.5,0\n";
  }
  CHECK_THROWS_AS(load_replay(obs_path, pkt_path), std::runtime_error);
}
