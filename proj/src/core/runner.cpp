#include "runner.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <json.hpp>

#include "detector.hpp"
#include "protocol.hpp"

namespace wmatch {

using nlohmann::json;

void accumulate(const std::vector<AlignedSample>& samples, ScoreMatrix& matrix,
                std::size_t window, std::vector<SeriesRow>* series) {
  std::uint64_t idx = 0;
  for (const auto& s : samples) {
    double v1 = residual_v1(s.o_v, s.u_g_v, s.e_v);
    double v2 = residual_v2(s.o_v, s.u_g_v);
    double w1 = residual_v1(s.o_omega, s.u_g_omega, s.e_omega);
    double w2 = residual_v2(s.o_omega, s.u_g_omega);
    matrix.ingest(s.address, s.visual_id, v1, v2);
    matrix.ingest_omega(s.address, s.visual_id, w1, w2);

    if (series) {
      const PairAccumulator& acc = matrix.cell(s.address, s.visual_id);
      SeriesRow row;
      row.idx = idx;
      row.t = s.t;
      row.address = s.address;
      row.visual_id = s.visual_id;
      row.t1_v_running = acc.t1_v.running_mean();
      row.t1_v_windowed = acc.t1_v.windowed_mean(window);
      row.t2_v_running = acc.t2_v.running_mean();
      row.t2_v_windowed = acc.t2_v.windowed_mean(window);
      row.t1_omega_running = acc.t1_omega.running_mean();
      row.t1_omega_windowed = acc.t1_omega.windowed_mean(window);
      row.t2_omega_running = acc.t2_omega.running_mean();
      row.t2_omega_windowed = acc.t2_omega.windowed_mean(window);
      series->push_back(std::move(row));
    }
    ++idx;
  }
}

void write_series_csv(const std::string& path,
                      const std::vector<SeriesRow>& series) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "idx,t_s,address,visual_id,t1_v_running,t1_v_windowed,"
         "t2_v_running,t2_v_windowed,t1_omega_running,t1_omega_windowed,"
         "t2_omega_running,t2_omega_windowed\n";
  char buf[64];
  auto f = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return std::string(buf);
  };
  for (const auto& r : series) {
    out << r.idx << ',' << f(r.t) << ',' << r.address << ',' << r.visual_id
        << ',' << f(r.t1_v_running) << ',' << f(r.t1_v_windowed) << ','
        << f(r.t2_v_running) << ',' << f(r.t2_v_windowed) << ','
        << f(r.t1_omega_running) << ',' << f(r.t1_omega_windowed) << ','
        << f(r.t2_omega_running) << ',' << f(r.t2_omega_windowed) << '\n';
  }
}

namespace {

bool log_enabled() {
  const char* lvl = std::getenv("WMATCH_LOG");
  return lvl && std::string(lvl) != "off" && std::string(lvl) != "quiet";
}

void log_line(const std::string& msg) {
  if (log_enabled()) std::cerr << "[wmatch] " << msg << '\n';
}

json report_json(const MatchReport& report, const Aligner& aligner,
                 std::size_t window) {
  json j;
  j["window"] = window;
  j["mapping"] = json::array();
  for (const auto& p : report.mapping) {
    json e;
    e["address"] = p.address;
    e["visual_id"] = p.visual_id;
    e["t1_statistic"] = p.statistic;
    e["t2_statistic"] = p.t2_statistic;
    e["margin"] = p.margin;
    double c = confidence(p);
    e["confidence"] = std::isfinite(c) ? json(c) : json("inf");
    e["samples"] = p.samples;
    j["mapping"].push_back(std::move(e));
  }
  j["unmatched_addresses"] = report.unmatched_addresses;
  j["unmatched_visual_ids"] = report.unmatched_visual_ids;
  j["drops"] = json::object();
  for (const auto& [addr, n] : aligner.drops()) j["drops"][addr] = n;
  j["duplicate_packets"] = aligner.duplicate_packets();
  j["observation_count"] = aligner.observation_count();
  return j;
}

bool mapping_matches_truth(const MatchReport& report,
                           const std::map<std::string, std::string>& truth) {
  std::size_t expected = 0;
  for (const auto& [addr, vid] : truth) {
    (void)vid;
    ++expected;
  }
  if (report.mapping.size() != expected) return false;
  for (const auto& p : report.mapping) {
    auto it = truth.find(p.address);
    if (it == truth.end() || it->second != p.visual_id) return false;
  }
  return true;
}

double infer_dt(const std::map<std::string, std::vector<PacketRecord>>& pkts) {
  std::vector<double> gaps;
  for (const auto& [addr, v] : pkts) {
    for (std::size_t i = 1; i < v.size() && gaps.size() < 512; ++i)
      gaps.push_back(v[i].t - v[i - 1].t);
  }
  if (gaps.empty()) return 0.05;
  std::nth_element(gaps.begin(), gaps.begin() + gaps.size() / 2, gaps.end());
  double dt = gaps[gaps.size() / 2];
  return dt > 0.0 ? dt : 0.05;
}

struct UdpSender {
  int fd = -1;
  sockaddr_in dest{};

  explicit UdpSender(const std::string& hostport) {
    auto colon = hostport.rfind(':');
    if (colon == std::string::npos)
      throw std::runtime_error("emit address must be host:port");
    std::string host = hostport.substr(0, colon);
    int port = std::stoi(hostport.substr(colon + 1));
    fd = ::socket(AF_INET, SOCK_DGRAM, 0);
    if (fd < 0) throw std::runtime_error("socket() failed");
    dest.sin_family = AF_INET;
    dest.sin_port = htons(static_cast<std::uint16_t>(port));
    if (::inet_pton(AF_INET, host.c_str(), &dest.sin_addr) != 1)
      throw std::runtime_error("bad emit host: " + host);
  }
  ~UdpSender() {
    if (fd >= 0) ::close(fd);
  }
  void send(const std::array<std::uint8_t, kPacketSize>& frame) {
    ::sendto(fd, frame.data(), frame.size(), 0,
             reinterpret_cast<const sockaddr*>(&dest), sizeof(dest));
  }
};

}  // namespace

int run_simulate(const SimulateOptions& opt) {
  ScenarioConfig cfg;
  try {
    cfg = parse_scenario_file(opt.config_path);
    if (opt.seed_override) cfg.seed = *opt.seed_override;
    validate(cfg);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  auto wall_start = std::chrono::steady_clock::now();
  ScenarioResult result = run_scenario(cfg);

  std::error_code ec;
  std::filesystem::create_directories(opt.out_dir, ec);
  const std::string obs_path = opt.out_dir + "/observations.csv";
  const std::string pkt_path = opt.out_dir + "/packets.csv";
  write_observations_csv(obs_path, result.observations);
  write_packets_csv(pkt_path, result.packets);
  {
    json truth(result.truth);
    std::ofstream out(opt.out_dir + "/truth.json");
    out << truth.dump(2) << '\n';
  }

  // Streaming mode: replay the logs in time order over UDP plus a growing
  // observations file, for a cmd_listen peer.
  if (!opt.emit_udp.empty()) {
    try {
      UdpSender sender(opt.emit_udp);
      std::ofstream obs_stream;
      if (!opt.obs_stream_path.empty()) {
        obs_stream.open(opt.obs_stream_path);
        obs_stream << kObservationsHeader << '\n' << std::flush;
      }

      struct Event {
        double t;
        int kind;  // 0 = packet, 1 = observation
        const std::string* addr;
        const PacketRecord* pkt;
        const Observation* obs;
      };
      std::vector<Event> events;
      for (const auto& [addr, pkts] : result.packets)
        for (const auto& p : pkts)
          events.push_back({p.t, 0, &addr, &p, nullptr});
      for (const auto& o : result.observations)
        events.push_back({o.t, 1, nullptr, nullptr, &o});
      std::stable_sort(events.begin(), events.end(),
                       [](const Event& a, const Event& b) {
                         if (a.t != b.t) return a.t < b.t;
                         return a.kind < b.kind;
                       });
      for (const auto& ev : events) {
        if (ev.kind == 0) {
          WatermarkPacket pkt;
          pkt.seq = ev.pkt->seq;
          pkt.timestamp_us =
              static_cast<std::uint64_t>(std::llround(ev.pkt->t * 1e6));
          pkt.u_g_v = ev.pkt->u_g_v;
          pkt.u_g_omega = ev.pkt->u_g_omega;
          pkt.e_v = ev.pkt->e_v;
          pkt.e_omega = ev.pkt->e_omega;
          sender.send(encode(pkt));
        } else if (obs_stream.is_open()) {
          obs_stream << observation_csv_row(*ev.obs) << '\n' << std::flush;
        }
        if (opt.pace_us > 0)
          std::this_thread::sleep_for(std::chrono::microseconds(opt.pace_us));
      }
    } catch (const std::exception& e) {
      std::cerr << "emit error: " << e.what() << '\n';
      return kExitConfig;
    }
  }

  Aligner aligner(AlignPolicy{.dt = cfg.dt});
  for (const auto& [addr, pkts] : result.packets)
    for (const auto& p : pkts) aligner.add_packet(addr, p);
  for (const auto& o : result.observations) aligner.add_observation(o);
  std::vector<AlignedSample> samples = aligner.align();

  ScoreMatrix matrix(opt.window, 20);
  std::vector<SeriesRow> series;
  accumulate(samples, matrix, opt.window, &series);
  write_series_csv(opt.out_dir + "/series.csv", series);

  auto report = matrix.full_assignment();
  if (!report) {
    std::cerr << "config error: insufficient samples for matching (need "
              << matrix.min_samples() << " aligned samples per pair)\n";
    return kExitConfig;
  }

  // Only transmitting vehicles can be matched; score against that subset.
  std::map<std::string, std::string> truth;
  for (const auto& [addr, vid] : result.truth)
    if (result.packets.count(addr)) truth[addr] = vid;
  bool correct = mapping_matches_truth(*report, truth);

  json j = report_json(*report, aligner, opt.window);
  j["scenario"] = {{"config", opt.config_path},
                   {"dt", cfg.dt},
                   {"duration", cfg.duration},
                   {"seed", cfg.seed}};
  j["ground_truth"] = json(truth);
  j["mapping_correct"] = correct;

  // Chi-square verdicts against the configured process-noise variances.
  j["verdicts"] = json::array();
  for (const auto& p : report->mapping) {
    for (const auto& spec : cfg.vehicles) {
      if (spec.address != p.address || spec.noise.sigma2_w_v <= 0.0) continue;
      const auto& acc = matrix.cell(p.address, p.visual_id);
      TestVerdict v = chi2_test(acc.t1_v.sum_sq(), acc.t1_v.count(),
                                spec.noise.sigma2_w_v, 0.01);
      j["verdicts"].push_back({{"address", p.address},
                               {"visual_id", p.visual_id},
                               {"test", "T1_v"},
                               {"statistic", v.statistic},
                               {"dof", v.dof},
                               {"lower", v.lower},
                               {"upper", v.upper},
                               {"pass", v.pass}});
    }
  }

  j["wall_clock_s"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                    wall_start)
          .count();
  std::ofstream out(opt.out_dir + "/report.json");
  out << j.dump(2) << '\n';

  log_line(correct ? "mapping matches ground truth"
                   : "mapping does NOT match ground truth");
  return correct ? kExitOk : kExitMismatch;
}

int run_replay(const ReplayOptions& opt) {
  ReplayData data;
  try {
    data = load_replay(opt.observations_csv, opt.packets_csv);
  } catch (const std::exception& e) {
    std::cerr << "replay error: " << e.what() << '\n';
    return kExitConfig;
  }
  if (data.packets.empty()) {
    std::cerr << "replay error: no transmitting addresses\n";
    return kExitConfig;
  }

  auto wall_start = std::chrono::steady_clock::now();
  double dt = opt.dt > 0.0 ? opt.dt : infer_dt(data.packets);

  Aligner aligner(AlignPolicy{.dt = dt});
  for (const auto& [addr, pkts] : data.packets)
    for (const auto& p : pkts) aligner.add_packet(addr, p);
  for (const auto& o : data.observations) aligner.add_observation(o);
  std::vector<AlignedSample> samples = aligner.align();

  ScoreMatrix matrix(opt.window, 20);
  std::vector<SeriesRow> series;
  accumulate(samples, matrix, opt.window, &series);

  auto report = matrix.full_assignment();
  if (!report) {
    std::cerr << "replay error: insufficient samples for matching\n";
    return kExitConfig;
  }

  bool unambiguous = !report->mapping.empty();
  for (const auto& p : report->mapping)
    if (matrix.visual_ids().size() > 1 && p.margin <= 0.0) unambiguous = false;

  int code = unambiguous ? kExitOk : kExitMismatch;
  json j = report_json(*report, aligner, opt.window);
  j["dt"] = dt;
  j["unambiguous"] = unambiguous;

  if (!opt.truth_json.empty()) {
    try {
      std::ifstream in(opt.truth_json);
      if (!in) throw std::runtime_error("cannot open " + opt.truth_json);
      json tj = json::parse(in);
      std::map<std::string, std::string> truth;
      for (auto& [k, v] : tj.items()) truth[k] = v.get<std::string>();
      bool correct = mapping_matches_truth(*report, truth);
      j["mapping_correct"] = correct;
      if (!correct) code = kExitMismatch;
    } catch (const std::exception& e) {
      std::cerr << "replay error: " << e.what() << '\n';
      return kExitConfig;
    }
  }

  j["wall_clock_s"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                    wall_start)
          .count();
  if (!opt.out_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(opt.out_dir, ec);
    write_series_csv(opt.out_dir + "/series.csv", series);
    std::ofstream out(opt.out_dir + "/report.json");
    out << j.dump(2) << '\n';
  } else {
    std::cout << j.dump(2) << '\n';
  }
  return code;
}

int run_listen(const ListenOptions& opt) {
  int fd = ::socket(AF_INET, SOCK_DGRAM, 0);
  if (fd < 0) {
    std::cerr << "listen error: socket() failed\n";
    return kExitConfig;
  }
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  int rcvbuf = 4 * 1024 * 1024;
  ::setsockopt(fd, SOL_SOCKET, SO_RCVBUF, &rcvbuf, sizeof(rcvbuf));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_ANY);
  addr.sin_port = htons(opt.port);
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    std::cerr << "listen error: cannot bind port " << opt.port << '\n';
    ::close(fd);
    return kExitConfig;
  }

  std::ifstream obs_in(opt.observations_csv);
  if (!obs_in) {
    std::cerr << "listen error: cannot open " << opt.observations_csv << '\n';
    ::close(fd);
    return kExitConfig;
  }

  Aligner aligner(AlignPolicy{.dt = opt.dt > 0.0 ? opt.dt : 0.05});
  std::uint64_t decode_errors = 0;
  std::uint64_t seq_collisions = 0;
  std::string partial;
  bool header_seen = false;

  auto ingest_obs_lines = [&] {
    obs_in.clear();  // clear EOF so tailing keeps working
    std::string chunk;
    while (std::getline(obs_in, chunk)) {
      std::string line = partial + chunk;
      partial.clear();
      if (obs_in.eof() && !line.empty() && line.back() != '\r') {
        // getline without a trailing newline: may be a half-written row.
        partial = line;
        break;
      }
      if (line.empty()) continue;
      if (!header_seen && line.rfind("t_s,", 0) == 0) {
        header_seen = true;
        continue;
      }
      std::vector<std::string> f;
      {
        std::string cur;
        for (char c : line) {
          if (c == ',') { f.push_back(cur); cur.clear(); }
          else if (c != '\r') cur.push_back(c);
        }
        f.push_back(cur);
      }
      if (f.size() != 7) continue;
      try {
        Observation o;
        o.t = std::stod(f[0]);
        o.visual_id = f[1];
        o.x = std::stod(f[2]);
        o.y = std::stod(f[3]);
        o.theta = std::stod(f[4]);
        o.v = std::stod(f[5]);
        o.omega = std::stod(f[6]);
        aligner.add_observation(o);
      } catch (...) {
        // Half-written numeric field; ignore the row.
      }
    }
  };

  auto snapshot = [&](bool final_report) -> std::optional<MatchReport> {
    std::vector<AlignedSample> samples = aligner.align();
    ScoreMatrix matrix(20, 20);
    accumulate(samples, matrix, 20, nullptr);
    auto report = matrix.full_assignment();
    json j;
    j["type"] = final_report ? "final" : "snapshot";
    j["aligned_samples"] = samples.size();
    if (report) {
      json rj = report_json(*report, aligner, 20);
      j["mapping"] = rj["mapping"];
      j["drops"] = rj["drops"];
    } else {
      j["mapping"] = json::array();
    }
    j["seq_collisions"] = seq_collisions;
    j["decode_errors"] = decode_errors;
    std::cout << j.dump() << '\n' << std::flush;
    if (final_report && !opt.out_dir.empty()) {
      std::error_code ec;
      std::filesystem::create_directories(opt.out_dir, ec);
      std::ofstream out(opt.out_dir + "/report.json");
      out << j.dump(2) << '\n';
    }
    return report;
  };

  const auto t_end = std::chrono::steady_clock::now() +
                     std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                         std::chrono::duration<double>(opt.duration_s));
  auto next_snapshot = std::chrono::steady_clock::now() +
                       std::chrono::seconds(1);
  std::uint8_t buf[512];

  while (std::chrono::steady_clock::now() < t_end) {
    pollfd pfd{fd, POLLIN, 0};
    ::poll(&pfd, 1, 20);
    while (true) {
      sockaddr_in src{};
      socklen_t srclen = sizeof(src);
      ssize_t n = ::recvfrom(fd, buf, sizeof(buf), MSG_DONTWAIT,
                             reinterpret_cast<sockaddr*>(&src), &srclen);
      if (n < 0) break;
      WatermarkPacket pkt;
      DecodeError err = decode({buf, static_cast<std::size_t>(n)}, pkt);
      if (err != DecodeError::None) {
        ++decode_errors;
        continue;
      }
      char ip[INET_ADDRSTRLEN];
      ::inet_ntop(AF_INET, &src.sin_addr, ip, sizeof(ip));
      std::string address = std::string(ip);  // dedup per address, not port
      std::uint64_t before = aligner.duplicate_packets();
      PacketRecord rec;
      rec.t = static_cast<double>(pkt.timestamp_us) * 1e-6;
      rec.seq = pkt.seq;
      rec.u_g_v = pkt.u_g_v;
      rec.u_g_omega = pkt.u_g_omega;
      rec.e_v = pkt.e_v;
      rec.e_omega = pkt.e_omega;
      aligner.add_packet(address, rec);
      if (aligner.duplicate_packets() != before) ++seq_collisions;
    }
    ingest_obs_lines();

    if (std::chrono::steady_clock::now() >= next_snapshot) {
      next_snapshot += std::chrono::seconds(1);
      snapshot(false);
    }
  }
  ingest_obs_lines();
  auto final_report = snapshot(true);
  ::close(fd);

  if (!final_report || final_report->mapping.empty()) return kExitMismatch;
  return kExitOk;
}

}  // namespace wmatch
