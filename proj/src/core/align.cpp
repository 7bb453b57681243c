#include "align.hpp"

#include <algorithm>
#include <charconv>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace wmatch {

void Aligner::add_packet(const std::string& address, const PacketRecord& pkt) {
  auto& seen = seen_seq_[address];
  if (!seen.insert(pkt.seq).second) {
    ++duplicates_;
    return;
  }
  packets_[address].push_back(pkt);
}

void Aligner::add_observation(const Observation& obs) {
  observations_.push_back(obs);
}

std::vector<AlignedSample> Aligner::align() const {
  drops_.clear();

  std::map<std::string, std::vector<PacketRecord>> sorted = packets_;
  for (auto& [addr, v] : sorted) {
    std::stable_sort(v.begin(), v.end(),
                     [](const PacketRecord& a, const PacketRecord& b) {
                       return a.t < b.t;
                     });
    drops_[addr] = 0;
  }

  std::vector<const Observation*> obs;
  obs.reserve(observations_.size());
  for (const auto& o : observations_) obs.push_back(&o);
  std::stable_sort(obs.begin(), obs.end(),
                   [](const Observation* a, const Observation* b) {
                     return a->t < b->t;
                   });

  const double half_dt = policy_.dt / 2.0;
  const double stale = policy_.staleness_bound();

  // Each packet feeds at most one observation per (address, visual_id)
  // pair, so a lost packet costs exactly one aligned sample instead of
  // silently reusing stale inputs.
  std::map<std::pair<std::string, std::string>, std::ptrdiff_t> last_used;

  std::vector<AlignedSample> out;
  for (const Observation* o : obs) {
    const double cutoff = o->t - half_dt;
    for (const auto& [addr, pkts] : sorted) {
      // Latest packet with t <= cutoff.
      auto it = std::upper_bound(
          pkts.begin(), pkts.end(), cutoff,
          [](double c, const PacketRecord& p) { return c < p.t; });
      if (it == pkts.begin()) {
        ++drops_[addr];
        continue;
      }
      std::ptrdiff_t idx = (it - 1) - pkts.begin();
      auto [used_it, fresh] =
          last_used.try_emplace({addr, o->visual_id}, -1);
      if (idx <= used_it->second) {
        ++drops_[addr];
        continue;
      }
      const PacketRecord& p = pkts[idx];
      if (o->t - p.t > stale) {
        ++drops_[addr];
        continue;
      }
      used_it->second = idx;
      AlignedSample s;
      s.address = addr;
      s.visual_id = o->visual_id;
      s.t = o->t;
      s.o_v = o->v;
      s.o_omega = o->omega;
      s.u_g_v = p.u_g_v;
      s.u_g_omega = p.u_g_omega;
      s.e_v = p.e_v;
      s.e_omega = p.e_omega;
      s.tick = p.seq;
      out.push_back(std::move(s));
    }
  }
  return out;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double field_double(const std::string& s, const std::string& file, int line) {
  double v;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw std::runtime_error(file + ":" + std::to_string(line) +
                             ": bad numeric field '" + s + "'");
  return v;
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

ReplayData load_replay(const std::string& observations_csv,
                       const std::string& packets_csv) {
  ReplayData data;

  {
    std::ifstream in(observations_csv);
    if (!in)
      throw std::runtime_error("cannot open " + observations_csv);
    std::string line;
    int lineno = 0;
    double last_t = -std::numeric_limits<double>::infinity();
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      if (lineno == 1 && line.rfind("t_s,", 0) == 0) continue;
      auto f = split_csv(line);
      if (f.size() != 7)
        throw std::runtime_error(observations_csv + ":" +
                                 std::to_string(lineno) +
                                 ": expected 7 fields, got " +
                                 std::to_string(f.size()));
      Observation o;
      o.t = field_double(f[0], observations_csv, lineno);
      o.visual_id = f[1];
      o.x = field_double(f[2], observations_csv, lineno);
      o.y = field_double(f[3], observations_csv, lineno);
      o.theta = field_double(f[4], observations_csv, lineno);
      o.v = field_double(f[5], observations_csv, lineno);
      o.omega = field_double(f[6], observations_csv, lineno);
      if (o.t < last_t)
        throw std::runtime_error(observations_csv + ":" +
                                 std::to_string(lineno) +
                                 ": non-monotonic timestamp");
      last_t = o.t;
      data.observations.push_back(std::move(o));
    }
  }

  {
    std::ifstream in(packets_csv);
    if (!in) throw std::runtime_error("cannot open " + packets_csv);
    std::string line;
    int lineno = 0;
    std::map<std::string, double> last_t;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      if (lineno == 1 && line.rfind("t_s,", 0) == 0) continue;
      auto f = split_csv(line);
      if (f.size() != 7)
        throw std::runtime_error(packets_csv + ":" + std::to_string(lineno) +
                                 ": expected 7 fields, got " +
                                 std::to_string(f.size()));
      PacketRecord p;
      p.t = field_double(f[0], packets_csv, lineno);
      const std::string& addr = f[1];
      if (addr.empty())
        throw std::runtime_error(packets_csv + ":" + std::to_string(lineno) +
                                 ": empty address");
      p.seq = static_cast<std::uint32_t>(
          field_double(f[2], packets_csv, lineno));
      p.u_g_v = field_double(f[3], packets_csv, lineno);
      p.u_g_omega = field_double(f[4], packets_csv, lineno);
      p.e_v = field_double(f[5], packets_csv, lineno);
      p.e_omega = field_double(f[6], packets_csv, lineno);
      auto [it, fresh] = last_t.try_emplace(
          addr, -std::numeric_limits<double>::infinity());
      if (p.t < it->second)
        throw std::runtime_error(packets_csv + ":" + std::to_string(lineno) +
                                 ": non-monotonic timestamp for " + addr);
      it->second = p.t;
      data.packets[addr].push_back(std::move(p));
    }
  }
  return data;
}

std::string observation_csv_row(const Observation& o) {
  std::ostringstream s;
  s << fmt_double(o.t) << ',' << o.visual_id << ',' << fmt_double(o.x) << ','
    << fmt_double(o.y) << ',' << fmt_double(o.theta) << ',' << fmt_double(o.v)
    << ',' << fmt_double(o.omega);
  return s.str();
}

std::string packet_csv_row(const std::string& address, const PacketRecord& p) {
  std::ostringstream s;
  s << fmt_double(p.t) << ',' << address << ',' << p.seq << ','
    << fmt_double(p.u_g_v) << ',' << fmt_double(p.u_g_omega) << ','
    << fmt_double(p.e_v) << ',' << fmt_double(p.e_omega);
  return s.str();
}

void write_observations_csv(const std::string& path,
                            const std::vector<Observation>& observations) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << kObservationsHeader << '\n';
  for (const auto& o : observations) out << observation_csv_row(o) << '\n';
}

void write_packets_csv(
    const std::string& path,
    const std::map<std::string, std::vector<PacketRecord>>& packets) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << kPacketsHeader << '\n';
  // Interleave by time across addresses so the file reads chronologically.
  struct Cursor {
    const std::string* addr;
    const std::vector<PacketRecord>* v;
    std::size_t i = 0;
  };
  std::vector<Cursor> cursors;
  for (const auto& [addr, v] : packets) cursors.push_back({&addr, &v, 0});
  while (true) {
    Cursor* best = nullptr;
    for (auto& c : cursors) {
      if (c.i >= c.v->size()) continue;
      if (!best || (*c.v)[c.i].t < (*best->v)[best->i].t) best = &c;
    }
    if (!best) break;
    out << packet_csv_row(*best->addr, (*best->v)[best->i]) << '\n';
    ++best->i;
  }
}

}  // namespace wmatch
