#include "wmatch.h"

#include <cstring>
#include <new>
#include <string>

#include <json.hpp>

#include "core/detector.hpp"
#include "core/matcher.hpp"
#include "core/protocol.hpp"
#include "core/runner.hpp"
#include "core/watermark.hpp"

namespace {

thread_local std::string g_last_error;

wmatch_status fail(wmatch_status s, const char* msg) {
  g_last_error = msg;
  return s;
}

template <typename F>
wmatch_status guarded(F&& f) {
  try {
    return f();
  } catch (const std::invalid_argument& e) {
    return fail(WMATCH_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::bad_alloc&) {
    return fail(WMATCH_ERR_RUNTIME, "out of memory");
  } catch (const std::exception& e) {
    return fail(WMATCH_ERR_RUNTIME, e.what());
  }
}

wmatch_status copy_string(const std::string& s, char* buf, size_t len) {
  if (!buf || len == 0 || s.size() + 1 > len)
    return fail(WMATCH_ERR_BUFFER_TOO_SMALL, "output buffer too small");
  std::memcpy(buf, s.c_str(), s.size() + 1);
  return WMATCH_OK;
}

const wmatch::ResidualStats& stats_of(const wmatch::PairAccumulator& acc,
                                      wmatch_test test, wmatch_channel ch) {
  if (ch == WMATCH_CHANNEL_V)
    return test == WMATCH_TEST_1 ? acc.t1_v : acc.t2_v;
  return test == WMATCH_TEST_1 ? acc.t1_omega : acc.t2_omega;
}

}  // namespace

struct wmatch_generator {
  wmatch::WatermarkGenerator gen;
};
struct wmatch_accumulator {
  wmatch::PairAccumulator acc;
};
struct wmatch_matrix {
  wmatch::ScoreMatrix m;
};

extern "C" {

const char* wmatch_status_str(wmatch_status s) {
  switch (s) {
    case WMATCH_OK: return "ok";
    case WMATCH_ERR_INVALID_ARGUMENT: return "invalid argument";
    case WMATCH_ERR_NOT_READY: return "not ready";
    case WMATCH_ERR_TRUNCATED: return "truncated packet";
    case WMATCH_ERR_CORRUPTED: return "corrupted packet";
    case WMATCH_ERR_BAD_MAGIC: return "foreign packet";
    case WMATCH_ERR_BAD_VERSION: return "unsupported version";
    case WMATCH_ERR_IO: return "i/o error";
    case WMATCH_ERR_RUNTIME: return "runtime error";
    case WMATCH_ERR_BUFFER_TOO_SMALL: return "buffer too small";
  }
  return "unknown";
}

const char* wmatch_last_error(void) { return g_last_error.c_str(); }

wmatch_status wmatch_generator_new(double sigma2_e_v, double sigma2_e_omega,
                                   uint64_t seed, wmatch_generator** out) {
  if (!out) return fail(WMATCH_ERR_INVALID_ARGUMENT, "out is NULL");
  *out = nullptr;
  return guarded([&] {
    wmatch::WatermarkConfig cfg{sigma2_e_v, sigma2_e_omega, seed};
    *out = new wmatch_generator{wmatch::WatermarkGenerator(cfg)};
    return WMATCH_OK;
  });
}

void wmatch_generator_free(wmatch_generator* g) { delete g; }

wmatch_status wmatch_generator_draw(wmatch_generator* g, int64_t* tick,
                                    double* e_v, double* e_omega) {
  if (!g) return fail(WMATCH_ERR_INVALID_ARGUMENT, "generator is NULL");
  wmatch::ExcitationSample s = g->gen.draw();
  if (tick) *tick = s.tick;
  if (e_v) *e_v = s.e_v;
  if (e_omega) *e_omega = s.e_omega;
  return WMATCH_OK;
}

void wmatch_inject(double u_g_v, double u_g_omega, double e_v, double e_omega,
                   double* u_v, double* u_omega) {
  wmatch::ExcitationSample e{0, e_v, e_omega};
  double uv, uo;
  wmatch::inject(u_g_v, u_g_omega, e, uv, uo);
  if (u_v) *u_v = uv;
  if (u_omega) *u_omega = uo;
}

double wmatch_residual_t1_scalar(double z_t, double z_prev, double u_g_prev,
                                 double e_prev, double a, double b) {
  return wmatch::residual_t1_scalar(z_t, z_prev, u_g_prev, e_prev,
                                    {a, b, 0.0});
}

double wmatch_residual_t2_scalar(double z_t, double z_prev, double u_g_prev,
                                 double a, double b) {
  return wmatch::residual_t2_scalar(z_t, z_prev, u_g_prev, {a, b, 0.0});
}

double wmatch_residual_v1(double o_v, double u_g_v_prev, double e_v_prev) {
  return wmatch::residual_v1(o_v, u_g_v_prev, e_v_prev);
}

double wmatch_residual_v2(double o_v, double u_g_v_prev) {
  return wmatch::residual_v2(o_v, u_g_v_prev);
}

wmatch_status wmatch_accumulator_new(size_t window_capacity,
                                     wmatch_accumulator** out) {
  if (!out) return fail(WMATCH_ERR_INVALID_ARGUMENT, "out is NULL");
  *out = nullptr;
  return guarded([&] {
    *out = new wmatch_accumulator{wmatch::PairAccumulator(window_capacity)};
    return WMATCH_OK;
  });
}

void wmatch_accumulator_free(wmatch_accumulator* a) { delete a; }

wmatch_status wmatch_accumulator_update(wmatch_accumulator* a,
                                        wmatch_channel ch, double v1,
                                        double v2) {
  if (!a) return fail(WMATCH_ERR_INVALID_ARGUMENT, "accumulator is NULL");
  if (ch == WMATCH_CHANNEL_V)
    a->acc.update_v(v1, v2);
  else
    a->acc.update_omega(v1, v2);
  return WMATCH_OK;
}

uint64_t wmatch_accumulator_count(const wmatch_accumulator* a) {
  return a ? a->acc.count() : 0;
}

wmatch_status wmatch_accumulator_running(const wmatch_accumulator* a,
                                         wmatch_test test, wmatch_channel ch,
                                         double* out) {
  if (!a || !out) return fail(WMATCH_ERR_INVALID_ARGUMENT, "NULL argument");
  const auto& stats = stats_of(a->acc, test, ch);
  if (stats.count() == 0)
    return fail(WMATCH_ERR_NOT_READY, "no residuals on this channel yet");
  *out = stats.running_mean();
  return WMATCH_OK;
}

wmatch_status wmatch_accumulator_windowed(const wmatch_accumulator* a,
                                          wmatch_test test, wmatch_channel ch,
                                          size_t window, double* out) {
  if (!a || !out) return fail(WMATCH_ERR_INVALID_ARGUMENT, "NULL argument");
  return guarded([&] {
    *out = stats_of(a->acc, test, ch).windowed_mean(window);
    return WMATCH_OK;
  });
}

wmatch_status wmatch_chi2_quantile(double p, uint64_t dof, double* out) {
  if (!out) return fail(WMATCH_ERR_INVALID_ARGUMENT, "out is NULL");
  return guarded([&] {
    *out = wmatch::chi2_quantile(p, dof);
    return WMATCH_OK;
  });
}

wmatch_status wmatch_chi2_test(double sum_sq, uint64_t count, double sigma2,
                               double alpha, wmatch_verdict* out) {
  if (!out) return fail(WMATCH_ERR_INVALID_ARGUMENT, "out is NULL");
  return guarded([&] {
    wmatch::TestVerdict v = wmatch::chi2_test(sum_sq, count, sigma2, alpha);
    out->statistic = v.statistic;
    out->dof = v.dof;
    out->lower = v.lower;
    out->upper = v.upper;
    out->pass = v.pass ? 1 : 0;
    return WMATCH_OK;
  });
}

wmatch_status wmatch_matrix_new(size_t window_capacity, uint64_t min_samples,
                                wmatch_matrix** out) {
  if (!out) return fail(WMATCH_ERR_INVALID_ARGUMENT, "out is NULL");
  *out = nullptr;
  return guarded([&] {
    *out = new wmatch_matrix{
        wmatch::ScoreMatrix(window_capacity ? window_capacity : 20,
                            min_samples ? min_samples : 20)};
    return WMATCH_OK;
  });
}

void wmatch_matrix_free(wmatch_matrix* m) { delete m; }

wmatch_status wmatch_matrix_ingest(wmatch_matrix* m, const char* address,
                                   const char* visual_id, wmatch_channel ch,
                                   double v1, double v2) {
  if (!m || !address || !visual_id)
    return fail(WMATCH_ERR_INVALID_ARGUMENT, "NULL argument");
  return guarded([&] {
    if (ch == WMATCH_CHANNEL_V)
      m->m.ingest(address, visual_id, v1, v2);
    else
      m->m.ingest_omega(address, visual_id, v1, v2);
    return WMATCH_OK;
  });
}

wmatch_status wmatch_matrix_best_pair(const wmatch_matrix* m, wmatch_test test,
                                      char* address_buf, size_t address_len,
                                      char* visual_id_buf,
                                      size_t visual_id_len) {
  if (!m) return fail(WMATCH_ERR_INVALID_ARGUMENT, "matrix is NULL");
  auto best = m->m.best_pair(test == WMATCH_TEST_2 ? wmatch::TestKind::T2
                                                   : wmatch::TestKind::T1);
  if (!best)
    return fail(WMATCH_ERR_NOT_READY,
                "not every pair has reached the minimum sample count");
  wmatch_status s = copy_string(best->first, address_buf, address_len);
  if (s != WMATCH_OK) return s;
  return copy_string(best->second, visual_id_buf, visual_id_len);
}

wmatch_status wmatch_matrix_report_json(const wmatch_matrix* m, char** out) {
  if (!m || !out) return fail(WMATCH_ERR_INVALID_ARGUMENT, "NULL argument");
  *out = nullptr;
  auto report = m->m.full_assignment();
  if (!report)
    return fail(WMATCH_ERR_NOT_READY,
                "not every pair has reached the minimum sample count");
  return guarded([&] {
    nlohmann::json j;
    j["mapping"] = nlohmann::json::array();
    for (const auto& p : report->mapping) {
      j["mapping"].push_back({{"address", p.address},
                              {"visual_id", p.visual_id},
                              {"t1_statistic", p.statistic},
                              {"t2_statistic", p.t2_statistic},
                              {"margin", p.margin},
                              {"samples", p.samples}});
    }
    j["unmatched_addresses"] = report->unmatched_addresses;
    j["unmatched_visual_ids"] = report->unmatched_visual_ids;
    std::string text = j.dump();
    char* buf = static_cast<char*>(std::malloc(text.size() + 1));
    if (!buf) return fail(WMATCH_ERR_RUNTIME, "out of memory");
    std::memcpy(buf, text.c_str(), text.size() + 1);
    *out = buf;
    return WMATCH_OK;
  });
}

void wmatch_free(void* p) { std::free(p); }

wmatch_status wmatch_packet_encode(const wmatch_packet* pkt,
                                   uint8_t out[WMATCH_PACKET_SIZE]) {
  if (!pkt || !out) return fail(WMATCH_ERR_INVALID_ARGUMENT, "NULL argument");
  wmatch::WatermarkPacket p;
  p.version = pkt->version ? pkt->version : wmatch::kProtocolVersion;
  p.seq = pkt->seq;
  p.timestamp_us = pkt->timestamp_us;
  p.u_g_v = pkt->u_g_v;
  p.u_g_omega = pkt->u_g_omega;
  p.e_v = pkt->e_v;
  p.e_omega = pkt->e_omega;
  auto frame = wmatch::encode(p);
  std::memcpy(out, frame.data(), frame.size());
  return WMATCH_OK;
}

wmatch_status wmatch_packet_decode(const uint8_t* buf, size_t len,
                                   wmatch_packet* out) {
  if (!buf || !out) return fail(WMATCH_ERR_INVALID_ARGUMENT, "NULL argument");
  wmatch::WatermarkPacket p;
  switch (wmatch::decode({buf, len}, p)) {
    case wmatch::DecodeError::None: break;
    case wmatch::DecodeError::Truncated:
      return fail(WMATCH_ERR_TRUNCATED, "truncated packet");
    case wmatch::DecodeError::Corrupted:
      return fail(WMATCH_ERR_CORRUPTED, "crc mismatch");
    case wmatch::DecodeError::BadMagic:
      return fail(WMATCH_ERR_BAD_MAGIC, "bad magic");
    case wmatch::DecodeError::BadVersion:
      return fail(WMATCH_ERR_BAD_VERSION, "unsupported version");
  }
  out->version = p.version;
  out->seq = p.seq;
  out->timestamp_us = p.timestamp_us;
  out->u_g_v = p.u_g_v;
  out->u_g_omega = p.u_g_omega;
  out->e_v = p.e_v;
  out->e_omega = p.e_omega;
  return WMATCH_OK;
}

int wmatch_cmd_simulate(const wmatch_simulate_opts* opts) {
  if (!opts || !opts->config_path || !opts->out_dir) {
    g_last_error = "simulate: config_path and out_dir are required";
    return 2;
  }
  wmatch::SimulateOptions o;
  o.config_path = opts->config_path;
  o.out_dir = opts->out_dir;
  if (opts->seed_override) o.seed_override = *opts->seed_override;
  o.window = opts->window ? opts->window : 20;
  if (opts->emit_udp) o.emit_udp = opts->emit_udp;
  if (opts->obs_stream_path) o.obs_stream_path = opts->obs_stream_path;
  o.pace_us = opts->pace_us;
  try {
    return wmatch::run_simulate(o);
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return 2;
  }
}

int wmatch_cmd_replay(const wmatch_replay_opts* opts) {
  if (!opts || !opts->observations_csv || !opts->packets_csv) {
    g_last_error = "replay: observations_csv and packets_csv are required";
    return 2;
  }
  wmatch::ReplayOptions o;
  o.observations_csv = opts->observations_csv;
  o.packets_csv = opts->packets_csv;
  if (opts->out_dir) o.out_dir = opts->out_dir;
  o.window = opts->window ? opts->window : 20;
  if (opts->truth_json) o.truth_json = opts->truth_json;
  o.dt = opts->dt;
  try {
    return wmatch::run_replay(o);
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return 2;
  }
}

int wmatch_cmd_listen(const wmatch_listen_opts* opts) {
  if (!opts || !opts->observations_csv) {
    g_last_error = "listen: observations_csv is required";
    return 2;
  }
  wmatch::ListenOptions o;
  o.port = opts->port ? opts->port : 47808;
  o.observations_csv = opts->observations_csv;
  o.duration_s = opts->duration_s > 0.0 ? opts->duration_s : 10.0;
  if (opts->out_dir) o.out_dir = opts->out_dir;
  o.dt = opts->dt;
  try {
    return wmatch::run_listen(o);
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return 2;
  }
}

}  // extern "C"
