/* wmatch — dynamic-watermark vehicle identification library.
 *
 * C API over the C++ core: opaque handles, status codes, and the three
 * command entry points used by the CLI. All functions are thread-compatible;
 * a handle must not be used from two threads at once.
 */
#ifndef WMATCH_H
#define WMATCH_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum wmatch_status {
  WMATCH_OK = 0,
  WMATCH_ERR_INVALID_ARGUMENT = 1,
  WMATCH_ERR_NOT_READY = 2,
  WMATCH_ERR_TRUNCATED = 3,   /* packet shorter than the fixed layout */
  WMATCH_ERR_CORRUPTED = 4,   /* packet CRC mismatch */
  WMATCH_ERR_BAD_MAGIC = 5,   /* valid CRC but foreign protocol */
  WMATCH_ERR_BAD_VERSION = 6, /* unsupported protocol version */
  WMATCH_ERR_IO = 7,
  WMATCH_ERR_RUNTIME = 8,
  WMATCH_ERR_BUFFER_TOO_SMALL = 9
} wmatch_status;

const char* wmatch_status_str(wmatch_status s);

/* Message for the most recent failure on this thread. */
const char* wmatch_last_error(void);

/* ---- watermark generation ---------------------------------------- */

typedef struct wmatch_generator wmatch_generator;

wmatch_status wmatch_generator_new(double sigma2_e_v, double sigma2_e_omega,
                                   uint64_t seed, wmatch_generator** out);
void wmatch_generator_free(wmatch_generator* g);
wmatch_status wmatch_generator_draw(wmatch_generator* g, int64_t* tick,
                                    double* e_v, double* e_omega);

/* u = u^g + e, per channel. */
void wmatch_inject(double u_g_v, double u_g_omega, double e_v, double e_omega,
                   double* u_v, double* u_omega);

/* ---- residuals ---------------------------------------------------- */

double wmatch_residual_t1_scalar(double z_t, double z_prev, double u_g_prev,
                                 double e_prev, double a, double b);
double wmatch_residual_t2_scalar(double z_t, double z_prev, double u_g_prev,
                                 double a, double b);
double wmatch_residual_v1(double o_v, double u_g_v_prev, double e_v_prev);
double wmatch_residual_v2(double o_v, double u_g_v_prev);

/* ---- pair accumulator --------------------------------------------- */

typedef struct wmatch_accumulator wmatch_accumulator;

typedef enum wmatch_test { WMATCH_TEST_1 = 1, WMATCH_TEST_2 = 2 } wmatch_test;
typedef enum wmatch_channel {
  WMATCH_CHANNEL_V = 0,
  WMATCH_CHANNEL_OMEGA = 1
} wmatch_channel;

wmatch_status wmatch_accumulator_new(size_t window_capacity,
                                     wmatch_accumulator** out);
void wmatch_accumulator_free(wmatch_accumulator* a);
wmatch_status wmatch_accumulator_update(wmatch_accumulator* a,
                                        wmatch_channel ch, double v1,
                                        double v2);
uint64_t wmatch_accumulator_count(const wmatch_accumulator* a);
wmatch_status wmatch_accumulator_running(const wmatch_accumulator* a,
                                         wmatch_test test, wmatch_channel ch,
                                         double* out);
wmatch_status wmatch_accumulator_windowed(const wmatch_accumulator* a,
                                          wmatch_test test, wmatch_channel ch,
                                          size_t window, double* out);

/* ---- chi-square testing ------------------------------------------- */

typedef struct wmatch_verdict {
  double statistic; /* Q = sum of squared residuals / sigma2 */
  uint64_t dof;
  double lower;
  double upper;
  int pass;
} wmatch_verdict;

wmatch_status wmatch_chi2_quantile(double p, uint64_t dof, double* out);
wmatch_status wmatch_chi2_test(double sum_sq, uint64_t count, double sigma2,
                               double alpha, wmatch_verdict* out);

/* ---- score matrix and matching ------------------------------------ */

typedef struct wmatch_matrix wmatch_matrix;

wmatch_status wmatch_matrix_new(size_t window_capacity, uint64_t min_samples,
                                wmatch_matrix** out);
void wmatch_matrix_free(wmatch_matrix* m);
wmatch_status wmatch_matrix_ingest(wmatch_matrix* m, const char* address,
                                   const char* visual_id, wmatch_channel ch,
                                   double v1, double v2);
/* WMATCH_ERR_NOT_READY until every pair holds min_samples. */
wmatch_status wmatch_matrix_best_pair(const wmatch_matrix* m, wmatch_test test,
                                      char* address_buf, size_t address_len,
                                      char* visual_id_buf,
                                      size_t visual_id_len);
/* Full injective assignment as a JSON document; free with wmatch_free. */
wmatch_status wmatch_matrix_report_json(const wmatch_matrix* m, char** out);

void wmatch_free(void* p);

/* ---- wire protocol ------------------------------------------------ */

#define WMATCH_PACKET_SIZE 56

typedef struct wmatch_packet {
  uint8_t version;
  uint32_t seq;
  uint64_t timestamp_us;
  double u_g_v;
  double u_g_omega;
  double e_v;
  double e_omega;
} wmatch_packet;

wmatch_status wmatch_packet_encode(const wmatch_packet* pkt,
                                   uint8_t out[WMATCH_PACKET_SIZE]);
wmatch_status wmatch_packet_decode(const uint8_t* buf, size_t len,
                                   wmatch_packet* out);

/* ---- command entry points (exit-code semantics: 0/1/2) ------------ */

typedef struct wmatch_simulate_opts {
  const char* config_path;
  const char* out_dir;
  const uint64_t* seed_override; /* NULL = use config seed */
  size_t window;                 /* 0 = default 20 */
  const char* emit_udp;          /* "host:port" or NULL */
  const char* obs_stream_path;   /* live observation file or NULL */
  uint32_t pace_us;              /* per-event sleep while streaming */
} wmatch_simulate_opts;

int wmatch_cmd_simulate(const wmatch_simulate_opts* opts);

typedef struct wmatch_replay_opts {
  const char* observations_csv;
  const char* packets_csv;
  const char* out_dir; /* NULL = report to stdout */
  size_t window;       /* 0 = default 20 */
  const char* truth_json; /* optional ground-truth mapping */
  double dt;              /* 0 = infer from packet timestamps */
} wmatch_replay_opts;

int wmatch_cmd_replay(const wmatch_replay_opts* opts);

typedef struct wmatch_listen_opts {
  uint16_t port;
  const char* observations_csv; /* tailed in time order */
  double duration_s;
  const char* out_dir; /* optional */
  double dt;           /* 0 = default */
} wmatch_listen_opts;

int wmatch_cmd_listen(const wmatch_listen_opts* opts);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* WMATCH_H */
