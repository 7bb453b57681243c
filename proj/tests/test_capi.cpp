#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <string>

#include <json.hpp>

#include "wmatch.h"

TEST_CASE("status strings cover every code") {
  CHECK(std::string(wmatch_status_str(WMATCH_OK)) == "ok");
  for (int s = WMATCH_OK; s <= WMATCH_ERR_BUFFER_TOO_SMALL; ++s) {
    const char* str = wmatch_status_str(static_cast<wmatch_status>(s));
    CHECK(str != nullptr);
    CHECK(std::string(str) != "");
  }
}

TEST_CASE("generator draws match configured variance and reject bad input") {
  wmatch_generator* g = nullptr;
  CHECK(wmatch_generator_new(-0.1, 0.0, 1, &g) ==
        WMATCH_ERR_INVALID_ARGUMENT);
  CHECK(g == nullptr);
  CHECK(std::string(wmatch_last_error()) != "");

  REQUIRE(wmatch_generator_new(0.25, 0.0, 99, &g) == WMATCH_OK);
  const int n = 20000;
  double sum = 0, sum_sq = 0;
  for (int i = 0; i < n; ++i) {
    int64_t tick = -1;
    double ev = 0, eo = 1;
    REQUIRE(wmatch_generator_draw(g, &tick, &ev, &eo) == WMATCH_OK);
    CHECK(tick == i);
    CHECK(eo == 0.0);  // zero variance channel is exactly zero
    sum += ev;
    sum_sq += ev * ev;
  }
  double mean = sum / n;
  double var = sum_sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.02);
  CHECK(var == doctest::Approx(0.25).epsilon(0.05));
  wmatch_generator_free(g);
  CHECK(wmatch_generator_draw(nullptr, nullptr, nullptr, nullptr) ==
        WMATCH_ERR_INVALID_ARGUMENT);
}

TEST_CASE("inject and residuals invert each other") {
  double uv = 0, uo = 0;
  wmatch_inject(1.5, -0.25, 0.125, 0.5, &uv, &uo);
  CHECK(uv == 1.625);
  CHECK(uo == 0.25);

  // noise-free observation o = u_g + e: V1 recovers zero, V2 the watermark
  CHECK(wmatch_residual_v1(1.625, 1.5, 0.125) == 0.0);
  CHECK(wmatch_residual_v2(1.625, 1.5) == 0.125);

  // scalar plant z' = a z + b u, u = u_g + e
  double a = 0.8, b = 1.0, z = 2.0, ug = 0.3, e = -0.1;
  double z_next = a * z + b * (ug + e);
  CHECK(wmatch_residual_t1_scalar(z_next, z, ug, e, a, b) ==
        doctest::Approx(0.0));
  CHECK(wmatch_residual_t2_scalar(z_next, z, ug, a, b) ==
        doctest::Approx(b * e));
}

TEST_CASE("accumulator running and windowed means through the C API") {
  wmatch_accumulator* acc = nullptr;
  REQUIRE(wmatch_accumulator_new(8, &acc) == WMATCH_OK);
  double out = -1;
  CHECK(wmatch_accumulator_running(acc, WMATCH_TEST_1, WMATCH_CHANNEL_V,
                                   &out) == WMATCH_ERR_NOT_READY);
  for (int i = 1; i <= 4; ++i)
    REQUIRE(wmatch_accumulator_update(acc, WMATCH_CHANNEL_V, double(i),
                                      2.0 * i) == WMATCH_OK);
  CHECK(wmatch_accumulator_count(acc) == 4);
  REQUIRE(wmatch_accumulator_running(acc, WMATCH_TEST_1, WMATCH_CHANNEL_V,
                                     &out) == WMATCH_OK);
  CHECK(out == doctest::Approx((1.0 + 4 + 9 + 16) / 4));
  REQUIRE(wmatch_accumulator_running(acc, WMATCH_TEST_2, WMATCH_CHANNEL_V,
                                     &out) == WMATCH_OK);
  CHECK(out == doctest::Approx(4.0 * (1 + 4 + 9 + 16) / 4));
  REQUIRE(wmatch_accumulator_windowed(acc, WMATCH_TEST_1, WMATCH_CHANNEL_V, 2,
                                      &out) == WMATCH_OK);
  CHECK(out == doctest::Approx((9.0 + 16.0) / 2));
  CHECK(wmatch_accumulator_windowed(acc, WMATCH_TEST_1, WMATCH_CHANNEL_V, 0,
                                    &out) == WMATCH_ERR_INVALID_ARGUMENT);
  CHECK(wmatch_accumulator_running(acc, WMATCH_TEST_1, WMATCH_CHANNEL_OMEGA,
                                   &out) == WMATCH_ERR_NOT_READY);
  wmatch_accumulator_free(acc);
}

TEST_CASE("chi2 quantile and test behave like the reference values") {
  double q = 0;
  REQUIRE(wmatch_chi2_quantile(0.95, 10, &q) == WMATCH_OK);
  CHECK(q == doctest::Approx(18.307).epsilon(0.01));
  CHECK(wmatch_chi2_quantile(1.5, 10, &q) == WMATCH_ERR_INVALID_ARGUMENT);

  wmatch_verdict v{};
  // 100 residuals with empirical mean square exactly sigma2 must pass
  REQUIRE(wmatch_chi2_test(100.0 * 0.01, 100, 0.01, 0.05, &v) == WMATCH_OK);
  CHECK(v.dof == 100);
  CHECK(v.statistic == doctest::Approx(100.0));
  CHECK(v.pass == 1);
  CHECK(v.lower < v.statistic);
  CHECK(v.upper > v.statistic);
  // inflated residuals fail
  REQUIRE(wmatch_chi2_test(100.0 * 0.05, 100, 0.01, 0.05, &v) == WMATCH_OK);
  CHECK(v.pass == 0);
  CHECK(wmatch_chi2_test(1.0, 0, 0.01, 0.05, &v) ==
        WMATCH_ERR_INVALID_ARGUMENT);
  CHECK(wmatch_chi2_test(1.0, 10, 0.0, 0.05, &v) ==
        WMATCH_ERR_INVALID_ARGUMENT);
}

TEST_CASE("score matrix: ingest, best pair, report JSON") {
  wmatch_matrix* m = nullptr;
  REQUIRE(wmatch_matrix_new(16, 5, &m) == WMATCH_OK);

  char addr[32], vid[32];
  CHECK(wmatch_matrix_best_pair(m, WMATCH_TEST_1, addr, sizeof addr, vid,
                                sizeof vid) == WMATCH_ERR_NOT_READY);

  std::mt19937_64 rng(7);
  std::normal_distribution<double> small(0.0, 0.1), big(0.0, 0.6);
  for (int i = 0; i < 50; ++i) {
    double s = small(rng), b1 = big(rng), b2 = big(rng), b3 = big(rng);
    REQUIRE(wmatch_matrix_ingest(m, "IP_1", "ID_A", WMATCH_CHANNEL_V, s, s) ==
            WMATCH_OK);
    REQUIRE(wmatch_matrix_ingest(m, "IP_1", "ID_B", WMATCH_CHANNEL_V, b1,
                                 b1) == WMATCH_OK);
    REQUIRE(wmatch_matrix_ingest(m, "IP_2", "ID_A", WMATCH_CHANNEL_V, b2,
                                 b2) == WMATCH_OK);
    REQUIRE(wmatch_matrix_ingest(m, "IP_2", "ID_B", WMATCH_CHANNEL_V, b3,
                                 b3) == WMATCH_OK);
  }

  REQUIRE(wmatch_matrix_best_pair(m, WMATCH_TEST_1, addr, sizeof addr, vid,
                                  sizeof vid) == WMATCH_OK);
  CHECK(std::string(addr) == "IP_1");
  CHECK(std::string(vid) == "ID_A");
  CHECK(wmatch_matrix_best_pair(m, WMATCH_TEST_1, addr, 2, vid, sizeof vid) ==
        WMATCH_ERR_BUFFER_TOO_SMALL);

  char* json = nullptr;
  REQUIRE(wmatch_matrix_report_json(m, &json) == WMATCH_OK);
  REQUIRE(json != nullptr);
  auto doc = nlohmann::json::parse(json);
  wmatch_free(json);
  REQUIRE(doc.contains("mapping"));
  bool found = false;
  for (const auto& p : doc["mapping"]) {
    if (p["address"] == "IP_1") {
      CHECK(p["visual_id"] == "ID_A");
      found = true;
    }
  }
  CHECK(found);
  CHECK(wmatch_matrix_ingest(m, nullptr, "ID_A", WMATCH_CHANNEL_V, 0, 0) ==
        WMATCH_ERR_INVALID_ARGUMENT);
  wmatch_matrix_free(m);
}

TEST_CASE("packet encode/decode round trip and error statuses") {
  wmatch_packet pkt{};
  pkt.version = 1;
  pkt.seq = 424242;
  pkt.timestamp_us = 1234567890123ull;
  pkt.u_g_v = 10.25;
  pkt.u_g_omega = -0.5;
  pkt.e_v = 0.0625;
  pkt.e_omega = -0.125;

  uint8_t buf[WMATCH_PACKET_SIZE];
  REQUIRE(wmatch_packet_encode(&pkt, buf) == WMATCH_OK);

  wmatch_packet back{};
  REQUIRE(wmatch_packet_decode(buf, sizeof buf, &back) == WMATCH_OK);
  CHECK(back.seq == pkt.seq);
  CHECK(back.timestamp_us == pkt.timestamp_us);
  CHECK(back.u_g_v == pkt.u_g_v);
  CHECK(back.e_omega == pkt.e_omega);

  CHECK(wmatch_packet_decode(buf, 10, &back) == WMATCH_ERR_TRUNCATED);

  uint8_t corrupt[WMATCH_PACKET_SIZE];
  std::memcpy(corrupt, buf, sizeof buf);
  corrupt[20] ^= 0x01;
  CHECK(wmatch_packet_decode(corrupt, sizeof corrupt, &back) ==
        WMATCH_ERR_CORRUPTED);
  CHECK(std::string(wmatch_last_error()) != "");

  // unsupported version survives the CRC but is rejected
  wmatch_packet v2 = pkt;
  v2.version = 2;
  uint8_t buf2[WMATCH_PACKET_SIZE];
  REQUIRE(wmatch_packet_encode(&v2, buf2) == WMATCH_OK);
  CHECK(wmatch_packet_decode(buf2, sizeof buf2, &back) ==
        WMATCH_ERR_BAD_VERSION);
}
