#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "core/matcher.hpp"

using namespace wmatch;

namespace {

// Brute-force assignment oracle: minimum total cost over all permutations.
double brute_force_cost(const std::vector<std::vector<double>>& cost) {
  const std::size_t n = cost.size();
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += cost[i][perm[i]];
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

ScoreMatrix fill_matrix(const std::vector<std::string>& addrs,
                        const std::vector<std::string>& ids,
                        const std::vector<std::vector<double>>& level,
                        int count = 25) {
  ScoreMatrix m(20, 20);
  for (int k = 0; k < count; ++k)
    for (std::size_t i = 0; i < addrs.size(); ++i)
      for (std::size_t j = 0; j < ids.size(); ++j)
        m.ingest(addrs[i], ids[j], std::sqrt(level[i][j]), 0.0);
  return m;
}

}  // namespace

TEST_CASE("ingest grows the matrix and keeps counts per pair") {
  ScoreMatrix m(20, 1);
  m.ingest("IP_1", "ID_A", 0.5, 0.5);
  CHECK(m.addresses().size() == 1);
  CHECK(m.visual_ids().size() == 1);
  CHECK(m.cell("IP_1", "ID_A").count() == 1);

  m.ingest("IP_1", "ID_B", 0.1, 0.1);
  m.ingest("IP_2", "ID_A", 0.1, 0.1);
  m.ingest("IP_2", "ID_B", 0.1, 0.1);
  CHECK(m.addresses().size() == 2);
  CHECK(m.visual_ids().size() == 2);
  CHECK(m.cell("IP_2", "ID_B").count() == 1);
  CHECK_THROWS_AS(m.cell("IP_3", "ID_A"), std::out_of_range);
}

TEST_CASE("ingest order does not change the final sums") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal(0.0, 1.0);
  struct Item {
    const char* addr;
    const char* id;
    double v1, v2;
  };
  std::vector<Item> items;
  for (int k = 0; k < 200; ++k)
    for (const char* a : {"IP_1", "IP_2"})
      for (const char* i : {"ID_A", "ID_B"})
        items.push_back({a, i, normal(rng), normal(rng)});

  ScoreMatrix batch(20, 1), shuffled(20, 1);
  for (const auto& it : items) batch.ingest(it.addr, it.id, it.v1, it.v2);
  std::shuffle(items.begin(), items.end(), rng);
  for (const auto& it : items) shuffled.ingest(it.addr, it.id, it.v1, it.v2);

  for (const char* a : {"IP_1", "IP_2"})
    for (const char* i : {"ID_A", "ID_B"}) {
      CHECK(batch.cell(a, i).t1_v.sum_sq() ==
            doctest::Approx(shuffled.cell(a, i).t1_v.sum_sq()).epsilon(1e-12));
      CHECK(batch.cell(a, i).count() == shuffled.cell(a, i).count());
    }
}

TEST_CASE("best_pair needs the minimum sample count") {
  ScoreMatrix m(20, 20);
  for (int k = 0; k < 10; ++k) m.ingest("IP_1", "ID_A", 0.1, 0.1);
  CHECK(!m.best_pair(TestKind::T1).has_value());
  for (int k = 0; k < 10; ++k) m.ingest("IP_1", "ID_A", 0.1, 0.1);
  auto best = m.best_pair(TestKind::T1);
  REQUIRE(best.has_value());
  CHECK(best->first == "IP_1");
  CHECK(best->second == "ID_A");
}

TEST_CASE("best_pair separates lab-style variances") {
  // Diagonal levels sigma_w^2, off-diagonal inflated by both watermarks.
  auto m = fill_matrix({"IP_1", "IP_2"}, {"ID_A", "ID_B"},
                       {{0.005, 0.455}, {0.455, 0.005}});
  auto best = m.best_pair(TestKind::T1);
  REQUIRE(best.has_value());
  CHECK(best->first == "IP_1");
  CHECK(best->second == "ID_A");

  auto report = m.full_assignment();
  REQUIRE(report.has_value());
  REQUIRE(report->mapping.size() == 2);
  for (const auto& p : report->mapping) {
    if (p.address == "IP_1") CHECK(p.visual_id == "ID_A");
    if (p.address == "IP_2") CHECK(p.visual_id == "ID_B");
    CHECK(p.margin == doctest::Approx(0.45).epsilon(1e-9));
  }
}

TEST_CASE("identical statistics tie-break lexicographically") {
  auto m = fill_matrix({"IP_2", "IP_1"}, {"ID_B", "ID_A"},
                       {{0.1, 0.1}, {0.1, 0.1}});
  auto best = m.best_pair(TestKind::T1);
  REQUIRE(best.has_value());
  CHECK(best->first == "IP_1");
  CHECK(best->second == "ID_A");
}

TEST_CASE("3x3 argmin equals exhaustive scan") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> uni(0.01, 1.0);
  std::vector<std::vector<double>> level(3, std::vector<double>(3));
  for (auto& row : level)
    for (auto& v : row) v = uni(rng);
  std::vector<std::string> addrs{"IP_1", "IP_2", "IP_3"};
  std::vector<std::string> ids{"ID_A", "ID_B", "ID_C"};
  auto m = fill_matrix(addrs, ids, level);

  double best = std::numeric_limits<double>::infinity();
  std::pair<std::string, std::string> expect;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      double stat = m.cell(addrs[i], ids[j]).t1_v.running_mean();
      if (stat < best) {
        best = stat;
        expect = {addrs[i], ids[j]};
      }
    }
  auto got = m.best_pair(TestKind::T1);
  REQUIRE(got.has_value());
  CHECK(*got == expect);
}

TEST_CASE("full_assignment handles rectangular matrices") {
  // Field mode: one transmitting address against two visual tracks.
  auto m = fill_matrix({"IP_1"}, {"ID_A", "ID_B"}, {{0.01, 0.06}});
  auto report = m.full_assignment();
  REQUIRE(report.has_value());
  REQUIRE(report->mapping.size() == 1);
  CHECK(report->mapping[0].address == "IP_1");
  CHECK(report->mapping[0].visual_id == "ID_A");
  CHECK(report->unmatched_visual_ids == std::vector<std::string>{"ID_B"});

  auto wide = fill_matrix({"IP_1", "IP_2"}, {"ID_A"}, {{0.2}, {0.01}});
  auto r2 = wide.full_assignment();
  REQUIRE(r2.has_value());
  REQUIRE(r2->mapping.size() == 1);
  CHECK(r2->mapping[0].address == "IP_2");
  CHECK(r2->unmatched_addresses == std::vector<std::string>{"IP_1"});
}

TEST_CASE("assignment equals brute force on random matrices up to 6x6") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int n = 2; n <= 6; ++n) {
    for (int rep = 0; rep < 30; ++rep) {
      std::vector<std::vector<double>> cost(n, std::vector<double>(n));
      for (auto& row : cost)
        for (auto& v : row) v = uni(rng);
      auto assign = solve_assignment(cost);
      double total = 0.0;
      for (int i = 0; i < n; ++i) {
        REQUIRE(assign[i] >= 0);
        total += cost[i][assign[i]];
      }
      CHECK(total == doctest::Approx(brute_force_cost(cost)).epsilon(1e-9));
    }
  }
}

TEST_CASE("argmin is invariant to common positive scaling") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> uni(0.01, 1.0);
  std::vector<std::vector<double>> level(3, std::vector<double>(3));
  for (auto& row : level)
    for (auto& v : row) v = uni(rng);
  std::vector<std::string> addrs{"IP_1", "IP_2", "IP_3"};
  std::vector<std::string> ids{"ID_A", "ID_B", "ID_C"};

  auto scaled = level;
  for (auto& row : scaled)
    for (auto& v : row) v *= 37.5;
  auto m1 = fill_matrix(addrs, ids, level);
  auto m2 = fill_matrix(addrs, ids, scaled);
  CHECK(m1.best_pair(TestKind::T1) == m2.best_pair(TestKind::T1));

  auto r1 = m1.full_assignment();
  auto r2 = m2.full_assignment();
  REQUIRE((r1 && r2));
  for (std::size_t i = 0; i < r1->mapping.size(); ++i) {
    CHECK(r1->mapping[i].address == r2->mapping[i].address);
    CHECK(r1->mapping[i].visual_id == r2->mapping[i].visual_id);
  }
}

TEST_CASE("2x2 diagonal-dominant assignment equals greedy best_pair") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> lo(0.001, 0.05), hi(0.2, 0.9);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<std::vector<double>> level = {{lo(rng), hi(rng)},
                                              {hi(rng), lo(rng)}};
    auto m = fill_matrix({"IP_1", "IP_2"}, {"ID_A", "ID_B"}, level);
    auto report = m.full_assignment();
    REQUIRE(report.has_value());
    auto best = m.best_pair(TestKind::T1);
    REQUIRE(best.has_value());
    // The greedy first pick appears in the optimal mapping.
    bool found = false;
    for (const auto& p : report->mapping)
      if (p.address == best->first && p.visual_id == best->second)
        found = true;
    CHECK(found);
  }
}

TEST_CASE("confidence: arithmetic, zero, and monotonicity") {
  MatchedPair p;
  p.statistic = 0.005;
  p.margin = 0.45;
  CHECK(confidence(p) == doctest::Approx(90.0));

  MatchedPair q;
  q.statistic = 0.3;
  q.margin = 0.0;
  CHECK(confidence(q) == 0.0);

  // Growing the runner-up (hence margin) never decreases confidence.
  double prev = 0.0;
  for (double runner_up = 0.01; runner_up < 1.0; runner_up += 0.05) {
    MatchedPair r;
    r.statistic = 0.01;
    r.margin = runner_up - r.statistic;
    if (r.margin < 0.0) r.margin = 0.0;
    double c = confidence(r);
    CHECK(c >= prev);
    prev = c;
  }
}
