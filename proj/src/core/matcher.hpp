#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "detector.hpp"

namespace wmatch {

enum class TestKind { T1, T2 };

struct MatchedPair {
  std::string address;
  std::string visual_id;
  double statistic = 0.0;  // Test-1 running average used for assignment
  double t2_statistic = 0.0;
  double margin = 0.0;  // row runner-up minus chosen, floored at 0
  std::uint64_t samples = 0;
};

struct MatchReport {
  std::vector<MatchedPair> mapping;
  std::vector<std::string> unmatched_addresses;
  std::vector<std::string> unmatched_visual_ids;
};

// margin / chosen statistic; dimensionless separation measure.
double confidence(const MatchedPair& p);

// Minimum-cost assignment over an n x m cost matrix (rows to distinct
// columns). Returns per-row column index, -1 for unassigned rows.
std::vector<int> solve_assignment(
    const std::vector<std::vector<double>>& cost);

// N x N grid of PairAccumulators over (address, visual ID) pairs. Rows and
// columns appear on first ingest of an identifier.
class ScoreMatrix {
 public:
  explicit ScoreMatrix(std::size_t window_capacity = 20,
                       std::uint64_t min_samples = 20)
      : window_capacity_(window_capacity), min_samples_(min_samples) {}

  void ingest(const std::string& address, const std::string& visual_id,
              double v1, double v2);
  void ingest_omega(const std::string& address, const std::string& visual_id,
                    double v1, double v2);

  const std::vector<std::string>& addresses() const { return addresses_; }
  const std::vector<std::string>& visual_ids() const { return visual_ids_; }
  const PairAccumulator& cell(const std::string& address,
                              const std::string& visual_id) const;
  std::uint64_t min_samples() const { return min_samples_; }

  bool ready() const;

  // Joint argmin of the selected running average over all pairs.
  // Lexicographic tie-break by address then visual ID. nullopt until every
  // accumulator holds min_samples.
  std::optional<std::pair<std::string, std::string>> best_pair(
      TestKind test) const;

  // Injective mapping minimizing the total Test-1 running average via
  // optimal assignment. Rectangular matrices map min(N_addr, N_id) pairs.
  std::optional<MatchReport> full_assignment() const;

 private:
  PairAccumulator& cell_mut(const std::string& address,
                            const std::string& visual_id);
  std::size_t row_index(const std::string& address);
  std::size_t col_index(const std::string& visual_id);

  std::size_t window_capacity_;
  std::uint64_t min_samples_;
  std::vector<std::string> addresses_;
  std::vector<std::string> visual_ids_;
  std::vector<std::vector<PairAccumulator>> cells_;  // [row][col]
};

}  // namespace wmatch
