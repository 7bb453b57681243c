#include "matcher.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace wmatch {

double confidence(const MatchedPair& p) {
  if (p.margin <= 0.0) return 0.0;
  if (p.statistic <= 0.0) return std::numeric_limits<double>::infinity();
  return p.margin / p.statistic;
}

// Potential-based shortest-augmenting-path assignment, O(n^2 m).
// Requires rows <= cols internally; the wrapper transposes if needed.
static std::vector<int> assign_rows_le_cols(
    const std::vector<std::vector<double>>& a) {
  const int n = static_cast<int>(a.size());
  const int m = n == 0 ? 0 : static_cast<int>(a[0].size());
  const double INF = std::numeric_limits<double>::infinity();

  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, INF);
    std::vector<char> used(m + 1, false);
    do {
      used[j0] = true;
      int i0 = p[j0], j1 = -1;
      double delta = INF;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        double cur = a[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }

  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= m; ++j)
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

std::vector<int> solve_assignment(
    const std::vector<std::vector<double>>& cost) {
  if (cost.empty()) return {};
  const std::size_t n = cost.size();
  const std::size_t m = cost[0].size();
  for (const auto& row : cost)
    if (row.size() != m)
      throw std::invalid_argument("cost matrix must be rectangular");
  if (m == 0) return std::vector<int>(n, -1);

  if (n <= m) return assign_rows_le_cols(cost);

  // More rows than columns: solve the transpose, then invert.
  std::vector<std::vector<double>> t(m, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) t[j][i] = cost[i][j];
  std::vector<int> col_to_row = assign_rows_le_cols(t);
  std::vector<int> row_to_col(n, -1);
  for (std::size_t j = 0; j < m; ++j)
    if (col_to_row[j] >= 0) row_to_col[col_to_row[j]] = static_cast<int>(j);
  return row_to_col;
}

std::size_t ScoreMatrix::row_index(const std::string& address) {
  for (std::size_t i = 0; i < addresses_.size(); ++i)
    if (addresses_[i] == address) return i;
  addresses_.push_back(address);
  cells_.emplace_back();
  for (auto& row : cells_)
    while (row.size() < visual_ids_.size())
      row.emplace_back(window_capacity_);
  return addresses_.size() - 1;
}

std::size_t ScoreMatrix::col_index(const std::string& visual_id) {
  for (std::size_t j = 0; j < visual_ids_.size(); ++j)
    if (visual_ids_[j] == visual_id) return j;
  visual_ids_.push_back(visual_id);
  for (auto& row : cells_)
    while (row.size() < visual_ids_.size())
      row.emplace_back(window_capacity_);
  return visual_ids_.size() - 1;
}

PairAccumulator& ScoreMatrix::cell_mut(const std::string& address,
                                       const std::string& visual_id) {
  std::size_t i = row_index(address);
  std::size_t j = col_index(visual_id);
  return cells_[i][j];
}

void ScoreMatrix::ingest(const std::string& address,
                         const std::string& visual_id, double v1, double v2) {
  cell_mut(address, visual_id).update_v(v1, v2);
}

void ScoreMatrix::ingest_omega(const std::string& address,
                               const std::string& visual_id, double v1,
                               double v2) {
  cell_mut(address, visual_id).update_omega(v1, v2);
}

const PairAccumulator& ScoreMatrix::cell(const std::string& address,
                                         const std::string& visual_id) const {
  for (std::size_t i = 0; i < addresses_.size(); ++i) {
    if (addresses_[i] != address) continue;
    for (std::size_t j = 0; j < visual_ids_.size(); ++j)
      if (visual_ids_[j] == visual_id) return cells_[i][j];
  }
  throw std::out_of_range("unknown (address, visual_id) pair");
}

bool ScoreMatrix::ready() const {
  if (cells_.empty() || visual_ids_.empty()) return false;
  for (const auto& row : cells_)
    for (const auto& acc : row)
      if (acc.count() < min_samples_) return false;
  return true;
}

std::optional<std::pair<std::string, std::string>> ScoreMatrix::best_pair(
    TestKind test) const {
  if (!ready()) return std::nullopt;

  double best = std::numeric_limits<double>::infinity();
  std::size_t bi = 0, bj = 0;
  bool have = false;
  for (std::size_t i = 0; i < addresses_.size(); ++i) {
    for (std::size_t j = 0; j < visual_ids_.size(); ++j) {
      const auto& acc = cells_[i][j];
      double stat = test == TestKind::T1 ? acc.t1_v.running_mean()
                                         : acc.t2_v.running_mean();
      bool better = !have || stat < best;
      if (!better && stat == best) {
        // Lexicographic tie-break on (address, visual_id).
        auto cur = std::tie(addresses_[i], visual_ids_[j]);
        auto prev = std::tie(addresses_[bi], visual_ids_[bj]);
        better = cur < prev;
      }
      if (better) {
        best = stat;
        bi = i;
        bj = j;
        have = true;
      }
    }
  }
  if (!have) return std::nullopt;
  return std::make_pair(addresses_[bi], visual_ids_[bj]);
}

std::optional<MatchReport> ScoreMatrix::full_assignment() const {
  if (!ready()) return std::nullopt;

  const std::size_t n = addresses_.size();
  const std::size_t m = visual_ids_.size();
  std::vector<std::vector<double>> cost(n, std::vector<double>(m));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      cost[i][j] = cells_[i][j].t1_v.running_mean();

  std::vector<int> row_to_col = solve_assignment(cost);

  MatchReport report;
  std::vector<char> col_used(m, false);
  for (std::size_t i = 0; i < n; ++i) {
    int j = row_to_col[i];
    if (j < 0) {
      report.unmatched_addresses.push_back(addresses_[i]);
      continue;
    }
    col_used[j] = true;
    MatchedPair p;
    p.address = addresses_[i];
    p.visual_id = visual_ids_[j];
    p.statistic = cost[i][j];
    p.t2_statistic = cells_[i][j].t2_v.running_mean();
    p.samples = cells_[i][j].count();
    double runner_up = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < m; ++k)
      if (static_cast<int>(k) != j) runner_up = std::min(runner_up, cost[i][k]);
    p.margin = (m > 1 && runner_up > p.statistic) ? runner_up - p.statistic
                                                  : 0.0;
    report.mapping.push_back(std::move(p));
  }
  for (std::size_t j = 0; j < m; ++j)
    if (!col_used[j]) report.unmatched_visual_ids.push_back(visual_ids_[j]);
  return report;
}

}  // namespace wmatch
