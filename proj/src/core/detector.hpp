#pragma once

#include <cstdint>
#include <deque>
#include <stdexcept>

namespace wmatch {

struct ScalarModel {
  double a = 0.0;        // state coefficient
  double b = 1.0;        // input gain
  double sigma2_w = 0.0; // process-noise variance
};

struct NoiseConfig {
  double sigma2_w_v = 0.0;      // (m/s)^2
  double sigma2_w_omega = 0.0;  // (rad/s)^2
};

// r = z[t] - a z[t-1] - b u^g[t-1] - b e[t-1]; honest limit sigma_w^2.
inline double residual_t1_scalar(double z_t, double z_prev, double u_g_prev,
                                 double e_prev, const ScalarModel& m) {
  return z_t - m.a * z_prev - m.b * u_g_prev - m.b * e_prev;
}

// r = z[t] - a z[t-1] - b u^g[t-1]; honest limit b^2 sigma_e^2 + sigma_w^2.
inline double residual_t2_scalar(double z_t, double z_prev, double u_g_prev,
                                 const ScalarModel& m) {
  return z_t - m.a * z_prev - m.b * u_g_prev;
}

// V1 = o_v[t] - u^g_v[t-1] - e_v[t-1]; matched pairs leave only process
// noise. Grouped as o - (u_g + e) so a noise-free sensor recovers the exact
// noise value the simulator applied.
inline double residual_v1(double o_v_t, double u_g_v_prev, double e_v_prev) {
  return o_v_t - (u_g_v_prev + e_v_prev);
}

// V2 = o_v[t] - u^g_v[t-1]; the watermark stays in the residual.
inline double residual_v2(double o_v_t, double u_g_v_prev) {
  return o_v_t - u_g_v_prev;
}

// Running sum of squared residuals plus a ring of the most recent squares
// for the moving-window statistic.
class ResidualStats {
 public:
  explicit ResidualStats(std::size_t window_capacity = 20)
      : capacity_(window_capacity) {
    if (capacity_ == 0)
      throw std::invalid_argument("window capacity must be >= 1");
  }

  void push(double residual) {
    const double sq = residual * residual;
    ++count_;
    sum_sq_ += sq;
    window_.push_back(sq);
    if (window_.size() > capacity_) window_.pop_front();
  }

  std::uint64_t count() const { return count_; }
  double sum_sq() const { return sum_sq_; }

  // (1/t) sum of squared residuals over everything seen.
  double running_mean() const {
    return count_ == 0 ? 0.0 : sum_sq_ / static_cast<double>(count_);
  }

  // Mean over the last min(count, w) squared residuals. Partial windows use
  // whatever is available.
  double windowed_mean(std::size_t w) const {
    if (w == 0) throw std::invalid_argument("window must be >= 1");
    if (window_.empty()) return 0.0;
    std::size_t n = w < window_.size() ? w : window_.size();
    double s = 0.0;
    for (std::size_t i = window_.size() - n; i < window_.size(); ++i)
      s += window_[i];
    return s / static_cast<double>(n);
  }

  std::size_t window_capacity() const { return capacity_; }

 private:
  std::size_t capacity_;
  std::uint64_t count_ = 0;
  double sum_sq_ = 0.0;
  std::deque<double> window_;
};

// All running/windowed second moments for one (address, visual ID) pair:
// both tests, both velocity channels.
struct PairAccumulator {
  ResidualStats t1_v, t2_v, t1_omega, t2_omega;

  explicit PairAccumulator(std::size_t window_capacity = 20)
      : t1_v(window_capacity),
        t2_v(window_capacity),
        t1_omega(window_capacity),
        t2_omega(window_capacity) {}

  void update_v(double v1, double v2) {
    t1_v.push(v1);
    t2_v.push(v2);
  }
  void update_omega(double v1, double v2) {
    t1_omega.push(v1);
    t2_omega.push(v2);
  }

  std::uint64_t count() const { return t1_v.count(); }
};

struct TestVerdict {
  double statistic = 0.0;  // Q = sum r^2 / sigma^2
  std::uint64_t dof = 0;
  double lower = 0.0;
  double upper = 0.0;
  bool pass = false;
};

// Standard-normal quantile (Acklam's rational approximation).
double normal_quantile(double p);

// Chi-square quantile via the Wilson-Hilferty transform.
double chi2_quantile(double p, std::uint64_t dof);

// Finite-time two-sided chi-square acceptance test on Q = sum_sq / sigma2
// against chi2_{count} quantiles at alpha/2 and 1-alpha/2. Closed interval.
TestVerdict chi2_test(double sum_sq, std::uint64_t count, double sigma2,
                      double alpha);

}  // namespace wmatch
