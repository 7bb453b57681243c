#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>

namespace wmatch {

struct WatermarkConfig {
  double sigma2_e_v = 0.0;      // (m/s)^2
  double sigma2_e_omega = 0.0;  // (rad/s)^2
  std::uint64_t seed = 0;
};

struct ExcitationSample {
  std::int64_t tick = 0;
  double e_v = 0.0;      // m/s
  double e_omega = 0.0;  // rad/s
};

// Seeded Gaussian private-excitation source. One generator per vehicle;
// same config gives the same stream.
class WatermarkGenerator {
 public:
  explicit WatermarkGenerator(const WatermarkConfig& config)
      : rng_(config.seed),
        sd_v_(std::sqrt(require_nonneg(config.sigma2_e_v))),
        sd_omega_(std::sqrt(require_nonneg(config.sigma2_e_omega))) {}

  ExcitationSample draw() {
    ExcitationSample s;
    s.tick = tick_++;
    s.e_v = sd_v_ > 0.0 ? sd_v_ * normal_(rng_) : 0.0;
    s.e_omega = sd_omega_ > 0.0 ? sd_omega_ * normal_(rng_) : 0.0;
    return s;
  }

 private:
  static double require_nonneg(double v) {
    if (!(v >= 0.0))
      throw std::invalid_argument("watermark variance must be >= 0");
    return v;
  }

  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  double sd_v_;
  double sd_omega_;
  std::int64_t tick_ = 0;
};

// u[t] = u^g[t] + e[t], per channel.
inline void inject(double u_g_v, double u_g_omega, const ExcitationSample& e,
                   double& u_v, double& u_omega) {
  u_v = u_g_v + e.e_v;
  u_omega = u_g_omega + e.e_omega;
}

}  // namespace wmatch
