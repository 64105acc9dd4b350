#pragma once

#include <functional>

#include "rohm/common.hpp"

namespace rohm {

enum class ScheduleKind { kCosine, kLinear };

// DDPM variance schedule. Indexing is 1-based over steps t in [1,T];
// alpha_bar(0) == 1 by convention and sigma2(1) == 0 so the last sampling
// step is deterministic.
struct DiffusionSchedule {
  int steps = 0;
  Tensor alpha;      // [T+1] float64, alpha[0] unused (=1)
  Tensor alpha_bar;  // [T+1], alpha_bar[0] = 1
  Tensor sigma2;     // [T+1] posterior variances, sigma2[1] = 0

  double alpha_at(int t) const;
  double alpha_bar_at(int t) const;
  double sigma2_at(int t) const;
  void check_t(int t) const;
};

DiffusionSchedule make_schedule(int steps, ScheduleKind kind = ScheduleKind::kCosine);

// X_t = sqrt(alpha_bar_t) X0 + sqrt(1 - alpha_bar_t) eps.
Tensor q_sample(const Tensor& x0, int t, const Tensor& eps, const DiffusionSchedule& sched);

// Mean of q(X_{t-1} | X_t, X0_hat).
Tensor posterior_mean(const Tensor& x_t, const Tensor& x0_hat, int t,
                      const DiffusionSchedule& sched);

// Score-guidance settings: guidance applies during the last `active_window`
// steps, excluding the final `skip_tail` steps where the modulation variance
// vanishes. Requires 0 <= skip_tail < active_window <= T at use time.
struct GuidanceConfig {
  double lambda_skate = 0.0;
  double lambda_2d = 0.0;
  int active_window = 100;
  int skip_tail = 0;

  bool enabled() const { return lambda_skate > 0.0 || lambda_2d > 0.0; }
  bool active_at(int t) const { return t <= active_window && t > skip_tail; }
  void validate(int total_steps) const;
};

// Denoiser: (X_t, t) -> X0_hat. Conditioning is captured by the closure.
using DenoiserFn = std::function<Tensor(const Tensor& x_t, int t)>;

// Combined weighted guidance gradient at X0_hat (lambdas already applied);
// the sampling mean is shifted by -Sigma_t * grad so samples descend the
// penalty. Return an undefined tensor to skip guidance for the step.
using GuidanceGradFn = std::function<Tensor(const Tensor& x0_hat, int t)>;

// x0-prediction ancestral sampling, starting from standard normal X_T.
// Deterministic given the seed. Throws on NaN with step diagnostics.
Tensor ancestral_sample(const DenoiserFn& denoiser, torch::IntArrayRef shape,
                        const DiffusionSchedule& sched, uint64_t seed,
                        const GuidanceConfig* guidance = nullptr,
                        const GuidanceGradFn& guidance_grad = nullptr,
                        torch::ScalarType dtype = torch::kFloat32);

}  // namespace rohm
