#include "rohm/diffusion.hpp"

#include <cmath>

namespace rohm {

void DiffusionSchedule::check_t(int t) const {
  if (t < 1 || t > steps)
    throw Error("diffusion: step t=" + std::to_string(t) + " out of range [1," +
                std::to_string(steps) + "]");
}

double DiffusionSchedule::alpha_at(int t) const {
  check_t(t);
  return alpha[t].item<double>();
}
double DiffusionSchedule::alpha_bar_at(int t) const {
  check_t(t);
  return alpha_bar[t].item<double>();
}
double DiffusionSchedule::sigma2_at(int t) const {
  check_t(t);
  return sigma2[t].item<double>();
}

DiffusionSchedule make_schedule(int steps, ScheduleKind kind) {
  if (steps < 2) throw Error("make_schedule: need at least 2 steps");
  DiffusionSchedule s;
  s.steps = steps;
  s.alpha = torch::ones({steps + 1}, f64());
  s.alpha_bar = torch::ones({steps + 1}, f64());
  s.sigma2 = torch::zeros({steps + 1}, f64());

  if (kind == ScheduleKind::kCosine) {
    // Nichol & Dhariwal cosine: alpha_bar(t) = f(t)/f(0),
    // f(t) = cos^2(((t/T + s) / (1 + s)) * pi/2), s = 0.008.
    const double offs = 0.008;
    auto f = [&](double t) {
      const double v = std::cos(((t / steps + offs) / (1.0 + offs)) * M_PI / 2.0);
      return v * v;
    };
    const double f0 = f(0.0);
    double prev = 1.0;
    for (int t = 1; t <= steps; ++t) {
      double ab = f(static_cast<double>(t)) / f0;
      double a = std::clamp(ab / prev, 0.001, 0.9999);
      ab = prev * a;
      s.alpha[t] = a;
      s.alpha_bar[t] = ab;
      prev = ab;
    }
  } else {
    // Linear beta schedule, scaled so endpoints match the reference
    // 1000-step (1e-4, 0.02) range for any T.
    const double scale = 1000.0 / steps;
    const double beta_start = scale * 1e-4;
    const double beta_end = scale * 0.02;
    double prev = 1.0;
    for (int t = 1; t <= steps; ++t) {
      const double beta =
          steps == 1 ? beta_start
                     : beta_start + (beta_end - beta_start) * (t - 1) / double(steps - 1);
      const double a = std::clamp(1.0 - beta, 0.001, 0.9999);
      s.alpha[t] = a;
      prev *= a;
      s.alpha_bar[t] = prev;
    }
  }

  // Posterior variances: beta_tilde_t = (1-ab_{t-1})/(1-ab_t) * (1-a_t).
  for (int t = 1; t <= steps; ++t) {
    const double ab = s.alpha_bar[t].item<double>();
    const double ab_prev = s.alpha_bar[t - 1].item<double>();
    const double beta = 1.0 - s.alpha[t].item<double>();
    s.sigma2[t] = t == 1 ? 0.0 : (1.0 - ab_prev) / (1.0 - ab) * beta;
  }
  return s;
}

Tensor q_sample(const Tensor& x0, int t, const Tensor& eps, const DiffusionSchedule& sched) {
  sched.check_t(t);
  if (!eps.sizes().equals(x0.sizes())) throw Error("q_sample: eps shape mismatch");
  const double ab = sched.alpha_bar_at(t);
  return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * eps;
}

Tensor posterior_mean(const Tensor& x_t, const Tensor& x0_hat, int t,
                      const DiffusionSchedule& sched) {
  sched.check_t(t);
  const double ab = sched.alpha_bar_at(t);
  const double ab_prev = sched.alpha_bar[t - 1].item<double>();
  const double a = sched.alpha_at(t);
  const double beta = 1.0 - a;
  const double coef0 = std::sqrt(ab_prev) * beta / (1.0 - ab);
  const double coef_t = std::sqrt(a) * (1.0 - ab_prev) / (1.0 - ab);
  return coef0 * x0_hat + coef_t * x_t;
}

void GuidanceConfig::validate(int total_steps) const {
  if (lambda_skate < 0 || lambda_2d < 0) throw ConfigError("guidance: negative weight");
  if (skip_tail < 0 || skip_tail >= active_window || active_window > total_steps)
    throw ConfigError("guidance: require 0 <= skip_tail < active_window <= T");
}

Tensor ancestral_sample(const DenoiserFn& denoiser, torch::IntArrayRef shape,
                        const DiffusionSchedule& sched, uint64_t seed,
                        const GuidanceConfig* guidance, const GuidanceGradFn& guidance_grad,
                        torch::ScalarType dtype) {
  const bool guided = guidance && guidance->enabled() && guidance_grad;
  if (guided) guidance->validate(sched.steps);
  auto gen = make_generator(seed);
  auto opts = torch::TensorOptions().dtype(dtype);
  Tensor x_t = torch::randn(shape, gen, opts);
  Tensor x0_hat;
  for (int t = sched.steps; t >= 1; --t) {
    x0_hat = denoiser(x_t, t);
    if (!torch::isfinite(x0_hat).all().item<bool>())
      throw Error("ancestral_sample: non-finite denoiser output at t=" + std::to_string(t));
    Tensor mean = posterior_mean(x_t, x0_hat, t, sched);
    const double var = sched.sigma2_at(t);
    if (guided && guidance->active_at(t)) {
      Tensor grad = guidance_grad(x0_hat, t);
      if (grad.defined()) mean = mean - var * grad.to(dtype);
    }
    if (t > 1) {
      x_t = mean + std::sqrt(var) * torch::randn(shape, gen, opts);
    } else {
      x_t = mean;
    }
    if (!torch::isfinite(x_t).all().item<bool>())
      throw Error("ancestral_sample: non-finite state after step t=" + std::to_string(t));
  }
  return x_t;  // equals x0_hat estimate at t=1 (sigma2(1) = 0)
}

}  // namespace rohm
