#include "testing.hpp"

#include <cmath>

#include <rohm/diffusion.hpp>

using namespace rohm;

TEST_CASE("cosine schedule invariants at T=100 and T=1000") {
  for (int steps : {100, 1000}) {
    auto s = make_schedule(steps, ScheduleKind::kCosine);
    CHECK(s.alpha_bar_at(steps) < 0.01);
    CHECK(s.alpha_bar[0].item<double>() == 1.0);
    for (int t = 1; t <= steps; ++t) {
      CHECK(s.alpha_bar_at(t) < s.alpha_bar[t - 1].item<double>());
      CHECK(s.alpha_at(t) > 0.0);
      CHECK(s.alpha_at(t) < 1.0);
      CHECK(s.sigma2_at(t) >= 0.0);
    }
    CHECK(s.sigma2_at(1) == 0.0);
  }
}

TEST_CASE("linear schedule matches the closed-form oracle at T=10") {
  const int steps = 10;
  auto s = make_schedule(steps, ScheduleKind::kLinear);
  // Independent recomputation: betas linearly spaced over the scaled range.
  const double scale = 1000.0 / steps;
  const double b0 = scale * 1e-4, b1 = scale * 0.02;
  double ab = 1.0;
  for (int t = 1; t <= steps; ++t) {
    const double beta = b0 + (b1 - b0) * (t - 1) / double(steps - 1);
    const double a = std::clamp(1.0 - beta, 0.001, 0.9999);
    ab *= a;
    CHECK(s.alpha_at(t) == doctest::Approx(a).epsilon(1e-12));
    CHECK(s.alpha_bar_at(t) == doctest::Approx(ab).epsilon(1e-12));
    if (t > 1) {
      double ab_prev = ab / a;
      const double var = (1.0 - ab_prev) / (1.0 - ab) * (1.0 - a);
      CHECK(s.sigma2_at(t) == doctest::Approx(var).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(make_schedule(1), Error);
}

TEST_CASE("q_sample: deterministic part and monte-carlo statistics") {
  auto sched = make_schedule(100, ScheduleKind::kCosine);
  auto x0 = torch::tensor({1.0, -2.0, 0.5}, f64());

  SUBCASE("eps = 0") {
    auto xt = q_sample(x0, 37, torch::zeros({3}, f64()), sched);
    CHECK((xt - std::sqrt(sched.alpha_bar_at(37)) * x0).abs().max().item<double>() < 1e-12);
  }
  SUBCASE("t out of range") {
    CHECK_THROWS_AS(q_sample(x0, 0, torch::zeros({3}, f64()), sched), Error);
    CHECK_THROWS_AS(q_sample(x0, 101, torch::zeros({3}, f64()), sched), Error);
  }
  SUBCASE("mean and variance match the closed form within 2%") {
    auto gen = make_generator(4);
    for (int t : {1, 25, 50, 75, 100}) {
      // The sample-variance standard error is sqrt(2/n)*(1-ab); 50k draws put
      // the 2% bound at just over 3 sigma.
      const int draws = 50000;
      auto eps = torch::randn({draws, 3}, gen, f64());
      auto xt = q_sample(x0.expand({draws, 3}), t, eps, sched);
      const double ab = sched.alpha_bar_at(t);
      auto mean = xt.mean(0);
      auto var = xt.var(0);
      CHECK((mean - std::sqrt(ab) * x0).abs().max().item<double>() <
            0.02 * std::max(1.0, x0.abs().max().item<double>()));
      CHECK((var - (1.0 - ab)).abs().max().item<double>() < 0.02 * std::max(1.0 - ab, 0.05));
    }
  }
}

TEST_CASE("posterior mean endpoints and symbolic oracle") {
  auto sched = make_schedule(50, ScheduleKind::kCosine);
  auto gen = make_generator(8);
  auto x_t = torch::randn({5}, gen, f64());
  auto x0 = torch::randn({5}, gen, f64());

  // t = 1: the final step returns the estimate.
  CHECK((posterior_mean(x_t, x0, 1, sched) - x0).abs().max().item<double>() < 1e-12);

  for (int t : {2, 17, 50}) {
    const double ab = sched.alpha_bar_at(t);
    const double abp = sched.alpha_bar[t - 1].item<double>();
    const double a = sched.alpha_at(t);
    auto oracle = (std::sqrt(abp) * (1 - a) / (1 - ab)) * x0 +
                  (std::sqrt(a) * (1 - abp) / (1 - ab)) * x_t;
    CHECK((posterior_mean(x_t, x0, t, sched) - oracle).abs().max().item<double>() < 1e-12);
  }
}

TEST_CASE("ancestral sampling: fixed point, determinism, guidance plumbing") {
  auto sched = make_schedule(40, ScheduleKind::kCosine);

  SUBCASE("constant denoiser is a fixed point") {
    auto c = torch::tensor({3.0, -1.0}, torch::kFloat32);
    auto denoiser = [&](const Tensor&, int) { return c; };
    for (uint64_t seed : {1, 2, 3}) {
      auto out = ancestral_sample(denoiser, {2}, sched, seed);
      CHECK((out - c).abs().max().item<double>() < 1e-6);
    }
  }
  SUBCASE("same seed, same trajectory; different seed differs") {
    auto denoiser = [](const Tensor& x, int) { return 0.5 * x; };
    auto a = ancestral_sample(denoiser, {4}, sched, 9);
    auto b = ancestral_sample(denoiser, {4}, sched, 9);
    auto c = ancestral_sample(denoiser, {4}, sched, 10);
    CHECK(torch::equal(a, b));
    CHECK(!torch::equal(a, c));
  }
  SUBCASE("zero-weight guidance is bit-identical to the unguided path") {
    auto denoiser = [](const Tensor& x, int) { return 0.9 * x; };
    GuidanceConfig g;
    g.active_window = 40;
    auto grad = [](const Tensor& x, int) { return torch::ones_like(x) * 100.0; };
    auto guided = ancestral_sample(denoiser, {4}, sched, 5, &g, grad);
    auto plain = ancestral_sample(denoiser, {4}, sched, 5);
    CHECK(torch::equal(guided, plain));
  }
  SUBCASE("quadratic-score guidance shifts samples downhill") {
    // J(x) = 0.5 ||x - c||^2; the guided mean must move toward c.
    auto c = torch::full({2}, 5.0, torch::kFloat32);
    auto denoiser = [](const Tensor& x, int) { return x; };
    GuidanceConfig g;
    g.lambda_skate = 4.0;
    g.active_window = 40;
    auto grad = [&](const Tensor& x0_hat, int) { return g.lambda_skate * (x0_hat - c); };
    GuidanceConfig off;
    double d_guided = 0, d_plain = 0;
    for (uint64_t seed = 0; seed < 100; ++seed) {
      auto with_g = ancestral_sample(denoiser, {2}, sched, seed, &g, grad);
      auto without = ancestral_sample(denoiser, {2}, sched, seed);
      d_guided += (with_g - c).norm().item<double>();
      d_plain += (without - c).norm().item<double>();
    }
    CHECK(d_guided < d_plain);
  }
  SUBCASE("undefined gradient skips guidance for the step") {
    auto denoiser = [](const Tensor& x, int) { return 0.9 * x; };
    GuidanceConfig g;
    g.lambda_skate = 1.0;
    g.active_window = 40;
    auto grad = [](const Tensor&, int) { return Tensor(); };
    auto out = ancestral_sample(denoiser, {4}, sched, 5, &g, grad);
    CHECK(torch::equal(out, ancestral_sample(denoiser, {4}, sched, 5)));
  }
  SUBCASE("non-finite denoiser output aborts with diagnostics") {
    auto denoiser = [](const Tensor& x, int) {
      return x * std::numeric_limits<float>::quiet_NaN();
    };
    CHECK_THROWS_WITH_AS(ancestral_sample(denoiser, {2}, sched, 1),
                         doctest::Contains("t=40"), Error);
  }
}

TEST_CASE("guidance config validation and activity window") {
  GuidanceConfig g;
  g.lambda_skate = 1.0;
  g.active_window = 10;
  g.skip_tail = 2;
  g.validate(100);
  CHECK(g.active_at(10));
  CHECK(g.active_at(3));
  CHECK(!g.active_at(2));  // skip_tail
  CHECK(!g.active_at(11));
  g.skip_tail = 10;
  CHECK_THROWS_AS(g.validate(100), ConfigError);
  g.skip_tail = 0;
  g.active_window = 200;
  CHECK_THROWS_AS(g.validate(100), ConfigError);
}
