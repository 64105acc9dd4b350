#include <benchmark/benchmark.h>

#include "rohm/datagen.hpp"
#include "rohm/diffusion.hpp"
#include "rohm/models.hpp"

namespace {

using namespace rohm;

BodyParamsSeq random_params(int64_t n) {
  auto gen = make_generator(7);
  BodyParamsSeq p;
  p.trans = torch::randn({n, 3}, gen, f64());
  p.orient = matrix_to_rot6d(axis_angle_to_matrix(torch::randn({n, 3}, gen, f64())));
  p.pose = matrix_to_rot6d(
      axis_angle_to_matrix(torch::randn({n, kNumLocalJoints, 3}, gen, f64()) * 0.5));
  p.shape = torch::zeros({n, kNumShapeCoeffs}, f64());
  return p;
}

void BM_ForwardKinematics(benchmark::State& state) {
  auto skel = default_skeleton();
  auto params = random_params(state.range(0));
  for (auto _ : state) {
    auto joints = forward_kinematics(skel, params);
    benchmark::DoNotOptimize(joints.data_ptr());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardKinematics)->Arg(32)->Arg(144);

void BM_EncodeMotion(benchmark::State& state) {
  auto skel = default_skeleton();
  auto clip = generate_clip(MotionStyle::kWalk, 3, {.n_frames = state.range(0)});
  for (auto _ : state) {
    auto feats = encode_motion(skel, clip.params);
    benchmark::DoNotOptimize(feats.pose.data_ptr());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EncodeMotion)->Arg(144);

void BM_QSample(benchmark::State& state) {
  auto sched = make_schedule(100);
  auto gen = make_generator(5);
  auto x0 = torch::randn({8, 144, traj::kCompact}, gen);
  auto eps = torch::randn_like(x0);
  for (auto _ : state) {
    auto xt = q_sample(x0, 50, eps, sched);
    benchmark::DoNotOptimize(xt.data_ptr());
  }
}
BENCHMARK(BM_QSample);

void BM_TrajNetStep(benchmark::State& state) {
  torch::NoGradGuard ng;
  torch::manual_seed(1);
  TrajNetConfig cfg;
  cfg.channels = {32, 64, 128};
  cfg.temb_dim = 64;
  TrajNet net(cfg);
  net->eval();
  auto gen = make_generator(5);
  auto r_t = torch::randn({1, 144, traj::kCompact}, gen);
  auto cond = torch::randn({1, 144, traj::kCompact}, gen);
  auto t = torch::tensor({50L});
  for (auto _ : state) {
    auto out = net->forward(r_t, t, cond);
    benchmark::DoNotOptimize(out.data_ptr());
  }
}
BENCHMARK(BM_TrajNetStep);

void BM_PoseNetStep(benchmark::State& state) {
  torch::NoGradGuard ng;
  torch::manual_seed(1);
  TransformerConfig cfg;
  cfg.latent = 128;
  cfg.layers = 3;
  cfg.heads = 4;
  cfg.ff = 256;
  PoseNet net(cfg);
  net->eval();
  auto gen = make_generator(5);
  auto r0 = torch::randn({1, 144, traj::kCompact}, gen);
  auto p_t = torch::randn({1, 144, pose::kDim}, gen);
  auto cond = torch::randn({1, 144, pose::kDim}, gen);
  auto t = torch::tensor({50L});
  for (auto _ : state) {
    auto out = net->forward(r0, p_t, t, cond);
    benchmark::DoNotOptimize(out.data_ptr());
  }
}
BENCHMARK(BM_PoseNetStep);

}  // namespace

BENCHMARK_MAIN();
