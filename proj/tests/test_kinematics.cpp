#include "testing.hpp"

#include <rohm/kinematics.hpp>

using namespace rohm;

namespace {

BodyParamsSeq random_params(int64_t n, uint64_t seed) {
  auto gen = make_generator(seed);
  BodyParamsSeq p;
  p.trans = torch::randn({n, 3}, gen, f64());
  p.orient = matrix_to_rot6d(axis_angle_to_matrix(torch::randn({n, 3}, gen, f64())));
  p.pose = matrix_to_rot6d(
      axis_angle_to_matrix(torch::randn({n, kNumLocalJoints, 3}, gen, f64()) * 0.8));
  p.shape = torch::rand({n, kNumShapeCoeffs}, gen, f64()) * 2.0 - 1.0;
  return p;
}

// Independent per-joint chain oracle: explicit rotation products along the
// ancestor chain, scalar loops only.
Tensor fk_oracle(const Skeleton& skel, const BodyParamsSeq& params) {
  const int64_t n = params.frames();
  auto offsets = skel.offsets_for_shape(params.shape);  // [N,22,3]
  auto root_rot = rot6d_to_matrix(params.orient);
  auto child_rot = rot6d_to_matrix(params.pose);
  auto out = torch::zeros({n, kNumJoints, 3}, f64());
  for (int64_t f = 0; f < n; ++f) {
    for (int j = 0; j < kNumJoints; ++j) {
      // Chain from root to j.
      std::vector<int> chain;
      for (int k = j; k != -1; k = skel.parents[k]) chain.insert(chain.begin(), k);
      double pos[3] = {params.trans[f][0].item<double>(), params.trans[f][1].item<double>(),
                       params.trans[f][2].item<double>()};
      // Walk the chain: each joint's offset is rotated by the frame above it
      // (the root offset by the root's own frame).
      double prot[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
      for (size_t ci = 0; ci < chain.size(); ++ci) {
        int k = chain[ci];
        auto lr = k == 0 ? root_rot[f] : child_rot[f][k - 1];
        double nr[3][3];
        for (int r = 0; r < 3; ++r)
          for (int c = 0; c < 3; ++c) {
            nr[r][c] = 0;
            for (int m = 0; m < 3; ++m) nr[r][c] += prot[r][m] * lr[m][c].item<double>();
          }
        const bool use_own_frame = (k == 0);  // root offset lives in the body frame
        double o[3] = {offsets[f][k][0].item<double>(), offsets[f][k][1].item<double>(),
                       offsets[f][k][2].item<double>()};
        for (int r = 0; r < 3; ++r) {
          double step = 0;
          for (int m = 0; m < 3; ++m) step += (use_own_frame ? nr[r][m] : prot[r][m]) * o[m];
          pos[r] += step;
        }
        for (int r = 0; r < 3; ++r)
          for (int c = 0; c < 3; ++c) prot[r][c] = nr[r][c];
      }
      out[f][j] = torch::tensor({pos[0], pos[1], pos[2]}, f64());
    }
  }
  return out;
}

}  // namespace

TEST_CASE("rest pose accumulates offsets along parents") {
  auto skel = default_skeleton();
  BodyParamsSeq p;
  p.trans = torch::zeros({2, 3}, f64());
  p.orient = identity_rot6d().expand({2, 6}).clone();
  p.pose = identity_rot6d().expand({2, kNumLocalJoints, 6}).clone();
  p.shape = torch::zeros({2, kNumShapeCoeffs}, f64());
  auto joints = forward_kinematics(skel, p);
  auto expect = torch::zeros({kNumJoints, 3}, f64());
  for (int j = 0; j < kNumJoints; ++j) {
    expect[j] = skel.rest_offsets[j];
    if (skel.parents[j] >= 0) expect[j] += expect[skel.parents[j]];
  }
  CHECK((joints[0] - expect).abs().max().item<double>() < 1e-12);
  CHECK((joints[1] - expect).abs().max().item<double>() < 1e-12);
}

TEST_CASE("translation equivariance") {
  auto skel = default_skeleton();
  auto p = random_params(4, 3);
  auto joints = forward_kinematics(skel, p);
  auto q = p.clone();
  auto d = torch::tensor({1.0, 2.0, 3.0}, f64());
  q.trans += d;
  auto shifted = forward_kinematics(skel, q);
  CHECK((shifted - joints - d).abs().max().item<double>() < 1e-12);
}

TEST_CASE("rigid equivariance under global rotation") {
  auto skel = default_skeleton();
  auto p = random_params(3, 5);
  auto joints = forward_kinematics(skel, p);
  auto r = axis_angle_to_matrix(torch::tensor({0.3, -0.7, 1.1}, f64()));
  auto d = torch::tensor({-1.0, 0.5, 2.0}, f64());
  auto q = p.clone();
  q.orient = matrix_to_rot6d(torch::matmul(r, rot6d_to_matrix(p.orient)));
  q.trans = torch::matmul(p.trans, r.transpose(0, 1)) + d;
  auto moved = forward_kinematics(skel, q);
  auto oracle = torch::matmul(joints, r.transpose(0, 1)) + d;
  CHECK((moved - oracle).abs().max().item<double>() < 1e-9);
}

TEST_CASE("fk matches the brute-force chain oracle on random inputs") {
  auto skel = default_skeleton();
  // 50 random frames here; the acceptance gate sweeps 1000.
  auto p = random_params(50, 17);
  auto joints = forward_kinematics(skel, p);
  auto oracle = fk_oracle(skel, p);
  CHECK((joints - oracle).abs().max().item<double>() < 1e-6);
}

TEST_CASE("contact labels: static, airborne, and scheduled gaits") {
  auto skel = default_skeleton();
  BodyParamsSeq p;
  p.trans = torch::zeros({10, 3}, f64());
  p.orient = identity_rot6d().expand({10, 6}).clone();
  p.pose = identity_rot6d().expand({10, kNumLocalJoints, 6}).clone();
  p.shape = torch::zeros({10, kNumShapeCoeffs}, f64());
  auto joints = forward_kinematics(skel, p);

  SUBCASE("static standing: all labels 1") {
    auto f = label_foot_contacts(skel, joints);
    CHECK(f.min().item<double>() == 1.0);
  }
  SUBCASE("airborne: all labels 0") {
    auto f = label_foot_contacts(skel, joints + torch::tensor({0.0, 0.0, 0.5}, f64()));
    CHECK(f.max().item<double>() == 0.0);
  }
  SUBCASE("fast feet: labels 0 despite low height") {
    auto moving = joints.clone();
    // Every foot joint translates 1 cm per frame -> 0.3 m/s at 30 fps.
    for (int64_t n = 0; n < 10; ++n)
      for (int id : skel.foot_joint_ids) moving[n][id][0] += 0.01 * n;
    auto f = label_foot_contacts(skel, moving);
    CHECK(f.max().item<double>() == 0.0);
  }
  SUBCASE("hand-computed schedule: one foot swings mid-clip") {
    auto moving = joints.clone();
    const int toe = skel.foot_joint_ids[1];  // left toe
    // Frames 3..6 move the left toe at 0.6 m/s; others static.
    double x = 0.0;
    for (int64_t n = 0; n < 10; ++n) {
      if (n >= 4 && n <= 7) x += 0.02;
      moving[n][toe][0] += x;
    }
    auto f = label_foot_contacts(skel, moving);
    // Transitions 3->4 .. 6->7 are fast; the last frame repeats frame 8's.
    for (int64_t n = 0; n < 10; ++n) {
      const bool expect = !(n >= 3 && n <= 6);
      CHECK(f[n][1].item<double>() == (expect ? 1.0 : 0.0));
    }
    CHECK(f.select(1, 0).min().item<double>() == 1.0);  // left ankle untouched
  }
  SUBCASE("single frame rejected") {
    CHECK_THROWS_AS(label_foot_contacts(skel, joints.slice(0, 0, 1)), Error);
  }
}
