#include "testing.hpp"

#include <rohm/datagen.hpp>
#include <rohm/metrics.hpp>

using namespace rohm;

namespace {
Tensor random_joints(int64_t n, uint64_t seed) {
  auto gen = make_generator(seed);
  return torch::randn({n, kNumJoints, 3}, gen, f64());
}
}  // namespace

TEST_CASE("joint errors: zeros, translation split, and brute-force oracle") {
  auto gt = random_joints(8, 1);
  auto vis = torch::ones({8, kNumJoints}, f64());

  SUBCASE("pred == gt -> all zeros") {
    auto e = joint_errors(gt, gt, vis);
    CHECK(e.gmpjpe_all == 0.0);
    CHECK(e.mpjpe_all == 0.0);
    CHECK(e.gmpjpe_occ == 0.0);  // empty partition reports 0
  }
  SUBCASE("uniform world offset: gmpjpe 50mm, mpjpe 0") {
    auto pred = gt + torch::tensor({0.05, 0.0, 0.0}, f64());
    auto e = joint_errors(pred, gt, vis);
    CHECK(e.gmpjpe_all == doctest::Approx(50.0));
    CHECK(e.mpjpe_all == doctest::Approx(0.0));
  }
  SUBCASE("random case against a per-joint oracle") {
    auto gen = make_generator(5);
    auto pred = gt + 0.02 * torch::randn(gt.sizes(), gen, f64());
    auto jvis = (torch::rand({8, kNumJoints}, gen, f64()) > 0.5).to(torch::kFloat64);
    auto e = joint_errors(pred, gt, jvis);
    double g_all = 0, g_vis = 0, g_occ = 0, m_vis = 0;
    int64_t c_all = 0, c_vis = 0, c_occ = 0;
    for (int64_t n = 0; n < 8; ++n) {
      auto aligned = pred[n] - (pred[n][0] - gt[n][0]);
      for (int j = 0; j < kNumJoints; ++j) {
        const double d = (pred[n][j] - gt[n][j]).norm().item<double>() * 1000.0;
        const double m = (aligned[j] - gt[n][j]).norm().item<double>() * 1000.0;
        g_all += d;
        ++c_all;
        if (jvis[n][j].item<double>() > 0.5) {
          g_vis += d;
          m_vis += m;
          ++c_vis;
        } else {
          g_occ += d;
          ++c_occ;
        }
      }
    }
    CHECK(e.gmpjpe_all == doctest::Approx(g_all / c_all).epsilon(1e-9));
    CHECK(e.gmpjpe_vis == doctest::Approx(g_vis / c_vis).epsilon(1e-9));
    CHECK(e.gmpjpe_occ == doctest::Approx(g_occ / c_occ).epsilon(1e-9));
    CHECK(e.mpjpe_vis == doctest::Approx(m_vis / c_vis).epsilon(1e-9));
  }
  SUBCASE("mpjpe invariant to global translation of pred; gmpjpe is not") {
    auto gen = make_generator(6);
    auto pred = gt + 0.01 * torch::randn(gt.sizes(), gen, f64());
    auto e0 = joint_errors(pred, gt, vis);
    auto e1 = joint_errors(pred + torch::tensor({1.0, -2.0, 0.5}, f64()), gt, vis);
    CHECK(e1.mpjpe_all == doctest::Approx(e0.mpjpe_all).epsilon(1e-12));
    CHECK(e1.gmpjpe_all > e0.gmpjpe_all);
  }
}

TEST_CASE("acceleration metric") {
  SUBCASE("constant velocity, no gt -> 0") {
    auto v = torch::tensor({0.1, 0.0, 0.0}, f64());
    auto joints = torch::zeros({10, kNumJoints, 3}, f64());
    for (int64_t n = 0; n < 10; ++n) joints[n] += v * double(n);
    CHECK(accel_metric(joints, std::nullopt) == doctest::Approx(0.0));
  }
  SUBCASE("pred == gt -> 0") {
    auto j = random_joints(10, 2);
    CHECK(accel_metric(j, j) == doctest::Approx(0.0));
  }
  SUBCASE("quadratic trajectory recovers |a|") {
    const double fps = 30.0, a = 2.5;
    auto joints = torch::zeros({12, kNumJoints, 3}, f64());
    for (int64_t n = 0; n < 12; ++n)
      joints.select(0, n).select(-1, 0) = 0.5 * a * (n / fps) * (n / fps);
    CHECK(accel_metric(joints, std::nullopt, fps) == doctest::Approx(a).epsilon(1e-9));
  }
  SUBCASE("too short") {
    CHECK_THROWS_AS(accel_metric(random_joints(2, 3), std::nullopt), Error);
  }
}

TEST_CASE("contact accuracy counts matching labels") {
  auto gen = make_generator(9);
  auto gt = (torch::rand({20, 4}, gen, f64()) > 0.5).to(torch::kFloat64);
  CHECK(contact_accuracy(gt, gt) == 1.0);
  CHECK(contact_accuracy(1.0 - gt, gt) == 0.0);
  auto half = gt.clone();
  half.slice(0, 0, 10) = 1.0 - half.slice(0, 0, 10);
  CHECK(contact_accuracy(half, gt) == 0.5);
  // Continuous predictions threshold at 0.5.
  CHECK(contact_accuracy(gt * 0.6 + 0.2, gt) == 1.0);
}

TEST_CASE("skating ratio: constructed cases and threshold monotonicity") {
  auto skel = default_skeleton();
  const int64_t n = 11;  // 10 transitions
  // Rest-pose feet heights: ankles 0.08, toes 0.02 -> below the height gates.
  BodyParamsSeq p;
  p.trans = torch::zeros({n, 3}, f64());
  p.orient = identity_rot6d().expand({n, 6}).clone();
  p.pose = identity_rot6d().expand({n, kNumLocalJoints, 6}).clone();
  p.shape = torch::zeros({n, kNumShapeCoeffs}, f64());
  auto base = forward_kinematics(skel, p);

  SUBCASE("static clip -> 0") { CHECK(skating_ratio(skel, base) == 0.0); }
  SUBCASE("glide for 30% of transitions -> 0.3") {
    auto joints = base.clone();
    // Whole body slides at 0.2 m/s during the first 3 transitions.
    double x = 0;
    for (int64_t f = 0; f < n; ++f) {
      joints[f] += torch::tensor({x, 0.0, 0.0}, f64());
      if (f < 3) x += 0.2 / 30.0;
    }
    CHECK(skating_ratio(skel, joints) == doctest::Approx(0.3));
  }
  SUBCASE("airborne glide -> 0 via the height gate") {
    auto joints = base + torch::tensor({0.0, 0.0, 0.5}, f64());
    double x = 0;
    for (int64_t f = 0; f < n; ++f) {
      joints[f] += torch::tensor({x, 0.0, 0.0}, f64());
      x += 0.2 / 30.0;
    }
    CHECK(skating_ratio(skel, joints) == 0.0);
  }
  SUBCASE("lowering the speed threshold never lowers the ratio") {
    auto clip = generate_clip(MotionStyle::kWalk, 8);
    auto joints = forward_kinematics(skel, clip.params);
    SkatingThresholds t5{0.05, 0.10, 0.15}, t10{0.10, 0.10, 0.15}, t15{0.15, 0.10, 0.15};
    const double r5 = skating_ratio(skel, joints, kFps, t5);
    const double r10 = skating_ratio(skel, joints, kFps, t10);
    const double r15 = skating_ratio(skel, joints, kFps, t15);
    CHECK(r5 >= r10);
    CHECK(r10 >= r15);
  }
}

TEST_CASE("penetration distance over toe joints") {
  auto skel = default_skeleton();
  auto joints = torch::zeros({5, kNumJoints, 3}, f64());
  joints.select(-1, 2) = 0.3;
  CHECK(penetration_dist(skel, joints) == 0.0);
  for (int toe : skel.toe_ids) joints.select(1, toe).select(-1, 2) = -0.005;
  CHECK(penetration_dist(skel, joints) == doctest::Approx(5.0));
  // Mixed: one toe at -4mm, the other above ground -> mean 2mm.
  joints.select(1, skel.toe_ids[0]).select(-1, 2) = -0.004;
  joints.select(1, skel.toe_ids[1]).select(-1, 2) = 0.01;
  CHECK(penetration_dist(skel, joints) == doctest::Approx(2.0));
}

TEST_CASE("metrics are invariant to consistent joint permutations") {
  auto gt = random_joints(6, 10);
  auto gen = make_generator(11);
  auto pred = gt + 0.01 * torch::randn(gt.sizes(), gen, f64());
  auto vis = (torch::rand({6, kNumJoints}, gen, f64()) > 0.3).to(torch::kFloat64);
  auto e = joint_errors(pred, gt, vis);
  auto perm = torch::randperm(kNumJoints, gen, torch::kLong);
  auto e2 = joint_errors(pred.index_select(1, perm), gt.index_select(1, perm),
                         vis.index_select(1, perm));
  // Pelvis alignment depends on joint 0, so compare the world-frame numbers.
  CHECK(e2.gmpjpe_all == doctest::Approx(e.gmpjpe_all).epsilon(1e-12));
  CHECK(e2.gmpjpe_vis == doctest::Approx(e.gmpjpe_vis).epsilon(1e-12));
  CHECK(e2.gmpjpe_occ == doctest::Approx(e.gmpjpe_occ).epsilon(1e-12));
}

TEST_CASE("eval report json round trip and table") {
  EvalReport r;
  r.gmpjpe_all = 12.5;
  r.skating_ratio = 0.25;
  r.contact_acc = 0.9;
  auto back = EvalReport::from_json(r.to_json());
  CHECK(back.gmpjpe_all == r.gmpjpe_all);
  CHECK(back.skating_ratio == r.skating_ratio);
  CHECK(back.contact_acc == r.contact_acc);
  CHECK(!r.table().empty());
}
