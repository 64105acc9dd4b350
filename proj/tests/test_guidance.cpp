#include "testing.hpp"

#include <rohm/datagen.hpp>
#include <rohm/guidance.hpp>

using namespace rohm;

namespace {

CameraModel front_camera() {
  return CameraModel::looking_at(torch::tensor({3.0, 0.0, 1.0}, f64()),
                                 torch::tensor({0.0, 0.0, 1.0}, f64()), 800.0, 800.0, 640, 480);
}

MotionFeatures clip_features(const Skeleton& skel, uint64_t seed, int64_t n = 24) {
  auto clip = generate_clip(MotionStyle::kWalk, seed, {.n_frames = n});
  return encode_motion(skel, clip.params);
}

// Central finite differences of a scalar score along random channels.
// channel_limit > 0 restricts probes to the leading channels (used to skip
// the contact block, which j_skate deliberately treats as constant).
double fd_max_rel_error(const std::function<Tensor(const Tensor&)>& score, const Tensor& at,
                        int probes, uint64_t seed, int64_t channel_limit = 0) {
  auto x = at.clone().requires_grad_(true);
  auto val = score(x);
  auto grad = torch::autograd::grad({val}, {x})[0];
  auto gen = make_generator(seed);
  double worst = 0;
  const double h = 1e-5;
  auto flat = at.reshape({-1});
  auto gflat = grad.reshape({-1});
  const int64_t channels = at.size(-1);
  for (int p = 0; p < probes; ++p) {
    int64_t i = torch::randint(flat.numel(), {1}, gen, torch::kLong).item<int64_t>();
    if (channel_limit > 0)
      i = (i / channels) * channels +
          torch::randint(channel_limit, {1}, gen, torch::kLong).item<int64_t>();
    auto xp = flat.clone();
    auto xm = flat.clone();
    xp[i] += h;
    xm[i] -= h;
    const double fp = score(xp.reshape(at.sizes())).item<double>();
    const double fm = score(xm.reshape(at.sizes())).item<double>();
    const double fd = (fp - fm) / (2 * h);
    const double an = gflat[i].item<double>();
    // Central differences of a sum-of-squares score carry cancellation noise
    // around eps*|score|/h, so near-zero gradients cannot be compared
    // relatively; treat both measurements under 1e-5 as agreement.
    if (std::abs(fd) < 1e-5 && std::abs(an) < 1e-5) continue;
    const double denom = std::max({std::abs(fd), std::abs(an), 1e-6});
    worst = std::max(worst, std::abs(fd - an) / denom);
  }
  return worst;
}

}  // namespace

TEST_CASE("projection closed forms") {
  CameraModel cam;
  cam.fx = 1000;
  cam.fy = 1000;
  cam.cx = 500;
  cam.cy = 400;
  cam.rotation = torch::eye(3, f64());
  cam.translation = torch::zeros({3}, f64());
  cam.validate();

  auto on_axis = torch::tensor({0.0, 0.0, 2.0}, f64());
  auto px = project(on_axis, cam);
  CHECK(px[0].item<double>() == doctest::Approx(500.0));
  CHECK(px[1].item<double>() == doctest::Approx(400.0));

  auto off = torch::tensor({1.0, 0.5, 2.0}, f64());
  auto p1 = project(off, cam);
  CHECK(p1[0].item<double>() == doctest::Approx(500.0 + 1000.0 * 1.0 / 2.0));
  CHECK(p1[1].item<double>() == doctest::Approx(400.0 + 1000.0 * 0.5 / 2.0));

  // Doubling depth halves the offset from the principal point.
  auto p2 = project(torch::tensor({1.0, 0.5, 4.0}, f64()), cam);
  CHECK((p2[0].item<double>() - 500.0) == doctest::Approx((p1[0].item<double>() - 500.0) / 2));

  CHECK_THROWS_AS(project(torch::tensor({0.0, 0.0, -1.0}, f64()), cam), Error);
  CHECK(torch::isfinite(project(torch::tensor({0.0, 0.0, -1.0}, f64()), cam, false))
            .all()
            .item<bool>());
}

TEST_CASE("looking_at places the target at the image center") {
  auto cam = front_camera();
  auto px = project(torch::tensor({0.0, 0.0, 1.0}, f64()), cam);
  CHECK(px[0].item<double>() == doctest::Approx(cam.cx));
  CHECK(px[1].item<double>() == doctest::Approx(cam.cy));
}

TEST_CASE("j_skate: zero sets and the 2-frame hand case") {
  auto skel = default_skeleton();

  // A body gliding at 0.5 m/s with one foot flagged as contact.
  BodyParamsSeq p;
  p.trans = torch::zeros({2, 3}, f64());
  p.trans[1][0] = 0.5;  // with fps=1: velocity 0.5 m/s
  p.orient = identity_rot6d().expand({2, 6}).clone();
  p.pose = identity_rot6d().expand({2, kNumLocalJoints, 6}).clone();
  p.shape = torch::zeros({2, kNumShapeCoeffs}, f64());
  auto feats = encode_motion(skel, p, 1.0);
  auto pose = feats.pose.clone();
  pose.slice(-1, pose::kContact, pose::kContact + 4) = 0.0;
  pose.select(-1, pose::kContact) = 1.0;  // left ankle only

  CHECK(j_skate(skel, feats.traj, pose, 1.0).item<double>() == doctest::Approx(0.25));

  SUBCASE("zero velocity -> 0") {
    auto still = p.clone();
    still.trans[1][0] = 0.0;
    auto f2 = encode_motion(skel, still, 1.0);
    auto pz = f2.pose.clone();
    pz.slice(-1, pose::kContact, pose::kContact + 4) = 1.0;
    CHECK(j_skate(skel, f2.traj, pz, 1.0).item<double>() == doctest::Approx(0.0));
  }
  SUBCASE("no contacts -> 0") {
    auto pz = feats.pose.clone();
    pz.slice(-1, pose::kContact, pose::kContact + 4) = 0.0;
    CHECK(j_skate(skel, feats.traj, pz, 1.0).item<double>() == doctest::Approx(0.0));
  }
}

TEST_CASE("j_2d: zero sets and the 10-pixel hand case") {
  auto skel = default_skeleton();
  auto feats = clip_features(skel, 3, 8);
  auto cam = front_camera();
  auto dec = decode_motion(skel, feats.traj, feats.pose);

  Keypoints2D kp;
  kp.uv = project(dec.joints, cam);
  kp.conf = torch::ones({8, kNumJoints}, f64());
  CHECK(j_2d(skel, feats.traj, feats.pose, kp, cam).item<double>() == doctest::Approx(0.0));

  SUBCASE("zero confidence ignores arbitrary detections") {
    kp.uv += 500.0;
    kp.conf.zero_();
    CHECK(j_2d(skel, feats.traj, feats.pose, kp, cam).item<double>() == doctest::Approx(0.0));
  }
  SUBCASE("one joint off by 10px at conf 0.5 -> 25") {
    kp.conf.zero_();
    kp.conf[2][7] = 0.5;
    kp.uv[2][7][0] += 10.0;
    CHECK(j_2d(skel, feats.traj, feats.pose, kp, cam).item<double>() == doctest::Approx(25.0));
  }
}

TEST_CASE("analytic gradients match finite differences within 1e-4") {
  auto skel = default_skeleton();
  auto feats = clip_features(skel, 5, 10);
  auto cam = front_camera();
  auto dec = decode_motion(skel, feats.traj, feats.pose);
  Keypoints2D kp;
  auto gen = make_generator(12);
  kp.uv = project(dec.joints, cam) + 3.0 * torch::randn({10, kNumJoints, 2}, gen, f64());
  kp.conf = torch::rand({10, kNumJoints}, gen, f64());

  // Perturb the pose features a little so both scores sit away from zero.
  auto pose = feats.pose + 0.01 * torch::randn(feats.pose.sizes(), gen, f64());

  SUBCASE("j_skate") {
    auto score = [&](const Tensor& p) { return j_skate(skel, feats.traj, p); };
    CHECK(fd_max_rel_error(score, pose, 40, 1, pose::kContact) < 1e-4);
  }
  SUBCASE("j_2d w.r.t. pose") {
    auto score = [&](const Tensor& p) { return j_2d(skel, feats.traj, p, kp, cam); };
    CHECK(fd_max_rel_error(score, pose, 40, 2) < 1e-4);
  }
  SUBCASE("j_2d w.r.t. trajectory") {
    auto score = [&](const Tensor& t) { return j_2d(skel, t, pose, kp, cam); };
    CHECK(fd_max_rel_error(score, feats.traj.clone(), 40, 3) < 1e-4);
  }
}

TEST_CASE("grad_guidance: quadratic oracle and non-finite fallback") {
  auto at = torch::tensor({1.0, -2.0, 3.0}, f64());
  auto quad = [](const Tensor& x) { return 0.5 * x.square().sum(); };
  auto g = grad_guidance(quad, at);
  CHECK((g - at).abs().max().item<double>() < 1e-12);

  auto bad = [](const Tensor& x) { return (x / 0.0).sum(); };
  CHECK(!grad_guidance(bad, at).defined());
}

TEST_CASE("synthetic observations") {
  auto skel = default_skeleton();
  auto feats = clip_features(skel, 9, 16);
  auto joints = decode_motion(skel, feats.traj, feats.pose).joints;
  auto cam = front_camera();

  SUBCASE("zero noise, no dropout: exact projections, all-ones mask") {
    auto obs = synth_observations(joints, cam, 0.0, no_dropout(), skel, 1);
    CHECK((obs.keypoints.uv - project(joints, cam)).abs().max().item<double>() < 1e-9);
    CHECK(obs.keypoints.conf.min().item<double>() >= kOcclusionConfThreshold);
    CHECK(obs.masks.pose.min().item<double>() == 1.0);
  }
  SUBCASE("lower-half occluder zeroes exactly the joints below the midline") {
    auto rule = image_lower_half_occluder(cam);
    auto obs = synth_observations(joints, cam, 0.0, rule, skel, 2);
    auto uv = project(joints, cam);
    auto jv = joint_visibility_from_masks(obs.masks, skel);
    for (int64_t f = 0; f < 16; ++f)
      for (int j = 0; j < kNumJoints; ++j) {
        const bool dropped = uv[f][j][1].item<double>() > cam.height / 2.0;
        const double conf = obs.keypoints.conf[f][j].item<double>();
        if (dropped) {
          CHECK(conf == 0.0);
          CHECK(jv[f][j].item<double>() == 0.0);
        } else {
          CHECK(conf >= kOcclusionConfThreshold);
          CHECK(jv[f][j].item<double>() == 1.0);
        }
      }
  }
  SUBCASE("pixel noise std is calibrated") {
    auto obs = synth_observations(joints, cam, 2.0, no_dropout(), skel, 3);
    auto resid = obs.keypoints.uv - project(joints, cam);
    CHECK(resid.std().item<double>() == doctest::Approx(2.0).epsilon(0.05));
  }
}
