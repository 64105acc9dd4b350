#include "testing.hpp"

#include <cstdio>
#include <filesystem>

#include <rohm/kinematics.hpp>
#include <rohm/skeleton.hpp>

using namespace rohm;

namespace {
BodyParamsSeq rest_pose(int64_t n, double beta0 = 0.0) {
  BodyParamsSeq p;
  p.trans = torch::zeros({n, 3}, f64());
  p.orient = identity_rot6d().expand({n, 6}).clone();
  p.pose = identity_rot6d().expand({n, kNumLocalJoints, 6}).clone();
  p.shape = torch::zeros({n, kNumShapeCoeffs}, f64());
  p.shape.select(1, 0) = beta0;
  return p;
}
}  // namespace

TEST_CASE("default skeleton is well formed") {
  auto skel = default_skeleton();
  skel.validate();
  CHECK(skel.joint_names.size() == 22);
  CHECK(skel.parents[0] == -1);
  for (int j = 1; j < kNumJoints; ++j) CHECK(skel.parents[j] < j);
  CHECK(skel.joint_index("pelvis") == 0);
  CHECK(skel.foot_joint_ids[0] == skel.joint_index("left_ankle"));
  CHECK(skel.foot_joint_ids[1] == skel.joint_index("left_toe"));
  CHECK(skel.foot_joint_ids[2] == skel.joint_index("right_ankle"));
  CHECK(skel.foot_joint_ids[3] == skel.joint_index("right_toe"));
}

TEST_CASE("zero shape coefficients reproduce rest offsets exactly") {
  auto skel = default_skeleton();
  auto off = skel.offsets_for_shape(torch::zeros({kNumShapeCoeffs}, f64()));
  CHECK(torch::equal(off, skel.rest_offsets));
}

TEST_CASE("increasing beta0 increases standing height") {
  auto skel = default_skeleton();
  auto h = [&](double b0) {
    auto joints = forward_kinematics(skel, rest_pose(2, b0));
    return joints.select(-1, 2).max().item<double>();
  };
  CHECK(h(1.0) > h(0.0));
  CHECK(h(0.0) > h(-1.0));
  CHECK(h(0.0) == doctest::Approx(1.7).epsilon(0.06));  // rough adult height
}

TEST_CASE("lower and upper body partitions") {
  auto skel = default_skeleton();
  auto lower = skel.lower_body_joints();
  auto upper = skel.upper_body_joints();
  CHECK(lower.size() == 8);
  CHECK(upper.size() == 13);  // everything else except the pelvis
  for (int j : lower) CHECK(j != 0);
  for (int j : upper) CHECK(j != 0);
}

TEST_CASE("skeleton json round trip") {
  auto skel = default_skeleton();
  auto path = std::filesystem::temp_directory_path() / "skel_rt.json";
  save_skeleton(skel, path);
  auto back = load_skeleton(path);
  back.validate();
  CHECK(back.joint_names == skel.joint_names);
  CHECK(back.parents == skel.parents);
  CHECK((back.rest_offsets - skel.rest_offsets).abs().max().item<double>() < 1e-12);
  CHECK((back.shape_basis - skel.shape_basis).abs().max().item<double>() < 1e-12);
  CHECK(back.foot_joint_ids == skel.foot_joint_ids);
  std::filesystem::remove(path);
}

TEST_CASE("shipped skeleton file matches the built-in body") {
  auto shipped = std::filesystem::path(ROHM_SOURCE_DIR) / "data" / "skeleton.json";
  REQUIRE(std::filesystem::exists(shipped));
  auto skel = load_skeleton(shipped);
  skel.validate();
  CHECK(skel.joint_names == default_skeleton().joint_names);
}
