#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "rohm/common.hpp"

namespace rohm {

constexpr int kNumJoints = 22;
constexpr int kNumLocalJoints = 21;  // all joints except the pelvis root
constexpr int kNumShapeCoeffs = 10;
constexpr int kNumFootJoints = 4;

// 22-joint kinematic hierarchy with shape-dependent bone offsets.
// Topologically sorted: parents[j] < j for every non-root joint.
struct Skeleton {
  std::vector<std::string> joint_names;  // 22
  std::vector<int> parents;              // 22, root = -1
  Tensor rest_offsets;                   // [22,3] float64, meters
  Tensor shape_basis;                    // [10,22,3] float64, meters per unit coeff

  // Foot joints ordered (left_ankle, left_toe, right_ankle, right_toe);
  // contact label columns follow this order.
  std::array<int, 4> foot_joint_ids;
  std::array<int, 2> ankle_ids;
  std::array<int, 2> toe_ids;

  // Joints used to define the heading direction.
  int left_hip = 0, right_hip = 0, left_shoulder = 0, right_shoulder = 0;

  int joint_index(const std::string& name) const;
  std::vector<int> lower_body_joints() const;  // hips, knees, ankles, toes
  std::vector<int> upper_body_joints() const;  // everything else except the root

  // Per-joint offsets for given shape coefficients. betas: [...,10] -> [...,22,3].
  Tensor offsets_for_shape(const Tensor& betas) const;

  void validate() const;
};

// The built-in stand-in body: rough adult proportions, ~1.7 m tall,
// ground plane z = 0, +z up.
Skeleton default_skeleton();

// Versioned JSON document (names, parents, offsets, basis).
void save_skeleton(const Skeleton& skel, const std::filesystem::path& path);
Skeleton load_skeleton(const std::filesystem::path& path);

}  // namespace rohm
