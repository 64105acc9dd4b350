#pragma once

#include <filesystem>
#include <vector>

#include "rohm/kinematics.hpp"

namespace rohm {

// Over-parameterized motion features.
//
// Trajectory features R, 25 channels per frame:
//   [0:2)   r_l     pelvis xy projected on the ground, m
//   [2:4)   r_l_dot
//   [4]     r_a     heading angle about z, rad, temporally unwrapped
//   [5]     r_a_dot
//   [6]     r_z     pelvis height, m
//   [7:10)  gamma   global translation, m
//   [10:13) gamma_dot
//   [13:19) Phi     global orientation, 6D
//   [19:25) Phi_dot (per-component finite differences)
//
// Compact trajectory (the TrajNet state), 13 channels:
//   [0:2) r_l, [2] r_a, [3] r_z, [4:7) gamma, [7:13) Phi
//
// Pose features P, 266 channels per frame:
//   [0:63)    J      21 local joint positions (canonical frame), m
//   [63:126)  J_dot
//   [126:252) theta  21 x 6D joint rotations
//   [252:262) beta   shape coefficients
//   [262:266) f      foot contact labels
namespace traj {
constexpr int kFull = 25;
constexpr int kCompact = 13;
constexpr int kRl = 0, kRlDot = 2, kRa = 4, kRaDot = 5, kRz = 6;
constexpr int kGamma = 7, kGammaDot = 10, kPhi = 13, kPhiDot = 19;
namespace compact {
constexpr int kRl = 0, kRa = 2, kRz = 3, kGamma = 4, kPhi = 7;
}
}  // namespace traj

namespace pose {
constexpr int kDim = 266;
constexpr int kJ = 0, kJDot = 63, kTheta = 126, kBeta = 252, kContact = 262;
}  // namespace pose

struct MotionFeatures {
  Tensor traj;  // [N,25]
  Tensor pose;  // [N,266]
};

struct VisibilityMasks {
  Tensor traj;  // M_R: [N,13], 1 = visible
  Tensor pose;  // M_P: [N,266]

  static VisibilityMasks ones(int64_t n_frames);
  void validate() const;
};

// v[n] = (x[n+1] - x[n]) * fps, last row repeated.
Tensor compute_velocities(const Tensor& x, double fps = kFps);

// Heading angle per frame from the hip + shoulder cross products, unwrapped.
// joints: [N,22,3] -> [N].
Tensor heading_angle(const Skeleton& skel, const Tensor& joints);

MotionFeatures encode_motion(const Skeleton& skel, const BodyParamsSeq& params,
                             double fps = kFps);

// Inverse mapping from absolute feature channels back to body parameters and
// world joints. Accepts full (25) or compact (13) trajectory features;
// velocity channels are ignored. Differentiable.
struct DecodedMotion {
  BodyParamsSeq params;
  Tensor joints;    // [N,22,3]
  Tensor contacts;  // [N,4]
};
DecodedMotion decode_motion(const Skeleton& skel, const Tensor& traj, const Tensor& pose_feats);

Tensor traj_full_to_compact(const Tensor& traj_full);

// Per-channel z-scoring. Contact channels stay raw (mean 0, std 1).
struct NormStats {
  Tensor traj_mean, traj_std;  // [25]
  Tensor pose_mean, pose_std;  // [266]

  Tensor traj_compact_mean() const;
  Tensor traj_compact_std() const;
  uint64_t hash() const;

  void save(const std::filesystem::path& path) const;
  static NormStats load(const std::filesystem::path& path);
};

NormStats fit_norm_stats(const std::vector<MotionFeatures>& corpus);
Tensor apply_norm(const Tensor& x, const Tensor& mean, const Tensor& std);
Tensor invert_norm(const Tensor& x, const Tensor& mean, const Tensor& std);

// Joint-level visibility helpers. Local joints are 1..21; the pelvis takes
// its visibility from M_R. Masking a joint zeroes all of its P channels
// (positions, velocities, rotations and, for foot joints, the contact label);
// beta channels are masked only when every local joint in the frame is.
VisibilityMasks masks_from_joint_visibility(const Tensor& joint_visible /*[N,22]*/,
                                            const Skeleton& skel);
Tensor joint_visibility_from_masks(const VisibilityMasks& masks, const Skeleton& skel);

}  // namespace rohm
