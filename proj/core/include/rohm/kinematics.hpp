#pragma once

#include "rohm/rotation.hpp"
#include "rohm/skeleton.hpp"

namespace rohm {

// One motion's worth of body parameters, one row per frame.
struct BodyParamsSeq {
  Tensor trans;    // [N,3]   global translation, meters
  Tensor orient;   // [N,6]   global orientation, 6D
  Tensor pose;     // [N,21,6] parent-relative joint rotations, 6D
  Tensor shape;    // [N,10]  shape coefficients

  int64_t frames() const { return trans.size(0); }
  BodyParamsSeq to(torch::ScalarType dtype) const;
  BodyParamsSeq clone() const;
  void validate() const;
};

// World-frame joint positions via the kinematic chain. Differentiable.
// Root joint = trans + global rotation times the shape-dependent root
// offset; every other joint accumulates parent world rotation times its
// offset.
// Returns [N,22,3].
Tensor forward_kinematics(const Skeleton& skel, const BodyParamsSeq& params);

// As above but also returns world rotations [N,22,3,3].
std::pair<Tensor, Tensor> forward_kinematics_full(const Skeleton& skel,
                                                  const BodyParamsSeq& params);

// Ground-truth contact labels for the 4 foot joints: in contact when the
// joint moves slower than 0.10 m/s and sits below 0.10 m. Returns [N,4]
// float64 in {0,1}, column order = skel.foot_joint_ids.
Tensor label_foot_contacts(const Skeleton& skel, const Tensor& joints, double fps = kFps);

constexpr double kContactSpeedThreshold = 0.10;   // m/s
constexpr double kContactHeightThreshold = 0.10;  // m

}  // namespace rohm
