#include "rohm/kinematics.hpp"

namespace rohm {

BodyParamsSeq BodyParamsSeq::to(torch::ScalarType dtype) const {
  return {trans.to(dtype), orient.to(dtype), pose.to(dtype), shape.to(dtype)};
}

BodyParamsSeq BodyParamsSeq::clone() const {
  return {trans.clone(), orient.clone(), pose.clone(), shape.clone()};
}

void BodyParamsSeq::validate() const {
  const int64_t n = trans.size(0);
  if (!trans.sizes().equals({n, 3}) || !orient.sizes().equals({n, 6}) ||
      !pose.sizes().equals({n, kNumLocalJoints, 6}) || !shape.sizes().equals({n, kNumShapeCoeffs}))
    throw Error("body params: inconsistent shapes");
  if (!torch::isfinite(shape).all().item<bool>()) throw Error("body params: non-finite shape");
}

std::pair<Tensor, Tensor> forward_kinematics_full(const Skeleton& skel,
                                                  const BodyParamsSeq& params) {
  const int64_t n = params.frames();
  auto offsets = skel.offsets_for_shape(params.shape).to(params.trans.dtype());  // [N,22,3]

  // Local rotations per joint: root from orient, children from pose.
  auto root_rot = rot6d_to_matrix(params.orient, /*validate=*/false).unsqueeze(1);  // [N,1,3,3]
  auto child_rot = rot6d_to_matrix(params.pose, /*validate=*/false);                // [N,21,3,3]
  auto local_rot = torch::cat({root_rot, child_rot}, 1);                            // [N,22,3,3]

  std::vector<Tensor> world_rot(kNumJoints), world_pos(kNumJoints);
  world_rot[0] = local_rot.select(1, 0);
  // Root offset lives in the body frame so a global rotation moves every
  // joint identically.
  world_pos[0] = params.trans +
                 torch::matmul(world_rot[0], offsets.select(1, 0).unsqueeze(-1)).squeeze(-1);
  for (int j = 1; j < kNumJoints; ++j) {
    const int p = skel.parents[j];
    world_rot[j] = torch::matmul(world_rot[p], local_rot.select(1, j));
    world_pos[j] =
        world_pos[p] + torch::matmul(world_rot[p], offsets.select(1, j).unsqueeze(-1)).squeeze(-1);
  }
  auto pos = torch::stack(world_pos, 1);  // [N,22,3]
  auto rot = torch::stack(world_rot, 1);  // [N,22,3,3]
  (void)n;
  return {pos, rot};
}

Tensor forward_kinematics(const Skeleton& skel, const BodyParamsSeq& params) {
  return forward_kinematics_full(skel, params).first;
}

Tensor label_foot_contacts(const Skeleton& skel, const Tensor& joints, double fps) {
  if (joints.dim() != 3 || joints.size(1) != kNumJoints || joints.size(2) != 3)
    throw Error("label_foot_contacts: expected [N,22,3]");
  const int64_t n = joints.size(0);
  if (n < 2) throw Error("label_foot_contacts: need at least 2 frames");
  auto idx = torch::tensor({skel.foot_joint_ids[0], skel.foot_joint_ids[1],
                            skel.foot_joint_ids[2], skel.foot_joint_ids[3]},
                           torch::kLong);
  auto feet = joints.index_select(1, idx);  // [N,4,3]
  auto vel = (feet.slice(0, 1, n) - feet.slice(0, 0, n - 1)) * fps;
  auto speed = vel.norm(2, -1);                                 // [N-1,4]
  speed = torch::cat({speed, speed.slice(0, n - 2, n - 1)}, 0);  // repeat last
  auto height = feet.select(-1, 2);                              // [N,4]
  auto contact = (speed < kContactSpeedThreshold) & (height < kContactHeightThreshold);
  return contact.to(torch::kFloat64);
}

}  // namespace rohm
