#include "rohm/features.hpp"

#include "rohm/container.hpp"

namespace rohm {

namespace {

// z cross v, horizontal by construction.
Tensor z_cross(const Tensor& v) {
  return torch::stack({-v.select(-1, 1), v.select(-1, 0), torch::zeros_like(v.select(-1, 2))}, -1);
}

Tensor rot_z(const Tensor& angle) {  // [N] -> [N,3,3]
  auto c = torch::cos(angle), s = torch::sin(angle);
  auto zero = torch::zeros_like(c), one = torch::ones_like(c);
  return torch::stack({c, -s, zero, s, c, zero, zero, zero, one}, -1).reshape({-1, 3, 3});
}

Tensor unwrap(const Tensor& angle) {  // [N]
  const int64_t n = angle.size(0);
  if (n < 2) return angle.clone();
  auto diff = angle.slice(0, 1, n) - angle.slice(0, 0, n - 1);
  const double two_pi = 2.0 * M_PI;
  auto adj = diff - two_pi * torch::round(diff / two_pi);
  return torch::cat({angle.slice(0, 0, 1), angle.slice(0, 0, 1) + torch::cumsum(adj, 0)}, 0);
}

}  // namespace

VisibilityMasks VisibilityMasks::ones(int64_t n_frames) {
  return {torch::ones({n_frames, traj::kCompact}, f64()),
          torch::ones({n_frames, pose::kDim}, f64())};
}

void VisibilityMasks::validate() const {
  if (traj.dim() != 2 || traj.size(1) != traj::kCompact)
    throw Error("masks: M_R must be [N,13]");
  if (pose.dim() != 2 || pose.size(1) != pose::kDim) throw Error("masks: M_P must be [N,266]");
  for (const auto& m : {traj, pose})
    if (!((m == 0) | (m == 1)).all().item<bool>()) throw Error("masks: entries must be binary");
}

Tensor compute_velocities(const Tensor& x, double fps) {
  const int64_t n = x.size(0);
  if (n < 2) throw Error("compute_velocities: need at least 2 frames");
  auto v = (x.slice(0, 1, n) - x.slice(0, 0, n - 1)) * fps;
  return torch::cat({v, v.slice(0, n - 2, n - 1)}, 0);
}

Tensor heading_angle(const Skeleton& skel, const Tensor& joints) {
  auto hips = joints.select(1, skel.left_hip) - joints.select(1, skel.right_hip);
  auto shoulders = joints.select(1, skel.left_shoulder) - joints.select(1, skel.right_shoulder);
  auto fwd = z_cross(hips) + z_cross(shoulders);
  auto ra = torch::atan2(fwd.select(-1, 1), fwd.select(-1, 0));
  return unwrap(ra);
}

MotionFeatures encode_motion(const Skeleton& skel, const BodyParamsSeq& params, double fps) {
  params.validate();
  const int64_t n = params.frames();
  if (n < 2) throw Error("encode_motion: need at least 2 frames");
  auto joints = forward_kinematics(skel, params);  // [N,22,3]

  auto pelvis = joints.select(1, 0);
  auto rl = pelvis.slice(-1, 0, 2);
  auto rz = pelvis.slice(-1, 2, 3);
  auto ra = heading_angle(skel, joints).unsqueeze(-1);  // [N,1]

  auto traj = torch::cat({rl, compute_velocities(rl, fps), ra, compute_velocities(ra, fps), rz,
                          params.trans, compute_velocities(params.trans, fps), params.orient,
                          compute_velocities(params.orient, fps)},
                         -1);

  // Local joints: subtract the ground-projected pelvis, rotate by -r_a about z.
  auto origin = torch::cat({rl, torch::zeros_like(rz)}, -1).unsqueeze(1);  // [N,1,3]
  auto d = joints.slice(1, 1, kNumJoints) - origin;                        // [N,21,3]
  auto rot = rot_z(-ra.squeeze(-1)).unsqueeze(1);                          // [N,1,3,3]
  auto local = torch::matmul(rot, d.unsqueeze(-1)).squeeze(-1);            // [N,21,3]
  auto j_flat = local.reshape({n, kNumLocalJoints * 3});

  auto pose_feats = torch::cat({j_flat, compute_velocities(j_flat, fps),
                                params.pose.reshape({n, kNumLocalJoints * 6}), params.shape,
                                label_foot_contacts(skel, joints, fps)},
                               -1);
  return {traj, pose_feats};
}

Tensor traj_full_to_compact(const Tensor& t) {
  if (t.size(-1) != traj::kFull) throw Error("traj_full_to_compact: expected 25 channels");
  static const std::vector<int64_t> idx = {0, 1, 4, 6, 7, 8, 9, 13, 14, 15, 16, 17, 18};
  return t.index_select(-1, torch::tensor(idx, torch::kLong));
}

DecodedMotion decode_motion(const Skeleton& skel, const Tensor& traj, const Tensor& pose_feats) {
  const int64_t n = traj.size(0);
  if (pose_feats.size(0) != n) throw Error("decode_motion: frame count mismatch");
  if (pose_feats.size(-1) != pose::kDim) throw Error("decode_motion: pose features must be 266-d");
  Tensor gamma, phi;
  if (traj.size(-1) == traj::kFull) {
    gamma = traj.slice(-1, traj::kGamma, traj::kGamma + 3);
    phi = traj.slice(-1, traj::kPhi, traj::kPhi + 6);
  } else if (traj.size(-1) == traj::kCompact) {
    gamma = traj.slice(-1, traj::compact::kGamma, traj::compact::kGamma + 3);
    phi = traj.slice(-1, traj::compact::kPhi, traj::compact::kPhi + 6);
  } else {
    throw Error("decode_motion: trajectory must have 25 or 13 channels");
  }
  BodyParamsSeq params{
      gamma, phi,
      pose_feats.slice(-1, pose::kTheta, pose::kTheta + 126).reshape({n, kNumLocalJoints, 6}),
      pose_feats.slice(-1, pose::kBeta, pose::kBeta + 10)};
  auto joints = forward_kinematics(skel, params);
  auto contacts = pose_feats.slice(-1, pose::kContact, pose::kContact + 4);
  return {std::move(params), joints, contacts};
}

Tensor NormStats::traj_compact_mean() const { return traj_full_to_compact(traj_mean); }
Tensor NormStats::traj_compact_std() const { return traj_full_to_compact(traj_std); }

uint64_t NormStats::hash() const {
  uint64_t h = 1469598103934665603ull;
  for (const auto& t : {traj_mean, traj_std, pose_mean, pose_std}) {
    auto c = t.to(torch::kFloat64).contiguous();
    const auto* bytes = reinterpret_cast<const uint8_t*>(c.data_ptr<double>());
    for (int64_t i = 0; i < c.numel() * 8; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  }
  return h;
}

void NormStats::save(const std::filesystem::path& path) const {
  write_container(path, {{"traj_mean", traj_mean},
                         {"traj_std", traj_std},
                         {"pose_mean", pose_mean},
                         {"pose_std", pose_std}});
}

NormStats NormStats::load(const std::filesystem::path& path) {
  auto arrays = read_container(path);
  return {arrays.at("traj_mean").to(torch::kFloat64), arrays.at("traj_std").to(torch::kFloat64),
          arrays.at("pose_mean").to(torch::kFloat64), arrays.at("pose_std").to(torch::kFloat64)};
}

NormStats fit_norm_stats(const std::vector<MotionFeatures>& corpus) {
  if (corpus.empty()) throw Error("fit_norm_stats: empty corpus");
  std::vector<Tensor> trajs, poses;
  for (const auto& m : corpus) {
    trajs.push_back(m.traj);
    poses.push_back(m.pose);
  }
  auto traj = torch::cat(trajs, 0);
  auto pose_all = torch::cat(poses, 0);
  // (Near-)constant channels get unit scale: dividing by a vanishing std
  // would blow the channel up to arbitrary magnitude and dominate training.
  auto floor_std = [](const Tensor& s) {
    return torch::where(s < 1e-4, torch::ones_like(s), s);
  };
  NormStats s;
  s.traj_mean = traj.mean(0);
  s.traj_std = floor_std(traj.std(0));
  s.pose_mean = pose_all.mean(0);
  s.pose_std = floor_std(pose_all.std(0));
  // Contact channels are kept raw.
  s.pose_mean.slice(0, pose::kContact, pose::kContact + 4).zero_();
  s.pose_std.slice(0, pose::kContact, pose::kContact + 4).fill_(1.0);
  return s;
}

Tensor apply_norm(const Tensor& x, const Tensor& mean, const Tensor& std) {
  return (x - mean.to(x.dtype())) / std.to(x.dtype());
}

Tensor invert_norm(const Tensor& x, const Tensor& mean, const Tensor& std) {
  return x * std.to(x.dtype()) + mean.to(x.dtype());
}

VisibilityMasks masks_from_joint_visibility(const Tensor& jv, const Skeleton& skel) {
  if (jv.dim() != 2 || jv.size(1) != kNumJoints)
    throw Error("masks_from_joint_visibility: expected [N,22]");
  const int64_t n = jv.size(0);
  auto v = jv.to(torch::kFloat64);
  VisibilityMasks m;
  m.traj = v.slice(1, 0, 1).expand({n, traj::kCompact}).clone();
  m.pose = torch::zeros({n, pose::kDim}, f64());
  for (int lj = 0; lj < kNumLocalJoints; ++lj) {
    auto vis = v.select(1, lj + 1).unsqueeze(-1);
    m.pose.slice(1, pose::kJ + 3 * lj, pose::kJ + 3 * lj + 3) = vis.expand({n, 3});
    m.pose.slice(1, pose::kJDot + 3 * lj, pose::kJDot + 3 * lj + 3) = vis.expand({n, 3});
    m.pose.slice(1, pose::kTheta + 6 * lj, pose::kTheta + 6 * lj + 6) = vis.expand({n, 6});
  }
  // Beta is masked only when every local joint is.
  auto any_visible = std::get<0>(v.slice(1, 1, kNumJoints).max(1, true));
  m.pose.slice(1, pose::kBeta, pose::kBeta + 10) = any_visible.expand({n, 10});
  for (int k = 0; k < kNumFootJoints; ++k)
    m.pose.select(1, pose::kContact + k) = v.select(1, skel.foot_joint_ids[k]);
  return m;
}

Tensor joint_visibility_from_masks(const VisibilityMasks& masks, const Skeleton& skel) {
  (void)skel;
  const int64_t n = masks.pose.size(0);
  auto jv = torch::zeros({n, kNumJoints}, f64());
  jv.select(1, 0) = std::get<0>(masks.traj.max(1));
  for (int lj = 0; lj < kNumLocalJoints; ++lj)
    jv.select(1, lj + 1) = masks.pose.select(1, pose::kJ + 3 * lj);
  return jv;
}

}  // namespace rohm
