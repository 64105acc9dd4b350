#include "rohm/guidance.hpp"

namespace rohm {

CameraModel CameraModel::looking_at(const Tensor& eye, const Tensor& target, double fx, double fy,
                                    int width, int height) {
  auto fwd = (target - eye);
  fwd = fwd / fwd.norm();
  auto world_up = torch::tensor({0.0, 0.0, 1.0}, f64());
  auto right = torch::cross(fwd, world_up, 0);
  right = right / right.norm().clamp_min(1e-9);
  auto down = torch::cross(fwd, right, 0);  // image v grows downward
  CameraModel cam;
  cam.fx = fx;
  cam.fy = fy;
  cam.cx = width / 2.0;
  cam.cy = height / 2.0;
  cam.width = width;
  cam.height = height;
  cam.rotation = torch::stack({right, down, fwd}, 0);  // rows: camera axes
  cam.translation = -torch::matmul(cam.rotation, eye);
  cam.validate();
  return cam;
}

void CameraModel::validate() const {
  if (fx <= 0 || fy <= 0) throw Error("camera: focal lengths must be positive");
  if (!rotation.defined() || !rotation.sizes().equals({3, 3}) || !translation.defined() ||
      !translation.sizes().equals({3}))
    throw Error("camera: bad extrinsics");
}

Tensor project(const Tensor& points, const CameraModel& cam, bool validate) {
  if (points.size(-1) != 3) throw Error("project: expected [...,3]");
  auto r = cam.rotation.to(points.dtype());
  auto t = cam.translation.to(points.dtype());
  auto p_cam = torch::matmul(points, r.transpose(0, 1)) + t;
  auto z = p_cam.select(-1, 2);
  if (validate && (z <= kBehindCameraEps).any().item<bool>())
    throw Error("project: point at or behind the camera");
  auto zc = z.clamp_min(kBehindCameraEps).unsqueeze(-1);
  auto u = cam.fx * p_cam.slice(-1, 0, 1) / zc + cam.cx;
  auto v = cam.fy * p_cam.slice(-1, 1, 2) / zc + cam.cy;
  return torch::cat({u, v}, -1);
}

Tensor j_skate(const Skeleton& skel, const Tensor& traj, const Tensor& pose_feats, double fps) {
  auto decoded = decode_motion(skel, traj, pose_feats);
  const int64_t n = decoded.joints.size(0);
  if (n < 2) throw Error("j_skate: need at least 2 frames");
  auto idx = torch::tensor({skel.foot_joint_ids[0], skel.foot_joint_ids[1],
                            skel.foot_joint_ids[2], skel.foot_joint_ids[3]},
                           torch::kLong);
  auto feet = decoded.joints.index_select(1, idx);                       // [N,4,3]
  auto vel = (feet.slice(0, 1, n) - feet.slice(0, 0, n - 1)) * fps;      // [N-1,4,3]
  auto contacts = decoded.contacts.detach().slice(0, 0, n - 1).unsqueeze(-1);
  return (contacts * vel).pow(2).sum();
}

Tensor j_2d(const Skeleton& skel, const Tensor& traj, const Tensor& pose_feats,
            const Keypoints2D& kp, const CameraModel& cam) {
  auto decoded = decode_motion(skel, traj, pose_feats);
  auto r = cam.rotation.to(decoded.joints.dtype());
  auto t = cam.translation.to(decoded.joints.dtype());
  auto z = (torch::matmul(decoded.joints, r.transpose(0, 1)) + t).select(-1, 2);
  if ((z <= kBehindCameraEps).all().item<bool>())
    throw Error("j_2d: all joints behind the camera");
  auto proj = project(decoded.joints, cam, /*validate=*/false);  // [N,22,2]
  auto conf = kp.conf.to(proj.dtype()).unsqueeze(-1);
  auto residual = conf * (proj - kp.uv.to(proj.dtype()));
  return residual.pow(2).sum();
}

Tensor grad_guidance(const ScoreFn& score, const Tensor& at) {
  Tensor x = at.detach().clone().requires_grad_(true);
  Tensor value = score(x);
  if (!torch::isfinite(value).all().item<bool>()) return Tensor();
  auto grads = torch::autograd::grad({value}, {x});
  Tensor g = grads[0];
  if (!g.defined() || !torch::isfinite(g).all().item<bool>()) return Tensor();
  return g;
}

DropoutRule no_dropout() {
  return [](int64_t, int, double, double) { return false; };
}

DropoutRule image_lower_half_occluder(const CameraModel& cam) {
  const double v_split = cam.height / 2.0;
  return [v_split](int64_t, int, double, double v) { return v > v_split; };
}

SyntheticObservations synth_observations(const Tensor& gt_joints, const CameraModel& cam,
                                         double pixel_noise_std, const DropoutRule& dropout,
                                         const Skeleton& skel, uint64_t seed) {
  if (gt_joints.dim() != 3 || gt_joints.size(1) != kNumJoints)
    throw Error("synth_observations: expected [N,22,3]");
  const int64_t n = gt_joints.size(0);
  auto gen = make_generator(seed);
  auto clean = project(gt_joints.to(torch::kFloat64), cam);  // throws if behind camera
  auto uv = clean + torch::randn({n, kNumJoints, 2}, gen, f64()) * pixel_noise_std;
  auto conf = torch::ones({n, kNumJoints}, f64());
  auto uv_acc = uv.accessor<double, 3>();
  auto conf_acc = conf.accessor<double, 2>();
  for (int64_t i = 0; i < n; ++i)
    for (int j = 0; j < kNumJoints; ++j)
      if (dropout(i, j, uv_acc[i][j][0], uv_acc[i][j][1])) conf_acc[i][j] = 0.0;
  auto visible = (conf >= kOcclusionConfThreshold).to(torch::kFloat64);
  SyntheticObservations out;
  out.keypoints = {uv, conf};
  out.masks = masks_from_joint_visibility(visible, skel);
  return out;
}

}  // namespace rohm
