#pragma once

#include <functional>

#include "rohm/features.hpp"

namespace rohm {

// Pinhole camera: world -> camera via (rotation, translation), then
// perspective projection with intrinsics.
struct CameraModel {
  double fx = 1000, fy = 1000, cx = 500, cy = 500;
  Tensor rotation;     // [3,3] world->camera, float64
  Tensor translation;  // [3]
  int width = 1000, height = 1000;

  static CameraModel looking_at(const Tensor& eye, const Tensor& target, double fx, double fy,
                                int width, int height);
  void validate() const;
};

struct Keypoints2D {
  Tensor uv;    // [N,22,2] pixels
  Tensor conf;  // [N,22] in [0,1]; 0 marks unusable detections
};

constexpr double kBehindCameraEps = 1e-6;
constexpr double kOcclusionConfThreshold = 0.2;

// Perspective projection [...,3] -> [...,2]. With validate=true, any point at
// or behind the image plane raises; with validate=false the depth is clamped
// so the op stays differentiable.
Tensor project(const Tensor& points, const CameraModel& cam, bool validate = true);

// Foot-skating score: sum over frames and foot joints of
// f_hat * ||foot world velocity||^2. Contact labels are treated as constants.
// Differentiable w.r.t. the pose features (and trajectory).
Tensor j_skate(const Skeleton& skel, const Tensor& traj, const Tensor& pose_feats,
               double fps = kFps);

// 2D reprojection score: sum ||conf * (project(FK joints) - detections)||^2.
Tensor j_2d(const Skeleton& skel, const Tensor& traj, const Tensor& pose_feats,
            const Keypoints2D& kp, const CameraModel& cam);

// Gradient of a scalar score w.r.t. `wrt` via reverse-mode autodiff. Returns
// an undefined tensor when the gradient is non-finite (caller falls back to
// unguided sampling for that step).
using ScoreFn = std::function<Tensor(const Tensor& wrt)>;
Tensor grad_guidance(const ScoreFn& score, const Tensor& at);

// Per-joint dropout rule for synthetic detections: true = drop (conf 0).
using DropoutRule = std::function<bool(int64_t frame, int joint, double u, double v)>;
DropoutRule no_dropout();
DropoutRule image_lower_half_occluder(const CameraModel& cam);

struct SyntheticObservations {
  Keypoints2D keypoints;
  VisibilityMasks masks;  // derived with the conf < 0.2 rule
};

SyntheticObservations synth_observations(const Tensor& gt_joints, const CameraModel& cam,
                                         double pixel_noise_std, const DropoutRule& dropout,
                                         const Skeleton& skel, uint64_t seed);

}  // namespace rohm
