#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "rohm/kinematics.hpp"

namespace rohm {

struct SkatingThresholds {
  double foot_speed = 0.10;    // m/s, all four foot joints must exceed this
  double toe_height = 0.10;    // m
  double ankle_height = 0.15;  // m
};

struct EvalReport {
  double gmpjpe_all = 0, gmpjpe_vis = 0, gmpjpe_occ = 0;  // mm
  double mpjpe_all = 0, mpjpe_vis = 0, mpjpe_occ = 0;     // mm, pelvis-aligned
  double accel = 0;            // m/s^2 (error vs GT, or norm when no GT)
  double contact_acc = 1.0;    // [0,1]
  double skating_ratio = 0.0;  // [0,1]
  double penetration_dist = 0.0;  // mm

  std::string to_json() const;
  static EvalReport from_json(const std::string& text);
  std::string table() const;
};

struct JointErrorTriples {
  double gmpjpe_all, gmpjpe_vis, gmpjpe_occ;
  double mpjpe_all, mpjpe_vis, mpjpe_occ;
};

// GMPJPE in world coordinates; MPJPE after per-frame pelvis translation
// alignment. vis/occ split by a joint-level mask [N,22] (1 = visible).
// Results in millimeters; occ (vis) is NaN-free: empty partitions report 0.
JointErrorTriples joint_errors(const Tensor& pred_joints, const Tensor& gt_joints,
                               const Tensor& joint_visible);

// With GT: mean || d2(pred) - d2(gt) || * fps^2; without: mean || d2(pred) || * fps^2,
// where d2 is the per-joint second difference over frames.
double accel_metric(const Tensor& pred_joints, const std::optional<Tensor>& gt_joints,
                    double fps = kFps);

// Fraction of matching labels after thresholding predictions at 0.5.
double contact_accuracy(const Tensor& pred_contacts, const Tensor& gt_contacts);

// Fraction of frames where all four foot joints move faster than the speed
// threshold while toes sit below 10 cm and ankles below 15 cm.
double skating_ratio(const Skeleton& skel, const Tensor& joints, double fps = kFps,
                     const SkatingThresholds& thresholds = {});

// Mean toe-joint penetration below the ground plane, in mm.
double penetration_dist(const Skeleton& skel, const Tensor& joints);

EvalReport evaluate_motion(const Skeleton& skel, const Tensor& pred_joints,
                           const Tensor& gt_joints, const Tensor& joint_visible,
                           const Tensor& pred_contacts, const Tensor& gt_contacts,
                           double fps = kFps);

}  // namespace rohm
