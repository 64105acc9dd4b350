#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "rohm/features.hpp"

namespace rohm {

// Synthetic corruption of clean motion: parameter-space Gaussian noise at
// level k plus occlusion masks, as used for training and evaluation inputs.

enum class OcclusionKind {
  kNone,
  kRandomJoints,     // mask 1..6 whole joints for the whole clip
  kLowerBody,        // hips, knees, ankles, toes, all frames
  kUpperBody,
  kFrameSpan,        // a contiguous window of frames, trajectory + pose
  kFullBodyFrames,   // all joints in a fraction of frames
  kExternalFile,     // visibility pool loaded from a container file
};

struct OcclusionScheme {
  OcclusionKind kind = OcclusionKind::kNone;
  int min_joints = 1;
  int max_joints = 6;
  double span_fraction = 0.10;
  double frame_fraction = 0.30;
  std::filesystem::path external_path;  // pool with "joint_visibility" [M,N,22]
};

// Noise level k: rotations perturbed by random axis-angle steps with per-axis
// std of k degrees, translation by k cm per axis, shape by 0.01*k.
BodyParamsSeq add_param_noise(const BodyParamsSeq& params, double k, uint64_t seed);

VisibilityMasks make_occlusion_mask(const OcclusionScheme& scheme, int64_t n_frames,
                                    const Skeleton& skel, uint64_t seed);

// A categorical mixture over occlusion schemes, sampled per clip.
struct SchemeMixture {
  std::vector<std::pair<double, OcclusionScheme>> components;  // (prob, scheme)
  const OcclusionScheme& sample(uint64_t seed) const;
};

enum class ModelKind { kTrajNet, kPoseNet, kTrajControl, kMdmpp };

std::string model_kind_name(ModelKind kind);
ModelKind model_kind_from_name(const std::string& name);

// One curriculum stage: noise level plus occlusion mixture. PoseNet stage 1
// starts with a simpler scheme (random 1-6 joints) for the first quarter of
// the stage before switching to the mixed scheme.
struct StageCorruption {
  double noise_level = 0.0;
  SchemeMixture mixture;
  std::optional<OcclusionScheme> initial_scheme;
  double initial_fraction = 0.25;
};

int num_stages(ModelKind kind);
StageCorruption curriculum(ModelKind kind, int stage /*1-based*/);

}  // namespace rohm
