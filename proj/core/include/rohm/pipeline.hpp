#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rohm/corruption.hpp"
#include "rohm/datagen.hpp"
#include "rohm/diffusion.hpp"
#include "rohm/guidance.hpp"
#include "rohm/models.hpp"

namespace rohm {

// One curriculum training stage: corruption settings plus optimizer
// hyper-parameters and loss weights.
struct StageConfig {
  ModelKind kind = ModelKind::kPoseNet;
  StageCorruption corruption;
  int steps = 1000;  // optimizer steps
  int batch = 8;
  double lr = 1e-4;
  double lambda_j3d = 100.0;
  double lambda_vel = 1000.0;
  double lambda_skate = 0.0;  // 0.1 in the final PoseNet stage

  void validate() const;
};

// The staged defaults per model kind (noise/occlusion from curriculum(),
// lambda_skate = 0.1 only in the last PoseNet/MDM++ stage).
std::vector<StageConfig> default_stages(ModelKind kind, int steps_per_stage, int batch,
                                        double lr);

// Points every external-file occlusion component at the given mask pool.
void set_external_mask_pool(std::vector<StageConfig>& stages,
                            const std::filesystem::path& pool);

struct LossComponents {
  Tensor simple, j3d, vel, skate;  // scalars, same dtype as inputs
};

struct LossWeights {
  double j3d = 100.0;
  double vel = 1000.0;
  double skate = 0.0;
};

// Decomposed training loss. pred/gt are normalized model-space tensors:
//   TrajNet/TrajControl: [B,N,13]; PoseNet: [B,N,266]; MDM++: [B,N,279].
// L_simple is the MSE over feature channels. L_J3D / L_vel act on joints:
// root joint only for TrajNet/TrajControl (positions taken from the
// predicted trajectory channels), all 22 joints for PoseNet (decoded with
// the ground-truth trajectory `gt_traj`, raw [B,N,25] or [B,N,13]) and for
// MDM++ (decoded with its own predicted trajectory). L_skate penalizes
// squared foot velocity weighted by the ground-truth contact labels.
LossComponents loss_components(ModelKind kind, const Tensor& pred, const Tensor& gt,
                               const Tensor& gt_traj, const Skeleton& skel,
                               const NormStats& stats, double fps = kFps);

// simple + j3d-weight * j3d + vel-weight * vel + skate-weight * skate.
// Negative weights are a ConfigError.
Tensor total_loss(const LossComponents& parts, const LossWeights& weights);

// A clip prepared for training: clean parameters plus cached clean features
// and world joints.
struct ClipData {
  BodyParamsSeq params;  // float64
  MotionFeatures clean;  // raw (unnormalized) features
  Tensor joints;         // [N,22,3] clean world joints
  double fps = kFps;
};

std::vector<ClipData> prepare_clips(const std::vector<MotionClip>& clips, const Skeleton& skel);

struct TrainLogRecord {
  std::string model;
  int stage = 0;
  int step = 0;  // 1-based within the stage
  std::vector<int> ts;  // diffusion steps drawn for this batch
  double simple = 0, j3d = 0, vel = 0, skate = 0, total = 0;
};
using TrainLog = std::function<void(const TrainLogRecord&)>;

struct StageSummary {
  int stage = 0;
  double first_avg_loss = 0;  // mean total loss over the first 10% of steps
  double last_avg_loss = 0;   // ... and the last 10%
};

// Staged training. Each step draws per-sample t uniform in [1,T], corrupts
// the clean clip per the stage curriculum, conditions the net on the masked
// corrupted features and regresses X0. Deterministic per seed. Throws on
// non-finite loss with stage/step diagnostics.
std::vector<StageSummary> train_trajnet(TrajNet& net, const std::vector<ClipData>& data,
                                        const NormStats& stats, const DiffusionSchedule& sched,
                                        const std::vector<StageConfig>& stages,
                                        const Skeleton& skel, uint64_t seed,
                                        const TrainLog& log = nullptr);

// PoseNet conditions on the ground-truth trajectory throughout training.
std::vector<StageSummary> train_posenet(PoseNet& net, const std::vector<ClipData>& data,
                                        const NormStats& stats, const DiffusionSchedule& sched,
                                        const std::vector<StageConfig>& stages,
                                        const Skeleton& skel, uint64_t seed,
                                        const TrainLog& log = nullptr);

// Fine-tunes the adapter with ground-truth local pose as the control signal;
// the base TrajNet stays frozen (verified by checksum on entry/exit).
std::vector<StageSummary> train_trajcontrol(TrajNet& base, TrajControl& ctl,
                                            const std::vector<ClipData>& data,
                                            const NormStats& stats,
                                            const DiffusionSchedule& sched,
                                            const std::vector<StageConfig>& stages,
                                            const Skeleton& skel, uint64_t seed,
                                            const TrainLog& log = nullptr);

std::vector<StageSummary> train_mdmpp(Mdmpp& net, const std::vector<ClipData>& data,
                                      const NormStats& stats, const DiffusionSchedule& sched,
                                      const std::vector<StageConfig>& stages,
                                      const Skeleton& skel, uint64_t seed,
                                      const TrainLog& log = nullptr);

// Records which tensors fed each network at each outer iteration, for
// wiring verification.
struct CondRecord {
  int iter = 0;
  std::string net;                   // "trajnet" | "posenet"
  std::vector<std::string> sources;  // symbolic names of conditioning inputs
};
using CondLog = std::function<void(const CondRecord&)>;

struct InferenceModels {
  TrajNet trajnet{nullptr};
  TrajControl trajcontrol{nullptr};  // may stay null
  PoseNet posenet{nullptr};
};

struct InferenceConfig {
  int k_iters = 2;
  GuidanceConfig guidance;
  uint64_t seed = 0;
  bool use_trajcontrol = true;
  double fps = kFps;
  // Needed when guidance.lambda_2d > 0.
  std::optional<CameraModel> camera;
  std::optional<Keypoints2D> keypoints;

  void validate() const;
};

struct InferenceResult {
  Tensor traj;  // [N,13] raw compact trajectory estimate
  Tensor pose;  // [N,266] raw pose estimate
  DecodedMotion decoded;
  bool degraded_no_trajcontrol = false;  // K>1 ran without the adapter
};

// Alternating trajectory/pose reconstruction. Iteration 1 conditions
// TrajNet on the masked observed trajectory and PoseNet on (trajectory
// estimate, masked observed pose); later iterations re-condition both nets
// on the previous estimates, injecting the pose estimate into TrajNet
// through the adapter. Guidance shifts the pose sampling mean. With K>1 and
// no adapter available, falls back to plain re-conditioning and flags the
// result as degraded.
InferenceResult iterative_inference(const Skeleton& skel, const MotionFeatures& observed,
                                    const VisibilityMasks& masks, InferenceModels& models,
                                    const NormStats& stats, const DiffusionSchedule& sched,
                                    const InferenceConfig& cfg,
                                    const CondLog& cond_log = nullptr);

}  // namespace rohm
