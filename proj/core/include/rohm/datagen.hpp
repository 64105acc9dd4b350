#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "rohm/features.hpp"

namespace rohm {

// Procedurally generated motion clip. The corpus stands in for mocap data:
// every clip is kinematically consistent by construction and deterministic
// per (style, seed).
enum class MotionStyle { kWalk, kTurnWalk, kIdleSway, kArmGesture, kMixed };

MotionStyle motion_style_from_name(const std::string& name);
std::string motion_style_name(MotionStyle style);

struct MotionClip {
  double fps = kFps;
  BodyParamsSeq params;
  std::string style;
  uint64_t seed = 0;

  int64_t frames() const { return params.frames(); }
};

struct GenParams {
  int64_t n_frames = 144;
  std::optional<double> speed;  // m/s override for walking styles
};

MotionClip generate_clip(MotionStyle style, uint64_t seed, const GenParams& gen = {});

void save_clip(const MotionClip& clip, const std::filesystem::path& path);
MotionClip load_clip(const std::filesystem::path& path);

struct CorpusSizes {
  int train = 2000;
  int val = 200;
  int test = 200;
};

// Generates train/val/test clip directories plus a manifest, per-channel
// normalization statistics fit on train only, and a synthetic external
// occlusion-mask pool (camera visibility rule stand-in).
void build_corpus(const std::filesystem::path& out_dir, const CorpusSizes& sizes,
                  uint64_t split_seed, const Skeleton& skel, int64_t n_frames = 144);

std::vector<std::filesystem::path> list_clips(const std::filesystem::path& split_dir);

}  // namespace rohm
