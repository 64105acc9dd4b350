#include "rohm/datagen.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "rohm/container.hpp"
#include "rohm/guidance.hpp"

namespace rohm {

namespace {

double uniform(torch::Generator& gen, double lo, double hi) {
  return lo + (hi - lo) * torch::rand({1}, gen, f64()).item<double>();
}

Tensor rot6d_from_axis_angle_seq(const Tensor& aa) {
  return matrix_to_rot6d(axis_angle_to_matrix(aa), /*validate=*/false);
}

// Local joint index (0..20) for skeleton joint j (1..21).
constexpr int kLHip = 0, kRHip = 1, kSpine1 = 2, kLKnee = 3, kRKnee = 4, kSpine2 = 5;
constexpr int kLAnkle = 6, kRAnkle = 7;
constexpr int kLShoulder = 15, kRShoulder = 16, kLElbow = 17, kRElbow = 18;

}  // namespace

MotionStyle motion_style_from_name(const std::string& name) {
  if (name == "walk") return MotionStyle::kWalk;
  if (name == "turn_walk") return MotionStyle::kTurnWalk;
  if (name == "idle_sway") return MotionStyle::kIdleSway;
  if (name == "arm_gesture") return MotionStyle::kArmGesture;
  if (name == "mixed") return MotionStyle::kMixed;
  throw ConfigError("datagen: unknown style '" + name + "'");
}

std::string motion_style_name(MotionStyle style) {
  switch (style) {
    case MotionStyle::kWalk: return "walk";
    case MotionStyle::kTurnWalk: return "turn_walk";
    case MotionStyle::kIdleSway: return "idle_sway";
    case MotionStyle::kArmGesture: return "arm_gesture";
    case MotionStyle::kMixed: return "mixed";
  }
  throw Error("datagen: bad style enum");
}

MotionClip generate_clip(MotionStyle style, uint64_t seed, const GenParams& gp) {
  auto gen = make_generator(seed);
  if (style == MotionStyle::kMixed) {
    const auto pick = torch::randint(0, 4, {1}, gen, torch::kLong).item<int64_t>();
    style = static_cast<MotionStyle>(pick);
  }
  const int64_t n = gp.n_frames;
  if (n < 2) throw Error("generate_clip: need at least 2 frames");
  const double fps = kFps;

  auto shape_row = torch::zeros({kNumShapeCoeffs}, f64());
  shape_row[0] = uniform(gen, -1.0, 1.0);
  shape_row[1] = uniform(gen, -1.0, 1.0);
  auto shape = shape_row.unsqueeze(0).expand({n, kNumShapeCoeffs}).clone();

  auto time = torch::arange(n, f64()) / fps;  // seconds
  auto aa = torch::zeros({n, kNumLocalJoints, 3}, f64());
  Tensor trans = torch::zeros({n, 3}, f64());
  Tensor yaw;

  const double x0 = uniform(gen, -1.0, 1.0);
  const double y0 = uniform(gen, -1.0, 1.0);
  const double yaw0 = uniform(gen, -M_PI, M_PI);

  const bool walking = style == MotionStyle::kWalk || style == MotionStyle::kTurnWalk;
  if (walking) {
    const double v = gp.speed ? *gp.speed : uniform(gen, 0.7, 1.3);
    const double turn_rate =
        style == MotionStyle::kTurnWalk ? uniform(gen, 0.15, 0.4) * (uniform(gen, -1, 1) < 0 ? -1 : 1)
                                        : 0.0;
    yaw = yaw0 + turn_rate * time;
    auto dir = torch::stack({torch::cos(yaw), torch::sin(yaw)}, -1);  // [N,2]
    auto xy = torch::cumsum(dir * (v / fps), 0);
    xy = xy - xy.slice(0, 0, 1) + torch::tensor({{x0, y0}}, f64());
    trans.slice(1, 0, 2) = xy;

    // Compass gait with double support. The foot's horizontal offset from the
    // hip is leg*sin(theta); during stance sin(theta) ramps linearly so that
    // leg*d(sin theta)/dt exactly cancels the root speed and the foot stays
    // put. A duty cycle above one half overlaps the two stance phases, so at
    // every instant at least one foot is planted.
    const double leg = 0.80 * (1.0 + 0.1 * (shape_row[0].item<double>() +
                                            shape_row[1].item<double>()));
    const double omega = 2.0 * M_PI * (0.55 + 0.45 * std::min(v, 1.5));
    const double duty = 0.6;  // stance fraction of the cycle
    const double stance_len = duty * 2.0 * M_PI;
    // Stance spans 2*c_sin of sin(theta) over stance_len of phase.
    const double c_sin = std::clamp(v * stance_len / (2.0 * leg * omega), 0.05, 0.8);
    const double amp = std::asin(c_sin);
    // Swing clearance: the shank shortens enough to lift the ankle well above
    // the contact-height band while it travels.
    const double knee_amp = std::clamp(3.0 * amp, 0.7, 1.2);
    auto phase = omega * time;
    auto wrap = [](const Tensor& x) {
      return x - torch::floor(x / (2.0 * M_PI)) * (2.0 * M_PI);
    };
    struct Leg {
      Tensor hip, knee, stance;
    };
    auto make_leg = [&](const Tensor& ph) {
      auto u = wrap(ph);
      auto stance = u < stance_len;
      auto p = (u / stance_len).clamp(0.0, 1.0);                    // stance progress
      auto q = ((u - stance_len) / (2.0 * M_PI - stance_len)).clamp(0.0, 1.0);
      // Stance: sin(theta) rises -c..+c (the +hip direction points the foot
      // backward). Swing: cosine return with zero end-point rates.
      auto sin_th = torch::where(stance, c_sin * (2.0 * p - 1.0),
                                 c_sin * torch::cos(M_PI * q));
      Leg l;
      l.hip = torch::asin(sin_th);
      l.knee = torch::where(stance, torch::zeros_like(u),
                            knee_amp * torch::sin(M_PI * q));
      l.stance = stance;
      return l;
    };
    auto left = make_leg(phase);
    auto right = make_leg(phase + M_PI);
    aa.select(1, kLHip).select(-1, 1) = left.hip;
    aa.select(1, kRHip).select(-1, 1) = right.hip;
    aa.select(1, kLKnee).select(-1, 1) = left.knee;
    aa.select(1, kRKnee).select(-1, 1) = right.knee;
    // Keep the sole level: the ankle cancels hip+knee pitch so the toe
    // neither sweeps nor dips while its ankle is pinned in stance.
    aa.select(1, kLAnkle).select(-1, 1) = -(left.hip + left.knee);
    aa.select(1, kRAnkle).select(-1, 1) = -(right.hip + right.knee);
    // Counter-phase arm swing.
    aa.select(1, kLShoulder).select(-1, 1) = 0.6 * amp * torch::sin(phase + M_PI);
    aa.select(1, kRShoulder).select(-1, 1) = 0.6 * amp * torch::sin(phase);
    // Lower the root by the pendulum shortening of the pinned leg. During
    // double support that is the stance leg nearer mid-stance (smaller |hip|):
    // it is the one whose height the root can hold exactly; the other hovers
    // a touch above the ground, which avoids penetration.
    auto pin_left = left.stance & (~right.stance | (left.hip.abs() <= right.hip.abs()));
    auto theta_pin = torch::where(pin_left, left.hip, right.hip);
    trans.select(1, 2) = -leg * (1.0 - torch::cos(theta_pin));
  } else {
    yaw = yaw0 * torch::ones({n}, f64());
    trans.select(1, 0).fill_(x0);
    trans.select(1, 1).fill_(y0);
    const double sway_f = uniform(gen, 0.2, 0.4);
    const double sway_phase = uniform(gen, 0.0, 2.0 * M_PI);
    auto sway = torch::sin(2.0 * M_PI * sway_f * time + sway_phase);
    aa.select(1, kSpine1).select(-1, 0) = 0.03 * sway;
    aa.select(1, kSpine2).select(-1, 0) = 0.04 * sway;
    const double arm_amp = style == MotionStyle::kArmGesture ? 0.7 : 0.15;
    const double arm_f = uniform(gen, 0.4, 0.8);
    auto wave = torch::sin(2.0 * M_PI * arm_f * time + sway_phase);
    aa.select(1, kLShoulder).select(-1, 0) = arm_amp * wave;
    aa.select(1, kRShoulder).select(-1, 0) = -arm_amp * wave;
    aa.select(1, kLElbow).select(-1, 1) = 0.5 * arm_amp * torch::cos(2.0 * M_PI * arm_f * time);
    aa.select(1, kRElbow).select(-1, 1) = 0.5 * arm_amp * torch::cos(2.0 * M_PI * arm_f * time);
  }

  auto orient_aa = torch::zeros({n, 3}, f64());
  orient_aa.select(1, 2) = yaw;

  // Shape-dependent ground offset: shift the root so the zero-pose toes sit
  // just above z = 0 for any sampled shape.
  {
    BodyParamsSeq rest;
    rest.trans = torch::zeros({1, 3}, f64());
    rest.orient = identity_rot6d().unsqueeze(0);
    rest.pose = identity_rot6d().reshape({1, 1, 6}).expand({1, kNumLocalJoints, 6}).clone();
    rest.shape = shape_row.unsqueeze(0);
    Skeleton skel = default_skeleton();
    auto rest_joints = forward_kinematics(skel, rest);
    const double toe_z = rest_joints[0][skel.toe_ids[0]][2].item<double>();
    const double limb_scale =
        1.0 + 0.1 * (shape_row[0].item<double>() + shape_row[1].item<double>());
    trans.select(1, 2) += 0.02 * limb_scale - toe_z;
  }

  MotionClip clip;
  clip.fps = fps;
  clip.style = motion_style_name(style);
  clip.seed = seed;
  clip.params.trans = trans;
  clip.params.orient = rot6d_from_axis_angle_seq(orient_aa);
  clip.params.pose = rot6d_from_axis_angle_seq(aa);
  clip.params.shape = shape;
  clip.params.validate();
  return clip;
}

void save_clip(const MotionClip& clip, const std::filesystem::path& path) {
  NamedArrays arrays;
  arrays["trans"] = clip.params.trans;
  arrays["orient"] = clip.params.orient;
  arrays["pose"] = clip.params.pose.reshape({clip.frames(), kNumLocalJoints * 6});
  arrays["shape"] = clip.params.shape;
  arrays["fps"] = torch::tensor({clip.fps}, f64());
  std::vector<uint8_t> style_bytes(clip.style.begin(), clip.style.end());
  arrays["style"] = torch::tensor(style_bytes, torch::kUInt8);
  std::array<uint8_t, 8> seed_bytes;
  for (int i = 0; i < 8; ++i) seed_bytes[i] = static_cast<uint8_t>(clip.seed >> (8 * i));
  arrays["seed"] = torch::tensor(std::vector<uint8_t>(seed_bytes.begin(), seed_bytes.end()),
                                 torch::kUInt8);
  write_container(path, arrays);
}

MotionClip load_clip(const std::filesystem::path& path) {
  auto arrays = read_container(path);
  MotionClip clip;
  clip.params.trans = arrays.at("trans").to(torch::kFloat64);
  clip.params.orient = arrays.at("orient").to(torch::kFloat64);
  const int64_t n = clip.params.trans.size(0);
  clip.params.pose = arrays.at("pose").to(torch::kFloat64).reshape({n, kNumLocalJoints, 6});
  clip.params.shape = arrays.at("shape").to(torch::kFloat64);
  clip.fps = arrays.at("fps").to(torch::kFloat64).item<double>();
  if (arrays.count("style")) {
    auto s = arrays.at("style");
    clip.style.assign(reinterpret_cast<const char*>(s.data_ptr<uint8_t>()), s.numel());
  }
  if (arrays.count("seed")) {
    auto s = arrays.at("seed");
    uint64_t seed = 0;
    for (int i = 0; i < 8 && i < s.numel(); ++i)
      seed |= static_cast<uint64_t>(s[i].item<uint8_t>()) << (8 * i);
    clip.seed = seed;
  }
  clip.params.validate();
  return clip;
}

std::vector<std::filesystem::path> list_clips(const std::filesystem::path& split_dir) {
  std::vector<std::filesystem::path> out;
  if (!std::filesystem::is_directory(split_dir))
    throw IoError("corpus: no such split directory " + split_dir.string());
  for (const auto& e : std::filesystem::directory_iterator(split_dir))
    if (e.path().extension() == ".rohm") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

void build_corpus(const std::filesystem::path& out_dir, const CorpusSizes& sizes,
                  uint64_t split_seed, const Skeleton& skel, int64_t n_frames) {
  namespace fs = std::filesystem;
  const std::vector<MotionStyle> styles = {MotionStyle::kWalk, MotionStyle::kTurnWalk,
                                           MotionStyle::kIdleSway, MotionStyle::kArmGesture,
                                           MotionStyle::kMixed};
  struct Split {
    const char* name;
    int count;
    uint64_t base;
  };
  // Disjoint seed ranges per split.
  const std::array<Split, 3> splits = {Split{"train", sizes.train, split_seed},
                                       Split{"val", sizes.val, split_seed + 10'000'019ull},
                                       Split{"test", sizes.test, split_seed + 20'000'033ull}};

  std::vector<MotionFeatures> train_features;
  GenParams gp;
  gp.n_frames = n_frames;
  for (const auto& split : splits) {
    fs::create_directories(out_dir / split.name);
    for (int i = 0; i < split.count; ++i) {
      auto style = styles[i % styles.size()];
      auto clip = generate_clip(style, split.base + static_cast<uint64_t>(i), gp);
      char name[32];
      std::snprintf(name, sizeof(name), "clip_%05d.rohm", i);
      save_clip(clip, out_dir / split.name / name);
      if (std::string(split.name) == "train" &&
          static_cast<int>(train_features.size()) < 512)
        train_features.push_back(encode_motion(skel, clip.params, clip.fps));
    }
  }

  auto stats = fit_norm_stats(train_features);
  stats.save(out_dir / "norm_stats.rohm");

  // Synthetic external occlusion pool: project a handful of train clips into
  // a fixed camera with an image-plane occluder and keep the visibility rule
  // output.
  const int pool_size = std::min(32, sizes.train);
  std::vector<Tensor> pool;
  for (int i = 0; i < pool_size; ++i) {
    auto clip = generate_clip(styles[i % styles.size()], splits[0].base + static_cast<uint64_t>(i), gp);
    auto joints = forward_kinematics(skel, clip.params);
    auto center = joints.mean({0, 1});
    auto eye = center + torch::tensor({3.5, 0.8, 0.6}, f64());
    auto cam = CameraModel::looking_at(eye, center, 800, 800, 640, 480);
    auto obs = synth_observations(joints, cam, 2.0, image_lower_half_occluder(cam), skel,
                                  splits[0].base + 777ull + static_cast<uint64_t>(i));
    pool.push_back(joint_visibility_from_masks(obs.masks, skel));
  }
  if (!pool.empty())
    write_container(out_dir / "masks_external.rohm",
                    {{"joint_visibility", torch::stack(pool, 0)}});

  nlohmann::json manifest;
  manifest["format"] = "rohm-corpus";
  manifest["version"] = 1;
  manifest["split_seed"] = split_seed;
  manifest["n_frames"] = n_frames;
  manifest["fps"] = kFps;
  manifest["sizes"] = {{"train", sizes.train}, {"val", sizes.val}, {"test", sizes.test}};
  manifest["norm_stats"] = "norm_stats.rohm";
  manifest["external_masks"] = "masks_external.rohm";
  std::ofstream os(out_dir / "manifest.json");
  os << manifest.dump(2) << "\n";
}

}  // namespace rohm
