#include "rohm/corruption.hpp"

#include <cmath>

#include "rohm/container.hpp"

namespace rohm {

BodyParamsSeq add_param_noise(const BodyParamsSeq& params, double k, uint64_t seed) {
  if (k < 0) throw Error("add_param_noise: k must be non-negative");
  if (k == 0.0) return params.clone();
  auto gen = make_generator(seed);
  const int64_t n = params.frames();
  const double rot_std = k * M_PI / 180.0;  // k degrees per axis
  const double trans_std = 0.01 * k;        // k cm per axis
  const double shape_std = 0.01 * k;

  // Rotation noise is composed in rotation space so 6D blocks stay valid:
  // R' = R * exp(w), w ~ N(0, rot_std^2 I).
  auto w = torch::randn({n, kNumJoints, 3}, gen, f64()) * rot_std;
  auto delta = axis_angle_to_matrix(w);  // [N,22,3,3]
  auto orient_m = rot6d_to_matrix(params.orient);
  auto pose_m = rot6d_to_matrix(params.pose);
  BodyParamsSeq out;
  out.orient = matrix_to_rot6d(torch::matmul(orient_m, delta.select(1, 0)), false);
  out.pose = matrix_to_rot6d(torch::matmul(pose_m, delta.slice(1, 1, kNumJoints)), false);
  out.trans = params.trans + torch::randn({n, 3}, gen, f64()) * trans_std;
  out.shape = params.shape + torch::randn({n, kNumShapeCoeffs}, gen, f64()) * shape_std;
  return out;
}

VisibilityMasks make_occlusion_mask(const OcclusionScheme& scheme, int64_t n_frames,
                                    const Skeleton& skel, uint64_t seed) {
  auto gen = make_generator(seed);
  auto jv = torch::ones({n_frames, kNumJoints}, f64());
  switch (scheme.kind) {
    case OcclusionKind::kNone:
      break;
    case OcclusionKind::kRandomJoints: {
      if (scheme.min_joints < 1 || scheme.max_joints < scheme.min_joints ||
          scheme.max_joints > kNumJoints)
        throw Error("occlusion: bad joint-count range");
      const int64_t count =
          torch::randint(scheme.min_joints, scheme.max_joints + 1, {1}, gen, torch::kLong)
              .item<int64_t>();
      auto perm = torch::randperm(kNumJoints, gen, torch::kLong);
      for (int64_t i = 0; i < count; ++i)
        jv.select(1, perm[i].item<int64_t>()).zero_();
      break;
    }
    case OcclusionKind::kLowerBody:
      for (int j : skel.lower_body_joints()) jv.select(1, j).zero_();
      break;
    case OcclusionKind::kUpperBody:
      for (int j : skel.upper_body_joints()) jv.select(1, j).zero_();
      break;
    case OcclusionKind::kFrameSpan: {
      const auto len = static_cast<int64_t>(std::llround(scheme.span_fraction * n_frames));
      if (len > 0) {
        const int64_t start =
            torch::randint(0, n_frames - len + 1, {1}, gen, torch::kLong).item<int64_t>();
        jv.slice(0, start, start + len).zero_();
      }
      break;
    }
    case OcclusionKind::kFullBodyFrames: {
      const auto count = static_cast<int64_t>(std::llround(scheme.frame_fraction * n_frames));
      auto perm = torch::randperm(n_frames, gen, torch::kLong);
      for (int64_t i = 0; i < count; ++i) jv.select(0, perm[i].item<int64_t>()).zero_();
      break;
    }
    case OcclusionKind::kExternalFile: {
      if (scheme.external_path.empty())
        throw ConfigError("occlusion: external scheme requires a mask file");
      auto arrays = read_container(scheme.external_path);
      auto pool = arrays.at("joint_visibility").to(torch::kFloat64);  // [M,N,22]
      if (pool.dim() != 3 || pool.size(2) != kNumJoints)
        throw IoError("occlusion: external pool must be [M,N,22]");
      const int64_t idx =
          torch::randint(0, pool.size(0), {1}, gen, torch::kLong).item<int64_t>();
      auto m = pool.select(0, idx);
      if (m.size(0) < n_frames)
        throw IoError("occlusion: external masks shorter than the clip");
      jv = m.slice(0, 0, n_frames).clone();
      break;
    }
    default:
      throw ConfigError("occlusion: unknown scheme kind");
  }
  return masks_from_joint_visibility(jv, skel);
}

const OcclusionScheme& SchemeMixture::sample(uint64_t seed) const {
  if (components.empty()) throw Error("mixture: no components");
  double total = 0;
  for (const auto& [p, s] : components) total += p;
  if (total <= 0) throw Error("mixture: weights must sum to a positive value");
  auto gen = make_generator(seed);
  // Weights are normalized so stated mixtures that do not sum to exactly 1
  // still draw every component.
  double u = torch::rand({1}, gen, f64()).item<double>() * total;
  for (const auto& [p, s] : components) {
    if (u < p) return s;
    u -= p;
  }
  return components.back().second;
}

std::string model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::kTrajNet: return "trajnet";
    case ModelKind::kPoseNet: return "posenet";
    case ModelKind::kTrajControl: return "trajcontrol";
    case ModelKind::kMdmpp: return "mdmpp";
  }
  throw Error("model kind: bad enum");
}

ModelKind model_kind_from_name(const std::string& name) {
  if (name == "trajnet") return ModelKind::kTrajNet;
  if (name == "posenet") return ModelKind::kPoseNet;
  if (name == "trajcontrol") return ModelKind::kTrajControl;
  if (name == "mdmpp") return ModelKind::kMdmpp;
  throw ConfigError("model kind: unknown name '" + name + "'");
}

int num_stages(ModelKind kind) {
  switch (kind) {
    case ModelKind::kTrajNet: return 3;
    case ModelKind::kTrajControl: return 1;
    case ModelKind::kPoseNet:
    case ModelKind::kMdmpp: return 2;
  }
  throw Error("model kind: bad enum");
}

StageCorruption curriculum(ModelKind kind, int stage) {
  if (stage < 1 || stage > num_stages(kind))
    throw ConfigError("curriculum: stage " + std::to_string(stage) + " invalid for " +
                      model_kind_name(kind));
  auto none = OcclusionScheme{};
  StageCorruption c;
  switch (kind) {
    case ModelKind::kTrajNet:
      if (stage == 1) {
        c.noise_level = 1.0;
        c.mixture.components = {{1.0, none}};
      } else if (stage == 2) {
        c.noise_level = 2.0;
        c.mixture.components = {{1.0, none}};
      } else {
        c.noise_level = 3.0;
        OcclusionScheme span;
        span.kind = OcclusionKind::kFrameSpan;
        span.span_fraction = 0.10;
        c.mixture.components = {{1.0, span}};
      }
      return c;
    case ModelKind::kTrajControl:
      c.noise_level = 2.0;
      c.mixture.components = {{1.0, none}};
      return c;
    case ModelKind::kPoseNet:
    case ModelKind::kMdmpp: {
      c.noise_level = stage == 1 ? 1.0 : 2.0;
      OcclusionScheme external;
      external.kind = OcclusionKind::kExternalFile;
      OcclusionScheme lower;
      lower.kind = OcclusionKind::kLowerBody;
      OcclusionScheme upper;
      upper.kind = OcclusionKind::kUpperBody;
      OcclusionScheme full;
      full.kind = OcclusionKind::kFullBodyFrames;
      full.frame_fraction = 0.30;
      c.mixture.components = {{0.5, external}, {0.3, lower}, {0.2, upper}, {0.1, full}};
      if (stage == 1) {
        OcclusionScheme rnd;
        rnd.kind = OcclusionKind::kRandomJoints;
        c.initial_scheme = rnd;
        c.initial_fraction = 0.25;
      }
      return c;
    }
  }
  throw Error("curriculum: bad enum");
}

}  // namespace rohm
