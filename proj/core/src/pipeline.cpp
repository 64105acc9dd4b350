#include "rohm/pipeline.hpp"

#include <cmath>
#include <limits>

namespace rohm {

namespace {

Tensor mse(const Tensor& a, const Tensor& b) { return (a - b).square().mean(); }

Tensor fps_diff(const Tensor& x, double fps) {
  return (x.slice(-2, 1) - x.slice(-2, 0, x.size(-2) - 1)) * fps;
}

// Root world position from raw compact trajectory channels [.., N, 13].
// Uses the gamma block because decode_motion places the body from gamma;
// supervising the redundant rl/rz channels instead leaves the decoded root
// only weakly constrained.
Tensor root_positions(const Tensor& traj_raw) {
  using namespace traj::compact;
  return traj_raw.slice(-1, kGamma, kGamma + 3);
}

Tensor to_like(const Tensor& x, const Tensor& ref) { return x.to(ref.scalar_type()); }

uint64_t mix_seed(uint64_t seed, uint64_t salt) {
  uint64_t h = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
  h ^= h >> 33;
  h *= 0xff51afd7ed558ccdull;
  h ^= h >> 33;
  return h;
}

int64_t draw_index(torch::Generator& gen, int64_t n) {
  return torch::randint(n, {1}, gen, torch::kInt64).item<int64_t>();
}

uint64_t draw_seed(torch::Generator& gen) {
  return static_cast<uint64_t>(
      torch::randint(std::numeric_limits<int64_t>::max(), {1}, gen, torch::kInt64)
          .item<int64_t>());
}

}  // namespace

void StageConfig::validate() const {
  if (steps < 1 || batch < 1) throw ConfigError("stage: steps and batch must be >= 1");
  if (lr <= 0) throw ConfigError("stage: lr must be positive");
  if (lambda_j3d < 0 || lambda_vel < 0 || lambda_skate < 0)
    throw ConfigError("stage: loss weights must be non-negative");
  if (corruption.noise_level < 0) throw ConfigError("stage: noise level must be >= 0");
}

std::vector<StageConfig> default_stages(ModelKind kind, int steps_per_stage, int batch,
                                        double lr) {
  std::vector<StageConfig> out;
  const int n = num_stages(kind);
  for (int s = 1; s <= n; ++s) {
    StageConfig cfg;
    cfg.kind = kind;
    cfg.corruption = curriculum(kind, s);
    cfg.steps = steps_per_stage;
    cfg.batch = batch;
    cfg.lr = lr;
    const bool pose_like = kind == ModelKind::kPoseNet || kind == ModelKind::kMdmpp;
    cfg.lambda_skate = (pose_like && s == n) ? 0.1 : 0.0;
    out.push_back(cfg);
  }
  return out;
}

void set_external_mask_pool(std::vector<StageConfig>& stages,
                            const std::filesystem::path& pool) {
  for (auto& stage : stages) {
    for (auto& [prob, scheme] : stage.corruption.mixture.components)
      if (scheme.kind == OcclusionKind::kExternalFile) scheme.external_path = pool;
    if (stage.corruption.initial_scheme &&
        stage.corruption.initial_scheme->kind == OcclusionKind::kExternalFile)
      stage.corruption.initial_scheme->external_path = pool;
  }
}

Tensor total_loss(const LossComponents& parts, const LossWeights& weights) {
  if (weights.j3d < 0 || weights.vel < 0 || weights.skate < 0)
    throw ConfigError("total_loss: weights must be non-negative");
  return parts.simple + weights.j3d * parts.j3d + weights.vel * parts.vel +
         weights.skate * parts.skate;
}

LossComponents loss_components(ModelKind kind, const Tensor& pred, const Tensor& gt,
                               const Tensor& gt_traj, const Skeleton& skel,
                               const NormStats& stats, double fps) {
  if (!pred.defined() || !gt.defined() || pred.sizes() != gt.sizes())
    throw Error("loss_components: pred/gt shape mismatch");
  LossComponents parts;
  parts.simple = mse(pred, gt);

  const bool traj_kind = kind == ModelKind::kTrajNet || kind == ModelKind::kTrajControl;
  if (traj_kind) {
    if (pred.size(-1) != traj::kCompact) throw Error("loss_components: expected [B,N,13]");
    auto cm = to_like(stats.traj_compact_mean(), pred);
    auto cs = to_like(stats.traj_compact_std(), pred);
    auto root_p = root_positions(invert_norm(pred, cm, cs));
    auto root_g = root_positions(invert_norm(gt, cm, cs));
    parts.j3d = mse(root_p, root_g);
    parts.vel = mse(fps_diff(root_p, fps), fps_diff(root_g, fps));
    parts.skate = torch::zeros({}, pred.options());
    return parts;
  }

  const bool is_mdmpp = kind == ModelKind::kMdmpp;
  const int pose_off = is_mdmpp ? traj::kCompact : 0;
  if (pred.size(-1) != pose_off + pose::kDim)
    throw Error("loss_components: unexpected feature width");
  auto pm = to_like(stats.pose_mean, pred);
  auto ps = to_like(stats.pose_std, pred);
  auto pose_p = invert_norm(pred.slice(-1, pose_off), pm, ps).to(torch::kFloat64);
  auto pose_g = invert_norm(gt.slice(-1, pose_off), pm, ps).to(torch::kFloat64);

  Tensor traj_p, traj_g;  // raw, float64, [B,N,13 or 25]
  if (is_mdmpp) {
    auto cm = to_like(stats.traj_compact_mean(), pred);
    auto cs = to_like(stats.traj_compact_std(), pred);
    traj_p = invert_norm(pred.slice(-1, 0, traj::kCompact), cm, cs).to(torch::kFloat64);
    traj_g = invert_norm(gt.slice(-1, 0, traj::kCompact), cm, cs).to(torch::kFloat64);
  } else {
    if (!gt_traj.defined()) throw Error("loss_components: PoseNet needs the GT trajectory");
    traj_p = gt_traj.to(torch::kFloat64);
    traj_g = traj_p;
  }

  const int64_t b = pred.size(0);
  std::vector<Tensor> jp, jg;
  for (int64_t i = 0; i < b; ++i) {
    jp.push_back(decode_motion(skel, traj_p[i], pose_p[i]).joints);
    jg.push_back(decode_motion(skel, traj_g[i], pose_g[i]).joints);
  }
  auto joints_p = torch::stack(jp);  // [B,N,22,3]
  auto joints_g = torch::stack(jg);
  parts.j3d = mse(joints_p, joints_g).to(pred.scalar_type());
  parts.vel = mse(fps_diff(joints_p.flatten(2), fps), fps_diff(joints_g.flatten(2), fps))
                  .to(pred.scalar_type());

  auto contacts = gt.slice(-1, pose_off + pose::kContact).to(torch::kFloat64).detach();
  auto foot_ids = torch::tensor(std::vector<int64_t>(skel.foot_joint_ids.begin(),
                                                     skel.foot_joint_ids.end()));
  auto feet = joints_p.index_select(2, foot_ids);     // [B,N,4,3]
  auto vel = fps_diff(feet.flatten(2), fps).unflatten(-1, {4, 3});
  auto f = contacts.slice(1, 0, contacts.size(1) - 1).unsqueeze(-1);
  parts.skate = (f * vel).square().mean().to(pred.scalar_type());
  return parts;
}

std::vector<ClipData> prepare_clips(const std::vector<MotionClip>& clips, const Skeleton& skel) {
  std::vector<ClipData> out;
  out.reserve(clips.size());
  for (const auto& clip : clips) {
    ClipData d;
    d.params = clip.params.to(torch::kFloat64);
    d.clean = encode_motion(skel, d.params, clip.fps);
    d.joints = forward_kinematics(skel, d.params);
    d.fps = clip.fps;
    out.push_back(std::move(d));
  }
  return out;
}

namespace {

// One training batch in model space.
struct Batch {
  Tensor x0;         // [B,N,C] normalized regression target
  Tensor cond;       // [B,N,C_cond] masked normalized observation
  Tensor gt_traj;    // [B,N,25] raw, float64
  Tensor gt_traj_n;  // [B,N,13] normalized (PoseNet trajectory conditioning)
  Tensor gt_pose_n;  // [B,N,266] normalized (adapter control signal)
};

Batch make_batch(ModelKind kind, const std::vector<ClipData>& data, const NormStats& stats,
                 const StageConfig& stage, const Skeleton& skel, double progress,
                 torch::Generator& gen) {
  const auto cm = stats.traj_compact_mean(), cs = stats.traj_compact_std();
  std::vector<Tensor> x0s, conds, trajs, traj_ns, pose_ns;
  for (int i = 0; i < stage.batch; ++i) {
    const auto& clip = data[draw_index(gen, static_cast<int64_t>(data.size()))];
    const int64_t n = clip.params.frames();

    auto noisy = add_param_noise(clip.params, stage.corruption.noise_level, draw_seed(gen));
    const OcclusionScheme* scheme;
    const uint64_t mix_s = draw_seed(gen);
    if (stage.corruption.initial_scheme && progress < stage.corruption.initial_fraction)
      scheme = &*stage.corruption.initial_scheme;
    else
      scheme = &stage.corruption.mixture.sample(mix_s);
    auto masks = make_occlusion_mask(*scheme, n, skel, draw_seed(gen));

    auto obs = encode_motion(skel, noisy, clip.fps);
    auto obs_traj_n = apply_norm(traj_full_to_compact(obs.traj), cm, cs) * masks.traj;
    auto obs_pose_n = apply_norm(obs.pose, stats.pose_mean, stats.pose_std) * masks.pose;
    auto gt_traj_n = apply_norm(traj_full_to_compact(clip.clean.traj), cm, cs);
    auto gt_pose_n = apply_norm(clip.clean.pose, stats.pose_mean, stats.pose_std);

    switch (kind) {
      case ModelKind::kTrajNet:
      case ModelKind::kTrajControl:
        x0s.push_back(gt_traj_n);
        conds.push_back(obs_traj_n);
        break;
      case ModelKind::kPoseNet:
        x0s.push_back(gt_pose_n);
        conds.push_back(obs_pose_n);
        break;
      case ModelKind::kMdmpp:
        x0s.push_back(torch::cat({gt_traj_n, gt_pose_n}, -1));
        conds.push_back(torch::cat({obs_traj_n, obs_pose_n}, -1));
        break;
    }
    trajs.push_back(clip.clean.traj);
    traj_ns.push_back(gt_traj_n);
    pose_ns.push_back(gt_pose_n);
  }
  Batch b;
  b.x0 = torch::stack(x0s).to(torch::kFloat32);
  b.cond = torch::stack(conds).to(torch::kFloat32);
  b.gt_traj = torch::stack(trajs);
  b.gt_traj_n = torch::stack(traj_ns).to(torch::kFloat32);
  b.gt_pose_n = torch::stack(pose_ns).to(torch::kFloat32);
  return b;
}

using PredictFn = std::function<Tensor(const Batch&, const Tensor& x_t, const Tensor& t)>;

std::vector<StageSummary> train_impl(const std::string& name, ModelKind kind,
                                     std::vector<Tensor> opt_params, const PredictFn& predict,
                                     const std::vector<ClipData>& data, const NormStats& stats,
                                     const DiffusionSchedule& sched,
                                     const std::vector<StageConfig>& stages,
                                     const Skeleton& skel, uint64_t seed, const TrainLog& log) {
  if (data.empty()) throw ConfigError("train: empty corpus");
  if (stages.empty()) throw ConfigError("train: no stages");
  std::vector<StageSummary> out;
  const double fps = data.front().fps;
  for (size_t si = 0; si < stages.size(); ++si) {
    const auto& stage = stages[si];
    stage.validate();
    if (stage.kind != kind) throw ConfigError("train: stage kind does not match " + name);
    auto gen = make_generator(mix_seed(seed, si));
    torch::optim::Adam opt(opt_params, torch::optim::AdamOptions(stage.lr));
    const int head = std::max(1, stage.steps / 10);
    double first_sum = 0, last_sum = 0;
    StageSummary summary;
    summary.stage = static_cast<int>(si + 1);
    for (int step = 1; step <= stage.steps; ++step) {
      const double progress = (step - 1) / static_cast<double>(stage.steps);
      auto batch = make_batch(kind, data, stats, stage, skel, progress, gen);
      const int64_t b = batch.x0.size(0);
      auto t = torch::randint(1, sched.steps + 1, {b}, gen, torch::kInt64);
      auto eps = torch::randn(batch.x0.sizes(), gen, torch::kFloat32);
      auto ab = sched.alpha_bar.index_select(0, t).to(torch::kFloat32).view({b, 1, 1});
      auto x_t = ab.sqrt() * batch.x0 + (1 - ab).sqrt() * eps;

      auto pred = predict(batch, x_t, t);
      auto parts = loss_components(kind, pred, batch.x0, batch.gt_traj, skel, stats, fps);
      LossWeights w{stage.lambda_j3d, stage.lambda_vel, stage.lambda_skate};
      auto loss = total_loss(parts, w);
      const double lv = loss.item<double>();
      if (!std::isfinite(lv))
        throw Error(name + ": non-finite loss at stage " + std::to_string(si + 1) + " step " +
                    std::to_string(step));
      opt.zero_grad();
      loss.backward();
      opt.step();

      if (step <= head) first_sum += lv;
      if (step > stage.steps - head) last_sum += lv;
      if (log) {
        TrainLogRecord rec;
        rec.model = name;
        rec.stage = static_cast<int>(si + 1);
        rec.step = step;
        auto ta = t.accessor<int64_t, 1>();
        for (int64_t i = 0; i < b; ++i) rec.ts.push_back(static_cast<int>(ta[i]));
        rec.simple = parts.simple.item<double>();
        rec.j3d = parts.j3d.item<double>();
        rec.vel = parts.vel.item<double>();
        rec.skate = parts.skate.item<double>();
        rec.total = lv;
        log(rec);
      }
    }
    summary.first_avg_loss = first_sum / head;
    summary.last_avg_loss = last_sum / head;
    out.push_back(summary);
  }
  return out;
}

}  // namespace

std::vector<StageSummary> train_trajnet(TrajNet& net, const std::vector<ClipData>& data,
                                        const NormStats& stats, const DiffusionSchedule& sched,
                                        const std::vector<StageConfig>& stages,
                                        const Skeleton& skel, uint64_t seed,
                                        const TrainLog& log) {
  net->train();
  auto predict = [&](const Batch& b, const Tensor& x_t, const Tensor& t) {
    return net->forward(x_t, t, b.cond);
  };
  auto out = train_impl("trajnet", ModelKind::kTrajNet, net->parameters(), predict, data, stats,
                        sched, stages, skel, seed, log);
  net->trained = true;
  net->eval();
  return out;
}

std::vector<StageSummary> train_posenet(PoseNet& net, const std::vector<ClipData>& data,
                                        const NormStats& stats, const DiffusionSchedule& sched,
                                        const std::vector<StageConfig>& stages,
                                        const Skeleton& skel, uint64_t seed,
                                        const TrainLog& log) {
  net->train();
  auto predict = [&](const Batch& b, const Tensor& x_t, const Tensor& t) {
    return net->forward(b.gt_traj_n, x_t, t, b.cond);
  };
  auto out = train_impl("posenet", ModelKind::kPoseNet, net->parameters(), predict, data, stats,
                        sched, stages, skel, seed, log);
  net->trained = true;
  net->eval();
  return out;
}

std::vector<StageSummary> train_trajcontrol(TrajNet& base, TrajControl& ctl,
                                            const std::vector<ClipData>& data,
                                            const NormStats& stats,
                                            const DiffusionSchedule& sched,
                                            const std::vector<StageConfig>& stages,
                                            const Skeleton& skel, uint64_t seed,
                                            const TrainLog& log) {
  const uint64_t base_sum = parameter_checksum(*base);
  base->eval();
  ctl->train();
  auto predict = [&](const Batch& b, const Tensor& x_t, const Tensor& t) {
    auto inj = ctl->forward(b.gt_pose_n, t);
    return base->forward(x_t, t, b.cond, &inj);
  };
  auto out = train_impl("trajcontrol", ModelKind::kTrajControl, ctl->parameters(), predict, data,
                        stats, sched, stages, skel, seed, log);
  if (parameter_checksum(*base) != base_sum)
    throw Error("trajcontrol: base weights changed during fine-tuning");
  ctl->eval();
  return out;
}

std::vector<StageSummary> train_mdmpp(Mdmpp& net, const std::vector<ClipData>& data,
                                      const NormStats& stats, const DiffusionSchedule& sched,
                                      const std::vector<StageConfig>& stages,
                                      const Skeleton& skel, uint64_t seed, const TrainLog& log) {
  net->train();
  auto predict = [&](const Batch& b, const Tensor& x_t, const Tensor& t) {
    return net->forward(x_t, t, b.cond);
  };
  auto out = train_impl("mdmpp", ModelKind::kMdmpp, net->parameters(), predict, data, stats,
                        sched, stages, skel, seed, log);
  net->trained = true;
  net->eval();
  return out;
}

void InferenceConfig::validate() const {
  if (k_iters < 1) throw ConfigError("inference: k_iters must be >= 1");
  if (guidance.lambda_2d > 0 && (!camera || !keypoints))
    throw ConfigError("inference: 2D guidance needs a camera and keypoints");
}

InferenceResult iterative_inference(const Skeleton& skel, const MotionFeatures& observed,
                                    const VisibilityMasks& masks, InferenceModels& models,
                                    const NormStats& stats, const DiffusionSchedule& sched,
                                    const InferenceConfig& cfg, const CondLog& cond_log) {
  cfg.validate();
  if (!models.trajnet || !models.posenet)
    throw ConfigError("inference: trajnet and posenet are required");
  if (cfg.guidance.enabled()) cfg.guidance.validate(sched.steps);
  masks.validate();
  const int64_t n = observed.traj.size(0);

  const auto cm = stats.traj_compact_mean(), cs = stats.traj_compact_std();
  auto traj_obs_n =
      apply_norm(traj_full_to_compact(observed.traj), cm, cs).to(torch::kFloat32);
  auto pose_obs_n =
      apply_norm(observed.pose, stats.pose_mean, stats.pose_std).to(torch::kFloat32);
  auto mask_t = masks.traj.to(torch::kFloat32);
  auto mask_p = masks.pose.to(torch::kFloat32);

  models.trajnet->eval();
  models.posenet->eval();
  if (models.trajcontrol) models.trajcontrol->eval();

  InferenceResult result;
  Tensor r_hat_n, p_hat_n;
  for (int iter = 1; iter <= cfg.k_iters; ++iter) {
    Tensor cond_r;
    std::vector<std::string> src_r;
    const bool want_ctl = iter > 1 && cfg.use_trajcontrol;
    const bool use_ctl = want_ctl && models.trajcontrol;
    if (iter == 1) {
      cond_r = mask_t * traj_obs_n;
      src_r = {"M_R*R_obs"};
    } else {
      cond_r = r_hat_n;
      src_r = {"R_hat_prev"};
      if (use_ctl)
        src_r.push_back("E(t,P_hat_prev)");
      else
        result.degraded_no_trajcontrol = true;
    }
    auto traj_denoiser = [&](const Tensor& x_t, int t) {
      torch::NoGradGuard g;
      auto tt = torch::full({1}, t, torch::kInt64);
      auto xb = x_t.unsqueeze(0);
      auto cb = cond_r.unsqueeze(0);
      if (use_ctl) {
        auto inj = models.trajcontrol->forward(p_hat_n.unsqueeze(0), tt);
        return models.trajnet->forward(xb, tt, cb, &inj).squeeze(0);
      }
      return models.trajnet->forward(xb, tt, cb).squeeze(0);
    };
    r_hat_n = ancestral_sample(traj_denoiser, {n, traj::kCompact}, sched,
                               mix_seed(cfg.seed, 2 * iter));
    if (cond_log) cond_log({iter, "trajnet", src_r});

    Tensor cond_p;
    std::vector<std::string> src_p = {"R_hat_" + std::to_string(iter)};
    if (iter == 1) {
      cond_p = mask_p * pose_obs_n;
      src_p.push_back("M_P*P_obs");
    } else {
      cond_p = p_hat_n;
      src_p.push_back("P_hat_prev");
    }
    auto pose_denoiser = [&](const Tensor& x_t, int t) {
      torch::NoGradGuard g;
      auto tt = torch::full({1}, t, torch::kInt64);
      return models.posenet
          ->forward(r_hat_n.unsqueeze(0), x_t.unsqueeze(0), tt, cond_p.unsqueeze(0))
          .squeeze(0);
    };
    GuidanceGradFn grad_fn;
    if (cfg.guidance.enabled()) {
      auto traj_raw = invert_norm(r_hat_n.to(torch::kFloat64), cm, cs);
      grad_fn = [&, traj_raw](const Tensor& x0_hat, int /*t*/) {
        auto score = [&](const Tensor& wrt) {
          auto pose_raw =
              invert_norm(wrt.to(torch::kFloat64), stats.pose_mean, stats.pose_std);
          Tensor s = torch::zeros({}, torch::kFloat64);
          if (cfg.guidance.lambda_skate > 0)
            s = s + cfg.guidance.lambda_skate * j_skate(skel, traj_raw, pose_raw, cfg.fps);
          if (cfg.guidance.lambda_2d > 0)
            s = s + cfg.guidance.lambda_2d *
                        j_2d(skel, traj_raw, pose_raw, *cfg.keypoints, *cfg.camera);
          return s;
        };
        return grad_guidance(score, x0_hat);
      };
    }
    p_hat_n = ancestral_sample(pose_denoiser, {n, pose::kDim}, sched,
                               mix_seed(cfg.seed, 2 * iter + 1),
                               cfg.guidance.enabled() ? &cfg.guidance : nullptr, grad_fn);
    if (cond_log) cond_log({iter, "posenet", src_p});
  }

  result.traj = invert_norm(r_hat_n.to(torch::kFloat64), cm, cs);
  result.pose = invert_norm(p_hat_n.to(torch::kFloat64), stats.pose_mean, stats.pose_std);
  result.decoded = decode_motion(skel, result.traj, result.pose);
  return result;
}

}  // namespace rohm
