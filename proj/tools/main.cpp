// rohm: command-line front end for the motion reconstruction pipeline.
//
// Commands: datagen | train | finetune-trajcontrol | infer | evaluate |
// ablate | render. Every run writes a resolved-config snapshot next to its
// outputs. Exit codes: 0 ok, 2 config error, 3 runtime failure, 4 threshold
// failure in --ci mode.

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "rohm/container.hpp"
#include "rohm/datagen.hpp"
#include "rohm/metrics.hpp"
#include "rohm/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rohm;

namespace {

// Raised when --ci thresholds are not met; mapped to exit code 4.
struct ThresholdFailure : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Config plumbing

json load_json_file(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw ConfigError("bad config file " + path.string() + ": " + e.what());
  }
  return j;
}

// Merges `user` into `base`, rejecting keys that the defaults do not know.
void merge_config(json& base, const json& user, const std::string& prefix) {
  for (const auto& [key, value] : user.items()) {
    const std::string where = prefix.empty() ? key : prefix + "." + key;
    if (!base.contains(key)) throw ConfigError("unknown config key: " + where);
    if (base[key].is_object() && value.is_object())
      merge_config(base[key], value, where);
    else
      base[key] = value;
  }
}

json parse_override_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    return json(text);  // bare strings need no quotes
  }
}

void apply_override(json& cfg, const std::string& item) {
  const auto eq = item.find('=');
  if (eq == std::string::npos) throw ConfigError("--set expects key=value, got: " + item);
  const std::string path = item.substr(0, eq);
  json* node = &cfg;
  std::istringstream keys(path);
  std::string key;
  std::vector<std::string> parts;
  while (std::getline(keys, key, '.')) parts.push_back(key);
  for (size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->contains(parts[i])) throw ConfigError("unknown config key: " + path);
    node = &(*node)[parts[i]];
  }
  if (parts.empty() || !node->contains(parts.back()))
    throw ConfigError("unknown config key: " + path);
  (*node)[parts.back()] = parse_override_value(item.substr(eq + 1));
}

struct CommonArgs {
  std::string config_path;
  std::string out;
  uint64_t seed = 0;
  std::vector<std::string> overrides;
};

json resolve_config(json defaults, const CommonArgs& args) {
  if (!args.config_path.empty()) merge_config(defaults, load_json_file(args.config_path), "");
  for (const auto& item : args.overrides) apply_override(defaults, item);
  return defaults;
}

void write_snapshot(const fs::path& out_dir, const std::string& command, const json& cfg,
                    uint64_t seed) {
  fs::create_directories(out_dir);
  json snap;
  snap["command"] = command;
  snap["seed"] = seed;
  snap["config"] = cfg;
  std::ofstream os(out_dir / "resolved_config.json");
  os << snap.dump(2) << "\n";
}

fs::path cache_dir() {
  if (const char* env = std::getenv("ROHM_CACHE")) return fs::path(env);
  return fs::path("rohm_cache");
}

// ---------------------------------------------------------------------------
// Corpus helpers

OcclusionScheme scheme_from_config(const json& cfg) {
  OcclusionScheme s;
  const std::string name = cfg.at("occlusion").get<std::string>();
  if (name == "none")
    s.kind = OcclusionKind::kNone;
  else if (name == "random_joints")
    s.kind = OcclusionKind::kRandomJoints;
  else if (name == "lower_body")
    s.kind = OcclusionKind::kLowerBody;
  else if (name == "upper_body")
    s.kind = OcclusionKind::kUpperBody;
  else if (name == "frame_span")
    s.kind = OcclusionKind::kFrameSpan;
  else if (name == "full_body_frames")
    s.kind = OcclusionKind::kFullBodyFrames;
  else
    throw ConfigError("unknown occlusion scheme: " + name);
  return s;
}

std::vector<MotionClip> load_split(const fs::path& corpus, const std::string& split,
                                   int max_clips) {
  auto paths = list_clips(corpus / split);
  if (paths.empty()) throw ConfigError("no clips under " + (corpus / split).string());
  if (max_clips > 0 && static_cast<int>(paths.size()) > max_clips)
    paths.resize(max_clips);
  std::vector<MotionClip> clips;
  for (const auto& p : paths) clips.push_back(load_clip(p));
  return clips;
}

NormStats load_stats(const fs::path& corpus) {
  return NormStats::load(corpus / "norm_stats.rohm");
}

// ---------------------------------------------------------------------------
// datagen

int cmd_datagen(const CommonArgs& args) {
  json cfg = {
      {"train", 200}, {"val", 20}, {"test", 20}, {"frames", 144},
  };
  cfg = resolve_config(cfg, args);
  const fs::path out = args.out.empty() ? cache_dir() / "corpus" : fs::path(args.out);
  write_snapshot(out, "datagen", cfg, args.seed);

  CorpusSizes sizes;
  sizes.train = cfg["train"].get<int>();
  sizes.val = cfg["val"].get<int>();
  sizes.test = cfg["test"].get<int>();
  build_corpus(out, sizes, args.seed, default_skeleton(), cfg["frames"].get<int64_t>());
  std::cout << "corpus written to " << out.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train / finetune-trajcontrol

json default_train_config() {
  return {
      {"model", "trajnet"},
      {"corpus", (cache_dir() / "corpus").string()},
      {"max_clips", 0},
      {"steps_per_stage", 400},
      {"batch", 8},
      {"lr", 1e-4},
      {"schedule_steps", 100},
      {"trajnet", {{"channels", json::array({32, 64, 128})}, {"kernel", 5}, {"temb_dim", 64}}},
      {"transformer", {{"latent", 128}, {"layers", 3}, {"heads", 4}, {"ff", 256}}},
  };
}

TrajNetConfig trajnet_arch(const json& cfg) {
  TrajNetConfig arch;
  arch.channels = cfg["trajnet"]["channels"].get<std::vector<int>>();
  arch.kernel = cfg["trajnet"]["kernel"].get<int>();
  arch.temb_dim = cfg["trajnet"]["temb_dim"].get<int>();
  return arch;
}

TransformerConfig transformer_arch(const json& cfg, bool mdmpp) {
  TransformerConfig arch = mdmpp ? MdmppImpl::mdmpp_default_config() : TransformerConfig{};
  arch.latent = cfg["transformer"]["latent"].get<int>();
  arch.layers = cfg["transformer"]["layers"].get<int>();
  arch.heads = cfg["transformer"]["heads"].get<int>();
  arch.ff = cfg["transformer"]["ff"].get<int>();
  return arch;
}

TrainLog jsonl_logger(std::ofstream& os) {
  return [&os](const TrainLogRecord& r) {
    json line = {{"model", r.model}, {"stage", r.stage}, {"step", r.step},
                 {"simple", r.simple}, {"j3d", r.j3d},   {"vel", r.vel},
                 {"skate", r.skate},  {"total", r.total}};
    os << line.dump() << "\n";
  };
}

CheckpointMeta make_meta(const std::string& kind, const json& arch, int schedule_steps,
                         const NormStats& stats) {
  CheckpointMeta meta;
  meta.kind = kind;
  meta.schedule_steps = schedule_steps;
  meta.norm_stats_hash = stats.hash();
  meta.trained = true;
  meta.config = arch;
  return meta;
}

int cmd_train(const CommonArgs& args) {
  json cfg = resolve_config(default_train_config(), args);
  const fs::path out = args.out.empty() ? fs::path("runs/train") : fs::path(args.out);
  write_snapshot(out, "train", cfg, args.seed);

  auto skel = default_skeleton();
  const fs::path corpus = cfg["corpus"].get<std::string>();
  auto clips = load_split(corpus, "train", cfg["max_clips"].get<int>());
  auto data = prepare_clips(clips, skel);
  auto stats = load_stats(corpus);
  const int steps = cfg["schedule_steps"].get<int>();
  auto sched = make_schedule(steps);

  const std::string model = cfg["model"].get<std::string>();
  const auto kind = model_kind_from_name(model);
  auto stages = default_stages(kind, cfg["steps_per_stage"].get<int>(),
                               cfg["batch"].get<int>(), cfg["lr"].get<double>());
  set_external_mask_pool(stages, corpus / "masks_external.rohm");

  std::ofstream log_os(out / "train_log.jsonl");
  auto log = jsonl_logger(log_os);

  torch::manual_seed(static_cast<int64_t>(args.seed));
  std::vector<StageSummary> summaries;
  if (kind == ModelKind::kTrajNet) {
    TrajNet net(trajnet_arch(cfg));
    summaries = train_trajnet(net, data, stats, sched, stages, skel, args.seed, log);
    save_checkpoint(*net, make_meta("trajnet", trajnet_config_to_json(net->config()), steps,
                                    stats),
                    out / "trajnet");
  } else if (kind == ModelKind::kPoseNet) {
    PoseNet net(transformer_arch(cfg, false));
    summaries = train_posenet(net, data, stats, sched, stages, skel, args.seed, log);
    save_checkpoint(*net,
                    make_meta("posenet", transformer_config_to_json(net->core()->config()),
                              steps, stats),
                    out / "posenet");
  } else if (kind == ModelKind::kMdmpp) {
    Mdmpp net(transformer_arch(cfg, true));
    summaries = train_mdmpp(net, data, stats, sched, stages, skel, args.seed, log);
    save_checkpoint(*net,
                    make_meta("mdmpp", transformer_config_to_json(net->core()->config()),
                              steps, stats),
                    out / "mdmpp");
  } else {
    throw ConfigError("train handles trajnet|posenet|mdmpp; use finetune-trajcontrol for "
                      "the adapter");
  }

  for (const auto& s : summaries)
    std::cout << "stage " << s.stage << ": avg loss " << s.first_avg_loss << " -> "
              << s.last_avg_loss << "\n";
  return 0;
}

TrajNet load_trajnet(const fs::path& base) {
  auto meta = load_checkpoint_meta(base);
  if (meta.kind != "trajnet") throw ConfigError(base.string() + " is not a trajnet checkpoint");
  TrajNet net(trajnet_config_from_json(meta.config));
  load_checkpoint_weights(*net, base);
  net->trained = meta.trained;
  net->eval();
  return net;
}

PoseNet load_posenet(const fs::path& base) {
  auto meta = load_checkpoint_meta(base);
  if (meta.kind != "posenet") throw ConfigError(base.string() + " is not a posenet checkpoint");
  PoseNet net(transformer_config_from_json(meta.config));
  load_checkpoint_weights(*net, base);
  net->trained = meta.trained;
  net->eval();
  return net;
}

int cmd_finetune_trajcontrol(const CommonArgs& args) {
  json cfg = {
      {"base", "runs/train/trajnet"},
      {"corpus", (cache_dir() / "corpus").string()},
      {"max_clips", 0},
      {"steps", 400},
      {"batch", 8},
      {"lr", 1e-4},
  };
  cfg = resolve_config(cfg, args);
  const fs::path out = args.out.empty() ? fs::path("runs/trajcontrol") : fs::path(args.out);
  write_snapshot(out, "finetune-trajcontrol", cfg, args.seed);

  auto skel = default_skeleton();
  const fs::path base_path = cfg["base"].get<std::string>();
  auto base = load_trajnet(base_path);
  const auto base_meta = load_checkpoint_meta(base_path);
  auto ctl = attach_trajcontrol(base);

  const fs::path corpus = cfg["corpus"].get<std::string>();
  auto data = prepare_clips(load_split(corpus, "train", cfg["max_clips"].get<int>()), skel);
  auto stats = load_stats(corpus);
  auto sched = make_schedule(base_meta.schedule_steps);

  auto stages = default_stages(ModelKind::kTrajControl, cfg["steps"].get<int>(),
                               cfg["batch"].get<int>(), cfg["lr"].get<double>());
  set_external_mask_pool(stages, corpus / "masks_external.rohm");

  std::ofstream log_os(out / "train_log.jsonl");
  auto log = jsonl_logger(log_os);
  torch::manual_seed(static_cast<int64_t>(args.seed));
  auto summaries = train_trajcontrol(base, ctl, data, stats, sched, stages, skel, args.seed,
                                     log);

  auto meta = make_meta("trajcontrol", trajnet_config_to_json(base->config()),
                        base_meta.schedule_steps, stats);
  meta.config["base_checkpoint"] = base_path.string();
  save_checkpoint(*ctl, meta, out / "trajcontrol");
  for (const auto& s : summaries)
    std::cout << "stage " << s.stage << ": avg loss " << s.first_avg_loss << " -> "
              << s.last_avg_loss << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// infer

json default_infer_config() {
  return {
      {"trajnet", "runs/train/trajnet"},
      {"posenet", "runs/posenet/posenet"},
      {"trajcontrol", ""},
      {"corpus", (cache_dir() / "corpus").string()},
      {"split", "test"},
      {"max_clips", 8},
      {"noise", 3.0},
      {"occlusion", "lower_body"},
      {"k", 2},
      {"trajcontrol_enabled", true},
      {"guidance_enabled", false},
      {"guidance",
       {{"lambda_skate", 1e4}, {"lambda_2d", 0.0}, {"active_window", 20}, {"skip_tail", 2}}},
      {"pixel_noise", 2.0},
  };
}

GuidanceConfig guidance_from_config(const json& cfg) {
  GuidanceConfig g;
  if (!cfg["guidance_enabled"].get<bool>()) return g;  // all-zero weights: off
  g.lambda_skate = cfg["guidance"]["lambda_skate"].get<double>();
  g.lambda_2d = cfg["guidance"]["lambda_2d"].get<double>();
  g.active_window = cfg["guidance"]["active_window"].get<int>();
  g.skip_tail = cfg["guidance"]["skip_tail"].get<int>();
  return g;
}

CameraModel front_camera() {
  return CameraModel::looking_at(torch::tensor({3.0, 0.0, 1.0}, f64()),
                                 torch::tensor({0.0, 0.0, 1.0}, f64()), 800, 800, 640, 480);
}

struct InferOutcome {
  bool any_degraded = false;
};

// Runs inference over one split and writes one container per clip. Shared by
// `infer` and `ablate`.
InferOutcome run_inference(const json& cfg, const fs::path& out, uint64_t seed) {
  auto skel = default_skeleton();
  const fs::path corpus = cfg["corpus"].get<std::string>();
  auto clips = load_split(corpus, cfg["split"].get<std::string>(),
                          cfg["max_clips"].get<int>());
  auto stats = load_stats(corpus);

  InferenceModels models;
  models.trajnet = load_trajnet(cfg["trajnet"].get<std::string>());
  models.posenet = load_posenet(cfg["posenet"].get<std::string>());
  const std::string ctl_path = cfg["trajcontrol"].get<std::string>();
  if (!ctl_path.empty() && cfg["trajcontrol_enabled"].get<bool>()) {
    auto meta = load_checkpoint_meta(ctl_path);
    if (meta.kind != "trajcontrol")
      throw ConfigError(ctl_path + " is not a trajcontrol checkpoint");
    models.trajcontrol = attach_trajcontrol(models.trajnet);
    load_checkpoint_weights(*models.trajcontrol, ctl_path);
    models.trajcontrol->eval();
  }

  const auto meta_t = load_checkpoint_meta(cfg["trajnet"].get<std::string>());
  auto sched = make_schedule(meta_t.schedule_steps);

  const double noise = cfg["noise"].get<double>();
  auto scheme = scheme_from_config(cfg);
  const auto guidance = guidance_from_config(cfg);
  const auto cam = front_camera();

  InferOutcome outcome;
  fs::create_directories(out);
  for (size_t i = 0; i < clips.size(); ++i) {
    const auto& clip = clips[i];
    const uint64_t clip_seed = seed + i;
    const int64_t n = clip.frames();

    // Deterministic synthetic degradation of the held-out clip.
    auto noisy = add_param_noise(clip.params, noise, clip_seed);
    auto masks = make_occlusion_mask(scheme, n, skel, clip_seed + 1);
    auto observed = encode_motion(skel, noisy, clip.fps);

    InferenceConfig icfg;
    icfg.k_iters = cfg["k"].get<int>();
    icfg.seed = clip_seed;
    icfg.use_trajcontrol = cfg["trajcontrol_enabled"].get<bool>();
    icfg.guidance = guidance;
    icfg.fps = clip.fps;

    auto gt_joints = forward_kinematics(skel, clip.params.to(torch::kFloat64));
    if (guidance.lambda_2d > 0) {
      auto obs2d = synth_observations(gt_joints, cam, cfg["pixel_noise"].get<double>(),
                                      no_dropout(), skel, clip_seed + 2);
      icfg.camera = cam;
      icfg.keypoints = obs2d.keypoints;
    }

    auto result = iterative_inference(skel, observed, masks, models, stats, sched, icfg);
    outcome.any_degraded |= result.degraded_no_trajcontrol;

    auto gt_feats = encode_motion(skel, clip.params.to(torch::kFloat64), clip.fps);
    auto obs_decoded = forward_kinematics(skel, noisy.to(torch::kFloat64));

    NamedArrays arrays;
    arrays["pred_traj"] = result.traj;
    arrays["pred_pose"] = result.pose;
    arrays["pred_joints"] = result.decoded.joints;
    arrays["pred_contacts"] = result.decoded.contacts;
    arrays["gt_joints"] = gt_joints;
    arrays["gt_contacts"] = gt_feats.pose.slice(-1, pose::kContact);
    arrays["obs_joints"] = obs_decoded;
    arrays["joint_visible"] =
        joint_visibility_from_masks(masks, skel).to(torch::kUInt8);
    arrays["fps"] = torch::tensor({clip.fps});
    arrays["degraded"] = torch::tensor(
        std::vector<uint8_t>{result.degraded_no_trajcontrol ? uint8_t{1} : uint8_t{0}},
        torch::kUInt8);

    char name[32];
    std::snprintf(name, sizeof(name), "recon_%04zu.rohm", i);
    write_container(out / name, arrays);
  }
  return outcome;
}

int cmd_infer(const CommonArgs& args) {
  json cfg = resolve_config(default_infer_config(), args);
  const fs::path out = args.out.empty() ? fs::path("runs/infer") : fs::path(args.out);
  write_snapshot(out, "infer", cfg, args.seed);
  auto outcome = run_inference(cfg, out, args.seed);
  std::cout << "reconstructions written to " << out.string()
            << (outcome.any_degraded ? " (no adapter: degraded refinement)" : "") << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate

json report_to_json(const EvalReport& r) { return json::parse(r.to_json()); }

EvalReport mean_report(const std::vector<EvalReport>& reports) {
  EvalReport m;
  if (reports.empty()) return m;
  auto acc = [&](auto field) {
    double s = 0;
    for (const auto& r : reports) s += r.*field;
    return s / reports.size();
  };
  m.gmpjpe_all = acc(&EvalReport::gmpjpe_all);
  m.gmpjpe_vis = acc(&EvalReport::gmpjpe_vis);
  m.gmpjpe_occ = acc(&EvalReport::gmpjpe_occ);
  m.mpjpe_all = acc(&EvalReport::mpjpe_all);
  m.mpjpe_vis = acc(&EvalReport::mpjpe_vis);
  m.mpjpe_occ = acc(&EvalReport::mpjpe_occ);
  m.accel = acc(&EvalReport::accel);
  m.contact_acc = acc(&EvalReport::contact_acc);
  m.skating_ratio = acc(&EvalReport::skating_ratio);
  m.penetration_dist = acc(&EvalReport::penetration_dist);
  return m;
}

struct SplitEval {
  EvalReport pred;                  // reconstruction vs GT
  std::optional<EvalReport> input;  // corrupted input vs GT, when recorded
  json per_clip = json::array();
};

SplitEval evaluate_dir(const fs::path& inputs) {
  auto skel = default_skeleton();
  std::vector<fs::path> paths;
  for (const auto& e : fs::directory_iterator(inputs))
    if (e.path().extension() == ".rohm") paths.push_back(e.path());
  std::sort(paths.begin(), paths.end());
  if (paths.empty()) throw ConfigError("no containers under " + inputs.string());

  SplitEval out;
  std::vector<EvalReport> preds, obs;
  for (const auto& p : paths) {
    auto arrays = read_container(p);
    auto f64c = [&](const char* key) { return arrays.at(key).to(torch::kFloat64); };
    const double fps = f64c("fps").item<double>();
    auto visible = f64c("joint_visible");

    auto pred = evaluate_motion(skel, f64c("pred_joints"), f64c("gt_joints"), visible,
                                f64c("pred_contacts"), f64c("gt_contacts"), fps);
    preds.push_back(pred);
    json clip = {{"file", p.filename().string()}, {"pred", report_to_json(pred)}};
    if (arrays.count("obs_joints")) {
      auto in = evaluate_motion(skel, f64c("obs_joints"), f64c("gt_joints"), visible,
                                f64c("gt_contacts"), f64c("gt_contacts"), fps);
      obs.push_back(in);
      clip["input"] = report_to_json(in);
    }
    out.per_clip.push_back(clip);
  }
  out.pred = mean_report(preds);
  if (!obs.empty()) out.input = mean_report(obs);
  return out;
}

int cmd_evaluate(const CommonArgs& args, bool ci) {
  json cfg = {
      {"inputs", "runs/infer"},
      {"thresholds", {{"max_gmpjpe_all", 0.0}, {"max_skating", 0.0}}},
  };
  cfg = resolve_config(cfg, args);
  const fs::path out = args.out.empty() ? fs::path("runs/evaluate") : fs::path(args.out);
  write_snapshot(out, "evaluate", cfg, args.seed);

  auto eval = evaluate_dir(cfg["inputs"].get<std::string>());
  json report;
  report["aggregate"] = report_to_json(eval.pred);
  if (eval.input) report["input_baseline"] = report_to_json(*eval.input);
  report["clips"] = eval.per_clip;
  {
    std::ofstream os(out / "report.json");
    os << report.dump(2) << "\n";
  }
  std::cout << eval.pred.table();
  if (eval.input)
    std::cout << "(input baseline: gmpjpe " << eval.input->gmpjpe_all << " mm, skating "
              << eval.input->skating_ratio << ")\n";

  if (ci) {
    const double max_g = cfg["thresholds"]["max_gmpjpe_all"].get<double>();
    const double max_s = cfg["thresholds"]["max_skating"].get<double>();
    if (max_g > 0 && eval.pred.gmpjpe_all > max_g)
      throw ThresholdFailure("gmpjpe_all above threshold");
    if (max_s > 0 && eval.pred.skating_ratio > max_s)
      throw ThresholdFailure("skating_ratio above threshold");
  }
  return 0;
}

// ---------------------------------------------------------------------------
// ablate: the {K, adapter, guidance} grid

int cmd_ablate(const CommonArgs& args, bool ci) {
  json cfg = default_infer_config();
  cfg = resolve_config(cfg, args);
  const fs::path out = args.out.empty() ? fs::path("runs/ablate") : fs::path(args.out);
  write_snapshot(out, "ablate", cfg, args.seed);

  struct Variant {
    std::string name;
    int k;
    bool trajcontrol, guidance;
  };
  const std::vector<Variant> grid = {
      {"k1", 1, false, false},
      {"k2_no_tc", 2, false, false},
      {"k2_tc", 2, true, false},
      {"k2_tc_guided", 2, true, true},
  };

  json table = json::array();
  std::map<std::string, double> skating;
  for (const auto& v : grid) {
    json run_cfg = cfg;
    run_cfg["k"] = v.k;
    run_cfg["trajcontrol_enabled"] = v.trajcontrol;
    run_cfg["guidance_enabled"] = v.guidance;
    run_inference(run_cfg, out / v.name, args.seed);
    auto eval = evaluate_dir(out / v.name);
    skating[v.name] = eval.pred.skating_ratio;
    table.push_back({{"variant", v.name},
                     {"k", v.k},
                     {"trajcontrol", v.trajcontrol},
                     {"guidance", v.guidance},
                     {"report", report_to_json(eval.pred)}});
    std::cout << v.name << ": gmpjpe " << eval.pred.gmpjpe_all << " mm, skating "
              << eval.pred.skating_ratio << "\n";
  }
  {
    std::ofstream os(out / "ablation.json");
    os << table.dump(2) << "\n";
  }
  if (ci && !(skating["k2_tc"] <= skating["k2_no_tc"] &&
              skating["k2_no_tc"] <= skating["k1"]))
    throw ThresholdFailure("skating ablation trend violated");
  return 0;
}

// ---------------------------------------------------------------------------
// render: per-frame skeleton SVGs

void write_frame_svg(const fs::path& path, const Skeleton& skel, const Tensor& frame,
                     double x_lo, double x_hi, double z_lo, double z_hi) {
  const int w = 480, h = 480;
  const double margin = 24;
  auto to_px = [&](double x, double z) {
    const double u = margin + (x - x_lo) / (x_hi - x_lo) * (w - 2 * margin);
    const double v = h - margin - (z - z_lo) / (z_hi - z_lo) * (h - 2 * margin);
    return std::pair<double, double>(u, v);
  };
  std::ofstream os(path);
  os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h << "'>\n"
     << "<rect width='100%' height='100%' fill='white'/>\n";
  auto [g0u, g0v] = to_px(x_lo, 0);
  auto [g1u, g1v] = to_px(x_hi, 0);
  os << "<line x1='" << g0u << "' y1='" << g0v << "' x2='" << g1u << "' y2='" << g1v
     << "' stroke='#cccccc'/>\n";
  for (int j = 1; j < kNumJoints; ++j) {
    const int p = skel.parents[j];
    auto [u1, v1] = to_px(frame[j][0].item<double>(), frame[j][2].item<double>());
    auto [u2, v2] = to_px(frame[p][0].item<double>(), frame[p][2].item<double>());
    os << "<line x1='" << u1 << "' y1='" << v1 << "' x2='" << u2 << "' y2='" << v2
       << "' stroke='#1f4e8c' stroke-width='2'/>\n";
  }
  for (int j = 0; j < kNumJoints; ++j) {
    auto [u, v] = to_px(frame[j][0].item<double>(), frame[j][2].item<double>());
    os << "<circle cx='" << u << "' cy='" << v << "' r='3' fill='#c23b22'/>\n";
  }
  os << "</svg>\n";
}

int cmd_render(const CommonArgs& args) {
  json cfg = {{"input", ""}, {"stride", 1}, {"joints_key", "pred_joints"}};
  cfg = resolve_config(cfg, args);
  const fs::path input = cfg["input"].get<std::string>();
  if (input.empty()) throw ConfigError("render: config key 'input' is required");
  const fs::path out = args.out.empty() ? fs::path("runs/render") : fs::path(args.out);
  write_snapshot(out, "render", cfg, args.seed);

  auto skel = default_skeleton();
  Tensor joints;
  auto arrays = read_container(input);
  const std::string key = cfg["joints_key"].get<std::string>();
  if (arrays.count(key))
    joints = arrays.at(key).to(torch::kFloat64);
  else
    joints = forward_kinematics(skel, load_clip(input).params);  // a raw clip file

  const auto x = joints.select(-1, 0), z = joints.select(-1, 2);
  const double pad = 0.3;
  const double x_lo = x.min().item<double>() - pad, x_hi = x.max().item<double>() + pad;
  const double z_lo = std::min(0.0, z.min().item<double>()) - pad;
  const double z_hi = z.max().item<double>() + pad;

  const int stride = std::max(1, cfg["stride"].get<int>());
  int written = 0;
  for (int64_t f = 0; f < joints.size(0); f += stride) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%05lld.svg", static_cast<long long>(f));
    write_frame_svg(out / name, skel, joints[f], x_lo, x_hi, z_lo, z_hi);
    ++written;
  }
  std::cout << written << " frames rendered to " << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"motion reconstruction pipeline"};
  app.require_subcommand(1);

  CommonArgs args;
  bool ci = false;
  std::string k_flag, guidance_flag, trajcontrol_flag;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", args.config_path, "JSON config file");
    cmd->add_option("--seed", args.seed, "run seed");
    cmd->add_option("--out", args.out, "output directory");
    cmd->add_option("--set", args.overrides, "config override key=value (repeatable)");
    return cmd;
  };

  auto* datagen = add_common(app.add_subcommand("datagen", "build the synthetic corpus"));
  auto* train = add_common(app.add_subcommand("train", "staged denoiser training"));
  auto* finetune = add_common(
      app.add_subcommand("finetune-trajcontrol", "fine-tune the trajectory adapter"));
  auto* infer = add_common(app.add_subcommand("infer", "reconstruct corrupted clips"));
  auto* evaluate = add_common(app.add_subcommand("evaluate", "metric report for a run"));
  auto* ablate = add_common(app.add_subcommand("ablate", "adapter/guidance/K grid"));
  auto* render = add_common(app.add_subcommand("render", "per-frame skeleton SVGs"));

  for (auto* cmd : {infer, ablate}) {
    cmd->add_option("--k", k_flag, "outer iterations");
    cmd->add_option("--guidance", guidance_flag, "on|off")
        ->check(CLI::IsMember({"on", "off"}));
    cmd->add_option("--trajcontrol", trajcontrol_flag, "on|off")
        ->check(CLI::IsMember({"on", "off"}));
  }
  for (auto* cmd : {evaluate, ablate})
    cmd->add_flag("--ci", ci, "turn thresholds into exit code 4");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  // Convenience flags are sugar for --set.
  if (!k_flag.empty()) args.overrides.push_back("k=" + k_flag);
  if (!guidance_flag.empty())
    args.overrides.push_back(std::string("guidance_enabled=") +
                             (guidance_flag == "on" ? "true" : "false"));
  if (!trajcontrol_flag.empty())
    args.overrides.push_back(std::string("trajcontrol_enabled=") +
                             (trajcontrol_flag == "on" ? "true" : "false"));

  try {
    if (datagen->parsed()) return cmd_datagen(args);
    if (train->parsed()) return cmd_train(args);
    if (finetune->parsed()) return cmd_finetune_trajcontrol(args);
    if (infer->parsed()) return cmd_infer(args);
    if (evaluate->parsed()) return cmd_evaluate(args, ci);
    if (ablate->parsed()) return cmd_ablate(args, ci);
    if (render->parsed()) return cmd_render(args);
  } catch (const ThresholdFailure& e) {
    std::cerr << "threshold failure: " << e.what() << "\n";
    return 4;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
