#include "rohm/metrics.hpp"

#include <sstream>

#include <json.hpp>

namespace rohm {

namespace {

double masked_mean(const Tensor& per_joint_err /*[N,22] m*/, const Tensor& weight) {
  const double total = weight.sum().item<double>();
  if (total <= 0) return 0.0;
  return (per_joint_err * weight).sum().item<double>() / total * 1000.0;  // -> mm
}

}  // namespace

JointErrorTriples joint_errors(const Tensor& pred_joints, const Tensor& gt_joints,
                               const Tensor& joint_visible) {
  if (!pred_joints.sizes().equals(gt_joints.sizes()) || pred_joints.size(1) != kNumJoints)
    throw Error("joint_errors: shape mismatch");
  if (joint_visible.size(0) != pred_joints.size(0) || joint_visible.size(1) != kNumJoints)
    throw Error("joint_errors: mask must be [N,22]");
  auto vis = joint_visible.to(torch::kFloat64);
  auto occ = 1.0 - vis;
  auto all = torch::ones_like(vis);

  auto g_err = (pred_joints - gt_joints).norm(2, -1);  // [N,22] m
  auto pred_aligned = pred_joints - pred_joints.slice(1, 0, 1);
  auto gt_aligned = gt_joints - gt_joints.slice(1, 0, 1);
  auto m_err = (pred_aligned - gt_aligned).norm(2, -1);

  return {masked_mean(g_err, all), masked_mean(g_err, vis), masked_mean(g_err, occ),
          masked_mean(m_err, all), masked_mean(m_err, vis), masked_mean(m_err, occ)};
}

double accel_metric(const Tensor& pred_joints, const std::optional<Tensor>& gt_joints,
                    double fps) {
  const int64_t n = pred_joints.size(0);
  if (n < 3) throw Error("accel_metric: need at least 3 frames");
  auto d2 = [&](const Tensor& x) {
    return (x.slice(0, 2, n) - 2.0 * x.slice(0, 1, n - 1) + x.slice(0, 0, n - 2)) * fps * fps;
  };
  Tensor a = d2(pred_joints);
  if (gt_joints) a = a - d2(*gt_joints);
  return a.norm(2, -1).mean().item<double>();
}

double contact_accuracy(const Tensor& pred_contacts, const Tensor& gt_contacts) {
  if (!pred_contacts.sizes().equals(gt_contacts.sizes()))
    throw Error("contact_accuracy: shape mismatch");
  auto pred = (pred_contacts.to(torch::kFloat64) >= 0.5);
  auto gt = (gt_contacts.to(torch::kFloat64) >= 0.5);
  return (pred == gt).to(torch::kFloat64).mean().item<double>();
}

double skating_ratio(const Skeleton& skel, const Tensor& joints, double fps,
                     const SkatingThresholds& th) {
  const int64_t n = joints.size(0);
  if (n < 2) throw Error("skating_ratio: need at least 2 frames");
  auto pick = [&](const std::array<int, 2>& ids) {
    return joints.index_select(1, torch::tensor({ids[0], ids[1]}, torch::kLong));
  };
  auto toes = pick(skel.toe_ids);      // [N,2,3]
  auto ankles = pick(skel.ankle_ids);  // [N,2,3]
  auto feet = torch::cat({toes, ankles}, 1);
  auto speed = ((feet.slice(0, 1, n) - feet.slice(0, 0, n - 1)) * fps).norm(2, -1);  // [N-1,4]
  auto fast = std::get<0>((speed > th.foot_speed).min(1)).to(torch::kBool);          // all 4
  auto toes_low =
      std::get<0>((toes.slice(0, 0, n - 1).select(-1, 2) < th.toe_height).min(1)).to(torch::kBool);
  auto ankles_low =
      std::get<0>((ankles.slice(0, 0, n - 1).select(-1, 2) < th.ankle_height).min(1))
          .to(torch::kBool);
  auto skating = fast & toes_low & ankles_low;
  return skating.to(torch::kFloat64).mean().item<double>();
}

double penetration_dist(const Skeleton& skel, const Tensor& joints) {
  auto toes = joints.index_select(1, torch::tensor({skel.toe_ids[0], skel.toe_ids[1]}, torch::kLong));
  auto depth = (-toes.select(-1, 2)).clamp_min(0.0);
  return depth.mean().item<double>() * 1000.0;  // mm
}

EvalReport evaluate_motion(const Skeleton& skel, const Tensor& pred_joints,
                           const Tensor& gt_joints, const Tensor& joint_visible,
                           const Tensor& pred_contacts, const Tensor& gt_contacts, double fps) {
  EvalReport r;
  auto e = joint_errors(pred_joints, gt_joints, joint_visible);
  r.gmpjpe_all = e.gmpjpe_all;
  r.gmpjpe_vis = e.gmpjpe_vis;
  r.gmpjpe_occ = e.gmpjpe_occ;
  r.mpjpe_all = e.mpjpe_all;
  r.mpjpe_vis = e.mpjpe_vis;
  r.mpjpe_occ = e.mpjpe_occ;
  r.accel = accel_metric(pred_joints, gt_joints, fps);
  r.contact_acc = contact_accuracy(pred_contacts, gt_contacts);
  r.skating_ratio = skating_ratio(skel, pred_joints, fps);
  r.penetration_dist = penetration_dist(skel, pred_joints);
  return r;
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["gmpjpe_all"] = gmpjpe_all;
  j["gmpjpe_vis"] = gmpjpe_vis;
  j["gmpjpe_occ"] = gmpjpe_occ;
  j["mpjpe_all"] = mpjpe_all;
  j["mpjpe_vis"] = mpjpe_vis;
  j["mpjpe_occ"] = mpjpe_occ;
  j["accel"] = accel;
  j["contact_acc"] = contact_acc;
  j["skating_ratio"] = skating_ratio;
  j["penetration_dist"] = penetration_dist;
  return j.dump(2);
}

EvalReport EvalReport::from_json(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  EvalReport r;
  r.gmpjpe_all = j.at("gmpjpe_all");
  r.gmpjpe_vis = j.at("gmpjpe_vis");
  r.gmpjpe_occ = j.at("gmpjpe_occ");
  r.mpjpe_all = j.at("mpjpe_all");
  r.mpjpe_vis = j.at("mpjpe_vis");
  r.mpjpe_occ = j.at("mpjpe_occ");
  r.accel = j.at("accel");
  r.contact_acc = j.at("contact_acc");
  r.skating_ratio = j.at("skating_ratio");
  r.penetration_dist = j.at("penetration_dist");
  return r;
}

std::string EvalReport::table() const {
  std::ostringstream os;
  os << "metric              value\n"
     << "------------------  ---------\n";
  auto row = [&](const char* name, double v) {
    os << name;
    for (size_t i = std::strlen(name); i < 20; ++i) os << ' ';
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    os << buf << "\n";
  };
  row("GMPJPE-all [mm]", gmpjpe_all);
  row("GMPJPE-vis [mm]", gmpjpe_vis);
  row("GMPJPE-occ [mm]", gmpjpe_occ);
  row("MPJPE-all [mm]", mpjpe_all);
  row("MPJPE-vis [mm]", mpjpe_vis);
  row("MPJPE-occ [mm]", mpjpe_occ);
  row("Accel [m/s^2]", accel);
  row("Contact", contact_acc);
  row("Skating", skating_ratio);
  row("Dist [mm]", penetration_dist);
  return os.str();
}

}  // namespace rohm
