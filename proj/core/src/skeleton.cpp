#include "rohm/skeleton.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

namespace rohm {

namespace {

using json = nlohmann::json;

constexpr int kSkeletonFormatVersion = 1;

json tensor_to_json(const Tensor& t) {
  Tensor flat = t.detach().to(torch::kFloat64).contiguous().reshape({-1});
  json j = json::array();
  const double* p = flat.data_ptr<double>();
  for (int64_t i = 0; i < flat.numel(); ++i) j.push_back(p[i]);
  return j;
}

Tensor tensor_from_json(const json& j, std::vector<int64_t> shape) {
  std::vector<double> v = j.get<std::vector<double>>();
  Tensor t = torch::from_blob(v.data(), {static_cast<int64_t>(v.size())}, f64()).clone();
  return t.reshape(shape);
}

}  // namespace

int Skeleton::joint_index(const std::string& name) const {
  for (int i = 0; i < static_cast<int>(joint_names.size()); ++i)
    if (joint_names[i] == name) return i;
  throw Error("skeleton: unknown joint name '" + name + "'");
}

std::vector<int> Skeleton::lower_body_joints() const {
  std::vector<int> out;
  for (int j = 0; j < kNumJoints; ++j) {
    const auto& n = joint_names[j];
    if (n.find("hip") != std::string::npos || n.find("knee") != std::string::npos ||
        n.find("ankle") != std::string::npos || n.find("toe") != std::string::npos)
      out.push_back(j);
  }
  return out;
}

std::vector<int> Skeleton::upper_body_joints() const {
  const auto lower = lower_body_joints();
  std::set<int> lower_set(lower.begin(), lower.end());
  std::vector<int> out;
  for (int j = 1; j < kNumJoints; ++j)
    if (!lower_set.count(j)) out.push_back(j);
  return out;
}

Tensor Skeleton::offsets_for_shape(const Tensor& betas) const {
  if (betas.size(-1) != kNumShapeCoeffs)
    throw Error("skeleton: betas must have 10 coefficients");
  // [...,10] x [10,22,3] -> [...,22,3]
  auto delta = torch::matmul(betas.to(torch::kFloat64),
                             shape_basis.reshape({kNumShapeCoeffs, kNumJoints * 3}));
  auto shape = betas.sizes().vec();
  shape.pop_back();
  shape.push_back(kNumJoints);
  shape.push_back(3);
  return rest_offsets + delta.reshape(shape);
}

void Skeleton::validate() const {
  if (static_cast<int>(joint_names.size()) != kNumJoints ||
      static_cast<int>(parents.size()) != kNumJoints)
    throw Error("skeleton: expected 22 joints");
  int roots = 0;
  for (int j = 0; j < kNumJoints; ++j) {
    if (parents[j] < 0) {
      ++roots;
    } else if (parents[j] >= j) {
      throw Error("skeleton: joints must be topologically sorted (parent < child)");
    }
  }
  if (roots != 1) throw Error("skeleton: expected exactly one root");
  if (!rest_offsets.sizes().equals({kNumJoints, 3}) ||
      !shape_basis.sizes().equals({kNumShapeCoeffs, kNumJoints, 3}))
    throw Error("skeleton: bad offset/basis shapes");
  for (int id : foot_joint_ids)
    if (id < 0 || id >= kNumJoints) throw Error("skeleton: foot joint id out of range");
}

Skeleton default_skeleton() {
  Skeleton s;
  s.joint_names = {"pelvis",        "left_hip",      "right_hip",      "spine1",
                   "left_knee",     "right_knee",    "spine2",         "left_ankle",
                   "right_ankle",   "spine3",        "left_toe",       "right_toe",
                   "neck",          "left_collar",   "right_collar",   "head",
                   "left_shoulder", "right_shoulder", "left_elbow",    "right_elbow",
                   "left_wrist",    "right_wrist"};
  s.parents = {-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19};

  // Rough adult proportions; rest pose stands at the origin facing +x,
  // pelvis at z = 0.95 m, ankles at 0.08 m, toes at 0.02 m.
  const double offs[kNumJoints][3] = {
      {0.00, 0.00, 0.95},   // pelvis
      {0.00, 0.09, -0.07},  // left_hip
      {0.00, -0.09, -0.07}, // right_hip
      {0.00, 0.00, 0.10},   // spine1
      {0.00, 0.00, -0.38},  // left_knee
      {0.00, 0.00, -0.38},  // right_knee
      {0.00, 0.00, 0.12},   // spine2
      {0.00, 0.00, -0.42},  // left_ankle
      {0.00, 0.00, -0.42},  // right_ankle
      {0.00, 0.00, 0.12},   // spine3
      {0.14, 0.00, -0.06},  // left_toe
      {0.14, 0.00, -0.06},  // right_toe
      {0.00, 0.00, 0.14},   // neck
      {0.00, 0.07, 0.10},   // left_collar
      {0.00, -0.07, 0.10},  // right_collar
      {0.00, 0.00, 0.12},   // head
      {0.00, 0.10, 0.02},   // left_shoulder
      {0.00, -0.10, 0.02},  // right_shoulder
      {0.00, 0.26, 0.00},   // left_elbow
      {0.00, -0.26, 0.00},  // right_elbow
      {0.00, 0.25, 0.00},   // left_wrist
      {0.00, -0.25, 0.00},  // right_wrist
  };
  s.rest_offsets = torch::from_blob(const_cast<double*>(&offs[0][0]), {kNumJoints, 3}, f64()).clone();

  // Shape basis: coefficient 0 scales every offset (+10 % per unit, so total
  // height grows monotonically with beta[0]); coefficient 1 scales limb
  // offsets only; the rest are zero.
  s.shape_basis = torch::zeros({kNumShapeCoeffs, kNumJoints, 3}, f64());
  s.shape_basis[0] = 0.10 * s.rest_offsets;
  const std::vector<int> limbs = {1, 2, 4, 5, 7, 8, 10, 11, 16, 17, 18, 19, 20, 21};
  for (int j : limbs) s.shape_basis[1][j] = 0.10 * s.rest_offsets[j];

  s.ankle_ids = {7, 8};
  s.toe_ids = {10, 11};
  s.foot_joint_ids = {7, 10, 8, 11};  // (L ankle, L toe, R ankle, R toe)
  s.left_hip = 1;
  s.right_hip = 2;
  s.left_shoulder = 16;
  s.right_shoulder = 17;
  s.validate();
  return s;
}

void save_skeleton(const Skeleton& skel, const std::filesystem::path& path) {
  json j;
  j["format"] = "rohm-skeleton";
  j["version"] = kSkeletonFormatVersion;
  j["joint_names"] = skel.joint_names;
  j["parents"] = skel.parents;
  j["rest_offsets"] = tensor_to_json(skel.rest_offsets);
  j["shape_basis"] = tensor_to_json(skel.shape_basis);
  j["foot_joint_ids"] = skel.foot_joint_ids;
  j["ankle_ids"] = skel.ankle_ids;
  j["toe_ids"] = skel.toe_ids;
  j["heading_joints"] = {skel.left_hip, skel.right_hip, skel.left_shoulder, skel.right_shoulder};
  std::ofstream os(path);
  if (!os) throw IoError("skeleton: cannot write " + path.string());
  os << j.dump(2) << "\n";
}

Skeleton load_skeleton(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("skeleton: cannot open " + path.string());
  json j;
  is >> j;
  if (j.value("format", "") != "rohm-skeleton")
    throw IoError("skeleton: not a skeleton document: " + path.string());
  if (j.value("version", -1) != kSkeletonFormatVersion)
    throw IoError("skeleton: unsupported version in " + path.string());
  Skeleton s;
  s.joint_names = j.at("joint_names").get<std::vector<std::string>>();
  s.parents = j.at("parents").get<std::vector<int>>();
  s.rest_offsets = tensor_from_json(j.at("rest_offsets"), {kNumJoints, 3});
  s.shape_basis = tensor_from_json(j.at("shape_basis"), {kNumShapeCoeffs, kNumJoints, 3});
  auto feet = j.at("foot_joint_ids").get<std::vector<int>>();
  auto ankles = j.at("ankle_ids").get<std::vector<int>>();
  auto toes = j.at("toe_ids").get<std::vector<int>>();
  std::copy_n(feet.begin(), 4, s.foot_joint_ids.begin());
  std::copy_n(ankles.begin(), 2, s.ankle_ids.begin());
  std::copy_n(toes.begin(), 2, s.toe_ids.begin());
  auto hj = j.at("heading_joints").get<std::vector<int>>();
  s.left_hip = hj.at(0);
  s.right_hip = hj.at(1);
  s.left_shoulder = hj.at(2);
  s.right_shoulder = hj.at(3);
  s.validate();
  return s;
}

}  // namespace rohm
