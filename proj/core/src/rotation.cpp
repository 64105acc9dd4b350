#include "rohm/rotation.hpp"

namespace rohm {

namespace {
constexpr double kDegenerateEps = 1e-8;
constexpr double kClampEps = 1e-12;
}  // namespace

Tensor rot6d_to_matrix(const Tensor& r6, bool validate) {
  if (r6.size(-1) != 6) throw Error("rot6d: last dim must be 6");
  auto a1 = r6.slice(-1, 0, 3);
  auto a2 = r6.slice(-1, 3, 6);
  auto n1 = a1.norm(2, -1, true);
  if (validate && (n1 < kDegenerateEps).any().item<bool>())
    throw DegenerateRotationError("rot6d: first column is (near) zero");
  auto b1 = a1 / n1.clamp_min(kClampEps);
  auto proj = (b1 * a2).sum(-1, true);
  auto r2 = a2 - proj * b1;
  auto n2 = r2.norm(2, -1, true);
  if (validate && (n2 < kDegenerateEps).any().item<bool>())
    throw DegenerateRotationError("rot6d: columns are (near) parallel or second is zero");
  auto b2 = r2 / n2.clamp_min(kClampEps);
  auto b3 = torch::cross(b1, b2, -1);
  return torch::stack({b1, b2, b3}, -1);  // columns
}

Tensor matrix_to_rot6d(const Tensor& m, bool validate) {
  if (m.size(-1) != 3 || m.size(-2) != 3) throw Error("rot6d: expected [...,3,3]");
  if (validate) {
    auto mtm = torch::matmul(m.transpose(-1, -2), m);
    auto eye = torch::eye(3, m.options());
    if ((mtm - eye).abs().max().item<double>() > 1e-5)
      throw Error("rot6d: matrix is not orthonormal");
    if ((torch::linalg_det(m) - 1.0).abs().max().item<double>() > 1e-5)
      throw Error("rot6d: matrix determinant is not +1");
  }
  auto c1 = m.select(-1, 0);
  auto c2 = m.select(-1, 1);
  return torch::cat({c1, c2}, -1);
}

Tensor axis_angle_to_matrix(const Tensor& aa) {
  if (aa.size(-1) != 3) throw Error("axis_angle: last dim must be 3");
  auto angle = aa.norm(2, -1, true);                       // [...,1]
  auto axis = aa / angle.clamp_min(kClampEps);             // [...,3]
  auto x = axis.select(-1, 0), y = axis.select(-1, 1), z = axis.select(-1, 2);
  auto zero = torch::zeros_like(x);
  // Skew-symmetric cross-product matrix K, then R = I + sin*K + (1-cos)*K^2.
  auto k_flat = torch::stack({zero, -z, y, z, zero, -x, -y, x, zero}, -1);
  auto shape = aa.sizes().vec();
  shape.pop_back();
  shape.push_back(3);
  shape.push_back(3);
  auto k = k_flat.reshape(shape);
  auto eye = torch::eye(3, aa.options()).expand(shape);
  auto s = torch::sin(angle).unsqueeze(-1);
  auto c = (1.0 - torch::cos(angle)).unsqueeze(-1);
  return eye + s * k + c * torch::matmul(k, k);
}

Tensor identity_rot6d() {
  return torch::tensor({1.0, 0.0, 0.0, 0.0, 1.0, 0.0}, f64());
}

}  // namespace rohm
