#include "testing.hpp"

#include <rohm/rotation.hpp>

using namespace rohm;

namespace {
double max_abs(const Tensor& t) { return t.abs().max().item<double>(); }

Tensor random_rotations(int n, uint64_t seed) {
  auto gen = make_generator(seed);
  auto aa = torch::randn({n, 3}, gen, f64()) * 1.5;
  return axis_angle_to_matrix(aa);
}
}  // namespace

TEST_CASE("identity 6d decodes to identity matrix") {
  auto m = rot6d_to_matrix(identity_rot6d());
  CHECK(max_abs(m - torch::eye(3, f64())) == doctest::Approx(0.0));
}

TEST_CASE("z-rotation 6d matches the axis-angle construction") {
  auto r6 = torch::tensor({0.0, 1.0, 0.0, -1.0, 0.0, 0.0}, f64());
  auto m = rot6d_to_matrix(r6);
  auto oracle = axis_angle_to_matrix(torch::tensor({0.0, 0.0, M_PI / 2.0}, f64()));
  CHECK(max_abs(m - oracle) < 1e-12);
  CHECK(max_abs(matrix_to_rot6d(oracle) - r6) < 1e-12);
}

TEST_CASE("random 6-vectors decode to orthonormal det+1 matrices") {
  auto gen = make_generator(7);
  auto r6 = torch::randn({500, 6}, gen, f64());
  auto m = rot6d_to_matrix(r6);
  auto gram = torch::matmul(m.transpose(-1, -2), m);
  CHECK(max_abs(gram - torch::eye(3, f64())) < 1e-6);
  CHECK(max_abs(torch::linalg_det(m) - 1.0) < 1e-6);
  // First column equals the normalized first input vector.
  auto a1 = r6.slice(-1, 0, 3);
  auto col0 = m.select(-1, 0);
  CHECK(max_abs(col0 - a1 / a1.norm(2, -1, true)) < 1e-9);
}

TEST_CASE("6d round trip over 1000 random rotations") {
  auto m = random_rotations(1000, 11);
  auto back = rot6d_to_matrix(matrix_to_rot6d(m));
  CHECK(max_abs(back - m) < 1e-6);
}

TEST_CASE("degenerate 6d inputs raise") {
  auto zero_first = torch::tensor({0.0, 0.0, 0.0, 0.0, 1.0, 0.0}, f64());
  CHECK_THROWS_AS(rot6d_to_matrix(zero_first), DegenerateRotationError);
  auto parallel = torch::tensor({1.0, 0.0, 0.0, 2.0, 0.0, 0.0}, f64());
  CHECK_THROWS_AS(rot6d_to_matrix(parallel), DegenerateRotationError);
  // Non-validating mode stays finite for gradients.
  CHECK(torch::isfinite(rot6d_to_matrix(parallel, false)).all().item<bool>());
}

TEST_CASE("matrix_to_rot6d rejects non-rotations") {
  CHECK_THROWS_AS(matrix_to_rot6d(2.0 * torch::eye(3, f64())), Error);
  auto reflect = torch::diag(torch::tensor({1.0, 1.0, -1.0}, f64()));
  CHECK_THROWS_AS(matrix_to_rot6d(reflect), Error);
}

TEST_CASE("axis_angle_to_matrix matches small-angle expansion") {
  auto aa = torch::tensor({1e-4, -2e-4, 3e-4}, f64());
  auto m = axis_angle_to_matrix(aa);
  // R ~ I + [w]_x for small w.
  auto skew = torch::tensor({{0.0, -3e-4, -2e-4}, {3e-4, 0.0, -1e-4}, {2e-4, 1e-4, 0.0}}, f64());
  CHECK(max_abs(m - torch::eye(3, f64()) - skew) < 1e-7);
}
