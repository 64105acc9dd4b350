#pragma once

#include "rohm/common.hpp"

namespace rohm {

// 6D rotation representation: the first two columns of a rotation matrix,
// column-major, decoded via Gram-Schmidt. Continuous and regression friendly.

// [...,6] -> [...,3,3]. With validate=true, degenerate inputs (zero or
// parallel column vectors) raise DegenerateRotationError; with validate=false
// the normalizations are eps-clamped so the op stays differentiable inside
// model/guidance graphs.
Tensor rot6d_to_matrix(const Tensor& r6, bool validate = true);

// [...,3,3] -> [...,6]. With validate=true, rejects inputs that are not
// proper rotations (orthonormal, det +1).
Tensor matrix_to_rot6d(const Tensor& m, bool validate = true);

// Axis-angle vectors [...,3] -> rotation matrices [...,3,3] (Rodrigues).
Tensor axis_angle_to_matrix(const Tensor& aa);

// Identity in 6D form: (1,0,0, 0,1,0).
Tensor identity_rot6d();

class DegenerateRotationError : public Error {
 public:
  explicit DegenerateRotationError(const std::string& msg) : Error(msg) {}
};

}  // namespace rohm
