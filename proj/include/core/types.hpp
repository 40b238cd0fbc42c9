#pragma once

#include <Eigen/Core>

namespace core {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Sequential dot product.  Used wherever a test or wire contract pins the
/// exact accumulation order; Eigen's vectorized reductions may associate
/// differently.
inline double seq_dot(const Vector& a, const Vector& b) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace core
