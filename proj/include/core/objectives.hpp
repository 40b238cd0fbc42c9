#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

#include "core/error.hpp"
#include "core/shared_randomness.hpp"
#include "core/stats.hpp"
#include "core/types.hpp"

namespace core {

/// Eigenvalues in decreasing order plus an optional seed for a random
/// orthogonal rotation; absent seed means the identity rotation, which keeps
/// gradient evaluation O(d) for large diagonal instances.
struct SpectrumSpec {
  Vector eigenvalues;
  std::optional<std::uint64_t> rotation_seed;
};

inline void validate(const SpectrumSpec& spec) {
  const auto d = spec.eigenvalues.size();
  if (d == 0) throw Error("invalid-spectrum: empty eigenvalue list");
  for (Eigen::Index i = 0; i < d; ++i) {
    if (spec.eigenvalues[i] < 0.0)
      throw Error("invalid-spectrum: negative eigenvalue");
    if (i > 0 && spec.eigenvalues[i] > spec.eigenvalues[i - 1])
      throw Error("invalid-spectrum: eigenvalues must be decreasing");
  }
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix drawn from
/// the shared stream, with column signs fixed by the R diagonal.
inline Matrix haar_rotation(std::uint64_t seed, std::uint32_t d) {
  Matrix g(d, d);
  for (std::uint32_t c = 0; c < d; ++c)
    g.col(c) = gaussian_vector({seed, c, 1, d});
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR();
  for (std::uint32_t c = 0; c < d; ++c)
    if (r(c, c) < 0.0) q.col(c) *= -1.0;
  return q;
}

/// f(x) = (1/2) x'Ax with A = Q diag(lambda) Q'.  Every machine shard holds
/// the full A, so the shard mean is A by construction and f* = 0 at x* = 0.
class QuadraticObjective {
 public:
  QuadraticObjective(SpectrumSpec spec, std::uint32_t n_machines)
      : spec_(std::move(spec)), n_(n_machines) {
    validate(spec_);
    if (n_ == 0) throw Error("invalid-shard: need at least one machine");
    if (spec_.rotation_seed)
      rotation_ = haar_rotation(*spec_.rotation_seed,
                                static_cast<std::uint32_t>(dim()));
  }

  Eigen::Index dim() const { return spec_.eigenvalues.size(); }
  std::uint32_t machines() const { return n_; }
  const Vector& spectrum() const { return spec_.eigenvalues; }

  double value(const Vector& x) const {
    check_dim(x);
    const Vector y = rotation_ ? Vector(rotation_->transpose() * x) : x;
    return 0.5 * y.dot(spec_.eigenvalues.cwiseProduct(y));
  }

  Vector grad(const Vector& x) const {
    check_dim(x);
    if (!rotation_) return spec_.eigenvalues.cwiseProduct(x);
    const Vector y = rotation_->transpose() * x;
    return *rotation_ * spec_.eigenvalues.cwiseProduct(y);
  }

  Vector local_grad(std::uint32_t machine, const Vector& x) const {
    if (machine >= n_) throw Error("invalid-shard: machine index out of range");
    return grad(x);
  }

  Matrix hessian(const Vector&) const { return matrix(); }

  Matrix matrix() const {
    if (!rotation_) return Matrix(spec_.eigenvalues.asDiagonal());
    return *rotation_ * spec_.eigenvalues.asDiagonal() *
           rotation_->transpose();
  }

  double trace_exact() const { return spec_.eigenvalues.sum(); }
  double trace_bound() const { return trace_exact(); }
  double smoothness() const { return spec_.eigenvalues[0]; }
  double strong_convexity() const {
    return spec_.eigenvalues[dim() - 1];
  }
  double sum_sqrt_eigenvalues() const {
    return spec_.eigenvalues.cwiseSqrt().sum();
  }

 private:
  void check_dim(const Vector& x) const {
    if (x.size() != dim())
      throw Error("invalid-input: dimension mismatch in objective evaluation");
  }

  SpectrumSpec spec_;
  std::uint32_t n_;
  std::optional<Matrix> rotation_;
};

enum class Link { square_loss, logistic, bounded_nonconvex };

namespace detail {
/// sigma(t) and its first two derivatives for one data row.  The logistic
/// link folds the +-1 label in; the other links ignore it.
struct LinkEval {
  double value;
  double d1;
  double d2;
};

inline LinkEval eval_link(Link link, double t, double label) {
  switch (link) {
    case Link::square_loss:
      return {0.5 * t * t, t, 1.0};
    case Link::logistic: {
      const double z = -label * t;
      const double value = z > 0.0 ? z + std::log1p(std::exp(-z))
                                   : std::log1p(std::exp(z));
      const double e = 1.0 / (1.0 + std::exp(label * t));
      return {value, -label * e, e * (1.0 - e)};
    }
    case Link::bounded_nonconvex: {
      const double u = 1.0 + t * t;
      return {t * t / u, 2.0 * t / (u * u),
              2.0 * (1.0 - 3.0 * t * t) / (u * u * u)};
    }
  }
  throw Error("invalid-input: unknown link");
}

inline double link_curvature_bound(Link link) {
  switch (link) {
    case Link::square_loss:
      return 1.0;
    case Link::logistic:
      return 0.25;
    case Link::bounded_nonconvex:
      return 2.0;
  }
  throw Error("invalid-input: unknown link");
}
}  // namespace detail

/// f(x) = (1/N) sum_i sigma_i(beta_i'x) + (alpha/2)||x||^2, sharded row-wise
/// onto n machines (round-robin over a seeded shuffle).  Each shard keeps the
/// weight n/N on its rows and the full regularizer, so the machine mean
/// reproduces the global gradient for any N and n.
class RidgeSeparableObjective {
 public:
  RidgeSeparableObjective(Matrix betas, std::vector<double> labels, Link link,
                          double alpha, std::uint32_t n_machines,
                          std::uint64_t shard_seed)
      : betas_(std::move(betas)),
        labels_(std::move(labels)),
        link_(link),
        alpha_(alpha),
        n_(n_machines) {
    const auto rows = static_cast<std::size_t>(betas_.rows());
    if (rows == 0) throw Error("invalid-input: need at least one data row");
    if (n_ == 0) throw Error("invalid-shard: need at least one machine");
    if (n_ > rows) throw Error("invalid-shard: more machines than data rows");
    if (link_ == Link::logistic) {
      if (labels_.size() != rows)
        throw Error("invalid-input: logistic link needs one label per row");
      for (const double y : labels_)
        if (y != 1.0 && y != -1.0)
          throw Error("invalid-input: logistic labels must be -1 or +1");
    } else if (labels_.empty()) {
      labels_.assign(rows, 0.0);
    } else if (labels_.size() != rows) {
      throw Error("invalid-input: label count disagrees with row count");
    }
    std::vector<std::uint32_t> order(rows);
    std::iota(order.begin(), order.end(), 0u);
    deterministic_shuffle(order, shard_seed);
    shards_.assign(n_, {});
    for (std::size_t i = 0; i < rows; ++i)
      shards_[i % n_].push_back(order[i]);
  }

  Eigen::Index dim() const { return betas_.cols(); }
  Eigen::Index rows() const { return betas_.rows(); }
  std::uint32_t machines() const { return n_; }
  Link link() const { return link_; }
  double alpha() const { return alpha_; }
  double curvature_bound() const {
    return detail::link_curvature_bound(link_);
  }
  double max_row_norm_sq() const {
    return betas_.rowwise().squaredNorm().maxCoeff();
  }

  double value(const Vector& x) const {
    check_dim(x);
    const Vector t = betas_ * x;
    double sum = 0.0;
    for (Eigen::Index i = 0; i < t.size(); ++i)
      sum += detail::eval_link(link_, t[i], labels_[i]).value;
    return sum / static_cast<double>(rows()) + 0.5 * alpha_ * x.squaredNorm();
  }

  Vector grad(const Vector& x) const {
    check_dim(x);
    const Vector t = betas_ * x;
    Vector slope(t.size());
    for (Eigen::Index i = 0; i < t.size(); ++i)
      slope[i] = detail::eval_link(link_, t[i], labels_[i]).d1;
    return betas_.transpose() * slope / static_cast<double>(rows()) +
           alpha_ * x;
  }

  Vector local_grad(std::uint32_t machine, const Vector& x) const {
    check_dim(x);
    if (machine >= n_) throw Error("invalid-shard: machine index out of range");
    Vector g = alpha_ * x;
    const double w = static_cast<double>(n_) / static_cast<double>(rows());
    for (const auto row : shards_[machine]) {
      const double t = betas_.row(row).dot(x);
      g += w * detail::eval_link(link_, t, labels_[row]).d1 *
           betas_.row(row).transpose();
    }
    return g;
  }

  Matrix hessian(const Vector& x) const {
    check_dim(x);
    const auto d = dim();
    Matrix h = alpha_ * Matrix::Identity(d, d);
    const Vector t = betas_ * x;
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      const double d2 = detail::eval_link(link_, t[i], labels_[i]).d2;
      h += (d2 / static_cast<double>(rows())) * betas_.row(i).transpose() *
           betas_.row(i);
    }
    return h;
  }

  /// alpha I + (L0/N) sum beta beta', which dominates the Hessian everywhere.
  Matrix dominating_matrix() const {
    const auto d = dim();
    Matrix h = alpha_ * Matrix::Identity(d, d);
    const double w = curvature_bound() / static_cast<double>(rows());
    for (Eigen::Index i = 0; i < betas_.rows(); ++i)
      h += w * betas_.row(i).transpose() * betas_.row(i);
    return h;
  }

  /// d alpha + L0 R with R = max ||beta_i||^2.
  double trace_bound() const {
    return static_cast<double>(dim()) * alpha_ +
           curvature_bound() * max_row_norm_sq();
  }

  /// alpha + L0 lmax((1/N) sum beta beta'), computed once and cached.
  double smoothness() const {
    if (!smoothness_) {
      Matrix gram = Matrix::Zero(dim(), dim());
      for (Eigen::Index i = 0; i < betas_.rows(); ++i)
        gram += betas_.row(i).transpose() * betas_.row(i);
      gram /= static_cast<double>(rows());
      Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
      smoothness_ =
          alpha_ + curvature_bound() * eig.eigenvalues().maxCoeff();
    }
    return *smoothness_;
  }

  const std::vector<std::vector<std::uint32_t>>& shard_rows() const {
    return shards_;
  }

 private:
  void check_dim(const Vector& x) const {
    if (x.size() != dim())
      throw Error("invalid-input: dimension mismatch in objective evaluation");
  }

  Matrix betas_;
  std::vector<double> labels_;
  Link link_;
  double alpha_;
  std::uint32_t n_;
  std::vector<std::vector<std::uint32_t>> shards_;
  mutable std::optional<double> smoothness_;
};

/// f(W, w) = w' tanh(W'x) for a fixed input x, optimized over the flattened
/// variable [vec(W) column-major, w].  tanh has |sigma''| <= 4/(3 sqrt 3),
/// and tr(Hessian) = ||x||^2 sum_j sigma''(theta_j) w_j, so instances with
/// ||x||^2 sqrt(k) <= ||x||_1 keep the trace below curvature * r1 * r2 for
/// every w in the r2 ball.
class TwoLayerObjective {
 public:
  TwoLayerObjective(Vector input, std::uint32_t hidden, double w_bound,
                    std::uint32_t n_machines)
      : x_(std::move(input)), k_(hidden), r2_(w_bound), n_(n_machines) {
    if (k_ == 0) throw Error("invalid-input: need at least one hidden unit");
    if (n_ == 0) throw Error("invalid-shard: need at least one machine");
    if (x_.size() == 0) throw Error("invalid-dimension: empty input vector");
  }

  Eigen::Index input_dim() const { return x_.size(); }
  Eigen::Index dim() const { return x_.size() * k_ + k_; }
  std::uint32_t hidden() const { return k_; }
  std::uint32_t machines() const { return n_; }
  double r1() const { return x_.lpNorm<1>(); }
  double r2() const { return r2_; }
  double curvature_bound() const { return 4.0 / (3.0 * std::sqrt(3.0)); }
  double trace_bound() const { return curvature_bound() * r1() * r2_; }

  double value(const Vector& v) const {
    const auto [theta, w] = split(v);
    const Vector s = theta.array().tanh().matrix();
    return w.dot(s);
  }

  Vector grad(const Vector& v) const {
    const auto [theta, w] = split(v);
    const Vector s = theta.array().tanh().matrix();
    const Vector s1 = (1.0 - s.array().square()).matrix();
    Vector g(dim());
    const auto din = x_.size();
    for (std::uint32_t j = 0; j < k_; ++j)
      g.segment(j * din, din) = s1[j] * w[j] * x_;
    g.tail(k_) = s;
    return g;
  }

  Vector local_grad(std::uint32_t machine, const Vector& v) const {
    if (machine >= n_) throw Error("invalid-shard: machine index out of range");
    return grad(v);
  }

  Matrix hessian(const Vector& v) const {
    const auto [theta, w] = split(v);
    const Vector s = theta.array().tanh().matrix();
    const auto din = x_.size();
    Matrix h = Matrix::Zero(dim(), dim());
    for (std::uint32_t j = 0; j < k_; ++j) {
      const double s1 = 1.0 - s[j] * s[j];
      const double s2 = -2.0 * s[j] * s1;
      h.block(j * din, j * din, din, din) = s2 * w[j] * x_ * x_.transpose();
      h.block(j * din, din * k_ + j, din, 1) = s1 * x_;
      h.block(din * k_ + j, j * din, 1, din) = s1 * x_.transpose();
    }
    return h;
  }

  double hessian_trace(const Vector& v) const {
    const auto [theta, w] = split(v);
    const Vector s = theta.array().tanh().matrix();
    double acc = 0.0;
    for (std::uint32_t j = 0; j < k_; ++j)
      acc += -2.0 * s[j] * (1.0 - s[j] * s[j]) * w[j];
    return x_.squaredNorm() * acc;
  }

 private:
  std::pair<Vector, Vector> split(const Vector& v) const {
    if (v.size() != dim())
      throw Error("invalid-input: dimension mismatch in objective evaluation");
    const auto din = x_.size();
    Vector theta(k_);
    for (std::uint32_t j = 0; j < k_; ++j)
      theta[j] = x_.dot(v.segment(j * din, din));
    return {theta, v.tail(k_)};
  }

  Vector x_;
  std::uint32_t k_;
  double r2_;
  std::uint32_t n_;
};

/// Effective dimension r_a = sum_i lambda_i^a of the (dominating) curvature
/// matrix; exact for quadratics, a sampled estimate elsewhere.
struct EffectiveDimensionReport {
  double r1 = 0.0;
  double r_half = 0.0;
  bool sampled = false;
};

inline EffectiveDimensionReport effective_dimension(
    const QuadraticObjective& obj) {
  EffectiveDimensionReport rep;
  rep.r1 = obj.trace_exact();
  rep.r_half = obj.sum_sqrt_eigenvalues();
  rep.sampled = false;
  return rep;
}

template <typename Objective>
EffectiveDimensionReport sampled_effective_dimension(
    const Objective& obj, const std::vector<Vector>& points) {
  if (points.empty()) throw Error("invalid-input: need at least one point");
  EffectiveDimensionReport rep;
  rep.sampled = true;
  for (const auto& x : points) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(obj.hessian(x));
    const Vector lam = eig.eigenvalues().cwiseMax(0.0);
    rep.r1 = std::max(rep.r1, lam.sum());
    rep.r_half = std::max(rep.r_half, lam.cwiseSqrt().sum());
  }
  return rep;
}

/// True iff A - hessian(x) stays psd (minimum eigenvalue >= -1e-9) at every
/// trial point; the first violating point is reported otherwise.
struct DominationReport {
  bool dominated = true;
  std::optional<Vector> violating_point;
  double worst_eigenvalue = 0.0;
};

template <typename Objective>
DominationReport hessian_dominated_check(const Objective& obj,
                                         const std::vector<Vector>& points,
                                         const Matrix& A) {
  if (A.rows() != A.cols() || !A.isApprox(A.transpose(), 1e-12))
    throw Error("invalid-matrix: A must be symmetric");
  DominationReport rep;
  for (const auto& x : points) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(A - obj.hessian(x));
    const double lo = eig.eigenvalues().minCoeff();
    if (lo < rep.worst_eigenvalue) rep.worst_eigenvalue = lo;
    if (lo < -1e-9 && rep.dominated) {
      rep.dominated = false;
      rep.violating_point = x;
    }
  }
  return rep;
}

/// Spectral-norm Hessian Lipschitz estimate over random pairs near the
/// origin, doubled as a safety factor.
template <typename Objective>
double estimate_hessian_lipschitz(const Objective& obj, std::uint32_t pairs,
                                  std::uint64_t seed) {
  const auto d = static_cast<std::uint32_t>(obj.dim());
  double worst = 0.0;
  for (std::uint32_t p = 0; p < pairs; ++p) {
    const Vector x = gaussian_vector({seed, 2 * p, 1, d});
    const Vector y = gaussian_vector({seed, 2 * p + 1, 1, d});
    const Matrix diff = obj.hessian(x) - obj.hessian(y);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(diff);
    const double num = eig.eigenvalues().cwiseAbs().maxCoeff();
    const double den = (x - y).norm();
    if (den > 1e-12) worst = std::max(worst, num / den);
  }
  return 2.0 * worst;
}

}  // namespace core
