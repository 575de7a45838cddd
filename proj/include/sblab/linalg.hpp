#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace sblab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Thrown whenever an argument lies outside the domain of the math it feeds.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class UnsupportedOperation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Tolerance used by every "is this a unit vector" assertion.
inline constexpr double kUnitTol = 1e-12;

template <typename Derived>
auto unit_direction(const Eigen::MatrixBase<Derived>& v)
    -> Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> {
  const auto n = v.norm();
  if (!(n > 0)) throw DomainError("unit_direction: zero (or non-finite) vector");
  return v / n;
}

/// P_v w = w - (v̂·w) v̂, the component of w orthogonal to v.
template <typename DerivedV, typename DerivedW>
auto project_orthogonal(const Eigen::MatrixBase<DerivedV>& v,
                        const Eigen::MatrixBase<DerivedW>& w)
    -> Eigen::Matrix<typename DerivedW::Scalar, Eigen::Dynamic, 1> {
  if (v.size() != w.size()) throw DomainError("project_orthogonal: dimension mismatch");
  const auto vh = unit_direction(v);
  return w - vh.dot(w) * vh;
}

/// The projector matrix I - v̂ v̂ᵀ.
template <typename Derived>
auto projector(const Eigen::MatrixBase<Derived>& v)
    -> Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> {
  using Scalar = typename Derived::Scalar;
  const auto vh = unit_direction(v);
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> p =
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Identity(v.size(), v.size());
  p.noalias() -= vh * vh.transpose();
  return p;
}

/// Angle in [0, π] between two nonzero vectors.
template <typename DerivedA, typename DerivedB>
double angle_between(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  const double na = a.norm(), nb = b.norm();
  if (!(na > 0) || !(nb > 0)) throw DomainError("angle_between: zero vector");
  // atan2 form stays accurate for nearly parallel inputs, unlike acos.
  const double dot = a.dot(b) / (na * nb);
  const double cross = (a / na - dot * b / nb).norm();
  return std::atan2(cross, dot);
}

/// Signed planar angle from `ref` to `v` using the first two coordinates.
inline double signed_angle_2d(const Vector& ref, const Vector& v) {
  if (ref.size() < 2 || v.size() < 2) throw DomainError("signed_angle_2d: need d >= 2");
  const double cross = ref(0) * v(1) - ref(1) * v(0);
  const double dot = ref(0) * v(0) + ref(1) * v(1);
  return std::atan2(cross, dot);
}

inline Vector basis_vector(Eigen::Index d, Eigen::Index k) {
  Vector e = Vector::Zero(d);
  e(k) = 1.0;
  return e;
}

/// Points x_i (rows) in R^d with ||x_i|| <= 1 and labels in {-1, +1}.
struct LabeledDataset {
  Matrix points;          // n x d
  Eigen::VectorXd labels; // n, entries exactly ±1

  Eigen::Index size() const { return points.rows(); }
  Eigen::Index dim() const { return points.cols(); }
  auto point(Eigen::Index i) const { return points.row(i).transpose(); }

  /// Throws DomainError unless the type invariants hold.
  void validate() const;
};

inline void LabeledDataset::validate() const {
  if (points.rows() < 1) throw DomainError("dataset: need at least one point");
  if (points.cols() < 1) throw DomainError("dataset: need dimension >= 1");
  if (labels.size() != points.rows()) throw DomainError("dataset: label count mismatch");
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    if (!points.row(i).allFinite())
      throw DomainError("dataset: non-finite point at index " + std::to_string(i));
    if (points.row(i).norm() > 1.0 + 1e-12)
      throw DomainError("dataset: point " + std::to_string(i) + " has norm > 1");
    if (labels(i) != 1.0 && labels(i) != -1.0)
      throw DomainError("dataset: label at index " + std::to_string(i) + " is not ±1");
  }
}

}  // namespace sblab
