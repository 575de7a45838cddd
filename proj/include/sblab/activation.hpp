#pragma once

// Exact ReLU and the ball-smoothed ReLU
//
//   φ(v, x) = E_{z ~ U(D^d)} (vᵀ(x + ξ z))_+ ,
//
// reduced to a one-dimensional integral along v̂:
//
//   φ(v, x) = κ_d ∫_{-c}^{1} (vᵀx + ξ‖v‖ a)(1 - a²)^{(d-1)/2} da,
//   c = clamp(vᵀx / (ξ‖v‖), -1, 1),  κ_d = Vol(D^{d-1}) / Vol(D^d).
//
// For odd d the weight (1 - a²)^{(d-1)/2} is an even polynomial, so both
// edge integrals have exact polynomial antiderivatives.

#include "sblab/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace sblab {

enum class ActivationKind { ExactRelu, Smoothed };

struct ActivationCfg {
  ActivationKind kind = ActivationKind::ExactRelu;
  double xi = 0.0;  // smoothing radius, Smoothed only
  int dim = 2;

  static ActivationCfg relu(int d) { return {ActivationKind::ExactRelu, 0.0, d}; }
  static ActivationCfg smoothed(double xi, int d) { return {ActivationKind::Smoothed, xi, d}; }

  bool is_smoothed() const { return kind == ActivationKind::Smoothed; }

  /// Throws DomainError unless the configuration is admissible.
  void validate() const {
    if (dim < 1) throw DomainError("activation: dimension must be >= 1");
    if (kind == ActivationKind::ExactRelu) return;
    if (dim < 2 || dim % 2 == 0)
      throw DomainError("activation: the smoothed activation is only defined here for odd d >= 3 "
                        "(the closed form for even d needs arcsin terms); got d = " +
                        std::to_string(dim));
    if (!(xi > 0.0 && xi < 1.0)) throw DomainError("activation: smoothing radius must lie in (0, 1)");
  }
};

/// Vol(D^{d-1}) / Vol(D^d) = Γ(d/2 + 1) / (√π Γ((d+1)/2)).
inline double kappa_ratio(int d) {
  if (d < 2) throw DomainError("kappa_ratio: need d >= 2");
  const double dd = d;
  return std::exp(std::lgamma(dd / 2.0 + 1.0) - std::lgamma((dd + 1.0) / 2.0)) /
         std::sqrt(std::numbers::pi);
}

template <typename Scalar>
struct EdgeProfileT {
  Scalar c{};
  Scalar i0{};     // ∫_{-c}^{1} (1 - a²)^{(d-1)/2} da
  Scalar i1{};     // ∫_{-c}^{1} a (1 - a²)^{(d-1)/2} da = (1 - c²)^{(d+1)/2} / (d + 1)
  Scalar kappa{};
};
using EdgeProfile = EdgeProfileT<double>;

namespace detail {

// J_k(x) = ∫_0^x (1 - a²)^k da via (2k+1) J_k = x (1 - x²)^k + 2k J_{k-1}, J_0 = x.
// Every term is a polynomial in x, evaluated without cancellation for |x| <= 1.
template <typename Scalar>
Scalar half_edge_integral(Scalar x, int k) {
  const Scalar w = Scalar(1) - x * x;
  Scalar j = x;
  Scalar wp = Scalar(1);
  for (int q = 1; q <= k; ++q) {
    wp *= w;
    j = (x * wp + Scalar(2 * q) * j) / Scalar(2 * q + 1);
  }
  return j;
}

template <typename Scalar>
Scalar int_pow(Scalar b, int e) {
  Scalar r(1);
  for (int q = 0; q < e; ++q) r *= b;
  return r;
}

}  // namespace detail

/// Closed-form edge integrals for odd d >= 3 at cut c ∈ [-1, 1].
template <typename Scalar = double>
EdgeProfileT<Scalar> edge_profile(Scalar c, int d) {
  if (d < 3 || d % 2 == 0) throw DomainError("edge_profile: need odd d >= 3");
  if (!(std::abs(c) <= Scalar(1))) throw DomainError("edge_profile: |c| > 1");
  const int k = (d - 1) / 2;
  EdgeProfileT<Scalar> p;
  p.c = c;
  p.i0 = detail::half_edge_integral(Scalar(1), k) + detail::half_edge_integral(c, k);
  p.i1 = detail::int_pow(Scalar(1) - c * c, k + 1) / Scalar(d + 1);
  p.kappa = Scalar(kappa_ratio(d));
  return p;
}

namespace detail {

inline void check_dims(const ActivationCfg& cfg, Eigen::Index vd, Eigen::Index xd) {
  if (vd != xd || vd != cfg.dim) throw DomainError("activation: dimension mismatch");
}

template <typename Scalar>
Scalar clamp_cut(Scalar vx, Scalar xi_vnorm) {
  return std::clamp(vx / xi_vnorm, Scalar(-1), Scalar(1));
}

}  // namespace detail

template <typename DerivedV, typename DerivedX>
typename DerivedV::Scalar phi(const ActivationCfg& cfg, const Eigen::MatrixBase<DerivedV>& v,
                              const Eigen::MatrixBase<DerivedX>& x) {
  using Scalar = typename DerivedV::Scalar;
  detail::check_dims(cfg, v.size(), x.size());
  const Scalar vx = v.dot(x);
  if (cfg.kind == ActivationKind::ExactRelu) return std::max(vx, Scalar(0));
  const Scalar vn = v.norm();
  if (vn == Scalar(0)) return Scalar(0);
  const Scalar xi = Scalar(cfg.xi);
  const auto p = edge_profile(detail::clamp_cut(vx, xi * vn), cfg.dim);
  return p.kappa * (vx * p.i0 + xi * vn * p.i1);
}

/// ∇_v φ. ExactRelu uses the subgradient [vᵀx >= 0] x.
template <typename DerivedV, typename DerivedX>
auto grad_phi(const ActivationCfg& cfg, const Eigen::MatrixBase<DerivedV>& v,
              const Eigen::MatrixBase<DerivedX>& x)
    -> Eigen::Matrix<typename DerivedV::Scalar, Eigen::Dynamic, 1> {
  using Scalar = typename DerivedV::Scalar;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  detail::check_dims(cfg, v.size(), x.size());
  const Scalar vn = v.norm();
  if (vn == Scalar(0)) throw DomainError("grad_phi: v = 0");
  const Scalar vx = v.dot(x);
  if (cfg.kind == ActivationKind::ExactRelu) return vx >= Scalar(0) ? Vec(x) : Vec(Vec::Zero(x.size()));
  const Scalar xi = Scalar(cfg.xi);
  const auto p = edge_profile(detail::clamp_cut(vx, xi * vn), cfg.dim);
  return p.kappa * (p.i0 * x + (xi * p.i1 / vn) * v);
}

/// ∇²_v φ = κ [ ξ i1(c) P_v / ‖v‖ + (1-c²)^{(d-1)/2} (P_v x)(P_v x)ᵀ / (ξ‖v‖) ], zero for |c| = 1.
template <typename DerivedV, typename DerivedX>
auto hessian_phi(const ActivationCfg& cfg, const Eigen::MatrixBase<DerivedV>& v,
                 const Eigen::MatrixBase<DerivedX>& x)
    -> Eigen::Matrix<typename DerivedV::Scalar, Eigen::Dynamic, Eigen::Dynamic> {
  using Scalar = typename DerivedV::Scalar;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (cfg.kind == ActivationKind::ExactRelu)
    throw UnsupportedOperation("hessian_phi: not defined for the exact ReLU");
  detail::check_dims(cfg, v.size(), x.size());
  const Scalar vn = v.norm();
  if (vn == Scalar(0)) throw DomainError("hessian_phi: v = 0");
  const Scalar xi = Scalar(cfg.xi);
  const Scalar c = detail::clamp_cut(v.dot(x), xi * vn);
  const auto d = v.size();
  if (std::abs(c) >= Scalar(1)) return Mat::Zero(d, d);
  const auto p = edge_profile(c, cfg.dim);
  const Mat proj = projector(v);
  const auto px = (proj * x).eval();
  const Scalar w = detail::int_pow(Scalar(1) - c * c, (cfg.dim - 1) / 2);
  return p.kappa * ((xi * p.i1 / vn) * proj + (w / (xi * vn)) * (px * px.transpose()));
}

}  // namespace sblab
