#pragma once

// Two-layer network f(θ, x) = Σ_j u_j φ(v_j, x) trained on the logistic loss.

#include "sblab/activation.hpp"
#include "sblab/linalg.hpp"

#include <cstdint>
#include <vector>

namespace sblab {

/// θ = (u_1..u_m, v_1..v_m). Rows of V are the hidden weight vectors.
/// Also used for tangent vectors (flow right-hand sides), where `signs` is
/// simply carried along.
struct Params {
  Vector u;                // m
  Matrix V;                // m x d
  std::vector<int> signs;  // s_j = sign(u_j(0))

  Eigen::Index m() const { return u.size(); }
  Eigen::Index d() const { return V.cols(); }
  auto v(Eigen::Index j) const { return V.row(j).transpose(); }

  /// ‖θ‖² = Σ u_j² + Σ ‖v_j‖².
  double squared_norm() const { return u.squaredNorm() + V.squaredNorm(); }
  /// ‖θ‖_[m] = max_j max(|u_j|, ‖v_j‖).
  double max_neuron_norm() const;
  /// u_j² - ‖v_j‖² for every neuron; constant along exact gradient flow.
  Vector balance() const { return u.array().square().matrix() - V.rowwise().squaredNorm(); }

  Params& axpy(double a, const Params& t) {
    u += a * t.u;
    V += a * t.V;
    return *this;
  }
  Params scaled(double a) const {
    Params p = *this;
    p.u *= a;
    p.V *= a;
    return p;
  }
  bool all_finite() const { return u.allFinite() && V.allFinite(); }

  /// Neuron-wise sign of u; zeros map to +1.
  static std::vector<int> signs_of(const Vector& u);
  static Params from(Vector u, Matrix V);
};

enum class InitLaw {
  Sphere,      // v̂⁰ uniform on S^{d-1}, ‖v⁰‖ = 1
  UniformBox,  // v⁰ uniform in [-1/√d, 1/√d]^d (the default fan-in box of common frameworks)
};

struct InitSpec {
  double sigma = 1e-3;
  int m = 1;
  int d = 2;
  std::uint64_t seed = 0;
  InitLaw law = InitLaw::Sphere;
};

/// Balanced small initialization θ(0) = σθ⁰: |u⁰_j| = ‖v⁰_j‖, Rademacher sign on u⁰_j.
Params init_params(const InitSpec& spec, const ActivationCfg& cfg);

/// −ℓ′(z) = 1 / (1 + e^z), evaluated without overflow.
double neg_loss_derivative(double z);
/// ℓ(z) = ln(1 + e^{−z}), evaluated without overflow.
double logistic_loss(double z);

/// −ℓ′(0) = 1/2.
inline const double kNegLossSlopeAtZero = neg_loss_derivative(0.0);

double forward(const Params& theta, const ActivationCfg& cfg, const Vector& x);

/// Activation matrix Φ(j, i) = φ(v_j, x_i), size m x n.
Matrix activation_matrix(const Params& theta, const ActivationCfg& cfg, const LabeledDataset& data);

/// Network outputs f(θ, x_i) for all points.
Vector outputs(const Params& theta, const ActivationCfg& cfg, const LabeledDataset& data);

/// Margins f(θ, x_i) y_i.
Vector margins(const Params& theta, const ActivationCfg& cfg, const LabeledDataset& data);

double loss(const Params& theta, const ActivationCfg& cfg, const LabeledDataset& data);

/// Field shared by the full and linearized systems: for per-point weights w_i,
///   du_j = Σ_i w_i φ(v_j, x_i),   dv_j = u_j Σ_i w_i ∇_v φ(v_j, x_i).
Params weighted_field(const Params& theta, const ActivationCfg& cfg, const LabeledDataset& data,
                      const Vector& weights);

/// −∇L(θ): the gradient-flow right-hand side.
Params flow_rhs(const Params& theta, const ActivationCfg& cfg, const LabeledDataset& data);

/// Right-hand side of the system with the loss linearized at zero output:
/// du_j/dt = G(v_j), dv_j/dt = u_j ∇G(v_j). Neurons do not interact.
Params linearized_rhs(const Params& theta, const ActivationCfg& cfg, const LabeledDataset& data);

}  // namespace sblab
