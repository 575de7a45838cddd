#pragma once

// Turning trajectories and landscapes into checkable statements: alignment of
// hidden features with reference directions, the grouping of prominent
// neurons and the embedding χ of a p-neuron network, normalized margins and
// their local maximality, phase-1 coupling between the full and linearized
// systems, and the capture-probability Monte Carlo.

#include "sblab/dynamics.hpp"
#include "sblab/gfield.hpp"
#include "sblab/network.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <vector>

namespace sblab {

class ConsistencyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// ---- alignment ------------------------------------------------------------

struct NeuronAlignment {
  int nearest = -1;  // reference index, −1 for a zero neuron
  double angle = 0.0;
  double relative_scale = 0.0;  // ‖v_j‖² / Σ_k ‖v_k‖²
  double v_norm = 0.0;
  double u = 0.0;
  double planar_angle = 0.0;  // atan2(v², v¹); d >= 2
};

struct AlignmentReport {
  std::vector<NeuronAlignment> neurons;
  std::vector<double> mass_within;  // per reference: Σ relative scale of neurons within tol_angle
  double aligned_mass = 0.0;
  double first_layer_scale = 0.0;  // sqrt(Σ_j ‖v_j‖²)
  double tol_angle = 0.0;
  double aligned_median_scale = 0.0;    // median relative scale over aligned neurons
  double unaligned_max_scale = 0.0;     // largest relative scale outside the tolerance
  int aligned_count = 0;
};

AlignmentReport alignment_report(const Params& theta, const std::vector<Vector>& refs, double tol_angle);

/// Columns: neuron, planar_angle, nearest_ref, angle, relative_scale, v_norm, u.
void write_alignment_csv(std::ostream& out, const AlignmentReport& report);

// ---- prominent neurons and the embedding χ --------------------------------

struct EmbeddingGroup {
  int extremum = -1;  // index into the landscape
  Vector direction;   // v̂*_{P_k}
  int sign = 1;       // s_{P_k}
  std::vector<int> members;
  std::vector<double> coefficients;  // |u*_j| / sqrt(Σ_{P_k} u*²), one per member
};

struct EmbeddingMap {
  int m = 0;
  std::vector<EmbeddingGroup> groups;
  std::vector<int> residual;  // R

  int p() const { return static_cast<int>(groups.size()); }
  bool empty() const { return groups.empty(); }
};

/// j joins P when v̂_j is within angle_tol of an extremum and its scale is at
/// least scale_tol times the largest neuron scale. Groups are keyed by
/// (extremum, sign(u_j)); an empty P yields a map with no groups.
EmbeddingMap group_prominent(const Params& theta, const GLandscape& landscape, double angle_tol = 0.1,
                             double scale_tol = 1e-2);

/// χ: neuron j of group k receives c_j·(ũ_k, ṽ_k); residual neurons are zero.
/// Throws ConsistencyError when Σ c_j² differs from 1 by more than 1e-9.
Params embed_chi(const EmbeddingMap& emb, const Params& theta_p);

/// p-neuron initialization ũ_k = s_k r sqrt(Σ_{P_k} u*_j²), ṽ_k = |ũ_k| v̂*_k.
Params reduce_to_p(const EmbeddingMap& emb, const Vector& u_star, double r);

// ---- margins ----------------------------------------------------------------

struct MarginReport {
  double gamma = 0.0;
  long argmin = -1;
  Vector margins;
};

MarginReport normalized_margin(const Params& theta, const ActivationCfg& cfg, const LabeledDataset& data);

/// Reference directions e1, e2, −e1, −e2 and their output signs +, −, +, −.
std::vector<Vector> four_neuron_refs(int d);
inline constexpr int kFourNeuronSigns[4] = {1, -1, 1, -1};

/// θ̆: u = (1, −1, 1, −1), v_k = k-th reference; ‖θ̆‖² = 8.
Params theta_breve(int d);

/// v_k(0) = |u_k(0)|·ref_k for the given signed output weights.
Params four_neuron_init(const std::vector<double>& u0, int d);

/// Signed angle of neuron k to its reference after mapping the reference to e1
/// (identity, coordinate swap, R1, R1∘swap for k = 0..3).
double four_neuron_signed_angle(const Params& theta, int k);

/// Angle between θ and θ̆ as vectors in parameter space.
double angle_to_theta_breve(const Params& theta);

/// Sign pattern of the activation on every (neuron, point) pair. ReLU: vᵀx > 0,
/// = 0, < 0; smoothed: the input lies beyond, on or short of the smoothing band.
std::vector<signed char> activation_pattern(const Params& theta, const ActivationCfg& cfg,
                                            const LabeledDataset& data);

class PatternChangeError : public DomainError {
 public:
  PatternChangeError(const std::string& what, long sample) : DomainError(what), sample_(sample) {}
  long sample() const { return sample_; }

 private:
  long sample_;
};

struct ProbeReport {
  double gamma0 = 0.0;
  double max_improvement = 0.0;  // max over samples of γ(θ̂') − γ(θ̂)
  long best_sample = -1;
  long samples = 0;
  long improved = 0;  // samples with γ(θ̂') − γ(θ̂) > tol
  double tol = 1e-12;
  bool pass = false;  // max_improvement <= tol
};

/// Perturbs θ̂/‖θ̂‖ by Gaussian directions of norm `radius`, renormalizes and
/// compares γ. Throws PatternChangeError if any sample alters an activation
/// pattern entry; ReLU entries with vᵀx exactly 0 at θ̂ are exempt.
ProbeReport local_max_margin_probe(const Params& theta, const ActivationCfg& cfg, const LabeledDataset& data,
                                   long n_perturb, double radius, std::uint64_t seed, double tol = 1e-12);

// ---- phase-1 coupling -------------------------------------------------------

struct CouplingOptions {
  double h = 0.01;  // RK4 step; the run uses ceil(T1/h) equal steps
  double rel_tol = 1e-3;  // a limit direction is prominent when |G| >= (1 − rel_tol) λ
  AscentOptions ascent{};
};

struct CouplingRow {
  double r = 0.0;
  double sigma = 0.0;
  double T1 = 0.0;
  int n_prominent = 0;
  int n_residual = 0;
  double dir_error = 0.0;         // max over P of ‖v̂_j(T1) − v̂*_j‖ in the full system
  double lin_dir_error = 0.0;     // same for the linearized system
  double scale_gap = 0.0;         // max_R scale / min_P scale (full system)
  double full_lin_dist = 0.0;     // ‖θ(T1) − θ̄(T1)‖ / r
  double u_proxy = 0.0;           // max over P of |u_j(T1) − r u*_j| / r with u*_j = ū_j(T1)/r
  double max_balance_drift = 0.0;  // over both systems, per unit time
};

struct CouplingReport {
  double lambda = 0.0;
  double kappa_star = 0.0;
  std::vector<int> prominent;  // P, fixed across r by the linearized limits
  std::vector<Vector> limit_directions;
  std::vector<CouplingRow> rows;
};

/// θ0_base holds unit-scale neurons; each r scales it by σ = r^{1+κ*}.
CouplingReport phase1_coupling(const LabeledDataset& data, const ActivationCfg& cfg, const Params& theta0_base,
                               const std::vector<double>& r_list, double kappa_star, const GLandscape& landscape,
                               const CouplingOptions& opts = {});

/// Balanced unit-scale base: m/4 random sphere neurons together with their
/// images under the reflections of coordinates 1 and 2, followed by probes at
/// ±e_d (saddle directions of G for XOR data with d >= 3). m must be a multiple of 4.
Params coupling_base(int m, int d, std::uint64_t seed, bool with_probes = true);

void write_coupling_csv(std::ostream& out, const CouplingReport& report);

// ---- capture probability ----------------------------------------------------

struct CaptureRow {
  int m = 0;
  long trials = 0;
  long captured = 0;
  double frequency = 0.0;
  double std_error = 0.0;  // binomial
  double bound = 0.0;      // 1 − 4(3/4)^m, clipped at 0
};

struct CaptureOptions {
  double angle_tol = 0.1;
  // Capture is decided at angle_tol, so the ascent need not polish to machine precision.
  AscentOptions ascent{1.0, 100000, 1e-6, 1e-15};
};

/// Each trial draws max(m_list) neurons (uniform direction, fair sign), runs
/// the sign-weighted sphere ascent per neuron, and for every m counts the
/// trial as captured when each extremum is reached by one of the first m
/// neurons carrying its sign.
std::vector<CaptureRow> capture_probability_mc(const LabeledDataset& data, const ActivationCfg& cfg,
                                               const GLandscape& landscape, const std::vector<int>& m_list,
                                               long n_trials, std::uint64_t seed, const CaptureOptions& opts = {},
                                               int threads = 1);

void write_capture_csv(std::ostream& out, const std::vector<CaptureRow>& rows);

// ---- accuracy time ----------------------------------------------------------

/// First logged epoch whose min margin exceeds `threshold`.
std::optional<long> accuracy_time_detector(const std::vector<TrajectoryRecord>& records, double threshold = 4.67);

}  // namespace sblab
