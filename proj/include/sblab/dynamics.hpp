#pragma once

// Trajectory integration: full-batch gradient descent with a learning-rate
// schedule, fixed-step RK4 for the gradient flow, and monitors for the
// invariants the flow must respect.

#include "sblab/network.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace sblab {

struct ConstantLr {
  double eta = 0.1;
};

/// 4 for t < 12; 2⁻⁷ for t < 2¹³; a linear ramp to 33·2⁻⁷ at 2¹⁴; then
/// 2⁻⁷(1 + 2^{5 + (t − 2¹⁴)/2⁹}).
struct FourNeuronLr {};

/// Rate `table[k].second` from epoch `table[k].first` onwards; first entry must start at 0.
struct PiecewiseLr {
  std::vector<std::pair<long, double>> table;
};

using Schedule = std::variant<ConstantLr, FourNeuronLr, PiecewiseLr>;

double schedule_eval(const Schedule& s, long t);

struct NeuronSnapshot {
  double u = 0.0;
  double v_norm = 0.0;
  std::vector<double> angles;  // to each reference direction, in [0, π]
  double balance_drift = 0.0;  // (u² − ‖v‖²) − its initial value
};

struct TrajectoryRecord {
  long epoch = 0;
  double time = 0.0;  // Σ η for GD, step·h for RK4
  double loss = 0.0;
  double min_margin = 0.0;
  double max_neuron_norm = 0.0;  // ‖θ‖_[m]
  double squared_norm = 0.0;     // ‖θ‖²
  double first_layer_scale = 0.0;  // sqrt(Σ_j ‖v_j‖²)
  double max_balance_drift = 0.0;
  std::vector<NeuronSnapshot> neurons;  // tracked neurons only
};

struct Trajectory {
  std::vector<TrajectoryRecord> records;
  Params final_state;
  std::vector<int> tracked;
  std::vector<Vector> refs;
  int sign_flips = 0;  // logged epochs at which some sign(u_j) differed from s_j
  bool aborted = false;
  long abort_epoch = -1;
  long abort_neuron = -1;
  std::string abort_reason;
};

using LogObserver = std::function<void(long epoch, double time, const Params& theta)>;

struct RunOptions {
  long log_every = 1;
  std::vector<Vector> refs;  // reference directions for the angle columns
  int max_tracked = 16;      // neurons 0..max_tracked-1 get per-neuron columns
  LogObserver observer;      // called at every logged state
};

using RhsFn = std::function<Params(const Params&)>;

/// θ ← θ + η_t·(−∇L(θ)) for `epochs` full-batch steps.
Trajectory gd_run(const Params& theta0, const ActivationCfg& cfg, const LabeledDataset& data, const Schedule& schedule,
                  long epochs, const RunOptions& opts = {});

/// Classical RK4 with fixed step h on the gradient-flow field up to t_end.
/// `log_every` counts RK4 steps.
Trajectory flow_run(const Params& theta0, const ActivationCfg& cfg, const LabeledDataset& data, double t_end,
                    double h, const RunOptions& opts = {});

/// RK4 on an arbitrary field (e.g. the linearized system); records still
/// report the full-network loss and margins of the state.
Trajectory rk4_run(const Params& theta0, const RhsFn& rhs, const ActivationCfg& cfg, const LabeledDataset& data,
                   double t_end, double h, const RunOptions& opts = {});

/// One RK4 step.
Params rk4_step(const Params& theta, const RhsFn& rhs, double h);

struct EnvelopeReport {
  double t1 = 0.0;          // validity horizon (1/2λ) ln(λ / (2a‖θ(0)‖²_[m]))
  double a = 0.0;           // m(1+ξ)²/4
  double max_ratio = 0.0;   // max over logged t <= t1 of ‖θ(t)‖²_[m] / (2‖θ(0)‖²_[m] e^{2λt})
  int checked = 0;
  bool pass = false;
};

EnvelopeReport norm_envelope_check(const Trajectory& traj, const Params& theta0, double lambda, double xi,
                                   double tol = 1e-6);

struct PhasePlan {
  double r = 0.0;
  double kappa_star = 0.0;
  double sigma = 0.0;  // r^{1+κ*}
  double lambda = 0.0;
  double T1 = 0.0;     // (1/λ) ln(r/σ)
  double a = 0.0;      // m(1+ξ)²/4
  double epsilon = 0.0;
  double t4_eps = 0.0;  // (1/2λ) ln(λε / (2a r² ‖θ*‖²_[m]))
  double T2_eps = 0.0;  // T1 + t4_eps
};

PhasePlan make_phase_plan(double r, double kappa_star, double lambda, int m, double xi, double epsilon,
                          double theta_star_max_norm);

/// Columns: epoch, time, loss, min_margin, max_neuron_norm, squared_norm,
/// first_layer_scale, max_balance_drift, then per tracked neuron j:
/// n{j}_u, n{j}_v_norm, n{j}_angle_to_ref_{k}..., n{j}_balance_drift.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);

/// Columns: u, v_0..v_{d-1}.
void write_params_csv(std::ostream& out, const Params& theta);
Params read_params_csv(const std::string& path);

}  // namespace sblab
