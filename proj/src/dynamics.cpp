#include "sblab/dynamics.hpp"

#include "sblab/io.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace sblab {

namespace {

struct ScheduleEval {
  long t;

  double operator()(const ConstantLr& c) const { return c.eta; }

  double operator()(const FourNeuronLr&) const {
    constexpr double base = 1.0 / 128.0;
    constexpr double t13 = 8192.0;
    constexpr double t14 = 16384.0;
    const double x = static_cast<double>(t);
    if (t < 12) return 4.0;
    if (x < t13) return base;
    if (x < t14) return base * (1.0 + 32.0 * (x / t13 - 1.0));
    return base * (1.0 + std::exp2(5.0 + (x - t14) / 512.0));
  }

  double operator()(const PiecewiseLr& p) const {
    if (p.table.empty() || p.table.front().first != 0)
      throw DomainError("piecewise schedule must start at epoch 0");
    double eta = p.table.front().second;
    for (const auto& [start, rate] : p.table) {
      if (start > t) break;
      eta = rate;
    }
    return eta;
  }
};

class Recorder {
 public:
  Recorder(const Params& theta0, const ActivationCfg& cfg, const LabeledDataset& data, const RunOptions& opts,
           Trajectory& traj)
      : cfg_(cfg), data_(data), opts_(opts), traj_(traj), balance0_(theta0.balance()) {
    const int tracked = static_cast<int>(std::min<Eigen::Index>(opts.max_tracked, theta0.m()));
    for (int j = 0; j < tracked; ++j) traj_.tracked.push_back(j);
    for (const auto& r : opts.refs) {
      if (r.size() != theta0.d()) throw DomainError("reference direction has wrong dimension");
      traj_.refs.push_back(unit_direction(r));
    }
  }

  /// Returns false when the outputs or the loss of the logged state are not finite
  /// (overflowing outputs give a loss of exactly 0, which is no less broken).
  bool log(long epoch, double time, const Params& theta) {
    TrajectoryRecord rec;
    rec.epoch = epoch;
    rec.time = time;
    const Vector z = margins(theta, cfg_, data_);
    double l = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) l += logistic_loss(z[i]);
    rec.loss = l / static_cast<double>(z.size());
    rec.min_margin = z.minCoeff();
    rec.max_neuron_norm = theta.max_neuron_norm();
    rec.squared_norm = theta.squared_norm();
    rec.first_layer_scale = std::sqrt(theta.V.squaredNorm());
    const Vector drift = theta.balance() - balance0_;
    rec.max_balance_drift = drift.cwiseAbs().maxCoeff();

    bool flipped = false;
    for (Eigen::Index j = 0; j < theta.m(); ++j)
      if (theta.u[j] != 0.0 && (theta.u[j] > 0 ? 1 : -1) != theta.signs[static_cast<std::size_t>(j)]) flipped = true;
    if (flipped) ++traj_.sign_flips;

    for (int j : traj_.tracked) {
      NeuronSnapshot s;
      s.u = theta.u[j];
      const Vector vj = theta.v(j);
      s.v_norm = vj.norm();
      for (const auto& r : traj_.refs) s.angles.push_back(s.v_norm > 0.0 ? angle_between(vj, r) : 0.0);
      s.balance_drift = drift[j];
      s.angles.shrink_to_fit();
      rec.neurons.push_back(std::move(s));
    }
    const bool finite = std::isfinite(rec.loss) && z.allFinite();
    traj_.records.push_back(std::move(rec));
    if (opts_.observer) opts_.observer(epoch, time, theta);
    return finite;
  }

 private:
  const ActivationCfg& cfg_;
  const LabeledDataset& data_;
  const RunOptions& opts_;
  Trajectory& traj_;
  Vector balance0_;
};

long first_nonfinite_neuron(const Params& theta) {
  for (Eigen::Index j = 0; j < theta.m(); ++j)
    if (!std::isfinite(theta.u[j]) || !theta.V.row(j).allFinite()) return j;
  return -1;
}

void abort_run(Trajectory& traj, long epoch, const Params& theta, const std::string& why) {
  traj.aborted = true;
  traj.abort_epoch = epoch;
  traj.abort_neuron = first_nonfinite_neuron(theta);
  traj.abort_reason = why;
  if (traj.abort_neuron >= 0) traj.abort_reason += " (neuron " + std::to_string(traj.abort_neuron) + ")";
}

void check_inputs(const Params& theta0, const LabeledDataset& data, const RunOptions& opts) {
  data.validate();
  if (theta0.d() != data.dim()) throw DomainError("parameter and data dimensions differ");
  if (theta0.m() == 0) throw DomainError("network has no neurons");
  if (opts.log_every < 1) throw DomainError("log_every must be >= 1");
}

}  // namespace

double schedule_eval(const Schedule& s, long t) {
  if (t < 0) throw DomainError("schedule evaluated at negative epoch");
  return std::visit(ScheduleEval{t}, s);
}

Trajectory gd_run(const Params& theta0, const ActivationCfg& cfg, const LabeledDataset& data, const Schedule& schedule,
                  long epochs, const RunOptions& opts) {
  check_inputs(theta0, data, opts);
  if (epochs < 0) throw DomainError("epochs must be >= 0");
  Trajectory traj;
  Recorder rec(theta0, cfg, data, opts, traj);
  Params theta = theta0;
  double time = 0.0;
  long last_logged = -1;
  for (long t = 0; t < epochs; ++t) {
    if (t % opts.log_every == 0) {
      last_logged = t;
      if (!rec.log(t, time, theta)) {
        abort_run(traj, t, theta, "non-finite outputs or loss at epoch " + std::to_string(t));
        traj.final_state = std::move(theta);
        return traj;
      }
    }
    const double eta = schedule_eval(schedule, t);
    theta.axpy(eta, flow_rhs(theta, cfg, data));
    time += eta;
    if (!theta.all_finite()) {
      abort_run(traj, t + 1, theta, "non-finite parameters after epoch " + std::to_string(t));
      traj.final_state = std::move(theta);
      return traj;
    }
  }
  if (last_logged != epochs && !rec.log(epochs, time, theta))
    abort_run(traj, epochs, theta, "non-finite outputs or loss at epoch " + std::to_string(epochs));
  traj.final_state = std::move(theta);
  return traj;
}

Params rk4_step(const Params& theta, const RhsFn& rhs, double h) {
  const Params k1 = rhs(theta);
  Params y = theta;
  y.axpy(h / 2, k1);
  const Params k2 = rhs(y);
  y = theta;
  y.axpy(h / 2, k2);
  const Params k3 = rhs(y);
  y = theta;
  y.axpy(h, k3);
  const Params k4 = rhs(y);
  Params out = theta;
  out.axpy(h / 6, k1).axpy(h / 3, k2).axpy(h / 3, k3).axpy(h / 6, k4);
  return out;
}

Trajectory rk4_run(const Params& theta0, const RhsFn& rhs, const ActivationCfg& cfg, const LabeledDataset& data,
                   double t_end, double h, const RunOptions& opts) {
  check_inputs(theta0, data, opts);
  if (!(h > 0.0) || !(t_end >= 0.0)) throw DomainError("rk4 needs h > 0 and t_end >= 0");
  const long steps = static_cast<long>(std::ceil(t_end / h - 1e-9));
  const double step = steps > 0 ? t_end / static_cast<double>(steps) : h;
  Trajectory traj;
  Recorder rec(theta0, cfg, data, opts, traj);
  Params theta = theta0;
  long last_logged = -1;
  for (long k = 0; k < steps; ++k) {
    if (k % opts.log_every == 0) {
      last_logged = k;
      if (!rec.log(k, step * static_cast<double>(k), theta)) {
        abort_run(traj, k, theta, "non-finite outputs or loss at step " + std::to_string(k));
        traj.final_state = std::move(theta);
        return traj;
      }
    }
    theta = rk4_step(theta, rhs, step);
    if (!theta.all_finite()) {
      abort_run(traj, k + 1, theta, "non-finite parameters after step " + std::to_string(k));
      traj.final_state = std::move(theta);
      return traj;
    }
  }
  if (last_logged != steps && !rec.log(steps, steps > 0 ? t_end : 0.0, theta))
    abort_run(traj, steps, theta, "non-finite outputs or loss at step " + std::to_string(steps));
  traj.final_state = std::move(theta);
  return traj;
}

Trajectory flow_run(const Params& theta0, const ActivationCfg& cfg, const LabeledDataset& data, double t_end,
                    double h, const RunOptions& opts) {
  const RhsFn rhs = [&](const Params& p) { return flow_rhs(p, cfg, data); };
  return rk4_run(theta0, rhs, cfg, data, t_end, h, opts);
}

EnvelopeReport norm_envelope_check(const Trajectory& traj, const Params& theta0, double lambda, double xi,
                                   double tol) {
  EnvelopeReport rep;
  rep.a = static_cast<double>(theta0.m()) * (1.0 + xi) * (1.0 + xi) / 4.0;
  const double n0 = theta0.max_neuron_norm();
  const double n0sq = n0 * n0;
  if (!(lambda > 0.0) || !(n0 > 0.0)) throw DomainError("envelope check needs lambda > 0 and θ(0) != 0");
  rep.t1 = std::log(lambda / (2.0 * rep.a * n0sq)) / (2.0 * lambda);
  for (const auto& r : traj.records) {
    if (r.time > rep.t1) break;
    const double bound = 2.0 * n0sq * std::exp(2.0 * lambda * r.time);
    rep.max_ratio = std::max(rep.max_ratio, r.max_neuron_norm * r.max_neuron_norm / bound);
    ++rep.checked;
  }
  rep.pass = rep.checked > 0 && rep.max_ratio <= 1.0 + tol;
  return rep;
}

PhasePlan make_phase_plan(double r, double kappa_star, double lambda, int m, double xi, double epsilon,
                          double theta_star_max_norm) {
  if (!(r > 0.0 && r < 1.0) || !(kappa_star > 0.0) || !(lambda > 0.0))
    throw DomainError("phase plan needs r in (0,1), kappa* > 0, lambda > 0");
  PhasePlan p;
  p.r = r;
  p.kappa_star = kappa_star;
  p.sigma = std::pow(r, 1.0 + kappa_star);
  p.lambda = lambda;
  p.T1 = std::log(r / p.sigma) / lambda;
  p.a = static_cast<double>(m) * (1.0 + xi) * (1.0 + xi) / 4.0;
  p.epsilon = epsilon;
  if (epsilon > 0.0 && theta_star_max_norm > 0.0) {
    p.t4_eps = std::log(lambda * epsilon / (2.0 * p.a * r * r * theta_star_max_norm * theta_star_max_norm)) /
               (2.0 * lambda);
    p.T2_eps = p.T1 + p.t4_eps;
  }
  return p;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  CsvWriter w(out);
  std::vector<std::string> head{"epoch", "time", "loss", "min_margin", "max_neuron_norm", "squared_norm",
                                "first_layer_scale", "max_balance_drift"};
  for (int j : traj.tracked) {
    const std::string p = "n" + std::to_string(j) + "_";
    head.push_back(p + "u");
    head.push_back(p + "v_norm");
    for (std::size_t k = 0; k < traj.refs.size(); ++k) head.push_back(p + "angle_to_ref_" + std::to_string(k));
    head.push_back(p + "balance_drift");
  }
  w.header(head);
  for (const auto& r : traj.records) {
    w.field(r.epoch).field(r.time).field(r.loss).field(r.min_margin).field(r.max_neuron_norm).field(r.squared_norm)
        .field(r.first_layer_scale).field(r.max_balance_drift);
    for (const auto& s : r.neurons) {
      w.field(s.u).field(s.v_norm);
      for (double a : s.angles) w.field(a);
      w.field(s.balance_drift);
    }
    w.end_row();
  }
}

void write_params_csv(std::ostream& out, const Params& theta) {
  CsvWriter w(out);
  std::vector<std::string> head{"u"};
  for (Eigen::Index k = 0; k < theta.d(); ++k) head.push_back("v_" + std::to_string(k));
  w.header(head);
  for (Eigen::Index j = 0; j < theta.m(); ++j) {
    w.field(theta.u[j]);
    for (Eigen::Index k = 0; k < theta.d(); ++k) w.field(theta.V(j, k));
    w.end_row();
  }
}

Params read_params_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  if (t.header.empty() || t.header[0] != "u") throw IoError(path + ": first column must be 'u'");
  const auto d = static_cast<Eigen::Index>(t.header.size() - 1);
  if (d < 1) throw IoError(path + ": no v columns");
  const auto m = static_cast<Eigen::Index>(t.rows.size());
  Vector u(m);
  Matrix V(m, d);
  for (Eigen::Index j = 0; j < m; ++j) {
    const std::string where = path + ":" + std::to_string(t.line_numbers[static_cast<std::size_t>(j)]);
    const auto& row = t.rows[static_cast<std::size_t>(j)];
    u[j] = parse_real(row[0], where);
    for (Eigen::Index k = 0; k < d; ++k) V(j, k) = parse_real(row[static_cast<std::size_t>(k + 1)], where);
  }
  return Params::from(std::move(u), std::move(V));
}

}  // namespace sblab
