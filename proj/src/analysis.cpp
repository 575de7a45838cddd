#include "sblab/analysis.hpp"

#include "sblab/io.hpp"
#include "sblab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <thread>

namespace sblab {

AlignmentReport alignment_report(const Params& theta, const std::vector<Vector>& refs, double tol_angle) {
  if (refs.empty()) throw DomainError("alignment_report: no reference directions");
  std::vector<Vector> units;
  for (const auto& r : refs) {
    if (r.size() != theta.d()) throw DomainError("alignment_report: reference dimension mismatch");
    units.push_back(unit_direction(r));
  }
  AlignmentReport rep;
  rep.tol_angle = tol_angle;
  rep.mass_within.assign(refs.size(), 0.0);
  const double total = theta.V.squaredNorm();
  rep.first_layer_scale = std::sqrt(total);
  std::vector<double> aligned_scales;
  for (Eigen::Index j = 0; j < theta.m(); ++j) {
    NeuronAlignment a;
    const Vector vj = theta.v(j);
    a.v_norm = vj.norm();
    a.u = theta.u(j);
    if (theta.d() >= 2) a.planar_angle = std::atan2(vj(1), vj(0));
    if (a.v_norm > 0.0 && total > 0.0) {
      a.relative_scale = vj.squaredNorm() / total;
      a.angle = M_PI + 1.0;
      for (std::size_t k = 0; k < units.size(); ++k) {
        const double ang = angle_between(vj, units[k]);
        if (ang < a.angle) {
          a.angle = ang;
          a.nearest = static_cast<int>(k);
        }
      }
      if (a.angle <= tol_angle) {
        rep.mass_within[static_cast<std::size_t>(a.nearest)] += a.relative_scale;
        aligned_scales.push_back(a.relative_scale);
      } else {
        rep.unaligned_max_scale = std::max(rep.unaligned_max_scale, a.relative_scale);
      }
    }
    rep.neurons.push_back(a);
  }
  rep.aligned_mass = std::accumulate(rep.mass_within.begin(), rep.mass_within.end(), 0.0);
  rep.aligned_count = static_cast<int>(aligned_scales.size());
  if (!aligned_scales.empty()) {
    std::sort(aligned_scales.begin(), aligned_scales.end());
    const std::size_t n = aligned_scales.size();
    rep.aligned_median_scale =
        n % 2 ? aligned_scales[n / 2] : 0.5 * (aligned_scales[n / 2 - 1] + aligned_scales[n / 2]);
  }
  return rep;
}

void write_alignment_csv(std::ostream& out, const AlignmentReport& report) {
  CsvWriter w(out);
  w.header({"neuron", "planar_angle", "nearest_ref", "angle", "relative_scale", "v_norm", "u"});
  for (std::size_t j = 0; j < report.neurons.size(); ++j) {
    const auto& a = report.neurons[j];
    w.field(j).field(a.planar_angle).field(a.nearest).field(a.angle).field(a.relative_scale).field(a.v_norm)
        .field(a.u);
    w.end_row();
  }
}

EmbeddingMap group_prominent(const Params& theta, const GLandscape& landscape, double angle_tol,
                             double scale_tol) {
  EmbeddingMap emb;
  emb.m = static_cast<int>(theta.m());
  const double top = theta.max_neuron_norm();
  std::map<std::pair<int, int>, std::size_t> key_to_group;
  for (Eigen::Index j = 0; j < theta.m(); ++j) {
    const Vector vj = theta.v(j);
    const double scale = std::max(std::abs(theta.u(j)), vj.norm());
    int best = -1;
    double best_angle = angle_tol;
    if (vj.norm() > 0.0 && scale >= scale_tol * top) {
      for (std::size_t k = 0; k < landscape.extrema.size(); ++k) {
        const double ang = angle_between(vj, landscape.extrema[k].direction);
        if (ang <= best_angle) {
          best_angle = ang;
          best = static_cast<int>(k);
        }
      }
    }
    if (best < 0) {
      emb.residual.push_back(static_cast<int>(j));
      continue;
    }
    const int sign = theta.signs[static_cast<std::size_t>(j)];
    const auto key = std::make_pair(best, sign);
    auto it = key_to_group.find(key);
    if (it == key_to_group.end()) {
      EmbeddingGroup g;
      g.extremum = best;
      g.direction = unit_direction(landscape.extrema[static_cast<std::size_t>(best)].direction);
      g.sign = sign;
      emb.groups.push_back(std::move(g));
      it = key_to_group.emplace(key, emb.groups.size() - 1).first;
    }
    emb.groups[it->second].members.push_back(static_cast<int>(j));
  }
  for (auto& g : emb.groups) {
    double ss = 0.0;
    for (int j : g.members) ss += theta.u(j) * theta.u(j);
    const double norm = std::sqrt(ss);
    for (int j : g.members) g.coefficients.push_back(norm > 0.0 ? std::abs(theta.u(j)) / norm : 0.0);
  }
  return emb;
}

Params embed_chi(const EmbeddingMap& emb, const Params& theta_p) {
  if (theta_p.m() != emb.p()) throw ConsistencyError("embed_chi: p-neuron parameters do not match the groups");
  const Eigen::Index d = theta_p.d();
  Params out;
  out.u = Vector::Zero(emb.m);
  out.V = Matrix::Zero(emb.m, d);
  out.signs.assign(static_cast<std::size_t>(emb.m), 1);
  for (int k = 0; k < emb.p(); ++k) {
    const auto& g = emb.groups[static_cast<std::size_t>(k)];
    if (g.coefficients.size() != g.members.size())
      throw ConsistencyError("embed_chi: group " + std::to_string(k) + " has no coefficient per member");
    double ss = 0.0;
    for (double c : g.coefficients) ss += c * c;
    if (std::abs(ss - 1.0) > 1e-9)
      throw ConsistencyError("embed_chi: coefficients of group " + std::to_string(k) + " square-sum to " +
                             format_real(ss));
    for (std::size_t i = 0; i < g.members.size(); ++i) {
      const int j = g.members[i];
      if (j < 0 || j >= emb.m) throw ConsistencyError("embed_chi: member index out of range");
      out.u(j) = g.coefficients[i] * theta_p.u(k);
      out.V.row(j) = g.coefficients[i] * theta_p.V.row(k);
      out.signs[static_cast<std::size_t>(j)] = theta_p.signs[static_cast<std::size_t>(k)];
    }
  }
  return out;
}

Params reduce_to_p(const EmbeddingMap& emb, const Vector& u_star, double r) {
  if (emb.empty()) throw DomainError("reduce_to_p: no prominent neurons");
  if (u_star.size() != emb.m) throw DomainError("reduce_to_p: u* must have one entry per neuron");
  const Eigen::Index d = emb.groups.front().direction.size();
  Vector u(emb.p());
  Matrix V(emb.p(), d);
  for (int k = 0; k < emb.p(); ++k) {
    const auto& g = emb.groups[static_cast<std::size_t>(k)];
    double ss = 0.0;
    for (int j : g.members) ss += u_star(j) * u_star(j);
    u(k) = g.sign * r * std::sqrt(ss);
    V.row(k) = std::abs(u(k)) * g.direction.transpose();
  }
  Params p = Params::from(std::move(u), std::move(V));
  for (int k = 0; k < emb.p(); ++k) p.signs[static_cast<std::size_t>(k)] = emb.groups[static_cast<std::size_t>(k)].sign;
  return p;
}

MarginReport normalized_margin(const Params& theta, const ActivationCfg& cfg, const LabeledDataset& data) {
  const double sq = theta.squared_norm();
  if (!(sq > 0.0)) throw DomainError("normalized_margin: θ is zero");
  MarginReport rep;
  rep.margins = margins(theta, cfg, data);
  Eigen::Index i = 0;
  rep.gamma = rep.margins.minCoeff(&i) / sq;
  rep.argmin = static_cast<long>(i);
  return rep;
}

std::vector<Vector> four_neuron_refs(int d) {
  if (d < 2) throw DomainError("four-neuron network needs d >= 2");
  return {basis_vector(d, 0), basis_vector(d, 1), -basis_vector(d, 0), -basis_vector(d, 1)};
}

Params theta_breve(int d) {
  const auto refs = four_neuron_refs(d);
  Vector u(4);
  Matrix V(4, d);
  for (int k = 0; k < 4; ++k) {
    u(k) = kFourNeuronSigns[k];
    V.row(k) = refs[static_cast<std::size_t>(k)].transpose();
  }
  return Params::from(std::move(u), std::move(V));
}

Params four_neuron_init(const std::vector<double>& u0, int d) {
  if (u0.size() != 4) throw DomainError("four-neuron init needs exactly 4 output weights");
  const auto refs = four_neuron_refs(d);
  Vector u(4);
  Matrix V(4, d);
  for (int k = 0; k < 4; ++k) {
    const double a = u0[static_cast<std::size_t>(k)];
    if (a == 0.0 || (a > 0 ? 1 : -1) != kFourNeuronSigns[k])
      throw DomainError("four-neuron init: weight " + std::to_string(k + 1) + " must be nonzero with sign " +
                        (kFourNeuronSigns[k] > 0 ? "+" : "-"));
    u(k) = a;
    V.row(k) = std::abs(a) * refs[static_cast<std::size_t>(k)].transpose();
  }
  return Params::from(std::move(u), std::move(V));
}

double four_neuron_signed_angle(const Params& theta, int k) {
  if (theta.m() != 4 || k < 0 || k > 3) throw DomainError("four_neuron_signed_angle: need 4 neurons, k in 0..3");
  Vector v = theta.v(k);
  if (k % 2 == 1) std::swap(v(0), v(1));
  if (k >= 2) v(0) = -v(0);
  return signed_angle_2d(basis_vector(theta.d(), 0), v);
}

double angle_to_theta_breve(const Params& theta) {
  if (theta.m() != 4) throw DomainError("angle_to_theta_breve: need 4 neurons");
  const Params b = theta_breve(static_cast<int>(theta.d()));
  const auto flat = [](const Params& p) {
    Vector x(p.u.size() + p.V.size());
    x << p.u, p.V.reshaped();
    return x;
  };
  return angle_between(flat(theta), flat(b));
}

std::vector<signed char> activation_pattern(const Params& theta, const ActivationCfg& cfg,
                                            const LabeledDataset& data) {
  std::vector<signed char> pat;
  pat.reserve(static_cast<std::size_t>(theta.m() * data.size()));
  for (Eigen::Index j = 0; j < theta.m(); ++j) {
    const Vector vj = theta.v(j);
    const double band = cfg.is_smoothed() ? cfg.xi * vj.norm() : 0.0;
    for (Eigen::Index i = 0; i < data.size(); ++i) {
      const double p = vj.dot(data.point(i));
      pat.push_back(static_cast<signed char>(p > band ? 1 : (p < -band ? -1 : 0)));
    }
  }
  return pat;
}

namespace {

// θ's direction with the perturbation P on top, renormalized.
Params perturbed(const Params& base, const Vector& dir, double radius) {
  Params p = base;
  const Eigen::Index m = base.m(), d = base.d();
  p.u += radius * dir.head(m);
  for (Eigen::Index j = 0; j < m; ++j) p.V.row(j) += radius * dir.segment(m + j * d, d).transpose();
  return p.scaled(1.0 / std::sqrt(p.squared_norm()));
}

}  // namespace

ProbeReport local_max_margin_probe(const Params& theta, const ActivationCfg& cfg, const LabeledDataset& data,
                                   long n_perturb, double radius, std::uint64_t seed, double tol) {
  if (!(radius >= 0.0) || n_perturb < 0) throw DomainError("probe: need radius >= 0 and n_perturb >= 0");
  const Params base = theta.scaled(1.0 / std::sqrt(theta.squared_norm()));
  ProbeReport rep;
  rep.tol = tol;
  rep.gamma0 = normalized_margin(base, cfg, data).gamma;
  const auto pattern0 = activation_pattern(base, cfg, data);
  const Eigen::Index dim = base.m() * (1 + base.d());
  Rng rng(seed);
  std::normal_distribution<double> normal;
  Vector dir(dim);
  for (long s = 0; s < n_perturb; ++s) {
    for (Eigen::Index k = 0; k < dim; ++k) dir(k) = normal(rng);
    dir.normalize();
    const Params p = perturbed(base, dir, radius);
    // ReLU entries with vᵀx exactly 0 at θ̂ (ideal data) may go either way; for the
    // smoothed activation 0 is the band regime and stays binding
    const auto pattern = activation_pattern(p, cfg, data);
    bool changed = false;
    for (std::size_t q = 0; q < pattern.size() && !changed; ++q)
      changed = pattern[q] != pattern0[q] && (cfg.is_smoothed() || pattern0[q] != 0);
    if (changed)
      throw PatternChangeError("probe: radius " + format_real(radius) + " changes the activation pattern at sample " +
                                   std::to_string(s),
                               s);
    const double diff = normalized_margin(p, cfg, data).gamma - rep.gamma0;
    if (rep.best_sample < 0 || diff > rep.max_improvement) {
      rep.max_improvement = diff;
      rep.best_sample = s;
    }
    if (diff > tol) ++rep.improved;
    ++rep.samples;
  }
  rep.pass = rep.max_improvement <= tol;
  return rep;
}

Params coupling_base(int m, int d, std::uint64_t seed, bool with_probes) {
  if (m < 0 || m % 4 != 0 || d < 2) throw DomainError("coupling_base: need m a multiple of 4 and d >= 2");
  Rng rng(seed);
  std::normal_distribution<double> normal;
  std::bernoulli_distribution coin(0.5);
  const int total = m + (with_probes ? 2 : 0);
  Vector u(total);
  Matrix V(total, d);
  // Orbits under the reflections of the first two coordinates, so that f stays
  // symmetric and the last axis is invariant for the full flow, not only the linearized one.
  for (int j = 0; j < m; j += 4) {
    Vector v(d);
    for (int k = 0; k < d; ++k) v(k) = normal(rng);
    v.normalize();
    const double s = coin(rng) ? 1.0 : -1.0;
    for (int q = 0; q < 4; ++q) {
      Vector w = v;
      if (q & 1) w(0) = -w(0);
      if (q & 2) w(1) = -w(1);
      V.row(j + q) = w.transpose();
      u(j + q) = s;
    }
  }
  if (with_probes) {
    // Both output signs, pinned to the last axis.
    V.row(m) = basis_vector(d, d - 1).transpose();
    u(m) = 1.0;
    V.row(m + 1) = -basis_vector(d, d - 1).transpose();
    u(m + 1) = -1.0;
  }
  return Params::from(std::move(u), std::move(V));
}

CouplingReport phase1_coupling(const LabeledDataset& data, const ActivationCfg& cfg, const Params& theta0_base,
                               const std::vector<double>& r_list, double kappa_star, const GLandscape& landscape,
                               const CouplingOptions& opts) {
  if (landscape.extrema.empty() || !(landscape.lambda > 0.0))
    throw DomainError("phase1_coupling: landscape has no extrema");
  if (!(kappa_star > 0.0)) throw DomainError("phase1_coupling: kappa* must be > 0");
  CouplingReport rep;
  rep.lambda = landscape.lambda;
  rep.kappa_star = kappa_star;

  // Prominence is a property of the linearized limit: ascend from each initial direction.
  const Eigen::Index m = theta0_base.m();
  std::vector<char> in_p(static_cast<std::size_t>(m), 0);
  rep.limit_directions.resize(static_cast<std::size_t>(m));
  for (Eigen::Index j = 0; j < m; ++j) {
    const Vector v0 = unit_direction(Vector(theta0_base.v(j)));
    const int s = theta0_base.signs[static_cast<std::size_t>(j)];
    const auto res = sphere_ascend(data, cfg, v0, s, opts.ascent);
    rep.limit_directions[static_cast<std::size_t>(j)] = res.direction;
    if (s * res.value >= (1.0 - opts.rel_tol) * landscape.lambda) {
      in_p[static_cast<std::size_t>(j)] = 1;
      rep.prominent.push_back(static_cast<int>(j));
    }
  }

  const RhsFn lin = [&](const Params& p) { return linearized_rhs(p, cfg, data); };
  for (double r : r_list) {
    const PhasePlan plan = make_phase_plan(r, kappa_star, landscape.lambda, static_cast<int>(m), cfg.xi, 0.0, 0.0);
    const Params theta0 = theta0_base.scaled(plan.sigma);
    RunOptions ro;
    ro.log_every = 1L << 40;
    ro.max_tracked = 0;
    const auto full = flow_run(theta0, cfg, data, plan.T1, opts.h, ro);
    const auto lint = rk4_run(theta0, lin, cfg, data, plan.T1, opts.h, ro);
    if (full.aborted || lint.aborted) throw DomainError("phase1_coupling: integration blew up at r = " + format_real(r));
    const Params& a = full.final_state;
    const Params& b = lint.final_state;

    CouplingRow row;
    row.r = r;
    row.sigma = plan.sigma;
    row.T1 = plan.T1;
    row.n_prominent = static_cast<int>(rep.prominent.size());
    row.n_residual = static_cast<int>(m) - row.n_prominent;
    double min_p = std::numeric_limits<double>::infinity(), max_r = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      const double scale = std::max(std::abs(a.u(j)), a.V.row(j).norm());
      if (in_p[static_cast<std::size_t>(j)]) {
        const Vector& star = rep.limit_directions[static_cast<std::size_t>(j)];
        row.dir_error = std::max(row.dir_error, (unit_direction(Vector(a.v(j))) - star).norm());
        row.lin_dir_error = std::max(row.lin_dir_error, (unit_direction(Vector(b.v(j))) - star).norm());
        row.u_proxy = std::max(row.u_proxy, std::abs(a.u(j) - b.u(j)) / r);
        min_p = std::min(min_p, scale);
      } else {
        max_r = std::max(max_r, scale);
      }
    }
    row.scale_gap = rep.prominent.empty() ? std::numeric_limits<double>::quiet_NaN() : max_r / min_p;
    const double du = (a.u - b.u).squaredNorm(), dv = (a.V - b.V).squaredNorm();
    row.full_lin_dist = std::sqrt(du + dv) / r;
    const Vector bal0 = theta0.balance();
    row.max_balance_drift = std::max((a.balance() - bal0).cwiseAbs().maxCoeff(),
                                     (b.balance() - bal0).cwiseAbs().maxCoeff()) /
                            std::max(plan.T1, 1e-300);
    rep.rows.push_back(row);
  }
  return rep;
}

void write_coupling_csv(std::ostream& out, const CouplingReport& report) {
  CsvWriter w(out);
  w.header({"r", "sigma", "T1", "lambda", "kappa_star", "n_prominent", "n_residual", "dir_error", "lin_dir_error",
            "scale_gap", "full_lin_dist_over_r", "u_proxy_over_r", "max_balance_drift_per_time"});
  for (const auto& r : report.rows) {
    w.field(r.r).field(r.sigma).field(r.T1).field(report.lambda).field(report.kappa_star).field(r.n_prominent)
        .field(r.n_residual).field(r.dir_error).field(r.lin_dir_error).field(r.scale_gap).field(r.full_lin_dist)
        .field(r.u_proxy).field(r.max_balance_drift);
    w.end_row();
  }
}

std::vector<CaptureRow> capture_probability_mc(const LabeledDataset& data, const ActivationCfg& cfg,
                                               const GLandscape& landscape, const std::vector<int>& m_list,
                                               long n_trials, std::uint64_t seed, const CaptureOptions& opts,
                                               int threads) {
  if (m_list.empty() || n_trials < 1) throw DomainError("capture_probability_mc: need m values and trials >= 1");
  for (int m : m_list)
    if (m < 1) throw DomainError("capture_probability_mc: m must be >= 1");
  if (landscape.extrema.empty()) throw DomainError("capture_probability_mc: landscape has no extrema");
  const int m_max = *std::max_element(m_list.begin(), m_list.end());
  const auto d = data.dim();
  const std::size_t p = landscape.extrema.size();

  // first_capture[t][e]: smallest neuron index that captures extremum e in trial t (m_max if none).
  std::vector<std::vector<int>> first_capture(static_cast<std::size_t>(n_trials), std::vector<int>(p, m_max));
  auto run_trial = [&](long t) {
    Rng rng = make_substream(seed, static_cast<std::uint64_t>(t));
    std::normal_distribution<double> normal;
    std::bernoulli_distribution coin(0.5);
    auto& fc = first_capture[static_cast<std::size_t>(t)];
    for (int j = 0; j < m_max; ++j) {
      Vector v(d);
      do {
        for (Eigen::Index k = 0; k < d; ++k) v(k) = normal(rng);
      } while (v.norm() == 0.0);
      v.normalize();
      const int s = coin(rng) ? 1 : -1;
      const auto res = sphere_ascend(data, cfg, v, s, opts.ascent);
      for (std::size_t e = 0; e < p; ++e) {
        const auto& ex = landscape.extrema[e];
        if (ex.sign == s && fc[e] == m_max && angle_between(res.direction, ex.direction) <= opts.angle_tol) fc[e] = j;
      }
    }
  };
  const int nt = std::max(1, threads);
  if (nt == 1) {
    for (long t = 0; t < n_trials; ++t) run_trial(t);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < nt; ++w)
      pool.emplace_back([&, w] {
        for (long t = w; t < n_trials; t += nt) run_trial(t);
      });
    for (auto& th : pool) th.join();
  }

  std::vector<CaptureRow> rows;
  for (int m : m_list) {
    CaptureRow row;
    row.m = m;
    row.trials = n_trials;
    for (const auto& fc : first_capture)
      if (std::all_of(fc.begin(), fc.end(), [m](int j) { return j < m; })) ++row.captured;
    row.frequency = static_cast<double>(row.captured) / static_cast<double>(n_trials);
    row.std_error = std::sqrt(row.frequency * (1.0 - row.frequency) / static_cast<double>(n_trials));
    row.bound = std::max(0.0, 1.0 - 4.0 * std::pow(0.75, m));
    rows.push_back(row);
  }
  return rows;
}

void write_capture_csv(std::ostream& out, const std::vector<CaptureRow>& rows) {
  CsvWriter w(out);
  w.header({"m", "trials", "captured", "frequency", "std_error", "bound"});
  for (const auto& r : rows) {
    w.field(r.m).field(r.trials).field(r.captured).field(r.frequency).field(r.std_error).field(r.bound);
    w.end_row();
  }
}

std::optional<long> accuracy_time_detector(const std::vector<TrajectoryRecord>& records, double threshold) {
  for (const auto& r : records)
    if (r.min_margin > threshold) return r.epoch;
  return std::nullopt;
}

}  // namespace sblab
