#include "sblab/gfield.hpp"

#include "sblab/io.hpp"
#include "sblab/network.hpp"
#include "sblab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <ostream>

namespace sblab {

namespace {

struct GEval {
  double value;
  Vector grad;
};

// G and ∇G from a single-neuron field with u = 1 and constant weights.
GEval evaluate(const LabeledDataset& data, const ActivationCfg& cfg, const Vector& v) {
  Params p;
  p.u = Vector::Ones(1);
  p.V = v.transpose();
  p.signs = {1};
  const Vector w = (kNegLossSlopeAtZero / static_cast<double>(data.size())) * data.labels;
  const Params f = weighted_field(p, cfg, data, w);
  return {f.u(0), f.V.row(0).transpose()};
}

}  // namespace

double g_value(const LabeledDataset& data, const ActivationCfg& cfg, const Vector& v) {
  if (v.size() != data.dim()) throw DomainError("g_value: dimension mismatch");
  const Vector phis = activation_matrix(Params::from(Vector::Ones(1), v.transpose()), cfg, data).row(0);
  return kNegLossSlopeAtZero / static_cast<double>(data.size()) * phis.dot(data.labels);
}

Vector g_grad(const LabeledDataset& data, const ActivationCfg& cfg, const Vector& v) {
  if (v.size() != data.dim()) throw DomainError("g_grad: dimension mismatch");
  if (v.norm() == 0.0) throw DomainError("g_grad: v = 0");
  return evaluate(data, cfg, v).grad;
}

AscentResult sphere_ascend(const LabeledDataset& data, const ActivationCfg& cfg, const Vector& start, int sign,
                           const AscentOptions& opts) {
  if (std::abs(start.norm() - 1.0) > 1e-10) throw DomainError("sphere_ascend: start must be a unit vector");
  if (sign != 1 && sign != -1) throw DomainError("sphere_ascend: sign must be ±1");
  const double s = sign;
  AscentResult res;
  Vector r = start;
  GEval e = evaluate(data, cfg, r);
  Vector pg = e.grad - r.dot(e.grad) * r;
  double h = opts.step;
  for (res.steps = 0; res.steps < opts.max_steps; ++res.steps) {
    const double gn = pg.norm();
    if (gn <= opts.grad_tol * std::max(1.0, std::abs(e.value))) {
      res.converged = true;
      break;
    }
    bool accepted = false;
    Vector trial;
    GEval te;
    while (h * gn >= opts.min_move) {
      trial = r + (h * s) * pg;
      trial /= trial.norm();
      te = evaluate(data, cfg, trial);
      if (s * te.value >= s * e.value) {
        accepted = true;
        break;
      }
      h *= 0.5;
    }
    if (!accepted) {
      // No ascent step of any representable length: a nonsmooth stationary point.
      res.converged = true;
      break;
    }
    r = std::move(trial);
    e = std::move(te);
    pg = e.grad - r.dot(e.grad) * r;
    h = std::min(2.0 * h, opts.step);
  }
  res.direction = r;
  res.value = e.value;
  res.grad_norm = pg.norm();
  return res;
}

std::vector<Vector> GLandscape::directions() const {
  std::vector<Vector> out;
  out.reserve(extrema.size());
  for (const auto& e : extrema) out.push_back(e.direction);
  return out;
}

GLandscape find_extrema(const LabeledDataset& data, const ActivationCfg& cfg, const ExtremaOptions& opts) {
  if (opts.n_starts < 1) throw DomainError("find_extrema: n_starts must be >= 1");
  const auto d = data.dim();

  struct Terminal {
    Vector dir;
    double value;
    int sign;
  };
  std::vector<Terminal> terminals;
  std::normal_distribution<double> normal;
  for (int sign : {1, -1}) {
    for (int k = 0; k < opts.n_starts; ++k) {
      Rng rng = make_substream(opts.seed, static_cast<std::uint64_t>(k) * 2 + (sign > 0 ? 0 : 1));
      Vector start(d);
      do {
        for (Eigen::Index q = 0; q < d; ++q) start(q) = normal(rng);
      } while (start.norm() == 0.0);
      start /= start.norm();
      const auto res = sphere_ascend(data, cfg, start, sign, opts.ascent);
      terminals.push_back({res.direction, res.value, sign});
    }
  }

  double best = -std::numeric_limits<double>::infinity();
  for (const auto& t : terminals) best = std::max(best, t.sign * t.value);

  GLandscape out;
  out.dataset_hash = dataset_digest(data);
  const double cutoff = best - opts.rel_tol * std::abs(best);
  for (const auto& t : terminals) {
    if (t.sign * t.value < cutoff) continue;
    auto it = std::find_if(out.extrema.begin(), out.extrema.end(), [&](const ExtremumRecord& r) {
      return angle_between(r.direction, t.dir) < opts.dedup_angle;
    });
    if (it != out.extrema.end()) {
      ++it->basin_hits;
      if (std::abs(t.value) > std::abs(it->value)) {
        it->direction = t.dir;
        it->value = t.value;
      }
      continue;
    }
    out.extrema.push_back({t.dir, t.value, t.value < 0 ? -1 : 1, 1});
  }
  if (out.extrema.empty()) {
    // best itself always survives the cutoff; only reachable with NaNs in the data
    throw DomainError("find_extrema: no terminal survived (non-finite landscape?)");
  }
  std::sort(out.extrema.begin(), out.extrema.end(), [](const ExtremumRecord& a, const ExtremumRecord& b) {
    if (std::abs(a.value) != std::abs(b.value)) return std::abs(a.value) > std::abs(b.value);
    return std::lexicographical_compare(a.direction.data(), a.direction.data() + a.direction.size(),
                                        b.direction.data(), b.direction.data() + b.direction.size());
  });
  out.lambda = std::abs(out.extrema.front().value);
  return out;
}

bool is_delta_regular(const LabeledDataset& data, const Vector& direction, double delta) {
  if (std::abs(direction.norm() - 1.0) > 1e-10) throw DomainError("is_delta_regular: direction must be unit");
  return (data.points * direction).cwiseAbs().minCoeff() >= delta;
}

std::string dataset_digest(const LabeledDataset& data) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  auto mix = [&](const double* p, Eigen::Index count) {
    for (Eigen::Index i = 0; i < count; ++i) {
      std::uint64_t bits;
      std::memcpy(&bits, p + i, sizeof bits);
      for (int b = 0; b < 8; ++b) {
        h ^= (bits >> (8 * b)) & 0xFFu;
        h *= 0x100000001B3ULL;
      }
    }
  };
  const Matrix pts = data.points;  // column-major copy, independent of expression layout
  mix(pts.data(), pts.size());
  mix(data.labels.data(), data.labels.size());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_landscape_csv(std::ostream& out, const GLandscape& landscape) {
  if (landscape.extrema.empty()) return;
  const auto d = landscape.extrema.front().direction.size();
  CsvWriter csv(out);
  std::vector<std::string> header;
  for (Eigen::Index k = 0; k < d; ++k) header.push_back("dir_" + std::to_string(k));
  header.insert(header.end(), {"g_value", "sign", "basin_hits"});
  csv.header(header);
  for (const auto& e : landscape.extrema) {
    for (Eigen::Index k = 0; k < d; ++k) csv.field(e.direction(k));
    csv.field(e.value).field(e.sign).field(e.basin_hits);
    csv.end_row();
  }
}

}  // namespace sblab
