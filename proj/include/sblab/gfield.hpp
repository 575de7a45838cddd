#pragma once

// The landscape function
//
//   G(v) = (1/n) Σ_i (−ℓ′(0)) φ(v, x_i) y_i
//
// that drives every neuron while the network output is still ≈ 0, its
// sphere-restricted ascent flow dr/dt = s P_r ∇G(r̂), and multi-start
// enumeration of the global extrema of |G|.

#include "sblab/activation.hpp"
#include "sblab/linalg.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace sblab {

double g_value(const LabeledDataset& data, const ActivationCfg& cfg, const Vector& v);
Vector g_grad(const LabeledDataset& data, const ActivationCfg& cfg, const Vector& v);

struct AscentOptions {
  double step = 1.0;         // initial (and maximal) step h
  int max_steps = 100000;
  double grad_tol = 1e-10;   // stop when ‖P_r g‖ <= grad_tol · max(1, |G|)
  double min_move = 1e-15;   // backtracking floor on h‖P_r g‖ (nonsmooth stationary point)
};

struct AscentResult {
  Vector direction;
  double value = 0.0;      // G(direction)
  double grad_norm = 0.0;  // ‖P_r g‖ at the returned iterate
  int steps = 0;
  bool converged = false;
};

/// Projected ascent of s·G on the unit sphere with renormalization after
/// every step and step halving whenever s·G would decrease. A result with
/// `converged == false` carries the last iterate.
AscentResult sphere_ascend(const LabeledDataset& data, const ActivationCfg& cfg, const Vector& start, int sign,
                           const AscentOptions& opts = {});

struct ExtremumRecord {
  Vector direction;
  double value = 0.0;
  int sign = 1;
  int basin_hits = 0;
};

struct GLandscape {
  std::vector<ExtremumRecord> extrema;
  double lambda = 0.0;
  std::string dataset_hash;

  std::vector<Vector> directions() const;
};

struct ExtremaOptions {
  int n_starts = 64;
  std::uint64_t seed = 0;
  double dedup_angle = 0.01;
  double rel_tol = 1e-6;
  AscentOptions ascent{};
};

GLandscape find_extrema(const LabeledDataset& data, const ActivationCfg& cfg, const ExtremaOptions& opts = {});

bool is_delta_regular(const LabeledDataset& data, const Vector& direction, double delta);

/// Hex digest of the dataset contents (points and labels, bitwise).
std::string dataset_digest(const LabeledDataset& data);

/// CSV columns: dir_0..dir_{d-1}, g_value, sign, basin_hits.
void write_landscape_csv(std::ostream& out, const GLandscape& landscape);

}  // namespace sblab
