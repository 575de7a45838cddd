#pragma once

// XOR-pattern data: four clusters around ±e1 (label +1) and ±e2 (label −1),
// closed under the coordinate swap P, the axis reflections R1, R2 and the
// reflection R_r of coordinates 3..d. A skewed variant places the negative
// clusters at angle α from the positive ones.

#include "sblab/linalg.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

namespace sblab {

class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct XorSpec {
  int d = 2;
  int per_cluster = 8;   // base draws; each is closed under the symmetry group
  double delta = 0.05;   // cluster radius, < √2/2
  double Delta0 = 0.01;  // regularity margin: |x¹|, |x²| >= xi + 2·Delta0
  double xi = 0.0;
  std::uint64_t seed = 0;
  int max_attempts = 100000;  // per base point
};

struct SkewSpec {
  double alpha = 1.5707963267948966;  // angle between the positive and negative cluster axes
  int per_cluster = 8;
  double delta = 0.05;
  double Delta0 = 0.01;
  double xi = 0.0;
  std::uint64_t seed = 0;
  int max_attempts = 100000;
};

LabeledDataset gen_xor(const XorSpec& spec);

/// Clusters at planar angles {0, α, π, π+α}; at α = π/2 the point set equals
/// gen_xor's for d = 2 (up to rounding of cos(π/2)).
LabeledDataset gen_skewed_xor(const SkewSpec& spec);

struct ClauseCheck {
  bool pass = true;
  long worst_index = -1;  // offending point, −1 when the clause holds
  double worst_value = 0.0;
  std::string detail;
};

struct XorValidation {
  ClauseCheck clusters;   // 1: membership within δ < √2/2 of the nearest axis direction, label rule
  ClauseCheck reflections;  // 2: closure under R1, R2, R_r
  ClauseCheck permutation;  // 3: closure under P
  ClauseCheck regularity;   // 4: |e_k·x_i| >= xi + 2 Delta0 for k = 1, 2
  double achieved_delta = 0.0;

  bool all_pass() const { return clusters.pass && reflections.pass && permutation.pass && regularity.pass; }
};

XorValidation validate_xor_assumptions(const LabeledDataset& data, double xi, double Delta0,
                                       double sym_tol = 1e-9);

void write_validation_csv(std::ostream& out, const XorValidation& report);

/// CSV with header x_0..x_{d-1},y and 17 significant digits.
void write_dataset_csv(std::ostream& out, const LabeledDataset& data);
void save_dataset(const std::filesystem::path& path, const LabeledDataset& data);

/// Reads and validates a dataset CSV; malformed rows are reported with their line number.
LabeledDataset load_dataset(const std::filesystem::path& path);
LabeledDataset parse_dataset(std::istream& in, const std::string& source_name);

}  // namespace sblab
