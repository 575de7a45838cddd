#include "sblab/datasets.hpp"

#include "sblab/io.hpp"
#include "sblab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <vector>

namespace sblab {

namespace {

constexpr double kHalfSqrt2 = 0.70710678118654752;

struct BasePoint {
  double a;      // coordinate along the cluster axis
  double b;      // in-plane coordinate across it
  Vector rest;   // coordinates 3..d
};

// One draw uniform in the δ-ball around e1, rejected until it satisfies the
// regularity margin and the unit-norm bound.
BasePoint draw_base(Rng& rng, int d, double delta, double threshold, int max_attempts) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Vector z(d);
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    for (int k = 0; k < d; ++k) z(k) = normal(rng);
    const double zn = z.norm();
    if (zn == 0.0) continue;
    const double radius = delta * std::pow(unif(rng), 1.0 / d);
    Vector x = (radius / zn) * z;
    x(0) += 1.0;
    if (std::abs(x(0)) < threshold || std::abs(x(1)) < threshold) continue;
    if (x.norm() > 1.0) continue;
    return {x(0), x(1), x.tail(d - 2)};
  }
  throw GenerationError("dataset generation: no admissible point after " + std::to_string(max_attempts) +
                        " attempts (cluster radius too small for the regularity margin?)");
}

struct Collector {
  int d;
  std::vector<Vector> pts;
  std::vector<double> labels;
  std::set<std::vector<double>> seen;

  void add(const Vector& x, double y) {
    std::vector<double> key(x.data(), x.data() + x.size());
    key.push_back(y);
    if (!seen.insert(key).second) return;
    pts.push_back(x);
    labels.push_back(y);
  }

  LabeledDataset finish() const {
    LabeledDataset out;
    out.points.resize(static_cast<Eigen::Index>(pts.size()), d);
    out.labels.resize(static_cast<Eigen::Index>(pts.size()));
    for (std::size_t i = 0; i < pts.size(); ++i) {
      out.points.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
      out.labels(static_cast<Eigen::Index>(i)) = labels[i];
    }
    return out;
  }
};

Vector planar(int d, double p0, double p1, const Vector& rest) {
  Vector x(d);
  x(0) = p0;
  x(1) = p1;
  if (d > 2) x.tail(d - 2) = rest;
  return x;
}

void check_common(int per_cluster, double delta, double Delta0, double xi) {
  if (per_cluster < 1) throw DomainError("dataset: per_cluster must be >= 1");
  if (!(delta >= 0.0 && delta < kHalfSqrt2)) throw DomainError("dataset: need 0 <= delta < sqrt(2)/2");
  if (!(Delta0 >= 0.0) || !(xi >= 0.0)) throw DomainError("dataset: Delta0 and xi must be >= 0");
}

}  // namespace

LabeledDataset gen_xor(const XorSpec& spec) {
  if (spec.d < 2) throw DomainError("gen_xor: need d >= 2");
  check_common(spec.per_cluster, spec.delta, spec.Delta0, spec.xi);
  Rng rng(spec.seed);
  const double threshold = spec.xi + 2.0 * spec.Delta0;
  Collector col{spec.d, {}, {}, {}};
  for (int k = 0; k < spec.per_cluster; ++k) {
    const BasePoint p = draw_base(rng, spec.d, spec.delta, threshold, spec.max_attempts);
    // Orbit under <P, R1, R2, R_r>, listed as the four quarter turns of (a, b) and (a, −b).
    for (int flip_rest = 0; flip_rest < (spec.d > 2 ? 2 : 1); ++flip_rest) {
      const Vector rest = flip_rest ? Vector(-p.rest) : p.rest;
      col.add(planar(spec.d, p.a, p.b, rest), 1.0);
      col.add(planar(spec.d, p.a, -p.b, rest), 1.0);
      col.add(planar(spec.d, -p.b, p.a, rest), -1.0);
      col.add(planar(spec.d, p.b, p.a, rest), -1.0);
      col.add(planar(spec.d, -p.a, -p.b, rest), 1.0);
      col.add(planar(spec.d, -p.a, p.b, rest), 1.0);
      col.add(planar(spec.d, p.b, -p.a, rest), -1.0);
      col.add(planar(spec.d, -p.b, -p.a, rest), -1.0);
    }
  }
  return col.finish();
}

LabeledDataset gen_skewed_xor(const SkewSpec& spec) {
  if (!(spec.alpha > 0.0 && spec.alpha < M_PI)) throw DomainError("gen_skewed_xor: alpha must lie in (0, pi)");
  check_common(spec.per_cluster, spec.delta, spec.Delta0, spec.xi);
  Rng rng(spec.seed);
  const double threshold = spec.xi + 2.0 * spec.Delta0;
  const double ca = std::cos(spec.alpha), sa = std::sin(spec.alpha);
  Collector col{2, {}, {}, {}};
  const Vector none;
  for (int k = 0; k < spec.per_cluster; ++k) {
    const BasePoint p = draw_base(rng, 2, spec.delta, threshold, spec.max_attempts);
    // Local frame (a along the axis, b across it) rotated to 0, α, π, π+α.
    const double a = p.a, b = p.b;
    auto rot = [&](double x, double y) { return planar(2, ca * x - sa * y, sa * x + ca * y, none); };
    col.add(planar(2, a, b, none), 1.0);
    col.add(planar(2, a, -b, none), 1.0);
    const Vector q1 = rot(a, b), q2 = rot(a, -b);
    col.add(q1, -1.0);
    col.add(q2, -1.0);
    col.add(planar(2, -a, -b, none), 1.0);
    col.add(planar(2, -a, b, none), 1.0);
    col.add(-q1, -1.0);
    col.add(-q2, -1.0);
  }
  return col.finish();
}

namespace {

bool contains(const Matrix& pts, const Vector& x, double tol) {
  for (Eigen::Index i = 0; i < pts.rows(); ++i)
    if ((pts.row(i).transpose() - x).cwiseAbs().maxCoeff() <= tol) return true;
  return false;
}

ClauseCheck closure_check(const LabeledDataset& data, const std::vector<std::pair<std::string, Matrix>>& maps,
                          double tol) {
  ClauseCheck c;
  for (const auto& [name, M] : maps) {
    for (Eigen::Index i = 0; i < data.size(); ++i) {
      if (!contains(data.points, M * data.point(i), tol)) {
        c.pass = false;
        c.worst_index = static_cast<long>(i);
        c.detail = "image of point under " + name + " is not in the set";
        return c;
      }
    }
  }
  return c;
}

}  // namespace

XorValidation validate_xor_assumptions(const LabeledDataset& data, double xi, double Delta0, double sym_tol) {
  if (data.dim() < 2) throw DomainError("validate_xor_assumptions: need d >= 2");
  XorValidation r;
  const auto d = data.dim();

  // Clause 1.
  double worst = 0.0;
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const Vector x = data.point(i);
    int best_axis = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (int axis = 0; axis < 2; ++axis) {
      for (double s : {1.0, -1.0}) {
        const double dist = (x - s * basis_vector(d, axis)).norm();
        if (dist < best_dist) {
          best_dist = dist;
          best_axis = axis;
        }
      }
    }
    const double expected = best_axis == 0 ? 1.0 : -1.0;
    if (data.labels(i) != expected && r.clusters.pass) {
      r.clusters.pass = false;
      r.clusters.worst_index = static_cast<long>(i);
      r.clusters.detail = "label disagrees with the nearest cluster";
    }
    if (best_dist > worst) {
      worst = best_dist;
      if (r.clusters.pass && best_dist >= kHalfSqrt2) {
        r.clusters.pass = false;
        r.clusters.worst_index = static_cast<long>(i);
        r.clusters.detail = "point farther than sqrt(2)/2 from every cluster direction";
      }
    }
  }
  r.achieved_delta = worst;
  r.clusters.worst_value = worst;

  // Clauses 2 and 3.
  Matrix R1 = Matrix::Identity(d, d), R2 = Matrix::Identity(d, d), Rr = -Matrix::Identity(d, d);
  R1(0, 0) = -1.0;
  R2(1, 1) = -1.0;
  Rr(0, 0) = 1.0;
  Rr(1, 1) = 1.0;
  Matrix P = Matrix::Identity(d, d);
  P(0, 0) = P(1, 1) = 0.0;
  P(0, 1) = P(1, 0) = 1.0;
  r.reflections = closure_check(data, {{"R1", R1}, {"R2", R2}, {"R_r", Rr}}, sym_tol);
  r.permutation = closure_check(data, {{"P", P}}, sym_tol);

  // Clause 4.
  const double need = xi + 2.0 * Delta0;
  double minabs = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const double v = std::min(std::abs(data.points(i, 0)), std::abs(data.points(i, 1)));
    if (v < minabs) {
      minabs = v;
      if (v < need) r.regularity.worst_index = static_cast<long>(i);
    }
  }
  r.regularity.worst_value = minabs;
  r.regularity.pass = minabs >= need;
  if (!r.regularity.pass) r.regularity.detail = "a first/second coordinate is below xi + 2 Delta0";
  return r;
}

void write_validation_csv(std::ostream& out, const XorValidation& report) {
  CsvWriter csv(out);
  csv.header({"clause", "name", "pass", "worst_index", "worst_value", "detail"});
  auto row = [&](int k, const char* name, const ClauseCheck& c) {
    csv.field(k).field(name).field(c.pass ? 1 : 0).field(c.worst_index).field(c.worst_value).field(c.detail);
    csv.end_row();
  };
  row(1, "clusters", report.clusters);
  row(2, "reflections", report.reflections);
  row(3, "permutation", report.permutation);
  row(4, "regularity", report.regularity);
}

void write_dataset_csv(std::ostream& out, const LabeledDataset& data) {
  CsvWriter csv(out);
  std::vector<std::string> header;
  for (Eigen::Index k = 0; k < data.dim(); ++k) header.push_back("x_" + std::to_string(k));
  header.emplace_back("y");
  csv.header(header);
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    for (Eigen::Index k = 0; k < data.dim(); ++k) csv.field(data.points(i, k));
    csv.field(static_cast<int>(data.labels(i)));
    csv.end_row();
  }
}

void save_dataset(const std::filesystem::path& path, const LabeledDataset& data) {
  auto out = open_output(path);
  write_dataset_csv(out, data);
  if (!out) throw IoError("write failed: " + path.string());
}

LabeledDataset parse_dataset(std::istream& in, const std::string& source_name) {
  const CsvTable t = parse_csv(in, source_name);
  const auto cols = t.header.size();
  if (cols < 2 || t.header.back() != "y") throw IoError(source_name + ": header must be x_0..x_{d-1},y");
  for (std::size_t k = 0; k + 1 < cols; ++k)
    if (t.header[k] != "x_" + std::to_string(k)) throw IoError(source_name + ": unexpected column " + t.header[k]);
  if (t.rows.empty()) throw IoError(source_name + ": no data rows");
  const auto d = static_cast<Eigen::Index>(cols - 1);
  LabeledDataset out;
  out.points.resize(static_cast<Eigen::Index>(t.rows.size()), d);
  out.labels.resize(static_cast<Eigen::Index>(t.rows.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::string where = source_name + ":" + std::to_string(t.line_numbers[r]);
    const auto i = static_cast<Eigen::Index>(r);
    for (Eigen::Index k = 0; k < d; ++k)
      out.points(i, k) = parse_real(t.rows[r][static_cast<std::size_t>(k)], where);
    const double y = parse_real(t.rows[r].back(), where);
    if (y != 1.0 && y != -1.0) throw IoError(where + ": label must be -1 or 1");
    out.labels(i) = y;
    if (!out.points.row(i).allFinite()) throw IoError(where + ": non-finite coordinate");
    if (out.points.row(i).norm() > 1.0 + 1e-12) throw IoError(where + ": point norm exceeds 1");
  }
  return out;
}

LabeledDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return parse_dataset(in, path.string());
}

}  // namespace sblab
