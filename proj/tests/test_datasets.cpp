#include "support.hpp"

#include "sblab/datasets.hpp"

#include <doctest.h>

#include <sstream>

using namespace sblab;

namespace {

// Set equality up to tolerance, by brute force.
bool same_set(const Matrix& a, const Matrix& b, double tol = 1e-9) {
  if (a.rows() != b.rows()) return false;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    bool found = false;
    for (Eigen::Index j = 0; j < b.rows() && !found; ++j) found = (a.row(i) - b.row(j)).norm() <= tol;
    if (!found) return false;
  }
  return true;
}

XorSpec spec(int d, double delta, double Delta0, std::uint64_t seed) {
  XorSpec s;
  s.d = d;
  s.delta = delta;
  s.Delta0 = Delta0;
  s.seed = seed;
  return s;
}

}  // namespace

TEST_CASE("degenerate generator gives the ideal XOR set") {
  XorSpec s = spec(2, 0.0, 0.0, 1);
  s.per_cluster = 1;
  const auto D = gen_xor(s);
  const auto ideal = oracle::ideal_xor();
  REQUIRE(D.size() == 4);
  CHECK(same_set(D.points, ideal.points));
  for (Eigen::Index i = 0; i < D.size(); ++i) CHECK(D.labels(i) == (std::abs(D.points(i, 0)) > 0.5 ? 1.0 : -1.0));
}

TEST_CASE("gen_xor contract") {
  for (int d : {2, 3, 5}) {
    XorSpec s = spec(d, 0.1, 0.01, 11 + d);
    s.xi = 0.02;
    const auto D = gen_xor(s);
    CHECK(D.size() % 8 == 0);
    // the reflection of coordinates 3..d doubles the orbit once d >= 3
    CHECK(D.size() == (d == 2 ? 8 : 16) * s.per_cluster);
    CHECK(D.labels.sum() == 0.0);
    for (int axis : {0, 1}) {
      Matrix R = D.points;
      R.col(axis) = -R.col(axis);
      CHECK(same_set(R, D.points));
    }
    if (d >= 3) {
      Matrix R = D.points;
      R.rightCols(d - 2) = -R.rightCols(d - 2);
      CHECK(same_set(R, D.points));
    }
    Matrix P = D.points;
    P.col(0).swap(P.col(1));
    CHECK(same_set(P, D.points));
    for (Eigen::Index i = 0; i < D.size(); ++i) {
      CHECK(D.points.row(i).norm() <= 1.0 + 1e-15);
      CHECK(std::abs(D.points(i, 0)) >= s.xi + 2 * s.Delta0);
      CHECK(std::abs(D.points(i, 1)) >= s.xi + 2 * s.Delta0);
    }
    const auto rep = validate_xor_assumptions(D, s.xi, s.Delta0);
    CHECK(rep.all_pass());
    CHECK(rep.achieved_delta <= s.delta + 1e-15);
    const auto again = gen_xor(s);
    CHECK(again.points == D.points);
    CHECK(again.labels == D.labels);
  }
  CHECK_THROWS_AS(gen_xor(spec(2, 0.8, 0.01, 1)), DomainError);
  CHECK_THROWS_AS(gen_xor(spec(2, 0.01, 0.2, 1)), GenerationError);
}

TEST_CASE("skewed XOR") {
  SkewSpec s;
  s.alpha = std::numbers::pi / 2;
  s.seed = 4;
  const auto A = gen_skewed_xor(s);
  CHECK(validate_xor_assumptions(A, 0.0, s.Delta0).all_pass());

  s.alpha = std::numbers::pi / 3;
  s.Delta0 = 0.0;
  const auto B = gen_skewed_xor(s);
  CHECK(B.labels.sum() == 0.0);
  const double centers[4] = {0.0, std::numbers::pi / 3, std::numbers::pi, 4 * std::numbers::pi / 3};
  for (Eigen::Index i = 0; i < B.size(); ++i) {
    const Vector x = B.point(i);
    double best = 10.0;
    int arg = -1;
    for (int k = 0; k < 4; ++k) {
      Vector c(2);
      c << std::cos(centers[k]), std::sin(centers[k]);
      if ((x - c).norm() < best) {
        best = (x - c).norm();
        arg = k;
      }
    }
    CHECK(best <= s.delta + 1e-12);
    CHECK(B.labels(i) == (arg % 2 == 0 ? 1.0 : -1.0));
  }
  const auto rep = validate_xor_assumptions(B, 0.0, 0.0);
  CHECK_FALSE(rep.permutation.pass);
  SkewSpec bad = s;
  bad.alpha = 0.0;
  CHECK_THROWS_AS(gen_skewed_xor(bad), DomainError);
}

TEST_CASE("validator catches a flipped label") {
  auto D = gen_xor(spec(2, 0.05, 0.01, 9));
  D.labels(5) = -D.labels(5);
  const auto rep = validate_xor_assumptions(D, 0.0, 0.01);
  CHECK_FALSE(rep.clusters.pass);
  CHECK(rep.clusters.worst_index == 5);
  std::ostringstream out;
  write_validation_csv(out, rep);
  CHECK(out.str().find("clusters") != std::string::npos);
}

TEST_CASE("dataset CSV round trip and rejection of bad files") {
  const auto D = gen_xor(spec(3, 0.1, 0.01, 3));
  std::stringstream io;
  write_dataset_csv(io, D);
  const auto back = parse_dataset(io, "mem");
  CHECK(back.points == D.points);
  CHECK(back.labels == D.labels);

  std::istringstream bad_label("x_0,x_1,y\n0.5,0.1,1\n0.2,0.1,2\n");
  try {
    parse_dataset(bad_label, "f.csv");
    FAIL("expected a rejection");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("f.csv:3") != std::string::npos);
  }
  std::istringstream too_long("x_0,x_1,y\n0.9,0.9,1\n");
  CHECK_THROWS(parse_dataset(too_long, "g.csv"));
  std::istringstream ragged("x_0,x_1,y\n0.1,1\n");
  CHECK_THROWS(parse_dataset(ragged, "h.csv"));
  std::istringstream junk("x_0,x_1,y\n0.1,abc,1\n");
  CHECK_THROWS(parse_dataset(junk, "i.csv"));
}
