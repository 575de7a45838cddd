#include "support.hpp"

#include "sblab/datasets.hpp"
#include "sblab/gfield.hpp"

#include <doctest.h>

using namespace sblab;

namespace {

Vector planar(double a) {
  Vector v(2);
  v << std::cos(a), std::sin(a);
  return v;
}

// G written out from its definition, point by point.
double naive_g(const LabeledDataset& D, const ActivationCfg& cfg, const Vector& v) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < D.size(); ++i) s += phi(cfg, v, Vector(D.point(i))) * D.labels(i);
  return s / (2.0 * D.size());
}

double grid_lambda_2d(const LabeledDataset& D, const ActivationCfg& cfg, int n, double* argmax = nullptr) {
  double best = -1.0;
  for (int k = 0; k < n; ++k) {
    const double a = 2.0 * std::numbers::pi * k / n;
    const double g = std::abs(naive_g(D, cfg, planar(a)));
    if (g > best) {
      best = g;
      if (argmax) *argmax = a;
    }
  }
  return best;
}

double fibonacci_lambda(const LabeledDataset& D, const ActivationCfg& cfg, int n) {
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  double best = 0.0;
  for (int k = 0; k < n; ++k) {
    const double z = 1.0 - 2.0 * (k + 0.5) / n;
    const double r = std::sqrt(1.0 - z * z);
    Vector v(3);
    v << r * std::cos(golden * k), r * std::sin(golden * k), z;
    best = std::max(best, std::abs(g_value(D, cfg, v)));
  }
  return best;
}

XorSpec xor_spec(int d, double delta, double xi, std::uint64_t seed) {
  XorSpec s;
  s.d = d;
  s.delta = delta;
  s.xi = xi;
  s.seed = seed;
  return s;
}

}  // namespace

TEST_CASE("G on the ideal XOR data") {
  const auto D = oracle::ideal_xor();
  const auto cfg = ActivationCfg::relu(2);
  CHECK(g_value(D, cfg, basis_vector(2, 0)) == doctest::Approx(0.125).epsilon(1e-15));
  for (double a : {0.1, 0.4, 0.785, 1.2, 1.5}) {
    CHECK(g_value(D, cfg, planar(a)) == doctest::Approx((std::cos(a) - std::sin(a)) / 8.0).epsilon(1e-14));
    CHECK(g_value(D, cfg, Vector(3.0 * planar(a))) == doctest::Approx(3.0 * g_value(D, cfg, planar(a))).epsilon(1e-14));
  }
  const Vector g = g_grad(D, cfg, basis_vector(2, 0));
  CHECK((g - basis_vector(2, 0) / 8.0).norm() < 1e-16);

  LabeledDataset one;
  one.points = basis_vector(2, 0).transpose();
  one.labels = Vector::Ones(1);
  CHECK(g_value(one, cfg, Vector(-basis_vector(2, 0))) == 0.0);
}

TEST_CASE("g_grad: Euler identity and finite differences") {
  const auto D = gen_xor(xor_spec(3, 0.3, 0.2, 1));
  const auto cfg = ActivationCfg::smoothed(0.2, 3);
  auto rng = make_stream(1, "ggrad");
  for (int t = 0; t < 100; ++t) {
    const Vector v = oracle::sphere_point(rng, 3) * (0.2 + t % 4);
    const Vector g = g_grad(D, cfg, v);
    CHECK(std::abs(v.dot(g) - g_value(D, cfg, v)) < 1e-10);
    CHECK(g_value(D, cfg, v) == doctest::Approx(naive_g(D, cfg, v)).epsilon(1e-12));
    const Vector fd = oracle::fd_gradient([&](const Vector& w) { return naive_g(D, cfg, w); }, v, 1e-6 * v.norm());
    CHECK(oracle::rel_err(fd, g) < 1e-5);
  }
  CHECK_THROWS_AS(g_grad(D, cfg, Vector::Zero(3)), DomainError);
}

TEST_CASE("sphere_ascend on the ideal XOR data") {
  const auto D = oracle::ideal_xor();
  const auto cfg = ActivationCfg::relu(2);
  double grid_arg = 0.0;
  grid_lambda_2d(D, cfg, 100000, &grid_arg);
  const auto up = sphere_ascend(D, cfg, planar(0.7), +1);
  // G has four maximizers of |G|; the +1 ascent from 0.7 rad must land on e1, the grid maximizer of G in that quadrant
  CHECK(angle_between(up.direction, basis_vector(2, 0)) < 1e-6);
  CHECK(std::min(std::abs(std::remainder(grid_arg, std::numbers::pi)), 1.0) < 1e-4);

  const auto stay = sphere_ascend(D, cfg, basis_vector(2, 1), +1);
  CHECK(angle_between(stay.direction, basis_vector(2, 1)) < 1e-12);

  const auto down = sphere_ascend(D, cfg, planar(-2.2), -1);
  const double to_e2 = std::min(angle_between(down.direction, basis_vector(2, 1)),
                                angle_between(down.direction, Vector(-basis_vector(2, 1))));
  CHECK(to_e2 < 1e-6);
  CHECK(down.value == doctest::Approx(-0.125).epsilon(1e-9));

  Vector nonunit = planar(0.3) * 2.0;
  CHECK_THROWS_AS(sphere_ascend(D, cfg, nonunit, 1), DomainError);
}

TEST_CASE("sphere_ascend is monotone and stays on the sphere") {
  const auto D = gen_xor(xor_spec(3, 0.1, 0.05, 2));
  const auto cfg = ActivationCfg::smoothed(0.05, 3);
  auto rng = make_stream(2, "monotone");
  for (int t = 0; t < 5; ++t) {
    const Vector start = oracle::sphere_point(rng, 3);
    const int s = t % 2 ? -1 : 1;
    double prev = s * g_value(D, cfg, start);
    for (int k = 1; k <= 40; ++k) {
      AscentOptions o;
      o.max_steps = k;
      const auto r = sphere_ascend(D, cfg, start, s, o);
      CHECK(std::abs(r.direction.norm() - 1.0) < 1e-12);
      CHECK(s * r.value >= prev - 1e-15);
      prev = s * r.value;
    }
  }
}

TEST_CASE("find_extrema: four axis extrema on XOR data") {
  for (int d : {2, 3}) {
    const double xi = d == 3 ? 0.01 : 0.0;
    const auto D = gen_xor(xor_spec(d, 0.05, xi, 7));
    const auto cfg = d == 3 ? ActivationCfg::smoothed(0.01, 3) : ActivationCfg::relu(2);
    const auto ls = find_extrema(D, cfg);
    REQUIRE(ls.extrema.size() == 4);
    std::vector<Vector> axes = {basis_vector(d, 0), -basis_vector(d, 0), basis_vector(d, 1), -basis_vector(d, 1)};
    for (const auto& a : axes) {
      double best = 10.0;
      for (const auto& e : ls.extrema) best = std::min(best, angle_between(e.direction, a));
      CHECK(best < 0.02);
    }
    for (const auto& e : ls.extrema) {
      CHECK(std::abs(e.direction.norm() - 1.0) < 1e-10);
      CHECK(std::abs(e.value) <= ls.lambda + 1e-10);
      CHECK(e.sign == (e.value > 0 ? 1 : -1));
      // the extremum set is closed under the reflections of the data
      for (int axis : {0, 1}) {
        Vector r = e.direction;
        r(axis) = -r(axis);
        double best = 10.0;
        for (const auto& f : ls.extrema) best = std::min(best, angle_between(f.direction, r));
        CHECK(best < 1e-6);
      }
    }
    CHECK(ls.lambda >= 0.125 * (1 - 3 * 0.05 - 2 * xi));
    if (d == 2)
      CHECK(std::abs(ls.lambda - grid_lambda_2d(D, cfg, 100000)) < 1e-4);
    else
      CHECK(std::abs(ls.lambda - fibonacci_lambda(D, cfg, 1000000)) < 1e-4);
    // descending |G|, deterministic
    for (std::size_t k = 1; k < ls.extrema.size(); ++k)
      CHECK(std::abs(ls.extrema[k - 1].value) >= std::abs(ls.extrema[k].value) - 1e-6 * ls.lambda);
    const auto again = find_extrema(D, cfg);
    CHECK(again.extrema.size() == ls.extrema.size());
    for (std::size_t k = 0; k < ls.extrema.size(); ++k) CHECK(again.extrema[k].direction == ls.extrema[k].direction);
  }
}

TEST_CASE("find_extrema on skewed data and on one point") {
  SkewSpec s;
  s.alpha = std::numbers::pi / 3;
  s.seed = 3;
  s.Delta0 = 0.0;
  const auto D = gen_skewed_xor(s);
  const auto ls = find_extrema(D, ActivationCfg::relu(2));
  REQUIRE(ls.extrema.size() == 4);
  for (double target : {-std::numbers::pi / 6, std::numbers::pi / 2, 5 * std::numbers::pi / 6, -std::numbers::pi / 2}) {
    double best = 10.0;
    for (const auto& e : ls.extrema) best = std::min(best, angle_between(e.direction, planar(target)));
    CHECK(best < 0.05);
  }

  LabeledDataset one;
  one.points = basis_vector(2, 0).transpose();
  one.labels = Vector::Ones(1);
  const auto l1 = find_extrema(one, ActivationCfg::relu(2));
  REQUIRE(l1.extrema.size() == 1);
  CHECK(angle_between(l1.extrema[0].direction, basis_vector(2, 0)) < 1e-9);
  CHECK(l1.lambda == doctest::Approx(0.5));
}

TEST_CASE("is_delta_regular") {
  LabeledDataset D;
  D.points = Matrix(2, 2);
  D.points << 0.3, 0.1, -0.5, 0.2;
  D.labels = Vector::Ones(2);
  CHECK(is_delta_regular(D, basis_vector(2, 0), 0.2));
  CHECK_FALSE(is_delta_regular(D, basis_vector(2, 0), 0.31));
  XorSpec s = xor_spec(3, 0.2, 0.01, 5);
  s.Delta0 = 0.02;
  const auto X = gen_xor(s);
  for (int k : {0, 1}) CHECK(is_delta_regular(X, basis_vector(3, k), 0.01 + 2 * 0.02));
}
