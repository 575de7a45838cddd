#pragma once

// Independent oracles for the unit tests: nothing here calls into the code
// under test except for the data types.

#include "sblab/linalg.hpp"
#include "sblab/rng.hpp"

#include <cmath>
#include <functional>
#include <random>

namespace oracle {

using sblab::Matrix;
using sblab::Vector;

// Adaptive Simpson on [a, b].
inline double simpson(const std::function<double(double)>& f, double a, double b, double tol = 1e-13, int depth = 40) {
  std::function<double(double, double, double, double, double, double, int)> rec =
      [&](double lo, double hi, double flo, double fmid, double fhi, double whole, int dep) {
        const double mid = 0.5 * (lo + hi);
        const double lm = 0.5 * (lo + mid), rm = 0.5 * (mid + hi);
        const double flm = f(lm), frm = f(rm);
        const double left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid);
        const double right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi);
        if (dep <= 0 || std::abs(left + right - whole) <= 15.0 * tol)
          return left + right + (left + right - whole) / 15.0;
        return rec(lo, mid, flo, flm, fmid, left, dep - 1) + rec(mid, hi, fmid, frm, fhi, right, dep - 1);
      };
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  return rec(a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), depth);
}

// Uniform point in the unit d-ball.
template <class G>
Vector ball_point(G& g, int d) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vector z(d);
  for (int k = 0; k < d; ++k) z(k) = n(g);
  return z.normalized() * std::pow(u(g), 1.0 / d);
}

template <class G>
Vector sphere_point(G& g, int d) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vector z(d);
  for (int k = 0; k < d; ++k) z(k) = n(g);
  return z.normalized();
}

// Central-difference gradient of a scalar function of a vector.
inline Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x, double h) {
  Vector g(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    Vector a = x, b = x;
    a(k) += h;
    b(k) -= h;
    g(k) = (f(a) - f(b)) / (2.0 * h);
  }
  return g;
}

// {±e1 : +1, ±e2 : −1} in R^d.
inline sblab::LabeledDataset ideal_xor(int d = 2) {
  sblab::LabeledDataset D;
  D.points = Matrix::Zero(4, d);
  D.points(0, 0) = 1;
  D.points(1, 0) = -1;
  D.points(2, 1) = 1;
  D.points(3, 1) = -1;
  D.labels = Vector(4);
  D.labels << 1, 1, -1, -1;
  return D;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(1e-300, std::max(std::abs(a), std::abs(b))); }

inline double rel_err(const Vector& a, const Vector& b) {
  return (a - b).norm() / std::max(1e-300, std::max(a.norm(), b.norm()));
}

}  // namespace oracle
