#include "sblab/network.hpp"

#include "sblab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sblab {

double Params::max_neuron_norm() const {
  if (m() == 0) return 0.0;
  return std::max(u.cwiseAbs().maxCoeff(), V.rowwise().norm().maxCoeff());
}

std::vector<int> Params::signs_of(const Vector& u) {
  std::vector<int> s(static_cast<std::size_t>(u.size()));
  for (Eigen::Index j = 0; j < u.size(); ++j) s[static_cast<std::size_t>(j)] = u(j) < 0 ? -1 : 1;
  return s;
}

Params Params::from(Vector u, Matrix V) {
  if (u.size() != V.rows()) throw DomainError("Params: u and V disagree on m");
  Params p;
  p.signs = signs_of(u);
  p.u = std::move(u);
  p.V = std::move(V);
  return p;
}

Params init_params(const InitSpec& spec, const ActivationCfg& cfg) {
  if (!(spec.sigma > 0)) throw DomainError("init_params: sigma must be > 0");
  if (spec.m < 1 || spec.d < 1) throw DomainError("init_params: need m >= 1 and d >= 1");
  if (cfg.dim != spec.d) throw DomainError("init_params: activation dimension differs from d");
  Rng rng(spec.seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::bernoulli_distribution coin(0.5);

  Params p;
  p.u.resize(spec.m);
  p.V.resize(spec.m, spec.d);
  p.signs.resize(static_cast<std::size_t>(spec.m));
  const double box = 1.0 / std::sqrt(static_cast<double>(spec.d));
  for (int j = 0; j < spec.m; ++j) {
    Vector v(spec.d);
    do {
      for (int k = 0; k < spec.d; ++k) v(k) = spec.law == InitLaw::Sphere ? normal(rng) : box * unif(rng);
    } while (v.norm() == 0.0);
    if (spec.law == InitLaw::Sphere) v /= v.norm();
    const int s = coin(rng) ? 1 : -1;
    p.V.row(j) = spec.sigma * v.transpose();
    p.u(j) = s * spec.sigma * v.norm();
    p.signs[static_cast<std::size_t>(j)] = s;
  }
  return p;
}

double neg_loss_derivative(double z) {
  if (z >= 0) {
    const double e = std::exp(-z);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(z));
}

double logistic_loss(double z) {
  if (z >= 0) return std::log1p(std::exp(-z));
  return -z + std::log1p(std::exp(z));
}

double forward(const Params& theta, const ActivationCfg& cfg, const Vector& x) {
  if (x.size() != theta.d()) throw DomainError("forward: dimension mismatch");
  double f = 0.0;
  for (Eigen::Index j = 0; j < theta.m(); ++j) f += theta.u(j) * phi(cfg, theta.v(j), x);
  return f;
}

namespace {

void check_shapes(const Params& theta, const ActivationCfg& cfg, const LabeledDataset& data) {
  if (theta.d() != data.dim() || cfg.dim != data.dim())
    throw DomainError("network: parameter, activation and data dimensions disagree");
}

// Per-entry edge integrals of the smoothed activation, m x n each.
struct SmoothedTables {
  Matrix pre;  // v_jᵀ x_i
  Matrix i0;
  Matrix i1;
  Vector vnorm;
  double kappa = 0.0;
};

SmoothedTables smoothed_tables(const Params& theta, const ActivationCfg& cfg, const LabeledDataset& data,
                               bool require_nonzero) {
  SmoothedTables t;
  t.pre.noalias() = theta.V * data.points.transpose();
  t.vnorm = theta.V.rowwise().norm();
  t.kappa = kappa_ratio(cfg.dim);
  const int k = (cfg.dim - 1) / 2;
  const double full = detail::half_edge_integral(1.0, k);
  const auto m = theta.m(), n = data.size();
  t.i0.resize(m, n);
  t.i1.resize(m, n);
  for (Eigen::Index j = 0; j < m; ++j) {
    const double scale = cfg.xi * t.vnorm(j);
    if (scale == 0.0) {
      if (require_nonzero)
        throw DomainError("smoothed activation: hidden vector of neuron " + std::to_string(j) + " is zero");
      t.i0.row(j).setZero();
      t.i1.row(j).setZero();
      continue;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      const double c = std::clamp(t.pre(j, i) / scale, -1.0, 1.0);
      if (c >= 1.0) {
        t.i0(j, i) = 2.0 * full;
        t.i1(j, i) = 0.0;
      } else if (c <= -1.0) {
        t.i0(j, i) = 0.0;
        t.i1(j, i) = 0.0;
      } else {
        t.i0(j, i) = full + detail::half_edge_integral(c, k);
        t.i1(j, i) = detail::int_pow(1.0 - c * c, k + 1) / (cfg.dim + 1);
      }
    }
  }
  return t;
}

}  // namespace

Matrix activation_matrix(const Params& theta, const ActivationCfg& cfg, const LabeledDataset& data) {
  check_shapes(theta, cfg, data);
  if (cfg.kind == ActivationKind::ExactRelu) {
    Matrix pre = theta.V * data.points.transpose();
    return pre.cwiseMax(0.0);
  }
  const auto t = smoothed_tables(theta, cfg, data, false);
  Matrix out = t.pre.cwiseProduct(t.i0);
  out += (cfg.xi * t.vnorm).asDiagonal() * t.i1;
  return t.kappa * out;
}

Vector outputs(const Params& theta, const ActivationCfg& cfg, const LabeledDataset& data) {
  if (cfg.kind == ActivationKind::ExactRelu) {
    check_shapes(theta, cfg, data);
    // Fused loop: no m x n temporaries, neurons summed in index order.
    const Matrix xt = data.points.transpose();
    Vector f = Vector::Zero(data.size());
    for (Eigen::Index j = 0; j < theta.m(); ++j) {
      const auto vj = theta.V.row(j);
      for (Eigen::Index i = 0; i < data.size(); ++i) {
        const double p = vj.dot(xt.col(i).transpose());
        if (p > 0.0) f(i) += theta.u(j) * p;
      }
    }
    return f;
  }
  return activation_matrix(theta, cfg, data).transpose() * theta.u;
}

Vector margins(const Params& theta, const ActivationCfg& cfg, const LabeledDataset& data) {
  return outputs(theta, cfg, data).cwiseProduct(data.labels);
}

double loss(const Params& theta, const ActivationCfg& cfg, const LabeledDataset& data) {
  const Vector z = margins(theta, cfg, data);
  double s = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) s += logistic_loss(z(i));
  return s / static_cast<double>(z.size());
}

Params weighted_field(const Params& theta, const ActivationCfg& cfg, const LabeledDataset& data,
                      const Vector& weights) {
  check_shapes(theta, cfg, data);
  Params out;
  out.signs = theta.signs;
  if (cfg.kind == ActivationKind::ExactRelu) {
    const Matrix xt = data.points.transpose();
    out.u.resize(theta.m());
    out.V.resize(theta.m(), theta.d());
    Vector acc(theta.d());
    for (Eigen::Index j = 0; j < theta.m(); ++j) {
      const auto vj = theta.V.row(j);
      double du = 0.0;
      acc.setZero();
      for (Eigen::Index i = 0; i < data.size(); ++i) {
        const double p = vj.dot(xt.col(i).transpose());
        // Ties vᵀx = 0 count as active.
        if (p >= 0.0) {
          du += weights(i) * p;
          acc += weights(i) * xt.col(i);
        }
      }
      out.u(j) = du;
      out.V.row(j) = theta.u(j) * acc.transpose();
    }
    return out;
  }
  const auto t = smoothed_tables(theta, cfg, data, true);
  const Matrix a0 = t.i0 * weights.asDiagonal();
  const Vector s1 = t.i1 * weights;
  out.u = t.kappa * (t.pre.cwiseProduct(a0) * Vector::Ones(data.size()) +
                     cfg.xi * t.vnorm.cwiseProduct(s1));
  Matrix dv = a0 * data.points;
  dv += (cfg.xi * s1.cwiseQuotient(t.vnorm)).asDiagonal() * theta.V;
  out.V = theta.u.asDiagonal() * (t.kappa * dv);
  return out;
}

Params flow_rhs(const Params& theta, const ActivationCfg& cfg, const LabeledDataset& data) {
  const Vector z = margins(theta, cfg, data);
  const double inv_n = 1.0 / static_cast<double>(data.size());
  Vector w(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) w(i) = neg_loss_derivative(z(i)) * data.labels(i) * inv_n;
  return weighted_field(theta, cfg, data, w);
}

Params linearized_rhs(const Params& theta, const ActivationCfg& cfg, const LabeledDataset& data) {
  const Vector w = (kNegLossSlopeAtZero / static_cast<double>(data.size())) * data.labels;
  return weighted_field(theta, cfg, data, w);
}

}  // namespace sblab
