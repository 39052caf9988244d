#pragma once

// Dense convex QP by a primal-dual interior point method (Mehrotra
// predictor-corrector):
//
//   minimize   0.5 x' H x + c' x
//   subject to E x = d,  G x <= h
//
// Sized for the planner's problems (a few hundred variables).

#include <Eigen/LU>

#include "landair/core.hpp"

namespace landair {

struct QpProblem {
  MatX H;
  VecX c;
  MatX E;
  VecX d;
  MatX G;
  VecX h;
};

enum class QpStatus { Solved, MaxIterations, NumericalFailure };

struct QpResult {
  QpStatus status = QpStatus::NumericalFailure;
  VecX x;
  VecX y;  // equality multipliers
  VecX z;  // inequality multipliers
  int iterations = 0;
  double primal_residual = 0.0;
  double gap = 0.0;

  bool ok() const { return status == QpStatus::Solved; }
};

struct QpOptions {
  int max_iterations = 80;
  double tolerance = 1e-9;
};

inline QpResult solve_qp(const QpProblem& qp, const QpOptions& opt = {}) {
  const Eigen::Index n = qp.H.rows();
  const Eigen::Index me = qp.E.rows();
  const Eigen::Index mi = qp.G.rows();

  VecX x = VecX::Zero(n);
  VecX y = VecX::Zero(me);
  VecX s = (qp.h - qp.G * x).cwiseMax(1.0);
  VecX z = VecX::Ones(mi);

  const double scale = 1.0 + std::max({qp.c.lpNorm<Eigen::Infinity>(),
                                       qp.d.size() ? qp.d.lpNorm<Eigen::Infinity>() : 0.0,
                                       qp.h.size() ? qp.h.lpNorm<Eigen::Infinity>() : 0.0});

  auto max_step = [](const VecX& v, const VecX& dv) {
    double a = 1.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (dv[i] < 0.0) a = std::min(a, -v[i] / dv[i]);
    }
    return a;
  };

  QpResult res;
  const Eigen::Index nk = n + me;
  MatX K(nk, nk);
  for (int it = 0; it < opt.max_iterations; ++it) {
    res.iterations = it + 1;
    const VecX r_d = qp.H * x + qp.c + qp.E.transpose() * y + qp.G.transpose() * z;
    const VecX r_e = qp.E * x - qp.d;
    const VecX r_i = qp.G * x + s - qp.h;
    const double mu = mi > 0 ? s.dot(z) / static_cast<double>(mi) : 0.0;

    const double res_norm = std::max({r_d.lpNorm<Eigen::Infinity>(),
                                      me ? r_e.lpNorm<Eigen::Infinity>() : 0.0,
                                      mi ? r_i.lpNorm<Eigen::Infinity>() : 0.0});
    res.primal_residual = res_norm;
    res.gap = mu;
    if (res_norm < opt.tolerance * scale && mu < opt.tolerance) {
      res.status = QpStatus::Solved;
      break;
    }

    const VecX w = z.cwiseQuotient(s);
    K.setZero();
    K.topLeftCorner(n, n) = qp.H + qp.G.transpose() * w.asDiagonal() * qp.G;
    K.topRightCorner(n, me) = qp.E.transpose();
    K.bottomLeftCorner(me, n) = qp.E;
    Eigen::PartialPivLU<MatX> lu(K);

    auto newton = [&](const VecX& r_c, VecX& dx, VecX& dy, VecX& ds, VecX& dz) {
      // dz = S^-1 (-r_c + Z r_i + Z G dx)
      const VecX t = (-r_c + z.cwiseProduct(r_i)).cwiseQuotient(s);
      VecX rhs(nk);
      rhs.head(n) = -r_d - qp.G.transpose() * t;
      rhs.tail(me) = -r_e;
      const VecX sol = lu.solve(rhs);
      dx = sol.head(n);
      dy = sol.tail(me);
      ds = -r_i - qp.G * dx;
      dz = t + w.cwiseProduct(qp.G * dx);
    };

    VecX dx, dy, ds, dz;
    // Predictor (affine scaling).
    newton(s.cwiseProduct(z), dx, dy, ds, dz);
    const double a_aff = std::min(max_step(s, ds), max_step(z, dz));
    const double mu_aff =
        mi > 0 ? (s + a_aff * ds).dot(z + a_aff * dz) / static_cast<double>(mi) : 0.0;
    const double sigma = mu > 0.0 ? std::pow(mu_aff / mu, 3) : 0.0;
    // Corrector.
    const VecX r_c = s.cwiseProduct(z) + ds.cwiseProduct(dz) - VecX::Constant(mi, sigma * mu);
    newton(r_c, dx, dy, ds, dz);
    if (!dx.allFinite() || !dz.allFinite()) {
      res.status = QpStatus::NumericalFailure;
      break;
    }
    const double a = 0.99 * std::min(max_step(s, ds), max_step(z, dz));
    x += a * dx;
    y += a * dy;
    s += a * ds;
    z += a * dz;
    res.status = QpStatus::MaxIterations;
  }
  res.x = x;
  res.y = y;
  res.z = z;
  return res;
}

}  // namespace landair
