#pragma once

// Continuous-time infinite-horizon LQR: numerical linearization, a
// stabilizability check, and a CARE solver (Hamiltonian eigenvectors refined
// by Newton-Kleinman).

#include <complex>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/QR>

#include "landair/core.hpp"

namespace landair {

/// Jacobians of f(x, u) by central differences with a relative step.
struct Jacobians {
  MatX A;
  MatX B;
  double residual = 0.0;  // |f(x0, u0)|_inf, nonzero away from equilibrium
};

inline Jacobians finite_difference_jacobians(const std::function<VecX(const VecX&, const VecX&)>& f,
                                             const VecX& x0, const VecX& u0, double rel_step = 1e-6) {
  const VecX f0 = f(x0, u0);
  Jacobians J;
  J.A.resize(f0.size(), x0.size());
  J.B.resize(f0.size(), u0.size());
  J.residual = f0.lpNorm<Eigen::Infinity>();
  for (Eigen::Index i = 0; i < x0.size(); ++i) {
    const double h = rel_step * std::max(1.0, std::abs(x0[i]));
    VecX xp = x0, xm = x0;
    xp[i] += h;
    xm[i] -= h;
    J.A.col(i) = (f(xp, u0) - f(xm, u0)) / (2.0 * h);
  }
  for (Eigen::Index i = 0; i < u0.size(); ++i) {
    const double h = rel_step * std::max(1.0, std::abs(u0[i]));
    VecX up = u0, um = u0;
    up[i] += h;
    um[i] -= h;
    J.B.col(i) = (f(x0, up) - f(x0, um)) / (2.0 * h);
  }
  return J;
}

/// Eigenvalues of A with Re >= 0 that are not controllable (PBH test).
inline std::vector<std::complex<double>> uncontrollable_unstable_modes(const MatX& A, const MatX& B,
                                                                       double tol = 1e-9) {
  const Eigen::Index n = A.rows();
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(A.cast<std::complex<double>>(), false);
  std::vector<std::complex<double>> bad;
  const double scale = 1.0 + A.lpNorm<Eigen::Infinity>() + B.lpNorm<Eigen::Infinity>();
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto lam = es.eigenvalues()[k];
    if (lam.real() < -tol * scale) continue;
    Eigen::MatrixXcd M(n, n + B.cols());
    M.leftCols(n) = lam * Eigen::MatrixXcd::Identity(n, n) - A.cast<std::complex<double>>();
    M.rightCols(B.cols()) = B.cast<std::complex<double>>();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(M);
    if (svd.singularValues()[n - 1] < 1e-8 * scale) bad.push_back(lam);
  }
  return bad;
}

inline void require_stabilizable(const MatX& A, const MatX& B) {
  const auto bad = uncontrollable_unstable_modes(A, B);
  if (bad.empty()) return;
  std::ostringstream os;
  os << "(A, B) not stabilizable; uncontrollable modes:";
  for (const auto& l : bad) os << ' ' << l.real() << (l.imag() >= 0 ? "+" : "") << l.imag() << 'i';
  throw NotStabilizable(os.str());
}

/// Solves A' X + X A + Q = 0 via the Kronecker form (fine for n <= ~30).
inline MatX solve_lyapunov(const MatX& A, const MatX& Q) {
  const Eigen::Index n = A.rows();
  const MatX I = MatX::Identity(n, n);
  MatX K = MatX::Zero(n * n, n * n);
  // vec(A' X + X A) = (I kron A' + A' kron I) vec(X)
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      K.block(i * n, j * n, n, n) += I(i, j) * A.transpose();
      K.block(i * n, j * n, n, n) += A(j, i) * I;
    }
  }
  const VecX q = -Eigen::Map<const VecX>(Q.data(), n * n);
  const VecX x = K.partialPivLu().solve(q);
  MatX X = Eigen::Map<const MatX>(x.data(), n, n);
  return 0.5 * (X + X.transpose());
}

inline MatX care_residual(const MatX& A, const MatX& B, const MatX& Q, const MatX& R, const MatX& P) {
  return A.transpose() * P + P * A - P * B * R.ldlt().solve(B.transpose() * P) + Q;
}

struct LqrSolution {
  MatX K;
  MatX P;
  double residual = 0.0;
  Eigen::VectorXcd closed_loop_poles;
  double max_real_pole() const { return closed_loop_poles.real().maxCoeff(); }
};

/// Stabilizing solution of A'P + PA - P B R^-1 B' P + Q = 0 and K = R^-1 B' P.
inline LqrSolution solve_care(const MatX& A, const MatX& B, const MatX& Q, const MatX& R,
                              double tolerance = 1e-10) {
  const Eigen::Index n = A.rows();
  if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n || R.rows() != B.cols() ||
      R.cols() != B.cols()) {
    throw InvalidArgument("solve_care: inconsistent dimensions");
  }
  if (R.ldlt().info() != Eigen::Success || (R.ldlt().vectorD().array() <= 0.0).any()) {
    throw InvalidArgument("solve_care: R must be positive definite");
  }
  require_stabilizable(A, B);

  const MatX S = B * R.ldlt().solve(B.transpose());
  MatX H(2 * n, 2 * n);
  H << A, -S, -Q, -A.transpose();
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(H.cast<std::complex<double>>());
  Eigen::MatrixXcd U(2 * n, n);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < 2 * n && k < n; ++i) {
    if (es.eigenvalues()[i].real() < 0.0) U.col(k++) = es.eigenvectors().col(i);
  }
  MatX P;
  if (k == n) {
    const Eigen::MatrixXcd U11 = U.topRows(n), U21 = U.bottomRows(n);
    P = (U21 * U11.inverse()).real();
    P = 0.5 * (P + P.transpose());
  }
  auto stabilizes = [&](const MatX& Pc) {
    if (!Pc.allFinite()) return false;
    const MatX Acl = A - S * Pc;
    return Eigen::EigenSolver<MatX>(Acl, false).eigenvalues().real().maxCoeff() < 0.0;
  };
  if (k != n || !stabilizes(P)) {
    // Start Newton-Kleinman from a stabilizing gain obtained by shifting A.
    const double shift = 1.0 + A.lpNorm<Eigen::Infinity>();
    const MatX As = A + shift * MatX::Identity(n, n);
    // As Z + Z As' = 2 S; then K0 = R^-1 B' Z^-1 stabilizes A (Bass' algorithm).
    const MatX Z = solve_lyapunov(As.transpose(), -2.0 * S);
    const MatX K0 = R.ldlt().solve(B.transpose() * Z.inverse());
    const MatX Acl = A - B * K0;
    P = solve_lyapunov(Acl, Q + K0.transpose() * R * K0);
  }
  // Newton-Kleinman refinement.
  for (int it = 0; it < 50; ++it) {
    const MatX res = care_residual(A, B, Q, R, P);
    if (res.lpNorm<Eigen::Infinity>() <= tolerance * (1.0 + P.lpNorm<Eigen::Infinity>())) break;
    const MatX K = R.ldlt().solve(B.transpose() * P);
    const MatX Acl = A - B * K;
    const MatX Pn = solve_lyapunov(Acl, Q + K.transpose() * R * K);
    if (!Pn.allFinite()) break;
    if ((Pn - P).lpNorm<Eigen::Infinity>() <= 1e-15 * (1.0 + P.lpNorm<Eigen::Infinity>())) {
      P = Pn;
      break;
    }
    P = Pn;
  }
  LqrSolution sol;
  sol.P = P;
  sol.K = R.ldlt().solve(B.transpose() * P);
  sol.residual = care_residual(A, B, Q, R, P).norm();
  sol.closed_loop_poles = Eigen::EigenSolver<MatX>(A - B * sol.K, false).eigenvalues();
  return sol;
}

}  // namespace landair
