#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "platoon/core.hpp"
#include "platoon/dynamics.hpp"

namespace platoon {

// Path neighbours on 0-1-...-N, where 0 is the reference.
inline IndexSet controller_neighbors(Index i, int N) {
  if (i < 0 || i > N) throw std::out_of_range("controller_neighbors: index out of range");
  if (i == 0) return IndexSet{1};
  if (i == N) return IndexSet{N - 1};
  return IndexSet{i - 1, i + 1};
}

struct Gains {
  double g_s = 0.0;
  double g_v = 0.0;
};

// One neighbour term: its state as communicated and the desired offset
// x_i* - x_j*.
struct NeighborTerm {
  std::optional<Vec2> state;
  Vec2 offset = Vec2::Zero();
};

inline double control_input(const Vec2& own, const std::vector<NeighborTerm>& terms, const Gains& g) {
  double u = 0.0;
  for (const auto& t : terms) {
    if (!t.state) throw std::invalid_argument("control_input: missing neighbour state");
    const Vec2 e = *t.state - own + t.offset;
    u += g.g_s * e(0) + g.g_v * e(1);
  }
  return u;
}

// Same law with the hold-last-input policy for lost messages.
inline double control_input_or_hold(const Vec2& own, const std::vector<NeighborTerm>& terms, const Gains& g,
                                    double u_prev) {
  for (const auto& t : terms) {
    if (!t.state) return u_prev;
  }
  return control_input(own, terms, g);
}

// ----------------------------------------------------------- analysis

inline Eigen::MatrixXd grounded_laplacian(int N) {
  if (N < 1) throw std::invalid_argument("grounded_laplacian: N must be positive");
  Eigen::MatrixXd Lg = Eigen::MatrixXd::Zero(N, N);
  for (int k = 0; k < N; ++k) {
    Lg(k, k) = (k == N - 1) ? 1.0 : 2.0;
    if (k + 1 < N) Lg(k, k + 1) = Lg(k + 1, k) = -1.0;
  }
  return Lg;
}

inline Eigen::VectorXd laplacian_spectrum(const Eigen::MatrixXd& Lg) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(Lg, Eigen::EigenvaluesOnly).eigenvalues();
}

struct GainConditionReport {
  bool holds = false;
  double lambda_max = 0.0;
  double margin_ordering = 0.0;   // g_v - T g_s
  double margin_positive = 0.0;   // T g_s
  double margin_stability = 0.0;  // T^2 g_s - 2 T g_v + 4 / lambda_max
};

inline GainConditionReport check_gain_conditions(const Gains& g, double T, const Eigen::MatrixXd& Lg) {
  GainConditionReport r;
  r.lambda_max = laplacian_spectrum(Lg).maxCoeff();
  r.margin_ordering = g.g_v - T * g.g_s;
  r.margin_positive = T * g.g_s;
  r.margin_stability = T * T * g.g_s - 2.0 * T * g.g_v + 4.0 / r.lambda_max;
  r.holds = r.margin_ordering > 0.0 && r.margin_positive > 0.0 && r.margin_stability > 0.0;
  return r;
}

inline Mat2 feedback_matrix(double T, const Gains& g) {
  Mat2 F;
  F << 0.0, 0.0, T * g.g_s, T * g.g_v;
  return F;
}

inline Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    for (Eigen::Index c = 0; c < a.cols(); ++c) out.block(r * b.rows(), c * b.cols(), b.rows(), b.cols()) = a(r, c) * b;
  }
  return out;
}

// P = I (x) A - L_g (x) F
inline Eigen::MatrixXd closed_loop_matrix(int N, double T, const Gains& g) {
  const Plant plant(T);
  const Eigen::MatrixXd Lg = grounded_laplacian(N);
  return kron(Eigen::MatrixXd::Identity(N, N), plant.A()) - kron(Lg, feedback_matrix(T, g));
}

inline Eigen::VectorXcd spectrum(const Eigen::MatrixXd& P) {
  return Eigen::EigenSolver<Eigen::MatrixXd>(P, false).eigenvalues();
}

inline double spectral_radius(const Eigen::MatrixXd& P) { return spectrum(P).cwiseAbs().maxCoeff(); }

// Spectrum through the 2x2 blocks Q_l = [[1, T], [-l T g_s, 1 - l T g_v]],
// one per eigenvalue l of L_g.
inline Eigen::VectorXcd block_spectrum(int N, double T, const Gains& g) {
  const Eigen::VectorXd lam = laplacian_spectrum(grounded_laplacian(N));
  Eigen::VectorXcd out(2 * N);
  for (int l = 0; l < N; ++l) {
    Mat2 Q;
    Q << 1.0, T, -lam(l) * T * g.g_s, 1.0 - lam(l) * T * g.g_v;
    out.segment<2>(2 * l) = Eigen::EigenSolver<Mat2>(Q, false).eigenvalues();
  }
  return out;
}

// Largest distance from any eigenvalue in `a` to its nearest one in `b`, and
// vice versa.
inline double spectrum_distance(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) {
  auto one_way = [](const Eigen::VectorXcd& x, const Eigen::VectorXcd& y) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      double best = INFINITY;
      for (Eigen::Index j = 0; j < y.size(); ++j) best = std::min(best, std::abs(x(i) - y(j)));
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::max(one_way(a, b), one_way(b, a));
}

// M = sum_k (P^k)' P^k by squaring: M <- M + A' M A, A <- A^2.
inline Eigen::MatrixXd lyapunov_series(const Eigen::MatrixXd& P, int max_doublings = 80) {
  if (spectral_radius(P) >= 1.0) throw std::domain_error("lyapunov_series: P is not Schur stable");
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(P.rows(), P.cols());
  Eigen::MatrixXd Ak = P;
  for (int k = 0; k < max_doublings; ++k) {
    const Eigen::MatrixXd next = M + Ak.transpose() * M * Ak;
    const double change = (next - M).norm();
    M = next;
    Ak = Ak * Ak;
    if (change <= 1e-16 * M.norm() || Ak.norm() < 1e-300) break;
  }
  return M;
}

// Solves P' M P - M = -I as (I - P' (x) P') vec(M) = vec(I).
inline Eigen::MatrixXd lyapunov_direct(const Eigen::MatrixXd& P) {
  if (spectral_radius(P) >= 1.0) throw std::domain_error("lyapunov_direct: P is not Schur stable");
  const Eigen::Index n = P.rows();
  const Eigen::MatrixXd Pt = P.transpose();
  const Eigen::MatrixXd K = Eigen::MatrixXd::Identity(n * n, n * n) - kron(Pt, Pt);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  const Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(I.data(), n * n);
  const Eigen::VectorXd v = K.partialPivLu().solve(rhs);
  Eigen::MatrixXd M = Eigen::Map<const Eigen::MatrixXd>(v.data(), n, n);
  return 0.5 * (M + M.transpose());
}

inline double lyapunov_residual(const Eigen::MatrixXd& P, const Eigen::MatrixXd& M) {
  const Eigen::MatrixXd R = P.transpose() * M * P - M + Eigen::MatrixXd::Identity(P.rows(), P.cols());
  return R.norm();
}

inline double spectral_norm(const Eigen::MatrixXd& X) {
  return Eigen::JacobiSVD<Eigen::MatrixXd>(X).singularValues()(0);
}

struct LyapunovBound {
  Eigen::MatrixXd M;
  double kappa = 0.0;
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  double xi_unit = 0.0;  // xi for varsigma = 1

  // Ultimate bound on ||x|| for x(t+1) = P x(t) + G(t), limsup ||G|| <= varsigma.
  double xi(double varsigma) const { return varsigma * xi_unit; }
};

inline LyapunovBound lyapunov_bound(const Eigen::MatrixXd& P) {
  LyapunovBound r;
  r.M = lyapunov_series(P);
  r.kappa = spectral_norm(r.M) + 2.0 * std::pow(spectral_norm(r.M * P), 2);
  const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(r.M, Eigen::EigenvaluesOnly).eigenvalues();
  r.lambda_min = ev.minCoeff();
  r.lambda_max = ev.maxCoeff();
  r.xi_unit = std::sqrt(2.0 * r.kappa * r.lambda_max / r.lambda_min);
  return r;
}

// Asymptotic bound on the performance function from the worst observer
// bound alpha_hat.
struct PerformanceBound {
  double alpha_hat = 0.0;
  double eta = 0.0;
  double xi = 0.0;
  double value = 0.0;
};

inline PerformanceBound performance_bound(double alpha_hat, const Gains& g, int N, double T, double epsilon) {
  PerformanceBound r;
  const double normA = Plant(T).norm();
  const double rn = std::sqrt(static_cast<double>(N));
  r.alpha_hat = alpha_hat;
  r.eta = 2.0 * rn * T * alpha_hat * (g.g_s * (normA + 1.0) + 2.0 * g.g_v) + rn * epsilon;
  r.xi = lyapunov_bound(closed_loop_matrix(N, T, g)).xi_unit;
  r.value = alpha_hat + r.eta * r.xi;
  return r;
}

}  // namespace platoon
