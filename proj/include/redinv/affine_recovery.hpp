#pragma once

#include <Eigen/Sparse>

#include "redinv/sensing.hpp"

namespace redinv {

// min-max affine recovery data. Unknown x = vec(R, b) with R (N x m) stored
// row-major followed by b (N), so Q_j x = R w^j + b for snapshot j; the
// per-snapshot losses f_j(x) = ||u^j - Q_j x||^2 enter through their
// epigraphs in a primal-dual splitting.
struct EpigraphProblem {
  Eigen::Index m = 0;  // measurement coordinates
  Eigen::Index n = 0;  // complement coordinates (after deflating Z_N against W)
  Matrix w_samples;    // m x J
  Matrix u_samples;    // n x J
  std::vector<Eigen::SparseMatrix<double>> q;  // J matrices, N x N(m+1)
  double lnorm2_bound = 0.0;  // >= ||L||^2 for L(x,t) = ((Q_j x, t))_j
  double eps_n = 0.0;         // worst training distance to the original Z_N

  // Basis metadata: columns 0..m-1 span W, the rest span the deflated Z_N.
  Matrix w_basis;
  Matrix z_basis;
  std::shared_ptr<const InnerProductSpace> space;

  Eigen::Index samples() const { return w_samples.cols(); }
  Eigen::Index unknowns() const { return n * (m + 1); }
};

EpigraphProblem build_problem(const InnerProductSpace& X, const Matrix& snapshots,
                              const ObservationSetup& setup, const Subspace& zn);

// Euclidean projection of (v, t) onto {(y, s): ||u - y||^2 <= s}. The radial
// reduction leads to the unique nonnegative root of 2r^3 + (1-2t)r - rho = 0,
// solved by safeguarded Newton (tol 1e-12) with bisection fallback.
void project_epigraph(const Vector& u, Vector& v, double& t);

struct AffineRecoveryMap {
  Vector cbar;   // N
  Matrix bbar;   // N x m
  Matrix w_basis;
  Matrix z_basis;
  std::shared_ptr<const InnerProductSpace> space;

  Eigen::Index m() const { return bbar.cols(); }
  Eigen::Index n() const { return bbar.rows(); }
};

// Full-space estimate from w in W coordinates.
CoefficientVector apply(const AffineRecoveryMap& map, const Vector& w_coords);
CoefficientVector apply_state(const AffineRecoveryMap& map, const ObservationSetup& setup,
                              const CoefficientVector& u);

struct SolveHistoryEntry {
  Eigen::Index iteration;
  double objective;  // max_j ||u^j - (R w^j + b)||^2
};

struct PrimalDualResult {
  AffineRecoveryMap map;        // from the best iterate
  double best_objective = 0.0;
  Eigen::Index iterations = 0;  // actually performed
  bool early_exit = false;
  std::vector<SolveHistoryEntry> history;  // every 10 iterations
};

// Chambolle-Pock iteration on the epigraph formulation; overrelaxation
// theta = 1, steps default to 0.99/sqrt(lnorm2_bound) each. Requires
// gamma_g * gamma_f * lnorm2_bound < 1. Stops early when the best objective
// stops improving by more than 1e-10 over 100 iterations.
PrimalDualResult primal_dual_solve(const EpigraphProblem& prob, Eigen::Index iterations,
                                   double gamma_g = 0.0, double gamma_f = 0.0,
                                   double theta = 1.0);

struct SubgradientResult {
  AffineRecoveryMap map;
  double best_objective = 0.0;
  std::vector<SolveHistoryEntry> history;  // every 10 iterations
};

// Baseline: subgradient descent on the max-of-squares objective with step
// c0 / sqrt(k); c0 <= 0 picks max_j ||u^j|| as the scale.
SubgradientResult subgradient_baseline(const EpigraphProblem& prob, Eigen::Index iterations,
                                       double c0 = 0.0);

}  // namespace redinv
