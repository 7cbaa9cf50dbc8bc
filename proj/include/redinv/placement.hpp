#pragma once

#include "redinv/sensing.hpp"

namespace redinv {

// One orthogonal-matching-pursuit style placement run.
struct GreedyRun {
  std::vector<Eigen::Index> selected;  // dictionary indices, in pick order
  std::vector<double> rm_history;      // rm_history[k] after k sensors (rm_history[0] = n)
  std::vector<double> beta_history;    // beta_history[k] after k sensors (beta_history[0] = 0)
  double kappa = 1.0;
  double beta_target = 0.0;
  bool reached = false;  // beta target met within budget
  bool stalled = false;  // candidate scores vanished first

  Eigen::Index size() const { return static_cast<Eigen::Index>(selected.size()); }
};

// Collective OMP: each step picks the candidate maximizing the summed squared
// correlation with the V_n residuals. kappa < 1 relaxes argmax to the first
// index reaching kappa^2 * max (scan order = dictionary order). Stops once
// beta(V_n, W_m) >= beta_target or after m_max picks.
GreedyRun collective_omp(const Subspace& vn, const Dictionary& dict, double beta_target,
                         double kappa, Eigen::Index m_max);

// Worst-case OMP: each step scores against the current worst-approximated
// unit vector of V_n (smallest-singular-direction; first basis vector while
// W is empty) instead of the whole basis.
GreedyRun worst_case_omp(const Subspace& vn, const Dictionary& dict, double beta_target,
                         double kappa, Eigen::Index m_max);

ObservationSetup observation_from_run(const Dictionary& dict, const GreedyRun& run);

// First n terms of the sine basis phi_k = (sqrt(2)/(pi k)) sin(k pi x),
// sampled at the mesh nodes and orthonormalized.
Subspace fourier_subspace(const InnerProductSpace& X, Eigen::Index n);

// Curvature functional of that basis: integral over (0,1) of
// sqrt(sum_k |phi_k''|^2), by composite 5-point Gauss on 1e4 panels.
double fourier_j_constant(Eigen::Index n);

}  // namespace redinv
