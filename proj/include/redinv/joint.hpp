#pragma once

#include "redinv/forward.hpp"
#include "redinv/pbdw.hpp"
#include "redinv/placement.hpp"

namespace redinv {

struct JointStep {
  Eigen::Index snapshot = -1;               // training index added at this round
  std::vector<Eigen::Index> new_sensors;    // dictionary indices added
  Eigen::Index m_of_n = 0;                  // sensor count after the round
  double err = 0.0;                         // max training reconstruction error
  double beta = 0.0;                        // beta(V_n, W_m(n))
};

struct JointRun {
  std::vector<JointStep> steps;
  Subspace vn;            // final background space (nested columns)
  ObservationSetup setup; // final measurement setup
  std::vector<Eigen::Index> sensor_indices;  // dictionary indices, pick order
  bool reached_eps = false;
  bool budget_exhausted = false;  // sensor budget hit before beta_lower
  bool captured = false;          // training set exhausted / residuals ~ 0
};

// Alternating enrichment: add the worst-reconstructed snapshot to V_n, then
// top up sensors by worst-case OMP until beta(V_n, W) >= beta_lower (no
// sensors are added when the margin already holds).
JointRun nested_greedy(const TrainingSet& training, const Dictionary& dict, double beta_lower,
                       double eps_stop, Eigen::Index n_max, Eigen::Index m_max);

// Generalized empirical interpolation: one sensor per snapshot (m(n) = n),
// chosen as the dictionary functional with the largest response to the
// current reconstruction residual.
JointRun geim(const TrainingSet& training, const Dictionary& dict, Eigen::Index n_max,
              double eps_stop);

}  // namespace redinv
