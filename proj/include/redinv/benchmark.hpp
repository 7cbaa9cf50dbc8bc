#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "redinv/piecewise.hpp"

namespace redinv {

// delta_tilde(sigma) = largest distance between two training snapshots whose
// measured projections differ by at most sigma; the computable stand-in for
// the manifold quantity, with a two-sided interval estimate derived from the
// value at 2*sigma.
struct DeltaRow {
  double sigma = 0.0;
  double delta = 0.0;         // delta_tilde(sigma)
  double delta_2sigma = 0.0;  // delta_tilde(2*sigma)
  double frame_lo = 0.0;      // interval estimate [lo, hi] for the manifold
  double frame_hi = 0.0;      //   value at sigma; reported, never asserted
};

// Brute-force pair scan, O(J^2); refuses J > 5000.
std::vector<DeltaRow> delta_tilde(const Matrix& snapshots, const ObservationSetup& setup,
                                  const std::vector<double>& sigmas);

struct ChebyshevBall {
  CoefficientVector center;
  double radius = 0.0;
  Eigen::Index iterations = 0;
  double gap = 0.0;  // final duality gap of the simplex program
};

// Minimal enclosing ball of the point columns in the metric of X, via
// Frank-Wolfe with away steps on the dual simplex program. The returned
// radius is the exact covering radius of the computed center. Refuses more
// than 500 points.
ChebyshevBall chebyshev_finite(const InnerProductSpace& X, const Matrix& points);

struct BenchmarkConfig {
  Eigen::Index n = 4;                     // background dimension for the PBDW rows
  Eigen::Index recovery_iterations = 4000;  // primal-dual budget for the optimal-affine row
  FamilyConfig family;                    // piecewise rows
  std::vector<double> sigmas;             // delta_tilde levels (may be empty)
  Eigen::Index width_proxy_n = 8;
  double noise = 0.0;                     // measurement noise level, 0 = clean
  std::uint64_t seed = 0;                 // noise seed
};

struct EstimatorRow {
  std::string name;
  double worst = 0.0;
  double mean = 0.0;
};

struct BenchmarkReport {
  std::vector<EstimatorRow> rows;
  std::vector<DeltaRow> delta;
  std::vector<double> width_proxy;
  Eigen::Index train_size = 0;
  Eigen::Index test_size = 0;
  Eigen::Index family_cells = 0;
  bool family_complete = true;
};

// Held-out tensor grid shifted by half a training cell: r-1 midpoints per
// axis (the center when the training axis had a single point).
TrainingSet held_out_grid(const ParametricModel& model,
                          const std::vector<Eigen::Index>& resolution);

// Fits every estimator on `train` and scores it on `test`: linear PBDW,
// affine PBDW around the center snapshot, the optimal affine recovery map,
// and the piecewise family under both selection rules.
BenchmarkReport compare_estimators(const ParametricModel& model, const TrainingSet& train,
                                   const TrainingSet& test, const ObservationSetup& setup,
                                   const BenchmarkConfig& config);

}  // namespace redinv
