#pragma once

#include <limits>
#include <vector>

#include "redinv/forward.hpp"
#include "redinv/pbdw.hpp"

namespace redinv {

// Acceptance test for a cell's local space ladder.
enum class TauMode {
  Sigma,  // tau = min_n mu_n * eps_n, accept when tau <= sigma
  EpsMu,  // tau = min_n max(mu_n / mu, eps_n / eps), accept when tau <= 1
};

enum class SplitStrategy {
  FullDyadic,        // bisect every axis: 2^d children
  GreedyCoordinate,  // bisect the single axis scoring best, cyclic on even levels
};

struct FamilyConfig {
  TauMode mode = TauMode::Sigma;
  double sigma = 0.1;  // Sigma-mode target
  double eps = 0.1;    // EpsMu-mode accuracy target
  double mu = 10.0;    // EpsMu-mode stability target
  SplitStrategy strategy = SplitStrategy::FullDyadic;
  Eigen::Index max_cells = 64;  // leaf budget; hit -> partial family
  Eigen::Index max_n = -1;      // ladder depth cap; -1 -> sensor count
};

// One parameter-box cell with its ladder of local affine spaces
// ubar + span(basis cols 0..n-1), n = 0..N; eps[n] is the worst local
// training distance at level n and mu[n] the stability constant against
// the observation space (mu[0] = 1 by convention).
struct Cell {
  ParameterBox box;
  int level = 0;
  Vector center;
  CoefficientVector ubar;  // solution at the box center
  Matrix basis;            // orthonormal, nested by column prefix
  std::vector<double> eps;
  std::vector<double> mu;
  Eigen::Index chosen_n = 0;
  double tau = 0.0;
  std::vector<Eigen::Index> train_idx;  // global training indices inside box

  Eigen::Index ladder_size() const { return static_cast<Eigen::Index>(eps.size()); }
};

struct AdmissibleFamily {
  std::vector<Cell> cells;
  FamilyConfig config;
  ParameterBox domain;
  bool complete = true;  // false when the cell budget stopped refinement

  Eigen::Index size() const { return static_cast<Eigen::Index>(cells.size()); }
};

// Training points owned by `box`: shared faces belong to the lower cell
// (closed top / open bottom per axis, except at the domain boundary), so
// every grid point lands in exactly one cell of a partition.
std::vector<Eigen::Index> cell_members(const TrainingSet& training, const ParameterBox& box,
                                       const ParameterBox& domain);

// Builds the cell ladder: greedy basis on the centered local snapshots,
// eps from the greedy error history, mu from inf-sup against W. An empty
// local training set yields a center-only cell (single n = 0 rung).
Cell build_cell(const ParametricModel& model, const TrainingSet& training,
                const ParameterBox& box, int level, const ObservationSetup& setup,
                const FamilyConfig& config);

// Evaluates the acceptance functional, storing tau and the minimizing rung
// (ties toward smaller n) on the cell. Rungs with infinite mu are skipped.
double cell_tau(Cell& cell, const FamilyConfig& config);

bool cell_passes(const Cell& cell, const FamilyConfig& config);

// Children of `cell` per the configured strategy, ladders built and scored.
// GreedyCoordinate evaluates a trial bisection per axis and keeps the one
// with the smallest max-child tau, except on even levels where the axis
// (level/2) mod d is forced to guarantee cyclic coverage. Throws
// StarvationError when a child would be thinner than the training grid.
std::vector<Cell> split_cell(const ParametricModel& model, const TrainingSet& training,
                             const Cell& cell, const ObservationSetup& setup,
                             const FamilyConfig& config);

// Breadth-first refinement from the root box until every leaf passes or the
// cell budget is reached (partial family, complete = false).
AdmissibleFamily build_family(const ParametricModel& model, const TrainingSet& training,
                              const ObservationSetup& setup, const FamilyConfig& config);

// |sum of cell volumes - domain volume| + total pairwise overlap volume;
// ~0 for a genuine partition.
double partition_defect(const AdmissibleFamily& family);

enum class Selection {
  Ideal,      // score = distance to the training set (plus a surrogate-polish candidate)
  Surrogate,  // score = residual surrogate of the local reconstruction
};

struct CellEstimate {
  Eigen::Index cell = -1;
  Eigen::Index n = 0;
  double beta = 0.0;
  double score = std::numeric_limits<double>::infinity();
  double error_truth = -1.0;  // filled when the true state is supplied
  bool usable = false;        // stable fit obtained
};

struct FamilyEstimate {
  CoefficientVector state;
  Eigen::Index chosen_cell = -1;
  Selection selection = Selection::Surrogate;
  std::vector<CellEstimate> diagnostics;
};

// Runs the affine estimator of every cell on the measurement w = P_W u and
// keeps the candidate with the smallest selection score (ties toward lower
// cell index). Cells whose chosen space is unstable against W are skipped;
// all-unstable is an error. `truth` only fills the per-cell diagnostics.
FamilyEstimate estimate(const AdmissibleFamily& family, const ParametricModel& model,
                        const TrainingSet& training, const ObservationSetup& setup,
                        const CoefficientVector& w, Selection selection,
                        const CoefficientVector* truth = nullptr);

}  // namespace redinv
