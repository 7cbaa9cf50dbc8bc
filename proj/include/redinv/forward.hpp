#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "redinv/space.hpp"

namespace redinv {

// Hyper-rectangle of admissible parameters.
struct ParameterBox {
  Vector lo;
  Vector hi;

  ParameterBox() = default;
  ParameterBox(Vector lo_, Vector hi_);

  Eigen::Index dim() const { return lo.size(); }
  Vector center() const { return 0.5 * (lo + hi); }
  bool contains(const Vector& y, double tol = 0.0) const;
  Vector clamp(const Vector& y) const;
};

// Piecewise-constant field on (0,1): equal-width pieces, left-closed.
struct PiecewiseConstantField {
  std::vector<double> values;

  double at(double x) const;
};

// -div(a(x;y) u') = f on (0,1), u(0)=u(1)=0, with affine-parametric
// diffusion a(x;y) = abar(x) + sum_j y_j psi_j(x); P1 elements on a
// uniform mesh of n_h interior nodes. The reference metric is the a==1
// stiffness matrix (H^1_0 inner product restricted to V_h).
class ParametricModel {
public:
  ParametricModel(Eigen::Index n_h, PiecewiseConstantField abar,
                  std::vector<PiecewiseConstantField> psis, PiecewiseConstantField rhs,
                  ParameterBox box);

  Eigen::Index dim() const { return n_h_; }
  Eigen::Index n_params() const { return static_cast<Eigen::Index>(psi_elem_.cols()); }
  double mesh_h() const { return 1.0 / static_cast<double>(n_h_ + 1); }
  double node(Eigen::Index i) const { return (static_cast<double>(i) + 1.0) * mesh_h(); }
  const ParameterBox& box() const { return box_; }
  double coercivity_floor() const { return a_min_; }

  const PiecewiseConstantField& abar_field() const { return abar_; }
  const std::vector<PiecewiseConstantField>& psi_fields() const { return psis_; }
  const PiecewiseConstantField& rhs_field() const { return rhs_; }

  // Parameters outside the box are clamped to it; `clamped` reports that.
  CoefficientVector solve(const Vector& y, bool* clamped = nullptr) const;

  // Reference space (built on first use).
  const InnerProductSpace& space() const;
  std::shared_ptr<const InnerProductSpace> shared_space() const;

  // Residual components r0 = Abar v - F, r_j = A_j v, so that the weak
  // residual of v at parameter y has coefficients r0 + sum_j y_j r_j.
  Vector residual_constant(const CoefficientVector& v) const;
  Vector residual_component(Eigen::Index j, const CoefficientVector& v) const;
  const Vector& load_vector() const { return load_; }

  // Value of the FEM function at x in [0,1] (piecewise-linear interpolation).
  double value_at(const CoefficientVector& u, double x) const;

private:
  Eigen::Index n_h_;
  PiecewiseConstantField abar_;
  std::vector<PiecewiseConstantField> psis_;
  PiecewiseConstantField rhs_;
  ParameterBox box_;
  double a_min_ = 0.0;

  // Per-element tables (n_h + 1 elements).
  Vector abar_elem_;
  Matrix psi_elem_;  // (n_h+1) x d
  Vector load_;

  mutable std::shared_ptr<InnerProductSpace> space_;

  Vector element_diffusion(const Vector& y) const;
};

struct TrainingSet {
  Matrix params;     // J x d
  Matrix snapshots;  // N_h x J
  std::vector<Eigen::Index> resolution;  // per-axis grid sizes; empty if explicit points

  Eigen::Index size() const { return params.rows(); }
};

// Tensor grid over the box: r points per axis (linspace including the
// corners for r >= 2; the axis center for r == 1), lexicographic order with
// the last axis fastest. Refuses J > 1e6.
TrainingSet sample_training_set(const ParametricModel& model, const std::vector<Eigen::Index>& resolution);
TrainingSet sample_training_set(const ParametricModel& model, Eigen::Index resolution);

// Snapshots at explicitly given parameters (rows of `params`).
TrainingSet sample_training_set(const ParametricModel& model, const Matrix& params);

// proxy(k), k = 0..n: worst projection error over the training set onto the
// span of the leading k correlation eigenvectors (no centering).
std::vector<double> pod_width_proxy(const InnerProductSpace& X, const Matrix& snapshots,
                                    Eigen::Index n);
std::vector<double> pod_width_proxy(const InnerProductSpace& X, const TrainingSet& training,
                                    Eigen::Index n);

struct GreedyBasis {
  Subspace basis;                      // nested orthonormal columns
  std::vector<double> error_history;   // worst training distance, k = 0..n
  std::vector<Eigen::Index> selected;  // snapshot index per step
};

// Strong greedy on the training set: each step adds the worst-approximated
// snapshot (ties -> lowest index; first pick = largest norm).
GreedyBasis greedy_reduced_basis(const InnerProductSpace& X, const Matrix& snapshots,
                                 Eigen::Index n_max, double eps_target = 0.0);
GreedyBasis greedy_reduced_basis(const InnerProductSpace& X, const TrainingSet& training,
                                 Eigen::Index n_max, double eps_target = 0.0);

struct SurrogateResult {
  double value = 0.0;    // min over the box of the dual residual norm
  Vector minimizer;      // attaining parameter
  bool degenerate = false;  // Hessian numerically singular: minimizer non-unique
};

// S(v) = min_{y in Y} || r0 + sum_j y_j r_j ||_{V'}; the squared objective is
// a convex quadratic in y. Normal equations first; 500 projected-gradient
// iterations when the unconstrained minimizer leaves the box.
SurrogateResult residual_surrogate(const ParametricModel& model, const CoefficientVector& v);

// Energy-norm distance between FEM functions on (possibly) different uniform
// meshes, exact for piecewise-linear interpolants.
double energy_distance(Eigen::Index n_h_a, const CoefficientVector& a, Eigen::Index n_h_b,
                       const CoefficientVector& b);

}  // namespace redinv
