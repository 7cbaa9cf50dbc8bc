#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <memory>
#include <vector>

#include "redinv/util.hpp"

namespace redinv {

// Coefficient vector of an element of V_h in the reference basis.
using CoefficientVector = Eigen::VectorXd;

// Finite-dimensional Hilbert space: R^{N_h} equipped with an SPD Gram
// matrix G. All norms/projections below are taken in this metric.
class InnerProductSpace {
public:
  // Validates symmetry (1e-12 relative) and positive definiteness.
  explicit InnerProductSpace(Matrix gram);

  Eigen::Index dim() const { return gram_.rows(); }
  const Matrix& gram() const { return gram_; }

  double inner(const CoefficientVector& a, const CoefficientVector& b) const;
  double norm(const CoefficientVector& a) const;

  Vector apply_gram(const CoefficientVector& a) const { return gram_ * a; }
  Matrix apply_gram(const Matrix& a) const { return gram_ * a; }

  // Solves G x = r (Riesz lift of the functional with coefficient r).
  Vector solve_gram(const Vector& r) const { return llt_.solve(r); }
  Matrix solve_gram(const Matrix& r) const { return llt_.solve(r); }

  // Dual norm ||r||_{V'} = sqrt(r^T G^{-1} r).
  double dual_norm(const Vector& r) const;

  // Lower-triangular Cholesky factor L with G = L L^T; c -> L^T c is an
  // isometry from the G-metric onto Euclidean R^{N_h}.
  const Matrix& cholesky_factor() const { return chol_l_; }

private:
  Matrix gram_;
  Eigen::LLT<Matrix> llt_;
  Matrix chol_l_;
};

// A subspace given by basis columns in reference coordinates. `orthonormal`
// asserts B^T G B = I for the space the subspace was built against.
struct Subspace {
  Matrix basis;  // N_h x k
  bool orthonormal = false;

  Eigen::Index dim() const { return basis.cols(); }
  static Subspace empty(Eigen::Index ambient_dim) {
    return Subspace{Matrix(ambient_dim, 0), true};
  }
};

// Cross-Gram G(F,H)_{ij} = <f_i, h_j>.
Matrix gram_matrix(const InnerProductSpace& X, const Matrix& f, const Matrix& h);

// Stabilized Gram-Schmidt (two passes) in fixed column order. Sign
// convention: first coefficient of nonnegligible magnitude is positive.
// A column whose residual drops below 1e-12 of its original norm raises
// RankError naming the column.
Subspace orthonormalize(const InnerProductSpace& X, const Matrix& columns);

// Same, but dependent columns are dropped instead of raising.
Subspace orthonormalize_dropping(const InnerProductSpace& X, const Matrix& columns,
                                 double rel_tol = 1e-10);

// G-orthogonal projection of v onto span(F).
CoefficientVector project(const InnerProductSpace& X, const Subspace& f,
                          const CoefficientVector& v);

// Orthonormal basis of span(A) + span(B) (columns of B deflated against A).
Subspace subspace_sum(const InnerProductSpace& X, const Subspace& a, const Subspace& b);

double distance_to(const InnerProductSpace& X, const Subspace& f, const CoefficientVector& v);

struct InfSupResult {
  double beta = 0.0;      // in [0,1]
  Vector minimizer;       // unit-norm element of V attaining the minimum
};

// beta(V,W) = min_{v in V} ||P_W v|| / ||v||. Bases are orthonormalized
// internally when not flagged; beta is then the smallest singular value of
// G(W_on, V_on). dim V > dim W forces beta = 0.
InfSupResult inf_sup(const InnerProductSpace& X, const Subspace& v, const Subspace& w);

double inf_sup_beta(const InnerProductSpace& X, const Subspace& v, const Subspace& w);

// 1/beta with an infinity sentinel below beta = 1e-14.
double stability_mu(double beta);

}  // namespace redinv
