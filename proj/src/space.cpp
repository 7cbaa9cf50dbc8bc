#include "redinv/space.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>
#include <limits>
#include <string>

namespace redinv {

InnerProductSpace::InnerProductSpace(Matrix gram) : gram_(std::move(gram)) {
  if (gram_.rows() == 0 || gram_.rows() != gram_.cols())
    throw InvalidInputError("space.InnerProductSpace", "Gram matrix must be square and nonempty");
  check_finite(gram_, "space.InnerProductSpace");
  const double scale = gram_.cwiseAbs().maxCoeff();
  const double asym = (gram_ - gram_.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * scale)
    throw InvalidInputError("space.InnerProductSpace", "Gram matrix is not symmetric");
  gram_ = 0.5 * (gram_ + gram_.transpose()).eval();
  llt_.compute(gram_);
  if (llt_.info() != Eigen::Success)
    throw SingularError("space.InnerProductSpace", "Gram matrix is not positive definite");
  chol_l_ = llt_.matrixL();
}

double InnerProductSpace::inner(const CoefficientVector& a, const CoefficientVector& b) const {
  if (a.size() != dim() || b.size() != dim())
    throw InvalidInputError("space.inner", "coefficient length does not match space dimension");
  return a.dot(gram_ * b);
}

double InnerProductSpace::norm(const CoefficientVector& a) const {
  return std::sqrt(std::max(0.0, inner(a, a)));
}

double InnerProductSpace::dual_norm(const Vector& r) const {
  if (r.size() != dim())
    throw InvalidInputError("space.dual_norm", "functional length does not match space dimension");
  return std::sqrt(std::max(0.0, r.dot(llt_.solve(r))));
}

Matrix gram_matrix(const InnerProductSpace& X, const Matrix& f, const Matrix& h) {
  if (f.rows() != X.dim() || h.rows() != X.dim())
    throw InvalidInputError("space.gram_matrix", "basis rows do not match space dimension");
  return f.transpose() * X.apply_gram(h);
}

namespace {

void fix_sign(Eigen::Ref<Vector> q) {
  const double scale = q.cwiseAbs().maxCoeff();
  if (scale <= 0.0) return;
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    if (std::abs(q[i]) > 1e-12 * scale) {
      if (q[i] < 0.0) q = -q;
      return;
    }
  }
}

Subspace orthonormalize_impl(const InnerProductSpace& X, const Matrix& columns, double rel_tol,
                             bool drop) {
  if (columns.rows() != X.dim())
    throw InvalidInputError("space.orthonormalize", "basis rows do not match space dimension");
  check_finite(columns, "space.orthonormalize");
  Matrix q(X.dim(), columns.cols());
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < columns.cols(); ++j) {
    Vector v = columns.col(j);
    const double norm0 = X.norm(v);
    for (int pass = 0; pass < 2 && k > 0; ++pass) {
      const Vector coeff = q.leftCols(k).transpose() * X.apply_gram(v);
      v -= q.leftCols(k) * coeff;
    }
    const double nrm = X.norm(v);
    if (nrm <= rel_tol * norm0 || norm0 == 0.0) {
      if (drop) continue;
      throw RankError("space.orthonormalize",
                      "column " + std::to_string(j) + " is numerically dependent");
    }
    q.col(k) = v / nrm;
    fix_sign(q.col(k));
    ++k;
  }
  return Subspace{q.leftCols(k), true};
}

}  // namespace

Subspace orthonormalize(const InnerProductSpace& X, const Matrix& columns) {
  return orthonormalize_impl(X, columns, 1e-12, false);
}

Subspace orthonormalize_dropping(const InnerProductSpace& X, const Matrix& columns,
                                 double rel_tol) {
  return orthonormalize_impl(X, columns, rel_tol, true);
}

CoefficientVector project(const InnerProductSpace& X, const Subspace& f,
                          const CoefficientVector& v) {
  if (v.size() != X.dim())
    throw InvalidInputError("space.project", "coefficient length does not match space dimension");
  if (f.dim() == 0) return CoefficientVector::Zero(X.dim());
  if (f.basis.rows() != X.dim())
    throw InvalidInputError("space.project", "basis rows do not match space dimension");
  const Vector rhs = f.basis.transpose() * X.apply_gram(v);
  if (f.orthonormal) return f.basis * rhs;
  const Matrix gff = gram_matrix(X, f.basis, f.basis);
  Eigen::LDLT<Matrix> ldlt(gff);
  if (ldlt.info() != Eigen::Success)
    throw SingularError("space.project", "projection Gram matrix is singular");
  return f.basis * ldlt.solve(rhs);
}

Subspace subspace_sum(const InnerProductSpace& X, const Subspace& a, const Subspace& b) {
  Matrix joint(X.dim(), a.dim() + b.dim());
  if (a.dim() > 0) joint.leftCols(a.dim()) = a.basis;
  if (b.dim() > 0) joint.rightCols(b.dim()) = b.basis;
  return orthonormalize_dropping(X, joint);
}

double distance_to(const InnerProductSpace& X, const Subspace& f, const CoefficientVector& v) {
  return X.norm(v - project(X, f, v));
}

InfSupResult inf_sup(const InnerProductSpace& X, const Subspace& v, const Subspace& w) {
  if (v.dim() == 0)
    throw InvalidInputError("space.inf_sup", "V must be nontrivial");
  const Subspace von = v.orthonormal ? v : orthonormalize(X, v.basis);
  InfSupResult out;
  if (w.dim() == 0) {
    out.beta = 0.0;
    out.minimizer = von.basis.col(0);
    return out;
  }
  Subspace won;
  if (w.orthonormal) {
    won = w;
  } else {
    try {
      won = orthonormalize(X, w.basis);
    } catch (const RankError&) {
      throw SingularError("space.inf_sup", "W basis Gram matrix is degenerate");
    }
  }
  const Matrix c = gram_matrix(X, won.basis, von.basis);  // m x n
  if (c.cols() > c.rows()) {
    // dim V exceeds dim W: P_W has a kernel inside V.
    Eigen::JacobiSVD<Matrix> svd(c, Eigen::ComputeFullV);
    out.beta = 0.0;
    Vector dir = svd.matrixV().col(c.rows());  // null-space direction
    out.minimizer = von.basis * dir;
    return out;
  }
  Eigen::JacobiSVD<Matrix> svd(c, Eigen::ComputeFullV);
  const Eigen::Index last = c.cols() - 1;
  out.beta = std::min(1.0, std::max(0.0, svd.singularValues()[last]));
  out.minimizer = von.basis * svd.matrixV().col(last);
  const double nrm = X.norm(out.minimizer);
  if (nrm > 0) out.minimizer /= nrm;
  return out;
}

double inf_sup_beta(const InnerProductSpace& X, const Subspace& v, const Subspace& w) {
  return inf_sup(X, v, w).beta;
}

double stability_mu(double beta) {
  if (beta < 1e-14) return std::numeric_limits<double>::infinity();
  return 1.0 / beta;
}

}  // namespace redinv
