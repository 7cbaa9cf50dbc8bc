#include "redinv/pbdw.hpp"

#include <cmath>
#include <string>

namespace redinv {

PbdwOperator fit_pbdw(const Subspace& vn, const ObservationSetup& setup) {
  PbdwOperator op;
  op.space = setup.space;
  op.setup = setup;
  op.vn = vn.orthonormal ? vn : orthonormalize(*setup.space, vn.basis);
  const Eigen::Index n = op.vn.dim();
  const Eigen::Index m = setup.size();
  if (n > m)
    throw InvalidInputError("pbdw.fit",
                            "background dimension " + std::to_string(n) +
                                " exceeds sensor count " + std::to_string(m));
  if (n == 0) {
    op.cross.resize(m, 0);
    op.beta = 1.0;
    op.mu = 1.0;
    return op;
  }
  op.cross = setup.w_basis.basis.transpose() * setup.space->apply_gram(op.vn.basis);
  Eigen::JacobiSVD<Matrix> svd(op.cross);
  op.beta = std::min(1.0, std::max(0.0, svd.singularValues().minCoeff()));
  if (op.beta <= 1e-10)
    throw StabilityError("pbdw.fit",
                         "inf-sup constant " + std::to_string(op.beta) + " too small");
  op.mu = stability_mu(op.beta);
  op.qr.compute(op.cross);
  return op;
}

CoefficientVector reconstruct(const PbdwOperator& op, const CoefficientVector& w) {
  if (w.size() != op.space->dim())
    throw InvalidInputError("pbdw.reconstruct", "measurement dimension mismatch");
  const Vector wc = op.setup.w_coordinates(w);
  if (op.n() == 0) return op.setup.w_basis.basis * wc;
  const Vector a = op.qr.solve(wc);
  return op.setup.w_basis.basis * (wc - op.cross * a) + op.vn.basis * a;
}

CoefficientVector reconstruct_from_z(const PbdwOperator& op, const Vector& z) {
  if (z.size() != op.m())
    throw InvalidInputError("pbdw.reconstruct", "functional count mismatch");
  const CoefficientVector w = op.setup.representers * op.setup.b_llt.solve(z);
  return reconstruct(op, w);
}

AffinePbdw fit_affine_pbdw(const Subspace& vn, const ObservationSetup& setup,
                           const CoefficientVector& ubar) {
  AffinePbdw op;
  op.linear = fit_pbdw(vn, setup);
  op.ubar = ubar;
  op.wbar = setup.project(ubar);
  return op;
}

CoefficientVector reconstruct(const AffinePbdw& op, const CoefficientVector& w) {
  return op.ubar + reconstruct(op.linear, w - op.wbar);
}

namespace {

template <typename Op>
WorstCase worst_case_impl(const Op& op, const InnerProductSpace& X,
                          const ObservationSetup& setup, const Matrix& snapshots) {
  if (snapshots.cols() == 0)
    throw InvalidInputError("pbdw.worst_case_error", "empty snapshot set");
  WorstCase out;
  for (Eigen::Index j = 0; j < snapshots.cols(); ++j) {
    const CoefficientVector w = setup.project(snapshots.col(j));
    const double err = X.norm(snapshots.col(j) - reconstruct(op, w));
    if (err > out.value || out.argmax < 0) {
      out.value = err;
      out.argmax = j;
    }
  }
  return out;
}

}  // namespace

WorstCase worst_case_error(const PbdwOperator& op, const Matrix& snapshots) {
  return worst_case_impl(op, *op.space, op.setup, snapshots);
}

WorstCase worst_case_error(const AffinePbdw& op, const Matrix& snapshots) {
  return worst_case_impl(op, *op.linear.space, op.linear.setup, snapshots);
}

ErrorBoundCheck error_bound_check(const PbdwOperator& op, const CoefficientVector& u) {
  ErrorBoundCheck out;
  const CoefficientVector w = op.setup.project(u);
  out.error = op.space->norm(u - reconstruct(op, w));
  out.mu = op.mu;
  out.dist = distance_to(*op.space, op.vn, u);
  out.satisfied = out.error <= out.mu * out.dist * (1.0 + 1e-8) + 1e-14;
  return out;
}

}  // namespace redinv
