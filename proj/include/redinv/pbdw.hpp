#pragma once

#include <Eigen/QR>
#include <Eigen/SVD>

#include "redinv/sensing.hpp"

namespace redinv {

// Linear state estimator: given w = P_W u, returns the element of w + W^perp
// closest to V_n. With orthonormal bases for V_n and W the least-squares
// core is the m x n cross-Gram, solved by QR.
struct PbdwOperator {
  std::shared_ptr<const InnerProductSpace> space;
  Subspace vn;             // orthonormal
  ObservationSetup setup;
  Matrix cross;            // W_on^T G V_on (m x n)
  Eigen::ColPivHouseholderQR<Matrix> qr;
  double beta = 1.0;
  double mu = 1.0;

  Eigen::Index n() const { return vn.dim(); }
  Eigen::Index m() const { return setup.size(); }
};

// Requires n <= m and beta(V_n, W) > 1e-10.
PbdwOperator fit_pbdw(const Subspace& vn, const ObservationSetup& setup);

// w must lie in W (reference coordinates).
CoefficientVector reconstruct(const PbdwOperator& op, const CoefficientVector& w);
CoefficientVector reconstruct_from_z(const PbdwOperator& op, const Vector& z);

// Affine variant around a prior mean.
struct AffinePbdw {
  PbdwOperator linear;
  CoefficientVector ubar;
  CoefficientVector wbar;  // P_W ubar
};

AffinePbdw fit_affine_pbdw(const Subspace& vn, const ObservationSetup& setup,
                           const CoefficientVector& ubar);

CoefficientVector reconstruct(const AffinePbdw& op, const CoefficientVector& w);

struct WorstCase {
  double value = 0.0;
  Eigen::Index argmax = -1;
};

// Max reconstruction error over snapshot columns, measurements w = P_W u.
WorstCase worst_case_error(const PbdwOperator& op, const Matrix& snapshots);
WorstCase worst_case_error(const AffinePbdw& op, const Matrix& snapshots);

struct ErrorBoundCheck {
  double error = 0.0;
  double mu = 0.0;
  double dist = 0.0;  // distance of u to V_n
  bool satisfied = false;
};

// error <= mu * dist(u, V_n) up to 1e-8 relative slack.
ErrorBoundCheck error_bound_check(const PbdwOperator& op, const CoefficientVector& u);

}  // namespace redinv
