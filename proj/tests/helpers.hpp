#pragma once

#include <memory>
#include <vector>

#include "redinv/forward.hpp"
#include "redinv/sensing.hpp"

namespace redinv::testing {

// Euclidean R^n: identity Gram.
inline std::shared_ptr<InnerProductSpace> euclidean(Eigen::Index n) {
  return std::make_shared<InnerProductSpace>(Matrix::Identity(n, n));
}

// Two-parameter diffusion: a = 1 + y_0 on the left half, 1 + y_1 on the
// right, y in [-0.8, 0.8]^2, f = 1. Smooth manifold, coercive.
inline ParametricModel standard_model(Eigen::Index n_h = 199) {
  PiecewiseConstantField abar{{1.0}};
  std::vector<PiecewiseConstantField> psis{{{1.0, 0.0}}, {{0.0, 1.0}}};
  PiecewiseConstantField rhs{{1.0}};
  Vector lo(2), hi(2);
  lo << -0.8, -0.8;
  hi << 0.8, 0.8;
  return ParametricModel(n_h, std::move(abar), std::move(psis), std::move(rhs),
                         ParameterBox(std::move(lo), std::move(hi)));
}

// Two-parameter diffusion over four quarter-interval pieces with staggered
// parameter loadings. Every piece sees a distinct affine form of y, so the
// solution set spans a seven-dimensional subspace; use this bed whenever a
// test needs reduced spaces of dimension four or more.
inline ParametricModel rich_model(Eigen::Index n_h = 199) {
  PiecewiseConstantField abar{{1.0, 1.0, 1.0, 1.0}};
  std::vector<PiecewiseConstantField> psis{{{1.0, 0.6, 0.2, 0.0}},
                                           {{0.0, 0.3, 0.7, 1.0}}};
  PiecewiseConstantField rhs{{1.0}};
  Vector lo(2), hi(2);
  lo << -0.8, -0.8;
  hi << 0.8, 0.8;
  return ParametricModel(n_h, std::move(abar), std::move(psis), std::move(rhs),
                         ParameterBox(std::move(lo), std::move(hi)));
}

// Single-parameter variant for cheap 1d-in-parameter tests.
inline ParametricModel line_model(Eigen::Index n_h = 127) {
  PiecewiseConstantField abar{{1.0}};
  std::vector<PiecewiseConstantField> psis{{{1.0, 0.0}}};
  PiecewiseConstantField rhs{{1.0}};
  Vector lo(1), hi(1);
  lo << -0.8;
  hi << 0.8;
  return ParametricModel(n_h, std::move(abar), std::move(psis), std::move(rhs),
                         ParameterBox(std::move(lo), std::move(hi)));
}

// Parameter-independent model (zero psi): every solve returns the same state.
inline ParametricModel constant_model(Eigen::Index n_h = 63, Eigen::Index d = 2) {
  PiecewiseConstantField abar{{1.0}};
  std::vector<PiecewiseConstantField> psis(d, PiecewiseConstantField{{0.0}});
  PiecewiseConstantField rhs{{1.0}};
  Vector lo = Vector::Constant(d, -1.0), hi = Vector::Constant(d, 1.0);
  return ParametricModel(n_h, std::move(abar), std::move(psis), std::move(rhs),
                         ParameterBox(std::move(lo), std::move(hi)));
}

// m point sensors on an even interior grid i/(m+1).
inline ObservationSetup even_point_setup(std::shared_ptr<const InnerProductSpace> space,
                                         Eigen::Index m) {
  std::vector<SensorDescriptor> sensors;
  for (Eigen::Index i = 1; i <= m; ++i)
    sensors.push_back({SensorKind::PointEval,
                       static_cast<double>(i) / static_cast<double>(m + 1), 0.0});
  return build_observation(std::move(space), sensors);
}

// Observation setup over Euclidean R^n measuring the first m coordinates.
inline ObservationSetup coordinate_setup(std::shared_ptr<const InnerProductSpace> space,
                                         Eigen::Index m) {
  ObservationSetup setup;
  const Eigen::Index n = space->dim();
  setup.space = std::move(space);
  setup.representers = Matrix::Identity(n, n).leftCols(m);
  for (Eigen::Index i = 0; i < m; ++i)
    setup.sensors.push_back({SensorKind::PointEval, 0.5, 0.0});
  setup.b = Matrix::Identity(m, m);
  setup.b_llt.compute(setup.b);
  setup.w_basis = Subspace{setup.representers, true};
  return setup;
}

}  // namespace redinv::testing
