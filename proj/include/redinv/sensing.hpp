#pragma once

#include <Eigen/Cholesky>
#include <memory>
#include <vector>

#include "redinv/space.hpp"

namespace redinv {

enum class SensorKind { PointEval, LocalAverage };

struct SensorDescriptor {
  SensorKind kind = SensorKind::PointEval;
  double x = 0.0;
  double width = 0.0;  // local-average half-width; 0 for point sensors
};

// Unit-norm Riesz representer of v -> v(x); requires x in (0,1).
CoefficientVector riesz_point_eval(const InnerProductSpace& X, double x);

// Unit-norm representer of the local average against the quartic bump
// (15/16)(1-s^2)^2 scaled to half-width tau; support must stay in [0,1].
CoefficientVector riesz_local_average(const InnerProductSpace& X, double x, double tau);

CoefficientVector riesz_representer(const InnerProductSpace& X, const SensorDescriptor& s);

// Candidate sensor pool with lazily computed representers.
class Dictionary {
public:
  Dictionary(std::shared_ptr<const InnerProductSpace> space,
             std::vector<SensorDescriptor> sensors);

  // count equispaced interior points i/(count+1).
  static Dictionary point_grid(std::shared_ptr<const InnerProductSpace> space,
                               Eigen::Index count);
  static Dictionary local_average_grid(std::shared_ptr<const InnerProductSpace> space,
                                       Eigen::Index count, double tau);

  Eigen::Index size() const { return static_cast<Eigen::Index>(sensors_.size()); }
  const std::vector<SensorDescriptor>& sensors() const { return sensors_; }
  const SensorDescriptor& descriptor(Eigen::Index i) const;
  const InnerProductSpace& space() const { return *space_; }
  std::shared_ptr<const InnerProductSpace> shared_space() const { return space_; }

  Eigen::Ref<const Vector> representer(Eigen::Index i) const;
  // Forces every representer (parallel when a worker pool is configured).
  const Matrix& representer_matrix() const;

private:
  std::shared_ptr<const InnerProductSpace> space_;
  std::vector<SensorDescriptor> sensors_;
  mutable Matrix reps_;
  mutable std::vector<char> computed_;
  mutable bool all_computed_ = false;
};

// Measurement space W = span of selected representers, with the tooling the
// estimators need: representer Gram B (conditioning-checked), an orthonormal
// basis of W, and the Cholesky factor of B.
struct ObservationSetup {
  std::shared_ptr<const InnerProductSpace> space;
  std::vector<SensorDescriptor> sensors;
  Matrix representers;  // N_h x m, unit-norm columns
  Matrix b;             // m x m representer Gram
  Subspace w_basis;     // orthonormal
  Eigen::LLT<Matrix> b_llt;

  Eigen::Index size() const { return representers.cols(); }
  CoefficientVector project(const CoefficientVector& u) const;  // P_W u
  Vector w_coordinates(const CoefficientVector& u) const;       // of P_W u in w_basis
};

ObservationSetup build_observation(const Dictionary& dict,
                                   const std::vector<Eigen::Index>& members);
ObservationSetup build_observation(std::shared_ptr<const InnerProductSpace> space,
                                   const std::vector<SensorDescriptor>& sensors);

struct Measurement {
  Vector z;              // functional values <omega_i, u>
  CoefficientVector w;   // P_W u in reference coordinates
};

Measurement measure(const ObservationSetup& setup, const CoefficientVector& u);

// Adds a seeded random direction of W with exact norm eps_noise.
CoefficientVector add_noise(const ObservationSetup& setup, const CoefficientVector& w,
                            double eps_noise, std::uint64_t seed);
Vector add_noise_z(const ObservationSetup& setup, const Vector& z, double eps_noise,
                   std::uint64_t seed);

}  // namespace redinv
