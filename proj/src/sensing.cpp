#include "redinv/sensing.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <string>

namespace redinv {

namespace {

// Nodal coefficients of the evaluation functional v -> v(x) on the uniform
// mesh implied by the space dimension.
Vector point_eval_functional(const InnerProductSpace& X, double x) {
  const Eigen::Index n = X.dim();
  const double h = 1.0 / static_cast<double>(n + 1);
  Vector e = Vector::Zero(n);
  const auto el = std::min<Eigen::Index>(static_cast<Eigen::Index>(std::floor(x / h)), n);
  const double t = (x - static_cast<double>(el) * h) / h;
  if (el >= 1) e[el - 1] += 1.0 - t;
  if (el < n) e[el] += t;
  return e;
}

CoefficientVector normalized_riesz(const InnerProductSpace& X, const Vector& functional,
                                   const char* where) {
  const Vector g = X.solve_gram(functional);
  const double nrm = std::sqrt(std::max(0.0, g.dot(functional)));
  if (nrm <= 1e-300) throw SingularError(where, "functional is numerically zero");
  return g / nrm;
}

}  // namespace

CoefficientVector riesz_point_eval(const InnerProductSpace& X, double x) {
  if (!(x > 0.0 && x < 1.0))
    throw DomainError("sensing.riesz_point_eval", "location must lie strictly inside (0,1)");
  return normalized_riesz(X, point_eval_functional(X, x), "sensing.riesz_point_eval");
}

CoefficientVector riesz_local_average(const InnerProductSpace& X, double x, double tau) {
  if (!(tau > 0.0)) throw DomainError("sensing.riesz_local_average", "width must be positive");
  if (x - tau < -1e-14 || x + tau > 1.0 + 1e-14)
    throw DomainError("sensing.riesz_local_average", "support leaves the domain");
  const Eigen::Index n = X.dim();
  const double h = 1.0 / static_cast<double>(n + 1);
  const double lo = std::max(0.0, x - tau);
  const double hi = std::min(1.0, x + tau);
  // 3-point Gauss is exact for the degree-5 piecewise integrand.
  static const double gp[3] = {-std::sqrt(3.0 / 5.0), 0.0, std::sqrt(3.0 / 5.0)};
  static const double gw[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
  Vector f = Vector::Zero(n);
  const auto e_lo = static_cast<Eigen::Index>(std::floor(lo / h));
  const auto e_hi = std::min<Eigen::Index>(static_cast<Eigen::Index>(std::floor(hi / h)), n);
  for (Eigen::Index e = e_lo; e <= e_hi; ++e) {
    const double xl = std::max(lo, static_cast<double>(e) * h);
    const double xr = std::min(hi, static_cast<double>(e + 1) * h);
    if (xr <= xl) continue;
    const double mid = 0.5 * (xl + xr), half = 0.5 * (xr - xl);
    for (int q = 0; q < 3; ++q) {
      const double xq = mid + half * gp[q];
      const double s = (xq - x) / tau;
      const double bump = 15.0 / 16.0 * (1.0 - s * s) * (1.0 - s * s) / tau;
      const double t = (xq - static_cast<double>(e) * h) / h;
      const double wq = gw[q] * half * bump;
      if (e >= 1) f[e - 1] += wq * (1.0 - t);
      if (e < n) f[e] += wq * t;
    }
  }
  return normalized_riesz(X, f, "sensing.riesz_local_average");
}

CoefficientVector riesz_representer(const InnerProductSpace& X, const SensorDescriptor& s) {
  return s.kind == SensorKind::PointEval ? riesz_point_eval(X, s.x)
                                         : riesz_local_average(X, s.x, s.width);
}

Dictionary::Dictionary(std::shared_ptr<const InnerProductSpace> space,
                       std::vector<SensorDescriptor> sensors)
    : space_(std::move(space)), sensors_(std::move(sensors)) {
  if (!space_) throw InvalidInputError("sensing.Dictionary", "null space");
  if (sensors_.empty()) throw InvalidInputError("sensing.Dictionary", "empty sensor pool");
  reps_.resize(space_->dim(), static_cast<Eigen::Index>(sensors_.size()));
  computed_.assign(sensors_.size(), 0);
}

Dictionary Dictionary::point_grid(std::shared_ptr<const InnerProductSpace> space,
                                  Eigen::Index count) {
  if (count < 1) throw InvalidInputError("sensing.Dictionary", "count must be >= 1");
  std::vector<SensorDescriptor> s;
  s.reserve(static_cast<std::size_t>(count));
  for (Eigen::Index i = 1; i <= count; ++i)
    s.push_back({SensorKind::PointEval, static_cast<double>(i) / static_cast<double>(count + 1), 0.0});
  return Dictionary(std::move(space), std::move(s));
}

Dictionary Dictionary::local_average_grid(std::shared_ptr<const InnerProductSpace> space,
                                          Eigen::Index count, double tau) {
  if (count < 1) throw InvalidInputError("sensing.Dictionary", "count must be >= 1");
  std::vector<SensorDescriptor> s;
  s.reserve(static_cast<std::size_t>(count));
  for (Eigen::Index i = 1; i <= count; ++i) {
    double x = static_cast<double>(i) / static_cast<double>(count + 1);
    x = std::min(1.0 - tau, std::max(tau, x));
    s.push_back({SensorKind::LocalAverage, x, tau});
  }
  return Dictionary(std::move(space), std::move(s));
}

const SensorDescriptor& Dictionary::descriptor(Eigen::Index i) const {
  if (i < 0 || i >= size()) throw InvalidInputError("sensing.Dictionary", "sensor index out of range");
  return sensors_[static_cast<std::size_t>(i)];
}

Eigen::Ref<const Vector> Dictionary::representer(Eigen::Index i) const {
  if (i < 0 || i >= size()) throw InvalidInputError("sensing.Dictionary", "sensor index out of range");
  if (!computed_[static_cast<std::size_t>(i)]) {
    reps_.col(i) = riesz_representer(*space_, sensors_[static_cast<std::size_t>(i)]);
    computed_[static_cast<std::size_t>(i)] = 1;
  }
  return reps_.col(i);
}

const Matrix& Dictionary::representer_matrix() const {
  if (!all_computed_) {
    parallel_for(size(), thread_count(), [&](Eigen::Index i) {
      if (!computed_[static_cast<std::size_t>(i)]) {
        reps_.col(i) = riesz_representer(*space_, sensors_[static_cast<std::size_t>(i)]);
        computed_[static_cast<std::size_t>(i)] = 1;
      }
    });
    all_computed_ = true;
  }
  return reps_;
}

CoefficientVector ObservationSetup::project(const CoefficientVector& u) const {
  return w_basis.basis * (w_basis.basis.transpose() * space->apply_gram(u));
}

Vector ObservationSetup::w_coordinates(const CoefficientVector& u) const {
  return w_basis.basis.transpose() * space->apply_gram(u);
}

namespace {

ObservationSetup build_observation_impl(std::shared_ptr<const InnerProductSpace> space,
                                        std::vector<SensorDescriptor> sensors, Matrix reps) {
  ObservationSetup setup;
  setup.space = std::move(space);
  setup.sensors = std::move(sensors);
  setup.representers = std::move(reps);
  const Eigen::Index m = setup.representers.cols();
  if (m == 0) throw InvalidInputError("sensing.build_observation", "no sensors selected");
  setup.b = gram_matrix(*setup.space, setup.representers, setup.representers);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(setup.b);
  const double lam_max = eig.eigenvalues().maxCoeff();
  const double lam_min = eig.eigenvalues().minCoeff();
  if (lam_min <= 1e-12 * lam_max) {
    // Name the most correlated pair; with unit-norm representers B is the
    // correlation matrix.
    Eigen::Index bi = 0, bj = 1 % m;
    double best = -1.0;
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = i + 1; j < m; ++j)
        if (std::abs(setup.b(i, j)) > best) {
          best = std::abs(setup.b(i, j));
          bi = i;
          bj = j;
        }
    throw ConditioningError("sensing.build_observation",
                            "sensor functionals nearly dependent (pair " + std::to_string(bi) +
                                "," + std::to_string(bj) + " at x=" +
                                std::to_string(setup.sensors[static_cast<std::size_t>(bi)].x) +
                                "," + std::to_string(setup.sensors[static_cast<std::size_t>(bj)].x) +
                                ")");
  }
  setup.w_basis = orthonormalize(*setup.space, setup.representers);
  setup.b_llt.compute(setup.b);
  if (setup.b_llt.info() != Eigen::Success)
    throw SingularError("sensing.build_observation", "representer Gram factorization failed");
  return setup;
}

}  // namespace

ObservationSetup build_observation(const Dictionary& dict,
                                   const std::vector<Eigen::Index>& members) {
  if (members.empty()) throw InvalidInputError("sensing.build_observation", "no sensors selected");
  Matrix reps(dict.space().dim(), static_cast<Eigen::Index>(members.size()));
  std::vector<SensorDescriptor> sensors;
  sensors.reserve(members.size());
  for (std::size_t k = 0; k < members.size(); ++k) {
    reps.col(static_cast<Eigen::Index>(k)) = dict.representer(members[k]);
    sensors.push_back(dict.descriptor(members[k]));
  }
  return build_observation_impl(dict.shared_space(), std::move(sensors), std::move(reps));
}

ObservationSetup build_observation(std::shared_ptr<const InnerProductSpace> space,
                                   const std::vector<SensorDescriptor>& sensors) {
  if (sensors.empty()) throw InvalidInputError("sensing.build_observation", "no sensors selected");
  Matrix reps(space->dim(), static_cast<Eigen::Index>(sensors.size()));
  for (std::size_t k = 0; k < sensors.size(); ++k)
    reps.col(static_cast<Eigen::Index>(k)) = riesz_representer(*space, sensors[k]);
  return build_observation_impl(std::move(space), sensors, std::move(reps));
}

Measurement measure(const ObservationSetup& setup, const CoefficientVector& u) {
  if (u.size() != setup.space->dim())
    throw InvalidInputError("sensing.measure", "state dimension mismatch");
  Measurement out;
  out.z = setup.representers.transpose() * setup.space->apply_gram(u);
  out.w = setup.representers * setup.b_llt.solve(out.z);
  return out;
}

namespace {

CoefficientVector noise_direction(const ObservationSetup& setup, double eps_noise,
                                  std::uint64_t seed) {
  Rng rng(seed);
  const Vector xi = rng.unit_vector(setup.w_basis.dim());
  return setup.w_basis.basis * (eps_noise * xi);
}

}  // namespace

CoefficientVector add_noise(const ObservationSetup& setup, const CoefficientVector& w,
                            double eps_noise, std::uint64_t seed) {
  if (eps_noise < 0.0) throw InvalidInputError("sensing.add_noise", "noise level must be >= 0");
  if (eps_noise == 0.0) return w;
  return w + noise_direction(setup, eps_noise, seed);
}

Vector add_noise_z(const ObservationSetup& setup, const Vector& z, double eps_noise,
                   std::uint64_t seed) {
  if (eps_noise < 0.0) throw InvalidInputError("sensing.add_noise", "noise level must be >= 0");
  if (eps_noise == 0.0) return z;
  const CoefficientVector eta = noise_direction(setup, eps_noise, seed);
  return z + setup.representers.transpose() * setup.space->apply_gram(eta);
}

}  // namespace redinv
