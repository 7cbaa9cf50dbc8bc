#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <thread>
#include <vector>

#include "redinv/errors.hpp"

namespace redinv {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Deterministic random stream. Gaussians come from an explicit Box-Muller
// on top of mt19937_64 so the byte stream does not depend on the C++
// standard library's normal_distribution implementation.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform() {  // in [0,1)
    return (gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  Vector normal_vector(Eigen::Index n) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

  // Uniform direction on the unit sphere of R^n.
  Vector unit_vector(Eigen::Index n) {
    Vector v = normal_vector(n);
    double nrm = v.norm();
    while (nrm < 1e-300) {
      v = normal_vector(n);
      nrm = v.norm();
    }
    return v / nrm;
  }

  std::uint64_t raw() { return gen_(); }

private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

void check_finite(const Vector& v, const char* where);
void check_finite(const Matrix& m, const char* where);

// Runs fn(i) for i in [0,n). With threads > 1 the index range is split into
// contiguous blocks; fn must only write to slot i of preallocated storage,
// which keeps results identical to the serial order.
void parallel_for(Eigen::Index n, int threads, const std::function<void(Eigen::Index)>& fn);

// Global worker-pool size hint (CLI: --threads / REDINV_THREADS). Default 1.
int thread_count();
void set_thread_count(int n);

}  // namespace redinv
