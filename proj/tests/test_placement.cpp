#include <doctest.h>

#include <Eigen/QR>

#include <cmath>
#include <set>

#include "helpers.hpp"
#include "redinv/forward.hpp"
#include "redinv/placement.hpp"

using namespace redinv;
using testing::standard_model;

namespace {

struct Bed {
  ParametricModel model = standard_model(127);
  std::shared_ptr<const InnerProductSpace> space = model.shared_space();
  Dictionary dict = Dictionary::point_grid(space, 63);
  Subspace vn;

  explicit Bed(Eigen::Index n) { vn = fourier_subspace(*space, n); }
};

void common_checks(const GreedyRun& run, Eigen::Index n, Eigen::Index dict_size) {
  REQUIRE(run.size() >= 1);
  REQUIRE(run.rm_history.size() == static_cast<std::size_t>(run.size()) + 1);
  REQUIRE(run.beta_history.size() == run.rm_history.size());
  CHECK(run.rm_history[0] == doctest::Approx(static_cast<double>(n)));
  CHECK(run.beta_history[0] == 0.0);
  std::set<Eigen::Index> seen;
  for (Eigen::Index i : run.selected) {
    CHECK(i >= 0);
    CHECK(i < dict_size);
    CHECK(seen.insert(i).second);  // no repeats
  }
  for (double rm : run.rm_history) CHECK(rm >= -1e-12);
  for (std::size_t k = 1; k < run.rm_history.size(); ++k)
    CHECK(run.rm_history[k] <= run.rm_history[k - 1] + 1e-10);
  for (double b : run.beta_history) {
    CHECK(b >= -1e-12);
    CHECK(b <= 1.0 + 1e-12);
  }
}

}  // namespace

TEST_CASE("collective greedy placement") {
  const Bed bed(3);

  SUBCASE("histories, ranges, distinct picks") {
    const GreedyRun run = collective_omp(bed.vn, bed.dict, 0.5, 1.0, 40);
    common_checks(run, 3, bed.dict.size());
    CHECK(run.reached);
    CHECK(run.beta_history.back() >= 0.5 - 1e-12);
    // A tighter budget stops exactly at the target crossing: all earlier
    // betas are below it.
    for (std::size_t k = 0; k + 1 < run.beta_history.size(); ++k)
      CHECK(run.beta_history[k] < 0.5);
  }
  SUBCASE("unreachable target exhausts the budget") {
    const GreedyRun run = collective_omp(bed.vn, bed.dict, 0.999999, 1.0, 4);
    CHECK(!run.reached);
    CHECK(run.size() == 4);
  }
  SUBCASE("single basis function: its own best sensor nails it") {
    // V_1 = span(phi_1); the residual quantity collapses once W captures it.
    const Subspace v1 = fourier_subspace(*bed.space, 1);
    const GreedyRun run = collective_omp(v1, bed.dict, 0.999, 1.0, 40);
    common_checks(run, 1, bed.dict.size());
    // With n = 1, each added sensor monotonically improves beta toward 1.
    CHECK(run.beta_history.back() >= 0.9);
  }
  SUBCASE("relaxed kappa stays deterministic and within bound guarantees") {
    const GreedyRun a = collective_omp(bed.vn, bed.dict, 0.6, 0.9, 40);
    const GreedyRun b = collective_omp(bed.vn, bed.dict, 0.6, 0.9, 40);
    CHECK(a.selected == b.selected);
    CHECK(a.kappa == 0.9);
  }
  SUBCASE("basis rotation leaves the residual history invariant") {
    Rng rng(31);
    Matrix q = Matrix::NullaryExpr(3, 3, [&](Eigen::Index, Eigen::Index) {
      return rng.normal();
    });
    const Eigen::HouseholderQR<Matrix> qr(q);
    const Matrix rot = qr.householderQ();
    Subspace rotated{bed.vn.basis * rot, true};
    const GreedyRun a = collective_omp(bed.vn, bed.dict, 0.7, 1.0, 40);
    const GreedyRun b = collective_omp(rotated, bed.dict, 0.7, 1.0, 40);
    REQUIRE(a.rm_history.size() == b.rm_history.size());
    for (std::size_t k = 0; k < a.rm_history.size(); ++k) {
      CHECK(a.rm_history[k] == doctest::Approx(b.rm_history[k]).epsilon(1e-8));
      CHECK(a.beta_history[k] == doctest::Approx(b.beta_history[k]).epsilon(1e-8));
    }
  }
}

TEST_CASE("worst-case greedy placement") {
  const Bed bed(3);

  SUBCASE("histories, ranges, distinct picks") {
    const GreedyRun run = worst_case_omp(bed.vn, bed.dict, 0.5, 1.0, 40);
    common_checks(run, 3, bed.dict.size());
    CHECK(run.reached);
  }
  SUBCASE("n = 1 coincides with the collective variant") {
    const Subspace v1 = fourier_subspace(*bed.space, 1);
    const GreedyRun a = collective_omp(v1, bed.dict, 0.9, 1.0, 30);
    const GreedyRun b = worst_case_omp(v1, bed.dict, 0.9, 1.0, 30);
    CHECK(a.selected == b.selected);
    REQUIRE(a.rm_history.size() == b.rm_history.size());
    for (std::size_t k = 0; k < a.rm_history.size(); ++k)
      CHECK(a.rm_history[k] == doctest::Approx(b.rm_history[k]).epsilon(1e-10));
  }
}

TEST_CASE("residual decay controls the stability constant") {
  const Bed bed(4);
  const GreedyRun run = collective_omp(bed.vn, bed.dict, 0.95, 1.0, 60);
  for (std::size_t k = 1; k < run.rm_history.size(); ++k) {
    const double beta = run.beta_history[k];
    const double sigma = std::sqrt(std::max(0.0, 1.0 - beta * beta));
    // sigma_m^2 = 1 - beta_m^2 <= r_m for the collective variant.
    CHECK(sigma * sigma <= run.rm_history[k] + 1e-10);
    // Contrapositive: r_m small forces beta large.
    if (run.rm_history[k] <= 1.0 - 0.81)
      CHECK(beta >= 0.9 - 1e-10);
  }
}

TEST_CASE("setup extraction from a run") {
  const Bed bed(2);
  const GreedyRun run = collective_omp(bed.vn, bed.dict, 0.6, 1.0, 30);
  const ObservationSetup setup = observation_from_run(bed.dict, run);
  REQUIRE(setup.size() == run.size());
  for (Eigen::Index i = 0; i < setup.size(); ++i) {
    CHECK(setup.sensors[i].x ==
          doctest::Approx(bed.dict.descriptor(run.selected[i]).x));
    CHECK((setup.representers.col(i) - bed.dict.representer(run.selected[i]))
              .cwiseAbs()
              .maxCoeff() < 1e-14);
  }
  // The final beta in the run matches a fresh inf-sup computation.
  const double beta = inf_sup_beta(*bed.space, bed.vn, setup.w_basis);
  CHECK(beta == doctest::Approx(run.beta_history.back()).epsilon(1e-8));
}

TEST_CASE("sine basis and its curvature constant") {
  const Bed bed(1);

  SUBCASE("basis is orthonormal and has the right shape") {
    const Subspace v = fourier_subspace(*bed.space, 5);
    REQUIRE(v.dim() == 5);
    const Matrix gram =
        v.basis.transpose() * bed.space->gram() * v.basis;
    CHECK((gram - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-10);
    // First column is proportional to sin(pi x), positive at the midpoint.
    const Eigen::Index mid = (bed.model.dim() - 1) / 2;
    CHECK(v.basis(mid, 0) > 0.0);
  }
  SUBCASE("smallest case has the closed-form value 2*sqrt(2)") {
    CHECK(std::abs(fourier_j_constant(1) - 2.0 * std::sqrt(2.0)) < 1e-6);
  }
  SUBCASE("growth: at least sqrt(n), comparable to n^1.5") {
    const double ref = fourier_j_constant(10) / std::pow(10.0, 1.5);
    for (Eigen::Index n = 1; n <= 20; ++n) {
      const double j = fourier_j_constant(n);
      CHECK(j >= std::sqrt(static_cast<double>(n)) - 1e-9);
      if (n >= 5) {
        const double ratio = j / std::pow(static_cast<double>(n), 1.5) / ref;
        CHECK(ratio > 0.8);
        CHECK(ratio < 1.2);
      }
    }
  }
}
