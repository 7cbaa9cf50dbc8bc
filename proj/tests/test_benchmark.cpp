#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "redinv/benchmark.hpp"

using namespace redinv;
using testing::constant_model;
using testing::coordinate_setup;
using testing::euclidean;
using testing::standard_model;

TEST_CASE("measured-indistinguishability diameter") {
  const ParametricModel model = standard_model(63);
  const ObservationSetup setup = testing::even_point_setup(model.shared_space(), 6);
  const TrainingSet train =
      sample_training_set(model, std::vector<Eigen::Index>{5, 5});

  SUBCASE("huge threshold returns the snapshot-set diameter") {
    const auto rows = delta_tilde(train.snapshots, setup, {1e9});
    REQUIRE(rows.size() == 1);
    double diam = 0.0;
    for (Eigen::Index i = 0; i < train.size(); ++i)
      for (Eigen::Index j = i + 1; j < train.size(); ++j)
        diam = std::max(diam, model.space().norm(train.snapshots.col(i) -
                                                 train.snapshots.col(j)));
    CHECK(rows[0].delta == doctest::Approx(diam).epsilon(1e-12));
  }
  SUBCASE("zero threshold on distinct measurements returns zero") {
    const auto rows = delta_tilde(train.snapshots, setup, {0.0});
    CHECK(rows[0].delta == 0.0);
  }
  SUBCASE("monotone in sigma, framing interval is ordered") {
    const auto rows = delta_tilde(train.snapshots, setup, {0.01, 0.05, 0.1, 0.5});
    for (std::size_t k = 1; k < rows.size(); ++k)
      CHECK(rows[k].delta >= rows[k - 1].delta);
    for (const DeltaRow& r : rows) {
      CHECK(r.delta_2sigma >= r.delta);
      CHECK(r.frame_lo <= r.frame_hi + 1e-15);
      CHECK(r.frame_lo <= r.delta + 1e-15);
    }
  }
  SUBCASE("hand-built two-snapshot set switches at the projected gap") {
    auto space = euclidean(3);
    const ObservationSetup coords = coordinate_setup(space, 1);
    Matrix snaps(3, 2);
    // u - v = 0.1 e1 + sqrt(0.99) e2: full distance 1, measured gap 0.1.
    snaps.col(0).setZero();
    snaps.col(1) << 0.1, std::sqrt(0.99), 0.0;
    const auto rows = delta_tilde(snaps, coords, {0.05, 0.1});
    CHECK(rows[0].delta == 0.0);
    CHECK(rows[1].delta == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("oversized snapshot sets are refused") {
    Matrix big = Matrix::Zero(3, 5001);
    auto space = euclidean(3);
    CHECK_THROWS_AS(delta_tilde(big, coordinate_setup(space, 1), {0.1}),
                    InvalidInputError);
  }
}

TEST_CASE("minimal enclosing ball") {
  auto space = euclidean(2);

  SUBCASE("single point has radius zero") {
    Matrix p(2, 1);
    p << 1.0, 2.0;
    const ChebyshevBall ball = chebyshev_finite(*space, p);
    CHECK(ball.radius < 1e-12);
    CHECK((ball.center - p.col(0)).norm() < 1e-12);
  }
  SUBCASE("two points meet at the midpoint") {
    Matrix p(2, 2);
    p << 0.0, 2.0, 0.0, 0.0;
    const ChebyshevBall ball = chebyshev_finite(*space, p);
    CHECK(std::abs(ball.radius - 1.0) < 1e-10);
    CHECK(std::abs(ball.center[0] - 1.0) < 1e-10);
    CHECK(std::abs(ball.center[1]) < 1e-10);
  }
  SUBCASE("equilateral triangle: circumradius s/sqrt(3)") {
    const double s = 1.7;
    Matrix p(2, 3);
    p.col(0) << 0.0, 0.0;
    p.col(1) << s, 0.0;
    p.col(2) << 0.5 * s, s * std::sqrt(3.0) / 2.0;
    const ChebyshevBall ball = chebyshev_finite(*space, p);
    CHECK(ball.radius == doctest::Approx(s / std::sqrt(3.0)).epsilon(1e-8));
  }
  SUBCASE("radius is the exact covering radius and obeys diameter bounds") {
    Rng rng(19);
    for (int trial = 0; trial < 50; ++trial) {
      const Eigen::Index d = 2 + (trial % 4);
      const Eigen::Index count = 2 + (trial % 7);
      auto sp = euclidean(d);
      Matrix p(d, count);
      for (Eigen::Index j = 0; j < count; ++j) p.col(j) = rng.normal_vector(d);
      const ChebyshevBall ball = chebyshev_finite(*sp, p);
      double cover = 0.0, diam = 0.0;
      for (Eigen::Index j = 0; j < count; ++j) {
        cover = std::max(cover, (p.col(j) - ball.center).norm());
        for (Eigen::Index k = j + 1; k < count; ++k)
          diam = std::max(diam, (p.col(j) - p.col(k)).norm());
      }
      CHECK(ball.radius == doctest::Approx(cover).epsilon(1e-12));
      CHECK(ball.radius <= diam + 1e-9);
      CHECK(ball.radius >= 0.5 * diam - 1e-9);
    }
  }
  SUBCASE("point budget is enforced") {
    Matrix p = Matrix::Zero(2, 501);
    CHECK_THROWS_AS(chebyshev_finite(*space, p), InvalidInputError);
  }
}

TEST_CASE("held-out grid") {
  const ParametricModel model = standard_model(31);

  SUBCASE("midpoints of the training grid, one fewer per axis") {
    const TrainingSet t = held_out_grid(model, {5, 3});
    REQUIRE(t.size() == 4 * 2);
    for (Eigen::Index j = 0; j < t.size(); ++j)
      CHECK(model.box().contains(t.params.row(j).transpose(), 1e-12));
    // Axis 0 training nodes sit at -0.8 + 0.4k; midpoints at -0.6 + 0.4k.
    CHECK(t.params.col(0).minCoeff() == doctest::Approx(-0.6));
    CHECK(t.params.col(0).maxCoeff() == doctest::Approx(0.6));
    CHECK(t.params.col(1).minCoeff() == doctest::Approx(-0.4));
    CHECK(t.params.col(1).maxCoeff() == doctest::Approx(0.4));
  }
  SUBCASE("degenerate axis falls back to the center") {
    const TrainingSet t = held_out_grid(model, {1, 3});
    REQUIRE(t.size() == 2);
    CHECK(t.params(0, 0) == doctest::Approx(0.0));
  }
}

TEST_CASE("estimator comparison") {
  SUBCASE("constant manifold: every estimator is exact") {
    const ParametricModel flat = constant_model(63);
    const ObservationSetup setup = testing::even_point_setup(flat.shared_space(), 6);
    const TrainingSet train =
        sample_training_set(flat, std::vector<Eigen::Index>{3, 3});
    const TrainingSet test = held_out_grid(flat, {3, 3});
    BenchmarkConfig config;
    config.n = 1;
    config.recovery_iterations = 2000;
    config.sigmas = {0.1};
    const BenchmarkReport report =
        compare_estimators(flat, train, test, setup, config);
    REQUIRE(report.rows.size() == 5);
    for (const EstimatorRow& row : report.rows) {
      INFO(row.name);
      CHECK(row.worst <= 1e-8);
      CHECK(row.mean <= row.worst + 1e-15);
    }
    CHECK(report.train_size == 9);
    CHECK(report.test_size == 4);
    CHECK(report.family_cells == 1);
  }
  SUBCASE("row names, oracle dominance, determinism") {
    const ParametricModel model = standard_model(63);
    const ObservationSetup setup = testing::even_point_setup(model.shared_space(), 8);
    const TrainingSet train =
        sample_training_set(model, std::vector<Eigen::Index>{5, 5});
    const TrainingSet test = held_out_grid(model, {5, 5});
    BenchmarkConfig config;
    config.n = 3;
    config.recovery_iterations = 500;
    config.family.sigma = 1.0;
    config.sigmas = {0.05, 0.2};
    const BenchmarkReport a = compare_estimators(model, train, test, setup, config);
    const BenchmarkReport b = compare_estimators(model, train, test, setup, config);
    REQUIRE(a.rows.size() == 5);
    CHECK(a.rows[0].name == "pbdw_linear");
    CHECK(a.rows[1].name == "pbdw_affine");
    CHECK(a.rows[2].name == "affine_optimal");
    CHECK(a.rows[3].name == "piecewise_oracle");
    CHECK(a.rows[4].name == "piecewise_surrogate");
    for (std::size_t k = 0; k < a.rows.size(); ++k) {
      CHECK(a.rows[k].worst == b.rows[k].worst);
      CHECK(a.rows[k].mean == b.rows[k].mean);
      CHECK(a.rows[k].mean <= a.rows[k].worst + 1e-15);
    }
    CHECK(a.delta.size() == 2);
    CHECK(a.width_proxy.size() == static_cast<std::size_t>(config.width_proxy_n) + 1);
    // The oracle-selected family can only improve on the surrogate selection.
    CHECK(a.rows[3].worst <= a.rows[4].worst + 1e-12);
  }
}
