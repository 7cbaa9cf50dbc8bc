#include <doctest.h>

#include "helpers.hpp"
#include "redinv/space.hpp"

using namespace redinv;
using testing::euclidean;
using testing::standard_model;

TEST_CASE("reference gram matrix equals the hand-assembled hat stiffness") {
  const Eigen::Index n_h = 4;
  const ParametricModel model = testing::standard_model(n_h);
  const double h = 1.0 / static_cast<double>(n_h + 1);
  Matrix oracle = Matrix::Zero(n_h, n_h);
  for (Eigen::Index i = 0; i < n_h; ++i) {
    oracle(i, i) = 2.0 / h;
    if (i + 1 < n_h) {
      oracle(i, i + 1) = -1.0 / h;
      oracle(i + 1, i) = -1.0 / h;
    }
  }
  CHECK((model.space().gram() - oracle).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("gram_matrix basics") {
  auto X = euclidean(6);
  Rng rng(11);
  Matrix a(6, 3);
  for (Eigen::Index j = 0; j < 3; ++j) a.col(j) = rng.normal_vector(6);
  const Subspace on = orthonormalize(*X, a);

  SUBCASE("orthonormal basis against itself gives the identity") {
    const Matrix g = gram_matrix(*X, on.basis, on.basis);
    CHECK((g - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("single vector of norm 2 gives [[4]]") {
    Matrix v = Matrix::Zero(6, 1);
    v(2, 0) = 2.0;
    const Matrix g = gram_matrix(*X, v, v);
    CHECK(g(0, 0) == doctest::Approx(4.0).epsilon(1e-12));
  }
  SUBCASE("adjacent hat functions have stiffness inner product -1/h") {
    const Eigen::Index n_h = 9;
    const ParametricModel model = standard_model(n_h);
    const double h = model.mesh_h();
    Matrix e3 = Matrix::Zero(n_h, 1), e4 = Matrix::Zero(n_h, 1);
    e3(3, 0) = 1.0;
    e4(4, 0) = 1.0;
    CHECK(gram_matrix(model.space(), e3, e4)(0, 0) ==
          doctest::Approx(-1.0 / h).epsilon(1e-12));
  }
}

TEST_CASE("orthonormalize") {
  const ParametricModel model = standard_model(49);
  const InnerProductSpace& X = model.space();
  Rng rng(7);
  Matrix a(X.dim(), 5);
  for (Eigen::Index j = 0; j < 5; ++j) a.col(j) = rng.normal_vector(X.dim());

  SUBCASE("random 5-column input becomes G-orthonormal") {
    const Subspace on = orthonormalize(X, a);
    REQUIRE(on.dim() == 5);
    const Matrix g = gram_matrix(X, on.basis, on.basis);
    CHECK((g - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-10);
    // Same span: each original column projects onto itself.
    for (Eigen::Index j = 0; j < 5; ++j) {
      const CoefficientVector p = project(X, on, a.col(j));
      CHECK(X.norm(a.col(j) - p) < 1e-10 * X.norm(a.col(j)));
    }
  }
  SUBCASE("already orthonormal input is returned unchanged up to sign") {
    const Subspace on = orthonormalize(X, a);
    const Subspace again = orthonormalize(X, on.basis);
    CHECK((again.basis - on.basis).cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("duplicated column raises a rank error") {
    Matrix bad(X.dim(), 2);
    bad.col(0) = a.col(0);
    bad.col(1) = a.col(0);
    CHECK_THROWS_AS(orthonormalize(X, bad), RankError);
  }
  SUBCASE("dropping variant removes the dependent column instead") {
    Matrix bad(X.dim(), 3);
    bad.col(0) = a.col(0);
    bad.col(1) = a.col(0);
    bad.col(2) = a.col(1);
    const Subspace on = orthonormalize_dropping(X, bad);
    CHECK(on.dim() == 2);
  }
}

TEST_CASE("projection") {
  auto X = euclidean(8);
  Rng rng(3);
  Matrix a(8, 3);
  for (Eigen::Index j = 0; j < 3; ++j) a.col(j) = rng.normal_vector(8);
  const Subspace f = orthonormalize(*X, a);

  SUBCASE("member of the span projects to itself") {
    const CoefficientVector v = a.col(0) - 2.0 * a.col(2);
    CHECK(X->norm(v - project(*X, f, v)) < 1e-10 * X->norm(v));
  }
  SUBCASE("orthogonal vector projects to zero") {
    CoefficientVector v = rng.normal_vector(8);
    v -= project(*X, f, v);
    CHECK(X->norm(project(*X, f, v)) < 1e-10);
  }
  SUBCASE("idempotence and Pythagoras") {
    const CoefficientVector v = rng.normal_vector(8);
    const CoefficientVector p = project(*X, f, v);
    CHECK(X->norm(p - project(*X, f, p)) < 1e-10);
    const double nv2 = X->norm(v) * X->norm(v);
    const double split = X->norm(p) * X->norm(p) + X->norm(v - p) * X->norm(v - p);
    CHECK(split == doctest::Approx(nv2).epsilon(1e-10));
  }
}

TEST_CASE("inf-sup constant") {
  SUBCASE("W = V gives beta = 1") {
    const ParametricModel model = standard_model(29);
    const InnerProductSpace& X = model.space();
    Rng rng(5);
    Matrix a(X.dim(), 3);
    for (Eigen::Index j = 0; j < 3; ++j) a.col(j) = rng.normal_vector(X.dim());
    const Subspace v = orthonormalize(X, a);
    CHECK(inf_sup_beta(X, v, v) == doctest::Approx(1.0).epsilon(1e-10));
  }
  SUBCASE("orthogonal pair gives beta = 0") {
    auto X = euclidean(4);
    Matrix v = Matrix::Identity(4, 4).leftCols(1);
    Matrix w = Matrix::Identity(4, 4).middleCols(2, 1);
    CHECK(inf_sup_beta(*X, Subspace{v, true}, Subspace{w, true}) < 1e-12);
  }
  SUBCASE("plane rotation oracle: beta = cos(theta)") {
    auto X = euclidean(2);
    Matrix v(2, 1), w(2, 1);
    v << 1.0, 0.0;
    const double theta = M_PI / 3.0;
    w << std::cos(theta), std::sin(theta);
    CHECK(inf_sup_beta(*X, Subspace{v, true}, Subspace{w, true}) ==
          doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("basis-change invariance") {
    auto X = euclidean(10);
    Rng rng(17);
    Matrix v(10, 3), w(10, 5);
    for (Eigen::Index j = 0; j < 3; ++j) v.col(j) = rng.normal_vector(10);
    for (Eigen::Index j = 0; j < 5; ++j) w.col(j) = rng.normal_vector(10);
    const double b0 = inf_sup_beta(*X, Subspace{v}, Subspace{w});
    Matrix r(3, 3);
    for (Eigen::Index j = 0; j < 3; ++j) r.col(j) = rng.normal_vector(3);
    const double b1 = inf_sup_beta(*X, Subspace{v * r}, Subspace{w});
    CHECK(std::abs(b0 - b1) < 1e-10);
    CHECK(b0 >= 0.0);
    CHECK(b0 <= 1.0 + 1e-12);
  }
  SUBCASE("dim V > dim W forces beta = 0") {
    auto X = euclidean(5);
    Matrix v = Matrix::Identity(5, 5).leftCols(3);
    Matrix w = Matrix::Identity(5, 5).leftCols(2);
    CHECK(inf_sup_beta(*X, Subspace{v, true}, Subspace{w, true}) == 0.0);
  }
  SUBCASE("brute force over random unit vectors stays above the eigenvalue answer") {
    auto X = euclidean(12);
    Rng rng(23);
    Matrix v(12, 4), w(12, 6);
    for (Eigen::Index j = 0; j < 4; ++j) v.col(j) = rng.normal_vector(12);
    for (Eigen::Index j = 0; j < 6; ++j) w.col(j) = rng.normal_vector(12);
    const Subspace von = orthonormalize(*X, v);
    const Subspace won = orthonormalize(*X, w);
    const double beta = inf_sup_beta(*X, von, won);
    double brute = 2.0;
    for (int trial = 0; trial < 2000; ++trial) {
      const CoefficientVector u = von.basis * rng.unit_vector(4);
      brute = std::min(brute, X->norm(project(*X, won, u)));
    }
    CHECK(brute >= beta - 1e-8);
  }
  SUBCASE("minimizer attains the reported value") {
    auto X = euclidean(9);
    Rng rng(29);
    Matrix v(9, 3), w(9, 4);
    for (Eigen::Index j = 0; j < 3; ++j) v.col(j) = rng.normal_vector(9);
    for (Eigen::Index j = 0; j < 4; ++j) w.col(j) = rng.normal_vector(9);
    const Subspace won = orthonormalize(*X, w);
    const InfSupResult r = inf_sup(*X, Subspace{v}, won);
    CHECK(X->norm(r.minimizer) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(X->norm(project(*X, won, r.minimizer)) == doctest::Approx(r.beta).epsilon(1e-8));
  }
}

TEST_CASE("stability constant sentinel") {
  CHECK(stability_mu(0.5) == doctest::Approx(2.0));
  CHECK(std::isinf(stability_mu(0.0)));
  CHECK(std::isinf(stability_mu(1e-15)));
}

TEST_CASE("subspace sum deflates the second basis") {
  auto X = euclidean(7);
  Rng rng(31);
  Matrix a(7, 2), b(7, 3);
  for (Eigen::Index j = 0; j < 2; ++j) a.col(j) = rng.normal_vector(7);
  b.col(0) = a.col(0);  // dependent
  b.col(1) = rng.normal_vector(7);
  b.col(2) = rng.normal_vector(7);
  const Subspace sum = subspace_sum(*X, orthonormalize(*X, a), Subspace{b});
  CHECK(sum.dim() == 4);
  const Matrix g = gram_matrix(*X, sum.basis, sum.basis);
  CHECK((g - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-10);
}
