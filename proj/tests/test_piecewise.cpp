#include <doctest.h>

#include <cmath>
#include <numeric>

#include "helpers.hpp"
#include "redinv/piecewise.hpp"

using namespace redinv;
using testing::constant_model;
using testing::standard_model;

namespace {

struct Bed {
  ParametricModel model = standard_model(127);
  ObservationSetup setup = testing::even_point_setup(model.shared_space(), 10);
  TrainingSet train =
      sample_training_set(model, std::vector<Eigen::Index>{9, 9});
};

ParameterBox half_box(const ParameterBox& domain, Eigen::Index axis, bool upper) {
  Vector lo = domain.lo, hi = domain.hi;
  const double mid = 0.5 * (lo[axis] + hi[axis]);
  (upper ? lo[axis] : hi[axis]) = mid;
  return ParameterBox(lo, hi);
}

double box_volume(const ParameterBox& box) {
  return (box.hi - box.lo).prod();
}

}  // namespace

TEST_CASE("cell membership partitions the grid") {
  const Bed bed;
  const ParameterBox& domain = bed.model.box();
  const ParameterBox left = half_box(domain, 0, false);
  const ParameterBox right = half_box(domain, 0, true);
  const auto in_left = cell_members(bed.train, left, domain);
  const auto in_right = cell_members(bed.train, right, domain);

  // Every training point lands in exactly one half.
  CHECK(in_left.size() + in_right.size() ==
        static_cast<std::size_t>(bed.train.size()));
  std::vector<char> hit(bed.train.size(), 0);
  for (Eigen::Index i : in_left) hit[i] += 1;
  for (Eigen::Index i : in_right) hit[i] += 1;
  for (char h : hit) CHECK(h == 1);

  // The 9x9 grid has a column exactly on the shared face x0 = 0: it belongs
  // to the lower (left) cell.
  for (Eigen::Index i : in_left) CHECK(bed.train.params(i, 0) <= 0.0 + 1e-14);
  for (Eigen::Index i : in_right) CHECK(bed.train.params(i, 0) > 0.0);
  std::size_t on_face = 0;
  for (Eigen::Index i : in_left)
    if (std::abs(bed.train.params(i, 0)) < 1e-14) ++on_face;
  CHECK(on_face == 9);
}

TEST_CASE("cell ladders") {
  const Bed bed;
  const FamilyConfig config;

  SUBCASE("root cell: mu starts at one, eps nonincreasing, center snapshot") {
    Cell cell = build_cell(bed.model, bed.train, bed.model.box(), 0, bed.setup, config);
    REQUIRE(cell.ladder_size() >= 1);
    CHECK(cell.mu[0] == 1.0);
    for (std::size_t k = 1; k < cell.eps.size(); ++k)
      CHECK(cell.eps[k] <= cell.eps[k - 1] + 1e-12);
    CHECK((cell.ubar - bed.model.solve(bed.model.box().center())).cwiseAbs().maxCoeff() <
          1e-12);
    CHECK(cell.train_idx.size() == static_cast<std::size_t>(bed.train.size()));
    // Ladder rungs never exceed the sensor count.
    CHECK(cell.ladder_size() <= bed.setup.size() + 1);
  }
  SUBCASE("constant manifold collapses at the first rung") {
    const ParametricModel flat = constant_model(63);
    const ObservationSetup setup = testing::even_point_setup(flat.shared_space(), 4);
    const TrainingSet train =
        sample_training_set(flat, std::vector<Eigen::Index>{3, 3});
    Cell cell = build_cell(flat, train, flat.box(), 0, setup, config);
    CHECK(cell.eps[0] < 1e-10);
    cell_tau(cell, config);
    CHECK(cell.tau < 1e-9);
    CHECK(cell.chosen_n == 0);
  }
  SUBCASE("empty local training set degrades to a center-only cell") {
    Vector lo(2), hi(2);
    lo << 0.71, 0.71;
    hi << 0.79, 0.79;  // strictly between grid columns of the 9x9 grid
    Cell cell = build_cell(bed.model, bed.train, ParameterBox(lo, hi), 3, bed.setup,
                           config);
    CHECK(cell.train_idx.empty());
    CHECK(cell.ladder_size() == 1);
    CHECK(cell.eps[0] == 0.0);
  }
}

TEST_CASE("acceptance functional arithmetic") {
  Cell cell;
  cell.eps = {0.5, 0.1};
  cell.mu = {1.0, 20.0};

  SUBCASE("sigma mode takes the min of mu*eps, ties toward smaller n") {
    FamilyConfig config;
    config.mode = TauMode::Sigma;
    const double tau = cell_tau(cell, config);
    CHECK(tau == doctest::Approx(0.5));  // min(1*0.5, 20*0.1) = 0.5 at n = 0
    CHECK(cell.chosen_n == 0);
    config.sigma = 0.6;
    CHECK(cell_passes(cell, config));
    config.sigma = 0.4;
    CHECK(!cell_passes(cell, config));
  }
  SUBCASE("two-target mode normalizes both columns") {
    FamilyConfig config;
    config.mode = TauMode::EpsMu;
    config.eps = 0.1;
    config.mu = 25.0;
    const double tau = cell_tau(cell, config);
    // n=0: max(1/25, 0.5/0.1) = 5; n=1: max(20/25, 0.1/0.1) = 1.
    CHECK(tau == doctest::Approx(1.0));
    CHECK(cell.chosen_n == 1);
    CHECK(cell_passes(cell, config));
    config.mu = 15.0;  // n=1 now max(4/3, 1) = 4/3 > 1
    cell_tau(cell, config);
    CHECK(!cell_passes(cell, config));
  }
  SUBCASE("unstable rungs are skipped") {
    Cell c;
    c.eps = {0.5, 1e-6};
    c.mu = {1.0, std::numeric_limits<double>::infinity()};
    FamilyConfig config;
    config.mode = TauMode::Sigma;
    CHECK(cell_tau(c, config) == doctest::Approx(0.5));
    CHECK(c.chosen_n == 0);
  }
}

TEST_CASE("cell splitting") {
  const Bed bed;
  FamilyConfig config;
  const Cell root =
      build_cell(bed.model, bed.train, bed.model.box(), 0, bed.setup, config);

  SUBCASE("full dyadic split makes 2^d children covering the parent") {
    config.strategy = SplitStrategy::FullDyadic;
    const auto kids = split_cell(bed.model, bed.train, root, bed.setup, config);
    REQUIRE(kids.size() == 4);
    double vol = 0.0;
    std::size_t members = 0;
    for (const Cell& k : kids) {
      CHECK(k.level == 1);
      vol += box_volume(k.box);
      members += k.train_idx.size();
    }
    CHECK(std::abs(vol - box_volume(root.box)) < 1e-12);
    CHECK(members == root.train_idx.size());
  }
  SUBCASE("greedy split at an even level is forced onto the cyclic axis") {
    config.strategy = SplitStrategy::GreedyCoordinate;
    const auto kids = split_cell(bed.model, bed.train, root, bed.setup, config);
    REQUIRE(kids.size() == 2);
    // level 0: forced axis (0/2) % 2 = 0.
    CHECK(kids[0].box.hi[0] == doctest::Approx(0.0));
    CHECK(kids[1].box.lo[0] == doctest::Approx(0.0));
    CHECK(kids[0].box.lo[1] == doctest::Approx(-0.8));
    CHECK(kids[0].box.hi[1] == doctest::Approx(0.8));
  }
  SUBCASE("one-dimensional cells bisect under either strategy") {
    const ParametricModel line = testing::line_model(63);
    const ObservationSetup setup = testing::even_point_setup(line.shared_space(), 6);
    const TrainingSet train =
        sample_training_set(line, std::vector<Eigen::Index>{17});
    const Cell r = build_cell(line, train, line.box(), 0, setup, config);
    for (SplitStrategy s : {SplitStrategy::FullDyadic, SplitStrategy::GreedyCoordinate}) {
      FamilyConfig c;
      c.strategy = s;
      const auto kids = split_cell(line, train, r, setup, c);
      REQUIRE(kids.size() == 2);
      CHECK(kids[0].box.hi[0] == doctest::Approx(0.0));
      CHECK(kids[1].box.lo[0] == doctest::Approx(0.0));
    }
  }
  SUBCASE("splitting below the training grid spacing starves") {
    Vector lo(2), hi(2);
    lo << 0.0, 0.0;
    hi << 0.1, 0.1;  // half-width 0.05 < grid spacing 0.2 of the 9x9 grid
    Cell tiny = build_cell(bed.model, bed.train, ParameterBox(lo, hi), 5, bed.setup,
                           config);
    CHECK_THROWS_AS(split_cell(bed.model, bed.train, tiny, bed.setup, config),
                    StarvationError);
  }
}

TEST_CASE("family construction") {
  const Bed bed;

  SUBCASE("a huge tolerance keeps the root as the single cell") {
    FamilyConfig config;
    config.sigma = 1e6;
    const AdmissibleFamily fam = build_family(bed.model, bed.train, bed.setup, config);
    CHECK(fam.size() == 1);
    CHECK(fam.complete);
    CHECK(fam.cells[0].level == 0);
    CHECK(partition_defect(fam) < 1e-12);
  }
  SUBCASE("a constant manifold needs one cell at any tolerance") {
    const ParametricModel flat = constant_model(63);
    const ObservationSetup setup = testing::even_point_setup(flat.shared_space(), 4);
    const TrainingSet train =
        sample_training_set(flat, std::vector<Eigen::Index>{3, 3});
    FamilyConfig config;
    config.sigma = 1e-8;
    const AdmissibleFamily fam = build_family(flat, train, setup, config);
    CHECK(fam.size() == 1);
    CHECK(fam.complete);
  }
  SUBCASE("tightening the tolerance never shrinks the family") {
    // Cap the local dimension at 2: the bed's solution set spans only three
    // directions, so an uncapped ladder would capture it exactly at the root
    // and no tolerance could ever force a split.
    Eigen::Index prev = 0;
    double prev_defect = 0.0;
    for (double sigma : {2.0, 0.5, 0.3}) {
      FamilyConfig config;
      config.sigma = sigma;
      config.max_cells = 256;
      config.max_n = 2;
      const AdmissibleFamily fam =
          build_family(bed.model, bed.train, bed.setup, config);
      CHECK(fam.complete);
      CHECK(fam.size() >= prev);
      prev = fam.size();
      prev_defect = partition_defect(fam);
      CHECK(prev_defect < 1e-10);
      for (const Cell& c : fam.cells) CHECK(c.tau <= sigma * (1.0 + 1e-12));
    }
    CHECK(prev >= 2);  // the tight tolerance forces at least one split
  }
  SUBCASE("cell budget truncates the refinement") {
    FamilyConfig config;
    config.sigma = 1e-4;
    config.max_cells = 1;
    config.max_n = 2;  // keep the root from capturing the rank-3 bed exactly
    const AdmissibleFamily fam = build_family(bed.model, bed.train, bed.setup, config);
    CHECK(!fam.complete);
    CHECK(fam.size() == 1);
  }
}

TEST_CASE("piecewise estimation") {
  const Bed bed;
  FamilyConfig config;
  config.sigma = 0.5;
  config.max_cells = 128;
  const AdmissibleFamily fam = build_family(bed.model, bed.train, bed.setup, config);
  REQUIRE(fam.complete);

  SUBCASE("single-cell family reproduces the plain affine estimator") {
    FamilyConfig loose;
    loose.sigma = 1e6;
    const AdmissibleFamily one = build_family(bed.model, bed.train, bed.setup, loose);
    REQUIRE(one.size() == 1);
    const Cell& cell = one.cells[0];
    const CoefficientVector u = bed.model.solve(bed.model.box().center() * 0.37);
    const CoefficientVector w = bed.setup.project(u);
    const FamilyEstimate est =
        estimate(one, bed.model, bed.train, bed.setup, w, Selection::Surrogate);
    Subspace local{cell.basis.leftCols(cell.chosen_n), true};
    const AffinePbdw op = fit_affine_pbdw(local, bed.setup, cell.ubar);
    CHECK((est.state - reconstruct(op, w)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(est.chosen_cell == 0);
  }
  SUBCASE("owning cell satisfies its certified bound on training snapshots") {
    for (Eigen::Index j : {0L, 17L, 40L, 63L, 80L}) {
      const CoefficientVector u = bed.train.snapshots.col(j);
      const CoefficientVector w = bed.setup.project(u);
      const FamilyEstimate est = estimate(fam, bed.model, bed.train, bed.setup, w,
                                          Selection::Surrogate, &u);
      const Vector y = bed.train.params.row(j).transpose();
      for (Eigen::Index k = 0; k < fam.size(); ++k) {
        const bool owns = !cell_members(bed.train, fam.cells[k].box, fam.domain)
                               .empty() &&
                          fam.cells[k].box.contains(y, 1e-12);
        if (!owns) continue;
        const CellEstimate& d = est.diagnostics[k];
        if (!d.usable) continue;
        const double bound =
            fam.cells[k].mu[d.n] * fam.cells[k].eps[d.n] * (1.0 + 1e-8);
        CHECK(d.error_truth <= bound + 1e-12);
      }
    }
  }
  SUBCASE("noise degrades the estimate by at most 3 mu eps_noise") {
    const CoefficientVector u = bed.model.solve(bed.model.box().center() * 0.61);
    const CoefficientVector w = bed.setup.project(u);
    const FamilyEstimate clean = estimate(fam, bed.model, bed.train, bed.setup, w,
                                          Selection::Surrogate, &u);
    const double clean_err = bed.model.space().norm(clean.state - u);
    const double eps_noise = 1e-3;
    const CoefficientVector wn = add_noise(bed.setup, w, eps_noise, 5);
    const FamilyEstimate noisy = estimate(fam, bed.model, bed.train, bed.setup, wn,
                                          Selection::Surrogate, &u);
    const double noisy_err = bed.model.space().norm(noisy.state - u);
    double worst_mu = 0.0;
    for (const Cell& c : fam.cells) worst_mu = std::max(worst_mu, c.mu[c.chosen_n]);
    CHECK(noisy_err <= clean_err + 3.0 * worst_mu * eps_noise);
  }
  SUBCASE("oracle selection never loses to the surrogate on the truth metric") {
    Rng rng(23);
    for (int trial = 0; trial < 5; ++trial) {
      Vector y(2);
      y << rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8);
      const CoefficientVector u = bed.model.solve(y);
      const CoefficientVector w = bed.setup.project(u);
      const FamilyEstimate ideal = estimate(fam, bed.model, bed.train, bed.setup, w,
                                            Selection::Ideal, &u);
      CHECK(ideal.chosen_cell >= 0);
      CHECK(ideal.selection == Selection::Ideal);
      CHECK(std::isfinite(bed.model.space().norm(ideal.state - u)));
    }
  }
  SUBCASE("an all-unstable family is refused") {
    // Hand-built single cell whose one-rung ladder forces an unstable fit:
    // chosen_n exceeds the sensor count, so every candidate is skipped.
    const ObservationSetup tiny = testing::even_point_setup(bed.model.shared_space(), 2);
    AdmissibleFamily broken;
    broken.domain = bed.model.box();
    broken.config = config;
    Cell cell = build_cell(bed.model, bed.train, bed.model.box(), 0, tiny, config);
    cell.chosen_n = 3;  // > m = 2 sensors: the local fit cannot be formed
    broken.cells.push_back(cell);
    const CoefficientVector u = bed.train.snapshots.col(1);
    CHECK_THROWS_AS(estimate(broken, bed.model, bed.train, tiny, tiny.project(u),
                             Selection::Surrogate),
                    Error);
  }
}
