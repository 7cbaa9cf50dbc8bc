#include "redinv/benchmark.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "redinv/affine_recovery.hpp"
#include "redinv/util.hpp"

namespace redinv {

std::vector<DeltaRow> delta_tilde(const Matrix& snapshots, const ObservationSetup& setup,
                                  const std::vector<double>& sigmas) {
  const Eigen::Index j_total = snapshots.cols();
  if (j_total == 0) throw InvalidInputError("benchmark.delta_tilde", "empty snapshot set");
  if (j_total > 5000)
    throw InvalidInputError("benchmark.delta_tilde", "pair scan capped at 5000 snapshots");
  for (double s : sigmas)
    if (!(s >= 0.0))
      throw InvalidInputError("benchmark.delta_tilde", "sigma levels must be nonnegative");

  if (!setup.space)
    throw InvalidInputError("benchmark.delta_tilde", "setup missing its space");
  const InnerProductSpace& X = *setup.space;

  // Levels needed: every sigma and its double (for the framing interval).
  std::vector<double> levels;
  levels.reserve(2 * sigmas.size());
  for (double s : sigmas) {
    levels.push_back(s);
    levels.push_back(2.0 * s);
  }
  const Eigen::Index n_levels = static_cast<Eigen::Index>(levels.size());

  const Matrix gu = X.apply_gram(snapshots);
  Vector sq = Vector::Zero(j_total);
  for (Eigen::Index j = 0; j < j_total; ++j) sq[j] = snapshots.col(j).dot(gu.col(j));
  Matrix wc(setup.size(), j_total);
  for (Eigen::Index j = 0; j < j_total; ++j) wc.col(j) = setup.w_coordinates(snapshots.col(j));

  // Identical pairs always qualify, so every level's max starts at 0.
  Matrix level_max = Matrix::Zero(n_levels, j_total);
  parallel_for(j_total, thread_count(), [&](Eigen::Index j) {
    const Vector cross = snapshots.transpose() * gu.col(j);
    for (Eigen::Index l = j + 1; l < j_total; ++l) {
      const double dist2 = std::max(0.0, sq[j] + sq[l] - 2.0 * cross[l]);
      const double proj = (wc.col(l) - wc.col(j)).norm();
      for (Eigen::Index s = 0; s < n_levels; ++s) {
        const double lim = levels[static_cast<std::size_t>(s)];
        if (proj <= lim + 1e-12 * (1.0 + lim) && dist2 > level_max(s, j)) level_max(s, j) = dist2;
      }
    }
  });

  std::vector<DeltaRow> rows(sigmas.size());
  for (std::size_t s = 0; s < sigmas.size(); ++s) {
    DeltaRow& row = rows[s];
    row.sigma = sigmas[s];
    const Eigen::Index base = static_cast<Eigen::Index>(2 * s);
    row.delta = std::sqrt(level_max.row(base).maxCoeff());
    row.delta_2sigma = std::sqrt(level_max.row(base + 1).maxCoeff());
    row.frame_lo = std::max(0.0, row.delta_2sigma - 2.0 * row.sigma);
    row.frame_hi = row.delta_2sigma + 2.0 * row.sigma;
  }
  return rows;
}

ChebyshevBall chebyshev_finite(const InnerProductSpace& X, const Matrix& points) {
  const Eigen::Index j_total = points.cols();
  if (j_total == 0) throw InvalidInputError("benchmark.chebyshev", "empty point set");
  if (j_total > 500)
    throw InvalidInputError("benchmark.chebyshev", "enclosing ball capped at 500 points");

  ChebyshevBall ball;
  if (j_total == 1) {
    ball.center = points.col(0);
    return ball;
  }

  const Matrix k = points.transpose() * X.apply_gram(points);
  const Vector q = k.diagonal();
  const double scale = std::max(1.0, q.maxCoeff());

  Vector lam = Vector::Constant(j_total, 1.0 / static_cast<double>(j_total));
  Vector klam = k * lam;

  const Eigen::Index max_iter = 200000;
  Eigen::Index it = 0;
  double gap = 0.0;
  for (; it < max_iter; ++it) {
    const Vector grad = q - 2.0 * klam;
    const double lin = grad.dot(lam);
    // Frank-Wolfe vertex and away vertex on the support.
    Eigen::Index s = 0;
    grad.maxCoeff(&s);
    Eigen::Index a = -1;
    double worst = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < j_total; ++i)
      if (lam[i] > 0.0 && grad[i] < worst) {
        worst = grad[i];
        a = i;
      }
    const double gap_fw = grad[s] - lin;
    const double gap_away = lin - worst;
    gap = gap_fw;
    if (gap_fw <= 1e-13 * scale) break;

    if (gap_fw >= gap_away || lam[a] >= 1.0) {
      // d = e_s - lam
      const double curv = q[s] - 2.0 * klam[s] + lam.dot(klam);
      double step = curv > 1e-300 * scale ? gap_fw / (2.0 * curv) : 1.0;
      step = std::clamp(step, 0.0, 1.0);
      lam *= (1.0 - step);
      lam[s] += step;
      klam = (1.0 - step) * klam + step * k.col(s);
    } else {
      // d = lam - e_a, feasible up to the drop step
      const double curv = lam.dot(klam) - 2.0 * klam[a] + q[a];
      const double step_max = lam[a] / (1.0 - lam[a]);
      double step = curv > 1e-300 * scale ? gap_away / (2.0 * curv) : step_max;
      step = std::clamp(step, 0.0, step_max);
      const bool drop = step >= step_max * (1.0 - 1e-14);
      lam *= (1.0 + step);
      lam[a] -= step;
      if (drop) lam[a] = 0.0;
      klam = (1.0 + step) * klam - step * k.col(a);
    }
  }

  ball.iterations = it;
  ball.gap = gap;
  ball.center = points * lam;
  const double c2 = lam.dot(klam);
  double r2 = 0.0;
  for (Eigen::Index j = 0; j < j_total; ++j) r2 = std::max(r2, q[j] - 2.0 * klam[j] + c2);
  ball.radius = std::sqrt(std::max(0.0, r2));
  return ball;
}

TrainingSet held_out_grid(const ParametricModel& model,
                          const std::vector<Eigen::Index>& resolution) {
  const Eigen::Index d = model.box().dim();
  if (static_cast<Eigen::Index>(resolution.size()) != d)
    throw InvalidInputError("benchmark.held_out_grid", "one resolution entry per parameter");
  std::vector<std::vector<double>> axes(static_cast<std::size_t>(d));
  Eigen::Index total = 1;
  for (Eigen::Index i = 0; i < d; ++i) {
    const Eigen::Index r = resolution[static_cast<std::size_t>(i)];
    if (r < 1) throw InvalidInputError("benchmark.held_out_grid", "resolution must be >= 1");
    auto& axis = axes[static_cast<std::size_t>(i)];
    const double lo = model.box().lo[i], hi = model.box().hi[i];
    if (r == 1) {
      axis.push_back(0.5 * (lo + hi));
    } else {
      const double h = (hi - lo) / static_cast<double>(r - 1);
      for (Eigen::Index t = 0; t + 1 < r; ++t)
        axis.push_back(lo + (static_cast<double>(t) + 0.5) * h);
    }
    total *= static_cast<Eigen::Index>(axis.size());
  }
  Matrix params(total, d);
  for (Eigen::Index flat = 0; flat < total; ++flat) {
    Eigen::Index rem = flat;
    for (Eigen::Index i = d - 1; i >= 0; --i) {
      const auto& axis = axes[static_cast<std::size_t>(i)];
      const Eigen::Index r = static_cast<Eigen::Index>(axis.size());
      params(flat, i) = axis[static_cast<std::size_t>(rem % r)];
      rem /= r;
    }
  }
  return sample_training_set(model, params);
}

BenchmarkReport compare_estimators(const ParametricModel& model, const TrainingSet& train,
                                   const TrainingSet& test, const ObservationSetup& setup,
                                   const BenchmarkConfig& config) {
  if (train.size() == 0 || test.size() == 0)
    throw InvalidInputError("benchmark.compare", "train and test sets must be nonempty");
  if (config.n < 0 || config.n > setup.size())
    throw InvalidInputError("benchmark.compare", "need 0 <= n <= sensor count");
  if (config.noise < 0.0)
    throw InvalidInputError("benchmark.compare", "noise level must be nonnegative");

  const InnerProductSpace& X = model.space();
  const Eigen::Index t_total = test.size();

  // Shared measurements: one (possibly noisy) w per test point, fed to every
  // estimator so the rows are comparable.
  Matrix w_meas(model.dim(), t_total);
  for (Eigen::Index t = 0; t < t_total; ++t) {
    CoefficientVector w = setup.project(test.snapshots.col(t));
    if (config.noise > 0.0)
      w = add_noise(setup, w, config.noise, config.seed + static_cast<std::uint64_t>(t));
    w_meas.col(t) = w;
  }

  BenchmarkReport report;
  report.train_size = train.size();
  report.test_size = t_total;

  auto score = [&](const std::string& name, const Matrix& states) {
    EstimatorRow row;
    row.name = name;
    double sum = 0.0;
    for (Eigen::Index t = 0; t < t_total; ++t) {
      const double err = X.norm(test.snapshots.col(t) - states.col(t));
      row.worst = std::max(row.worst, err);
      sum += err;
    }
    row.mean = sum / static_cast<double>(t_total);
    report.rows.push_back(row);
  };

  // Linear PBDW on the greedy background space.
  const GreedyBasis gb = greedy_reduced_basis(X, train, config.n);
  {
    const PbdwOperator op = fit_pbdw(gb.basis, setup);
    Matrix states(model.dim(), t_total);
    for (Eigen::Index t = 0; t < t_total; ++t) states.col(t) = reconstruct(op, w_meas.col(t));
    score("pbdw_linear", states);
  }

  // Affine PBDW around the center snapshot.
  const CoefficientVector ubar = model.solve(model.box().center());
  {
    Matrix diffs = train.snapshots.colwise() - ubar;
    const GreedyBasis gd = greedy_reduced_basis(X, diffs, config.n);
    const AffinePbdw op = fit_affine_pbdw(gd.basis, setup, ubar);
    Matrix states(model.dim(), t_total);
    for (Eigen::Index t = 0; t < t_total; ++t) states.col(t) = reconstruct(op, w_meas.col(t));
    score("pbdw_affine", states);
  }

  // Optimal affine recovery trained on the snapshots.
  {
    const EpigraphProblem prob = build_problem(X, train.snapshots, setup, gb.basis);
    const PrimalDualResult pd = primal_dual_solve(prob, config.recovery_iterations);
    Matrix states(model.dim(), t_total);
    for (Eigen::Index t = 0; t < t_total; ++t)
      states.col(t) = apply(pd.map, setup.w_coordinates(w_meas.col(t)));
    score("affine_optimal", states);
  }

  // Piecewise family under both selection rules.
  {
    const AdmissibleFamily family = build_family(model, train, setup, config.family);
    report.family_cells = family.size();
    report.family_complete = family.complete;
    Matrix oracle(model.dim(), t_total), surrogate(model.dim(), t_total);
    for (Eigen::Index t = 0; t < t_total; ++t) {
      oracle.col(t) =
          estimate(family, model, train, setup, w_meas.col(t), Selection::Ideal).state;
      surrogate.col(t) =
          estimate(family, model, train, setup, w_meas.col(t), Selection::Surrogate).state;
    }
    score("piecewise_oracle", oracle);
    score("piecewise_surrogate", surrogate);
  }

  if (!config.sigmas.empty())
    report.delta = delta_tilde(train.snapshots, setup, config.sigmas);
  report.width_proxy = pod_width_proxy(X, train, config.width_proxy_n);
  return report;
}

}  // namespace redinv
