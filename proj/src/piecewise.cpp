#include "redinv/piecewise.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>

#include "redinv/util.hpp"

namespace redinv {

namespace {

// Shared-face ownership: closed at the top, open at the bottom, except that
// the domain's own lower face stays closed. Exactly one cell of a partition
// owns any grid point, and it is the lexicographically lower one.
bool owns_point(const ParameterBox& box, const ParameterBox& domain, const Vector& y) {
  for (Eigen::Index i = 0; i < box.dim(); ++i) {
    const double tol = 1e-9 * (domain.hi[i] - domain.lo[i]);
    if (y[i] > box.hi[i] + tol) return false;
    const bool at_domain_floor = box.lo[i] <= domain.lo[i] + tol;
    if (at_domain_floor) {
      if (y[i] < box.lo[i] - tol) return false;
    } else {
      if (y[i] <= box.lo[i] + tol) return false;
    }
  }
  return true;
}

double box_volume(const ParameterBox& box) {
  double v = 1.0;
  for (Eigen::Index i = 0; i < box.dim(); ++i) v *= std::max(0.0, box.hi[i] - box.lo[i]);
  return v;
}

// Per-axis spacing of the tensor training grid; 0 when the training set was
// given as explicit points (the guard then never fires and the cell budget
// alone bounds refinement).
Vector grid_spacing(const TrainingSet& training, const ParameterBox& domain) {
  Vector delta = Vector::Zero(domain.dim());
  if (training.resolution.size() != static_cast<std::size_t>(domain.dim())) return delta;
  for (Eigen::Index i = 0; i < domain.dim(); ++i) {
    const double width = domain.hi[i] - domain.lo[i];
    const auto r = training.resolution[static_cast<std::size_t>(i)];
    delta[i] = r >= 2 ? width / static_cast<double>(r - 1) : width;
  }
  return delta;
}

void check_axis_splittable(const Cell& cell, const Vector& delta, Eigen::Index axis) {
  const double child_width = 0.5 * (cell.box.hi[axis] - cell.box.lo[axis]);
  if (child_width < delta[axis] * (1.0 - 1e-12))
    throw StarvationError(
        "piecewise.split",
        "cell at level " + std::to_string(cell.level) + " is thinner than the training grid "
        "along axis " + std::to_string(axis) + "; use a denser training grid");
}

std::pair<ParameterBox, ParameterBox> bisect(const ParameterBox& box, Eigen::Index axis) {
  ParameterBox lo = box, hi = box;
  const double mid = 0.5 * (box.lo[axis] + box.hi[axis]);
  lo.hi[axis] = mid;
  hi.lo[axis] = mid;
  return {lo, hi};
}

}  // namespace

std::vector<Eigen::Index> cell_members(const TrainingSet& training, const ParameterBox& box,
                                       const ParameterBox& domain) {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index j = 0; j < training.size(); ++j)
    if (owns_point(box, domain, training.params.row(j).transpose())) idx.push_back(j);
  return idx;
}

Cell build_cell(const ParametricModel& model, const TrainingSet& training,
                const ParameterBox& box, int level, const ObservationSetup& setup,
                const FamilyConfig& config) {
  Cell cell;
  cell.box = box;
  cell.level = level;
  cell.center = box.center();
  cell.ubar = model.solve(cell.center);
  cell.train_idx = cell_members(training, box, model.box());

  const InnerProductSpace& X = *setup.space;
  const Eigen::Index j_local = static_cast<Eigen::Index>(cell.train_idx.size());
  if (j_local == 0) {
    cell.basis.resize(model.dim(), 0);
    cell.eps.assign(1, 0.0);
    cell.mu.assign(1, 1.0);
    return cell;
  }

  Matrix diffs(model.dim(), j_local);
  for (Eigen::Index t = 0; t < j_local; ++t)
    diffs.col(t) = training.snapshots.col(cell.train_idx[static_cast<std::size_t>(t)]) - cell.ubar;

  // The center snapshot joins the local set as the (zero) offset itself, so
  // the ladder caps at n = #local points; the sensor count caps it further.
  Eigen::Index n_cap = config.max_n >= 0 ? config.max_n : setup.size();
  n_cap = std::min({n_cap, j_local, setup.size()});

  const GreedyBasis greedy = greedy_reduced_basis(X, diffs, n_cap);
  cell.basis = greedy.basis.basis;
  cell.eps = greedy.error_history;
  cell.mu.assign(cell.eps.size(), 1.0);
  for (Eigen::Index n = 1; n < cell.ladder_size(); ++n) {
    const Subspace vn{cell.basis.leftCols(n), true};
    cell.mu[static_cast<std::size_t>(n)] = stability_mu(inf_sup(X, vn, setup.w_basis).beta);
  }
  return cell;
}

double cell_tau(Cell& cell, const FamilyConfig& config) {
  double best = std::numeric_limits<double>::infinity();
  Eigen::Index best_n = 0;
  for (Eigen::Index n = 0; n < cell.ladder_size(); ++n) {
    const double mu_n = cell.mu[static_cast<std::size_t>(n)];
    const double eps_n = cell.eps[static_cast<std::size_t>(n)];
    if (!std::isfinite(mu_n)) continue;
    const double score = config.mode == TauMode::Sigma
                             ? mu_n * eps_n
                             : std::max(mu_n / config.mu, eps_n / config.eps);
    if (score < best) {
      best = score;
      best_n = n;
    }
  }
  cell.tau = best;
  cell.chosen_n = best_n;
  return best;
}

bool cell_passes(const Cell& cell, const FamilyConfig& config) {
  return config.mode == TauMode::Sigma ? cell.tau <= config.sigma : cell.tau <= 1.0;
}

std::vector<Cell> split_cell(const ParametricModel& model, const TrainingSet& training,
                             const Cell& cell, const ObservationSetup& setup,
                             const FamilyConfig& config) {
  const Eigen::Index d = cell.box.dim();
  const Vector delta = grid_spacing(training, model.box());

  auto build_child = [&](const ParameterBox& box) {
    Cell child = build_cell(model, training, box, cell.level + 1, setup, config);
    cell_tau(child, config);
    return child;
  };

  if (config.strategy == SplitStrategy::FullDyadic) {
    for (Eigen::Index i = 0; i < d; ++i) check_axis_splittable(cell, delta, i);
    std::vector<Cell> children;
    const Eigen::Index count = Eigen::Index{1} << d;
    children.reserve(static_cast<std::size_t>(count));
    for (Eigen::Index mask = 0; mask < count; ++mask) {
      ParameterBox box = cell.box;
      for (Eigen::Index i = 0; i < d; ++i) {
        const double mid = 0.5 * (cell.box.lo[i] + cell.box.hi[i]);
        if ((mask >> (d - 1 - i)) & 1)
          box.lo[i] = mid;
        else
          box.hi[i] = mid;
      }
      children.push_back(build_child(box));
    }
    return children;
  }

  // Greedy coordinate: trial-bisect candidate axes and keep the split whose
  // worse child scores best; even levels force the cyclic axis.
  auto split_along = [&](Eigen::Index axis) {
    const auto [blo, bhi] = bisect(cell.box, axis);
    std::vector<Cell> pair;
    pair.push_back(build_child(blo));
    pair.push_back(build_child(bhi));
    return pair;
  };

  if (cell.level % 2 == 0) {
    const Eigen::Index axis = (cell.level / 2) % d;
    check_axis_splittable(cell, delta, axis);
    return split_along(axis);
  }

  std::vector<Cell> best;
  double best_score = std::numeric_limits<double>::infinity();
  bool any_axis = false;
  for (Eigen::Index i = 0; i < d; ++i) {
    const double child_width = 0.5 * (cell.box.hi[i] - cell.box.lo[i]);
    if (child_width < delta[i] * (1.0 - 1e-12)) continue;
    any_axis = true;
    std::vector<Cell> pair = split_along(i);
    const double score = std::max(pair[0].tau, pair[1].tau);
    if (score < best_score) {
      best_score = score;
      best = std::move(pair);
    }
  }
  if (!any_axis) check_axis_splittable(cell, delta, 0);  // throws with the axis-0 message
  return best;
}

AdmissibleFamily build_family(const ParametricModel& model, const TrainingSet& training,
                              const ObservationSetup& setup, const FamilyConfig& config) {
  if (config.max_cells < 1)
    throw InvalidInputError("piecewise.build_family", "cell budget must be at least 1");
  if (config.mode == TauMode::Sigma && config.sigma <= 0.0)
    throw InvalidInputError("piecewise.build_family", "sigma target must be positive");
  if (config.mode == TauMode::EpsMu && (config.eps <= 0.0 || config.mu < 1.0))
    throw InvalidInputError("piecewise.build_family",
                            "need accuracy target > 0 and stability target >= 1");

  AdmissibleFamily family;
  family.config = config;
  family.domain = model.box();

  Cell root = build_cell(model, training, model.box(), 0, setup, config);
  cell_tau(root, config);

  std::deque<Cell> pending;
  pending.push_back(std::move(root));
  const Eigen::Index child_count = config.strategy == SplitStrategy::FullDyadic
                                       ? (Eigen::Index{1} << model.box().dim())
                                       : Eigen::Index{2};

  while (!pending.empty()) {
    Cell cell = std::move(pending.front());
    pending.pop_front();
    if (cell_passes(cell, config)) {
      family.cells.push_back(std::move(cell));
      continue;
    }
    const Eigen::Index leaves_after = static_cast<Eigen::Index>(family.cells.size()) +
                                      static_cast<Eigen::Index>(pending.size()) + child_count;
    if (leaves_after > config.max_cells) {
      family.complete = false;  // kept as a failing leaf
      family.cells.push_back(std::move(cell));
      continue;
    }
    std::vector<Cell> children = split_cell(model, training, cell, setup, config);
    for (Cell& child : children) pending.push_back(std::move(child));
  }
  return family;
}

double partition_defect(const AdmissibleFamily& family) {
  double total = 0.0;
  for (const Cell& cell : family.cells) total += box_volume(cell.box);
  double defect = std::abs(total - box_volume(family.domain));
  for (std::size_t k = 0; k < family.cells.size(); ++k)
    for (std::size_t l = k + 1; l < family.cells.size(); ++l) {
      ParameterBox inter = family.cells[k].box;
      const ParameterBox& other = family.cells[l].box;
      double vol = 1.0;
      for (Eigen::Index i = 0; i < inter.dim(); ++i)
        vol *= std::max(0.0, std::min(inter.hi[i], other.hi[i]) -
                                 std::max(inter.lo[i], other.lo[i]));
      defect += vol;
    }
  return defect;
}

FamilyEstimate estimate(const AdmissibleFamily& family, const ParametricModel& model,
                        const TrainingSet& training, const ObservationSetup& setup,
                        const CoefficientVector& w, Selection selection,
                        const CoefficientVector* truth) {
  const Eigen::Index k_total = family.size();
  if (k_total == 0) throw InvalidInputError("piecewise.estimate", "empty family");
  if (training.size() == 0 && selection == Selection::Ideal)
    throw InvalidInputError("piecewise.estimate", "ideal selection needs a training set");

  const InnerProductSpace& X = model.space();  // also forces the lazy build pre-threads
  Matrix states(model.dim(), k_total);
  std::vector<CellEstimate> diag(static_cast<std::size_t>(k_total));

  parallel_for(k_total, thread_count(), [&](Eigen::Index k) {
    const Cell& cell = family.cells[static_cast<std::size_t>(k)];
    CellEstimate& d = diag[static_cast<std::size_t>(k)];
    d.cell = k;
    d.n = cell.chosen_n;
    AffinePbdw op;
    try {
      const Subspace vk{cell.basis.leftCols(cell.chosen_n), true};
      op = fit_affine_pbdw(vk, setup, cell.ubar);
    } catch (const StabilityError&) {
      return;  // cell unusable against this sensor set
    }
    d.beta = op.linear.beta;
    const CoefficientVector uk = reconstruct(op, w);
    states.col(k) = uk;
    d.usable = true;

    if (selection == Selection::Surrogate) {
      d.score = residual_surrogate(model, uk).value;
    } else {
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < training.size(); ++j)
        best = std::min(best, X.norm(uk - training.snapshots.col(j)));
      // Polish: the residual-surrogate minimizer proposes one extra
      // manifold candidate between grid points.
      const SurrogateResult sr = residual_surrogate(model, uk);
      best = std::min(best, X.norm(uk - model.solve(sr.minimizer)));
      d.score = best;
    }
    if (truth != nullptr) d.error_truth = X.norm(uk - *truth);
  });

  FamilyEstimate out;
  out.selection = selection;
  out.diagnostics = std::move(diag);
  for (Eigen::Index k = 0; k < k_total; ++k) {
    const CellEstimate& d = out.diagnostics[static_cast<std::size_t>(k)];
    if (!d.usable) continue;
    if (out.chosen_cell < 0 || d.score < out.diagnostics[static_cast<std::size_t>(out.chosen_cell)].score)
      out.chosen_cell = k;
  }
  if (out.chosen_cell < 0)
    throw StabilityError("piecewise.estimate",
                         "no cell admits a stable local space for the given sensors");
  out.state = states.col(out.chosen_cell);
  return out;
}

}  // namespace redinv
