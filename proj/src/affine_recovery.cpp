#include "redinv/affine_recovery.hpp"

#include <cmath>
#include <limits>

namespace redinv {

EpigraphProblem build_problem(const InnerProductSpace& X, const Matrix& snapshots,
                              const ObservationSetup& setup, const Subspace& zn) {
  if (snapshots.cols() == 0)
    throw InvalidInputError("affine_recovery.build_problem", "empty snapshot set");
  if (snapshots.rows() != X.dim() || zn.basis.rows() != X.dim())
    throw InvalidInputError("affine_recovery.build_problem", "dimension mismatch");
  const Subspace zon = zn.orthonormal ? zn : orthonormalize(X, zn.basis);

  EpigraphProblem prob;
  prob.space = setup.space;
  prob.w_basis = setup.w_basis.basis;
  prob.m = setup.w_basis.dim();

  // Deflate Z_N against W; what remains is the learnable complement.
  Matrix defl = zon.basis - prob.w_basis * (prob.w_basis.transpose() * X.apply_gram(zon.basis));
  // Columns entering the deflation have unit norm, so a deflated column whose
  // norm fell below the tolerance lies inside W and must be discarded before
  // orthonormalization (its remainder is rounding noise, not a direction).
  Eigen::Index kept = 0;
  for (Eigen::Index j = 0; j < defl.cols(); ++j) {
    if (X.norm(defl.col(j)) > 1e-10) defl.col(kept++) = defl.col(j);
  }
  Subspace dsub;
  if (kept > 0) dsub = orthonormalize_dropping(X, defl.leftCols(kept), 1e-10);
  prob.n = dsub.dim();
  if (prob.n == 0)
    throw InvalidInputError("affine_recovery.build_problem",
                            "background space lies entirely inside the measurement space");
  prob.z_basis = dsub.basis;

  const Eigen::Index j_total = snapshots.cols();
  prob.w_samples = prob.w_basis.transpose() * X.apply_gram(snapshots);
  prob.u_samples = prob.z_basis.transpose() * X.apply_gram(snapshots);

  double eps2 = 0.0;
  const Matrix zc = zon.basis.transpose() * X.apply_gram(snapshots);
  for (Eigen::Index j = 0; j < j_total; ++j) {
    const double nn = X.norm(snapshots.col(j));
    eps2 = std::max(eps2, nn * nn - zc.col(j).squaredNorm());
  }
  prob.eps_n = std::sqrt(std::max(0.0, eps2));

  const Eigen::Index cols = prob.n * (prob.m + 1);
  prob.q.reserve(static_cast<std::size_t>(j_total));
  prob.lnorm2_bound = static_cast<double>(j_total);
  for (Eigen::Index j = 0; j < j_total; ++j) {
    Eigen::SparseMatrix<double> qj(prob.n, cols);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(prob.n * (prob.m + 1)));
    for (Eigen::Index i = 0; i < prob.n; ++i) {
      for (Eigen::Index t = 0; t < prob.m; ++t)
        trip.emplace_back(i, i * prob.m + t, prob.w_samples(t, j));
      trip.emplace_back(i, prob.n * prob.m + i, 1.0);
    }
    qj.setFromTriplets(trip.begin(), trip.end());
    prob.q.push_back(std::move(qj));
    // Q_j Q_j^T = (1 + ||w^j||^2) I exactly.
    prob.lnorm2_bound += 1.0 + prob.w_samples.col(j).squaredNorm();
  }
  return prob;
}

void project_epigraph(const Vector& u, Vector& v, double& t) {
  const double rho = (u - v).norm();
  if (rho * rho <= t) return;  // already inside
  // Unique nonnegative root of f(r) = 2r^3 + (1 - 2t) r - rho.
  const double b = 1.0 - 2.0 * t;
  auto f = [&](double r) { return 2.0 * r * r * r + b * r - rho; };
  double lo = 0.0;
  double hi = std::max({rho, std::sqrt(std::max(t, 0.0)), 1.0});
  while (f(hi) < 0.0) hi *= 2.0;
  double r = std::min(hi, std::max(rho, std::sqrt(std::max(t, 0.0))));
  for (int it = 0; it < 100; ++it) {
    const double fr = f(r);
    if (fr > 0.0)
      hi = r;
    else
      lo = r;
    const double dfr = 6.0 * r * r + b;
    double next = (dfr > 0.0) ? r - fr / dfr : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);  // bisection safeguard
    if (std::abs(next - r) <= 1e-12 * std::max(1.0, std::abs(r))) {
      r = next;
      break;
    }
    r = next;
  }
  if (rho > 0.0)
    v = u + (r / rho) * (v - u);
  else
    v = u;
  t = r * r;
}

CoefficientVector apply(const AffineRecoveryMap& map, const Vector& w_coords) {
  if (w_coords.size() != map.m())
    throw InvalidInputError("affine_recovery.apply", "measurement coordinate mismatch");
  return map.w_basis * w_coords + map.z_basis * (map.cbar + map.bbar * w_coords);
}

CoefficientVector apply_state(const AffineRecoveryMap& map, const ObservationSetup& setup,
                              const CoefficientVector& u) {
  return apply(map, setup.w_coordinates(u));
}

namespace {

AffineRecoveryMap unpack(const EpigraphProblem& prob, const Vector& x) {
  AffineRecoveryMap map;
  map.space = prob.space;
  map.w_basis = prob.w_basis;
  map.z_basis = prob.z_basis;
  map.bbar.resize(prob.n, prob.m);
  for (Eigen::Index i = 0; i < prob.n; ++i)
    map.bbar.row(i) = x.segment(i * prob.m, prob.m).transpose();
  map.cbar = x.segment(prob.n * prob.m, prob.n);
  return map;
}

double objective_of(const EpigraphProblem& prob, const Vector& x) {
  // max_j ||u^j - (R w^j + b)||^2 via the unpacked blocks.
  double worst = 0.0;
  const Eigen::Index nm = prob.n * prob.m;
  for (Eigen::Index j = 0; j < prob.samples(); ++j) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < prob.n; ++i) {
      const double ri =
          x.segment(i * prob.m, prob.m).dot(prob.w_samples.col(j)) + x[nm + i];
      const double d = prob.u_samples(i, j) - ri;
      s += d * d;
    }
    worst = std::max(worst, s);
  }
  return worst;
}

}  // namespace

PrimalDualResult primal_dual_solve(const EpigraphProblem& prob, Eigen::Index iterations,
                                   double gamma_g, double gamma_f, double theta) {
  if (prob.samples() == 0)
    throw InvalidInputError("affine_recovery.primal_dual_solve", "no snapshots");
  if (iterations < 1)
    throw InvalidInputError("affine_recovery.primal_dual_solve", "need at least one iteration");
  const double default_step = 0.99 / std::sqrt(prob.lnorm2_bound);
  if (gamma_g <= 0.0) gamma_g = default_step;
  if (gamma_f <= 0.0) gamma_f = default_step;
  if (!(gamma_g * gamma_f * prob.lnorm2_bound < 1.0))
    throw InvalidInputError("affine_recovery.primal_dual_solve",
                            "step sizes violate gamma_g * gamma_f * ||L||^2 < 1");

  const Eigen::Index j_total = prob.samples();
  const Eigen::Index nx = prob.unknowns();

  Vector x = Vector::Zero(nx);
  double t = 0.0;
  for (Eigen::Index j = 0; j < j_total; ++j)
    t = std::max(t, prob.u_samples.col(j).squaredNorm());  // f_j(0) feasibility
  Vector xbar = x;
  double tbar = t;
  Matrix duals_v = Matrix::Zero(prob.n, j_total);
  Vector duals_t = Vector::Zero(j_total);

  PrimalDualResult out;
  Vector x_best = x;
  out.best_objective = objective_of(prob, x);
  out.history.push_back({0, out.best_objective});
  Eigen::Index last_improve = 0;

  Vector av(prob.n), uv(prob.n);
  for (Eigen::Index it = 1; it <= iterations; ++it) {
    // Primal step with prox of (x,t) -> t.
    Vector lx = Vector::Zero(nx);
    double lt = 0.0;
    for (Eigen::Index j = 0; j < j_total; ++j) {
      lx += prob.q[static_cast<std::size_t>(j)].transpose() * duals_v.col(j);
      lt += duals_t[j];
    }
    const Vector x_new = x - gamma_g * lx;
    const double t_new = t - gamma_g * lt - gamma_g;

    xbar = x_new + theta * (x_new - x);
    tbar = t_new + theta * (t_new - t);
    x = x_new;
    t = t_new;

    // Dual step: Moreau through the epigraph projections.
    for (Eigen::Index j = 0; j < j_total; ++j) {
      av = duals_v.col(j) + gamma_f * (prob.q[static_cast<std::size_t>(j)] * xbar);
      double as = duals_t[j] + gamma_f * tbar;
      uv = av / gamma_f;
      double us = as / gamma_f;
      project_epigraph(prob.u_samples.col(j), uv, us);
      duals_v.col(j) = av - gamma_f * uv;
      duals_t[j] = as - gamma_f * us;
    }

    out.iterations = it;
    if (it % 10 == 0 || it == iterations) {
      const double obj = objective_of(prob, x);
      out.history.push_back({it, obj});
      if (obj < out.best_objective - 1e-10) last_improve = it;
      if (obj < out.best_objective) {
        out.best_objective = obj;
        x_best = x;
      }
      if (it - last_improve >= 100) {
        out.early_exit = true;
        break;
      }
    }
  }
  out.map = unpack(prob, x_best);
  return out;
}

SubgradientResult subgradient_baseline(const EpigraphProblem& prob, Eigen::Index iterations,
                                       double c0) {
  if (prob.samples() == 0)
    throw InvalidInputError("affine_recovery.subgradient_baseline", "no snapshots");
  if (iterations < 1)
    throw InvalidInputError("affine_recovery.subgradient_baseline", "need at least one iteration");
  if (c0 <= 0.0) {
    for (Eigen::Index j = 0; j < prob.samples(); ++j)
      c0 = std::max(c0, prob.u_samples.col(j).norm());
    if (c0 <= 0.0) c0 = 1.0;
  }
  const Eigen::Index nm = prob.n * prob.m;
  Vector x = Vector::Zero(prob.unknowns());
  SubgradientResult out;
  Vector x_best = x;
  out.best_objective = objective_of(prob, x);
  out.history.push_back({0, out.best_objective});

  for (Eigen::Index it = 1; it <= iterations; ++it) {
    // Active snapshot and its residual (the objective at the current x).
    Eigen::Index arg = 0;
    double worst = -1.0;
    Vector res(prob.n);
    Vector res_arg(prob.n);
    for (Eigen::Index j = 0; j < prob.samples(); ++j) {
      for (Eigen::Index i = 0; i < prob.n; ++i)
        res[i] = x.segment(i * prob.m, prob.m).dot(prob.w_samples.col(j)) + x[nm + i] -
                 prob.u_samples(i, j);
      const double s = res.squaredNorm();
      if (s > worst) {
        worst = s;
        arg = j;
        res_arg = res;
      }
    }
    if (worst < out.best_objective) {
      out.best_objective = worst;
      x_best = x;
    }
    if (it % 10 == 0) out.history.push_back({it, worst});

    const double step = c0 / std::sqrt(static_cast<double>(it));
    for (Eigen::Index i = 0; i < prob.n; ++i)
      x.segment(i * prob.m, prob.m) -= step * 2.0 * res_arg[i] * prob.w_samples.col(arg);
    x.segment(nm, prob.n) -= step * 2.0 * res_arg;
  }
  const double final_obj = objective_of(prob, x);
  if (final_obj < out.best_objective) {
    out.best_objective = final_obj;
    x_best = x;
  }
  out.history.push_back({iterations, final_obj});
  out.map = unpack(prob, x_best);
  return out;
}

}  // namespace redinv
