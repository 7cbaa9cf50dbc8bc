#include "redinv/joint.hpp"

#include <cmath>

namespace redinv {

namespace {

Eigen::Index argmax_lowest(const Vector& v) {
  Eigen::Index arg = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v[i] > v[arg]) arg = i;
  return arg;
}

// Reconstruction errors of every training snapshot under `op`.
Vector training_errors(const PbdwOperator& op, const Matrix& snapshots) {
  Vector errs(snapshots.cols());
  for (Eigen::Index j = 0; j < snapshots.cols(); ++j) {
    const CoefficientVector w = op.setup.project(snapshots.col(j));
    errs[j] = op.space->norm(snapshots.col(j) - reconstruct(op, w));
  }
  return errs;
}

}  // namespace

JointRun nested_greedy(const TrainingSet& training, const Dictionary& dict, double beta_lower,
                       double eps_stop, Eigen::Index n_max, Eigen::Index m_max) {
  const Eigen::Index j_total = training.size();
  if (j_total == 0) throw InvalidInputError("joint.nested_greedy", "empty training set");
  if (!(beta_lower > 0.0 && beta_lower <= 1.0))
    throw InvalidInputError("joint.nested_greedy", "beta_lower must lie in (0,1]");
  if (n_max < 1) throw InvalidInputError("joint.nested_greedy", "n_max must be >= 1");
  if (m_max > dict.size())
    throw InvalidInputError("joint.nested_greedy", "sensor budget exceeds dictionary size");
  const InnerProductSpace& X = dict.space();
  const Matrix& snaps = training.snapshots;

  JointRun run;
  Matrix vq(X.dim(), std::min(n_max, j_total));
  Eigen::Index nv = 0;
  Matrix wq(X.dim(), m_max);
  Eigen::Index nw = 0;
  const Matrix& omega = dict.representer_matrix();
  std::vector<char> used(static_cast<std::size_t>(dict.size()), 0);

  Vector errs(j_total);
  for (Eigen::Index j = 0; j < j_total; ++j) errs[j] = X.norm(snaps.col(j));

  for (Eigen::Index round = 0; round < n_max; ++round) {
    const Eigen::Index pick_snap = argmax_lowest(errs);
    {
      Vector v = snaps.col(pick_snap);
      for (int pass = 0; pass < 2 && nv > 0; ++pass)
        v -= vq.leftCols(nv) * (vq.leftCols(nv).transpose() * X.apply_gram(v));
      const double nrm = X.norm(v);
      if (nrm <= 1e-12 * std::max(1e-300, X.norm(snaps.col(pick_snap)))) {
        run.captured = true;
        break;
      }
      vq.col(nv) = v / nrm;
      ++nv;
    }
    const Subspace vsub{vq.leftCols(nv), true};

    JointStep step;
    step.snapshot = pick_snap;

    // Worst-case OMP top-ups until the stability margin holds.
    InfSupResult is = inf_sup(X, vsub, Subspace{wq.leftCols(nw), true});
    while (is.beta < beta_lower) {
      if (nw >= m_max) {
        run.budget_exhausted = true;
        break;
      }
      Vector rho = is.minimizer;
      if (nw > 0)
        rho -= wq.leftCols(nw) * (wq.leftCols(nw).transpose() * X.apply_gram(rho));
      Vector scores = (omega.transpose() * X.apply_gram(rho)).cwiseAbs();
      for (Eigen::Index i = 0; i < dict.size(); ++i)
        if (used[static_cast<std::size_t>(i)]) scores[i] = -1.0;
      const Eigen::Index pick = argmax_lowest(scores);
      if (scores[pick] <= 1e-14) {
        run.budget_exhausted = true;  // dictionary cannot separate V_n further
        break;
      }
      used[static_cast<std::size_t>(pick)] = 1;
      Vector q = omega.col(pick);
      for (int pass = 0; pass < 2 && nw > 0; ++pass)
        q -= wq.leftCols(nw) * (wq.leftCols(nw).transpose() * X.apply_gram(q));
      const double qn = X.norm(q);
      if (qn <= 1e-10) continue;  // dependent pick; score masks it next time
      wq.col(nw) = q / qn;
      ++nw;
      step.new_sensors.push_back(pick);
      run.sensor_indices.push_back(pick);
      is = inf_sup(X, vsub, Subspace{wq.leftCols(nw), true});
    }
    step.beta = is.beta;
    step.m_of_n = nw;

    if (run.budget_exhausted) {
      run.steps.push_back(step);
      break;
    }

    // Evaluate the round.
    const ObservationSetup setup = build_observation(dict, run.sensor_indices);
    const PbdwOperator op = fit_pbdw(vsub, setup);
    errs = training_errors(op, snaps);
    step.err = errs.maxCoeff();
    run.steps.push_back(step);
    run.setup = setup;
    if (step.err <= eps_stop) {
      run.reached_eps = true;
      break;
    }
  }
  run.vn = Subspace{vq.leftCols(nv), true};
  if (run.sensor_indices.empty())
    throw StabilityError("joint.nested_greedy", "no sensors selected before termination");
  if (run.setup.size() == 0) run.setup = build_observation(dict, run.sensor_indices);
  return run;
}

JointRun geim(const TrainingSet& training, const Dictionary& dict, Eigen::Index n_max,
              double eps_stop) {
  const Eigen::Index j_total = training.size();
  if (j_total == 0) throw InvalidInputError("joint.geim", "empty training set");
  if (n_max < 1 || n_max > dict.size())
    throw InvalidInputError("joint.geim", "need 1 <= n_max <= dictionary size");
  const InnerProductSpace& X = dict.space();
  const Matrix& snaps = training.snapshots;
  const Matrix& omega = dict.representer_matrix();

  JointRun run;
  Matrix vq(X.dim(), std::min(n_max, j_total));
  Eigen::Index nv = 0;
  std::vector<char> used(static_cast<std::size_t>(dict.size()), 0);

  Vector norms(j_total);
  for (Eigen::Index j = 0; j < j_total; ++j) norms[j] = X.norm(snaps.col(j));
  Eigen::Index pick_snap = argmax_lowest(norms);
  Vector rho = snaps.col(pick_snap);

  for (Eigen::Index n = 1; n <= n_max; ++n) {
    Vector scores = (omega.transpose() * X.apply_gram(rho)).cwiseAbs();
    for (Eigen::Index i = 0; i < dict.size(); ++i)
      if (used[static_cast<std::size_t>(i)]) scores[i] = -1.0;
    const Eigen::Index pick_sensor = argmax_lowest(scores);
    if (scores[pick_sensor] <= 1e-14) {
      run.captured = true;
      break;
    }
    used[static_cast<std::size_t>(pick_sensor)] = 1;

    {
      // rho spans the new direction but is not G-orthogonal to V_{n-1};
      // deflate so the stored basis stays orthonormal.
      Vector v = rho;
      for (int pass = 0; pass < 2 && nv > 0; ++pass)
        v -= vq.leftCols(nv) * (vq.leftCols(nv).transpose() * X.apply_gram(v));
      const double nrm = X.norm(v);
      if (nrm <= 1e-12 * std::max(1e-300, X.norm(rho))) {
        run.captured = true;
        break;
      }
      vq.col(nv) = v / nrm;
      ++nv;
    }
    run.sensor_indices.push_back(pick_sensor);

    const ObservationSetup setup = build_observation(dict, run.sensor_indices);
    const Subspace vsub{vq.leftCols(nv), true};
    PbdwOperator op;
    try {
      op = fit_pbdw(vsub, setup);
    } catch (const StabilityError&) {
      run.budget_exhausted = true;
      break;
    }
    const Vector errs = training_errors(op, snaps);

    JointStep step;
    step.snapshot = pick_snap;
    step.new_sensors = {pick_sensor};
    step.m_of_n = nv;
    step.err = errs.maxCoeff();
    step.beta = op.beta;
    run.steps.push_back(step);
    run.setup = setup;
    run.vn = vsub;

    if (step.err <= eps_stop) {
      run.reached_eps = true;
      break;
    }
    if (n == n_max) break;

    pick_snap = argmax_lowest(errs);
    const CoefficientVector w = setup.project(snaps.col(pick_snap));
    rho = snaps.col(pick_snap) - reconstruct(op, w);
    if (X.norm(rho) <= 1e-14 * std::max(1.0, X.norm(snaps.col(pick_snap)))) {
      run.captured = true;
      break;
    }
  }
  if (run.vn.basis.size() == 0) run.vn = Subspace{vq.leftCols(nv), true};
  return run;
}

}  // namespace redinv
