#include "redinv/placement.hpp"

#include <cmath>

namespace redinv {

namespace {

struct OmpState {
  const InnerProductSpace& X;
  const Dictionary& dict;
  const Matrix& omega;   // all representers
  Matrix residuals;      // V_n basis deflated against current W
  Matrix wq;             // orthonormal W basis columns (growing)
  Eigen::Index k = 0;
  std::vector<char> used;

  OmpState(const Subspace& von, const Dictionary& d, Eigen::Index m_max)
      : X(d.space()), dict(d), omega(d.representer_matrix()), residuals(von.basis),
        wq(d.space().dim(), m_max), used(static_cast<std::size_t>(d.size()), 0) {}

  double residual_mass() const {
    const Matrix grp = X.apply_gram(residuals);
    double r = 0.0;
    for (Eigen::Index i = 0; i < residuals.cols(); ++i)
      r += residuals.col(i).dot(grp.col(i));
    return std::max(0.0, r);
  }

  // Appends dictionary entry `pick` to W and deflates the residual columns.
  // Returns false when the new direction is numerically inside W.
  bool add(Eigen::Index pick) {
    Vector q = omega.col(pick);
    for (int pass = 0; pass < 2 && k > 0; ++pass)
      q -= wq.leftCols(k) * (wq.leftCols(k).transpose() * X.apply_gram(q));
    const double nrm = X.norm(q);
    used[static_cast<std::size_t>(pick)] = 1;
    if (nrm <= 1e-10) return false;
    q /= nrm;
    wq.col(k) = q;
    ++k;
    residuals -= q * (q.transpose() * X.apply_gram(residuals));
    return true;
  }

  Subspace w_subspace() const { return Subspace{wq.leftCols(k), true}; }
};

// kappa = 1: strict argmax with lowest-index ties; kappa < 1: first index
// whose score reaches kappa_power * max.
Eigen::Index pick_index(const Vector& scores, double kappa_power) {
  Eigen::Index arg = 0;
  for (Eigen::Index i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[arg]) arg = i;
  if (kappa_power >= 1.0) return arg;
  const double cut = kappa_power * scores[arg];
  for (Eigen::Index i = 0; i < scores.size(); ++i)
    if (scores[i] >= cut) return i;
  return arg;
}

GreedyRun run_omp(const Subspace& vn, const Dictionary& dict, double beta_target, double kappa,
                  Eigen::Index m_max, bool collective) {
  if (vn.dim() == 0) throw InvalidInputError("placement.omp", "V_n must be nontrivial");
  if (!(kappa > 0.0 && kappa <= 1.0))
    throw InvalidInputError("placement.omp", "kappa must lie in (0,1]");
  if (m_max < 0 || m_max > dict.size())
    throw InvalidInputError("placement.omp", "m_max must be in [0, dictionary size]");
  const InnerProductSpace& X = dict.space();
  const Subspace von = vn.orthonormal ? vn : orthonormalize(X, vn.basis);

  GreedyRun run;
  run.kappa = kappa;
  run.beta_target = beta_target;
  OmpState st(von, dict, m_max);
  run.rm_history.push_back(st.residual_mass());
  double beta = 0.0;
  Vector beta_minimizer = von.basis.col(0);
  run.beta_history.push_back(beta);
  const double stall_floor = 1e-24 * std::max(1.0, run.rm_history[0]);

  while (static_cast<Eigen::Index>(run.selected.size()) < m_max) {
    Vector scores(dict.size());
    if (collective) {
      const Matrix s = st.omega.transpose() * X.apply_gram(st.residuals);
      scores = s.rowwise().squaredNorm();
    } else {
      // Residual of the current worst-approximated direction of V_n.
      Vector rho = beta_minimizer;
      if (st.k > 0)
        rho -= st.wq.leftCols(st.k) * (st.wq.leftCols(st.k).transpose() * X.apply_gram(rho));
      scores = (st.omega.transpose() * X.apply_gram(rho)).cwiseAbs();
    }
    for (Eigen::Index i = 0; i < dict.size(); ++i)
      if (st.used[static_cast<std::size_t>(i)]) scores[i] = -1.0;
    const double max_score = scores.maxCoeff();
    if (max_score <= (collective ? stall_floor : std::sqrt(stall_floor))) {
      run.stalled = true;
      break;
    }
    const Eigen::Index pick = pick_index(scores, collective ? kappa * kappa : kappa);
    if (!st.add(pick)) {
      run.stalled = true;
      break;
    }
    run.selected.push_back(pick);
    run.rm_history.push_back(st.residual_mass());
    const InfSupResult is = inf_sup(X, von, st.w_subspace());
    beta = is.beta;
    beta_minimizer = is.minimizer;
    run.beta_history.push_back(beta);
    if (beta_target > 0.0 && beta >= beta_target) {
      run.reached = true;
      break;
    }
  }
  if (beta_target <= 0.0) run.reached = true;
  return run;
}

}  // namespace

GreedyRun collective_omp(const Subspace& vn, const Dictionary& dict, double beta_target,
                         double kappa, Eigen::Index m_max) {
  return run_omp(vn, dict, beta_target, kappa, m_max, true);
}

GreedyRun worst_case_omp(const Subspace& vn, const Dictionary& dict, double beta_target,
                         double kappa, Eigen::Index m_max) {
  return run_omp(vn, dict, beta_target, kappa, m_max, false);
}

ObservationSetup observation_from_run(const Dictionary& dict, const GreedyRun& run) {
  return build_observation(dict, run.selected);
}

Subspace fourier_subspace(const InnerProductSpace& X, Eigen::Index n) {
  if (n < 1) throw InvalidInputError("placement.fourier_subspace", "n must be >= 1");
  const Eigen::Index nh = X.dim();
  const double h = 1.0 / static_cast<double>(nh + 1);
  Matrix cols(nh, n);
  for (Eigen::Index k = 1; k <= n; ++k) {
    const double amp = std::sqrt(2.0) / (M_PI * static_cast<double>(k));
    for (Eigen::Index i = 0; i < nh; ++i)
      cols(i, k - 1) = amp * std::sin(static_cast<double>(k) * M_PI * static_cast<double>(i + 1) * h);
  }
  return orthonormalize(X, cols);
}

double fourier_j_constant(Eigen::Index n) {
  if (n < 1) throw InvalidInputError("placement.fourier_j_constant", "n must be >= 1");
  // |phi_k''|^2 = 2 k^2 pi^2 sin^2(k pi x).
  auto integrand = [n](double x) {
    double s = 0.0;
    for (Eigen::Index k = 1; k <= n; ++k) {
      const double kk = static_cast<double>(k);
      const double sn = std::sin(kk * M_PI * x);
      s += 2.0 * kk * kk * M_PI * M_PI * sn * sn;
    }
    return std::sqrt(s);
  };
  static const double gp[5] = {-0.9061798459386640, -0.5384693101056831, 0.0,
                               0.5384693101056831, 0.9061798459386640};
  static const double gw[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                               0.4786286704993665, 0.2369268850561891};
  const int panels = 10000;
  const double dx = 1.0 / panels;
  double acc = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double mid = (p + 0.5) * dx, half = 0.5 * dx;
    for (int q = 0; q < 5; ++q) acc += gw[q] * half * integrand(mid + half * gp[q]);
  }
  return acc;
}

}  // namespace redinv
