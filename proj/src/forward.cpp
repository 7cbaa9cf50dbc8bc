#include "redinv/forward.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <string>

namespace redinv {

ParameterBox::ParameterBox(Vector lo_, Vector hi_) : lo(std::move(lo_)), hi(std::move(hi_)) {
  if (lo.size() != hi.size() || lo.size() == 0)
    throw InvalidInputError("forward.ParameterBox", "lo/hi must be nonempty and equal length");
  for (Eigen::Index j = 0; j < lo.size(); ++j)
    if (!(lo[j] < hi[j]))
      throw InvalidInputError("forward.ParameterBox",
                              "lo < hi violated in component " + std::to_string(j));
}

bool ParameterBox::contains(const Vector& y, double tol) const {
  if (y.size() != dim()) return false;
  for (Eigen::Index j = 0; j < dim(); ++j)
    if (y[j] < lo[j] - tol || y[j] > hi[j] + tol) return false;
  return true;
}

Vector ParameterBox::clamp(const Vector& y) const {
  return y.cwiseMax(lo).cwiseMin(hi);
}

double PiecewiseConstantField::at(double x) const {
  const auto p = static_cast<Eigen::Index>(values.size());
  if (p == 0) return 0.0;
  auto i = static_cast<Eigen::Index>(std::floor(x * static_cast<double>(p)));
  i = std::clamp<Eigen::Index>(i, 0, p - 1);
  return values[static_cast<std::size_t>(i)];
}

ParametricModel::ParametricModel(Eigen::Index n_h, PiecewiseConstantField abar,
                                 std::vector<PiecewiseConstantField> psis,
                                 PiecewiseConstantField rhs, ParameterBox box)
    : n_h_(n_h),
      abar_(std::move(abar)),
      psis_(std::move(psis)),
      rhs_(std::move(rhs)),
      box_(std::move(box)) {
  if (n_h_ < 1) throw InvalidInputError("forward.ParametricModel", "need at least one node");
  const auto d = static_cast<Eigen::Index>(psis_.size());
  if (box_.dim() != d)
    throw InvalidInputError("forward.ParametricModel",
                            "parameter box dimension does not match the number of fields");
  const Eigen::Index ne = n_h_ + 1;
  const double h = mesh_h();
  abar_elem_.resize(ne);
  psi_elem_.resize(ne, d);
  Vector f_elem(ne);
  for (Eigen::Index e = 0; e < ne; ++e) {
    const double xm = (static_cast<double>(e) + 0.5) * h;
    abar_elem_[e] = abar_.at(xm);
    for (Eigen::Index j = 0; j < d; ++j) psi_elem_(e, j) = psis_[static_cast<std::size_t>(j)].at(xm);
    f_elem[e] = rhs_.at(xm);
  }
  // min over the box of the affine-in-y element diffusion; exact because the
  // minimum of an affine function over a box separates per coordinate.
  a_min_ = std::numeric_limits<double>::infinity();
  for (Eigen::Index e = 0; e < ne; ++e) {
    double m = abar_elem_[e];
    for (Eigen::Index j = 0; j < d; ++j)
      m += std::min(box_.lo[j] * psi_elem_(e, j), box_.hi[j] * psi_elem_(e, j));
    a_min_ = std::min(a_min_, m);
  }
  if (!(a_min_ > 0.0))
    throw CoercivityError("forward.ParametricModel",
                          "diffusion not uniformly positive over the parameter box (min " +
                              std::to_string(a_min_) + ")");
  load_.resize(n_h_);
  for (Eigen::Index i = 0; i < n_h_; ++i) load_[i] = 0.5 * h * (f_elem[i] + f_elem[i + 1]);
}

Vector ParametricModel::element_diffusion(const Vector& y) const {
  return abar_elem_ + psi_elem_ * y;
}

CoefficientVector ParametricModel::solve(const Vector& y, bool* clamped) const {
  if (y.size() != n_params())
    throw InvalidInputError("forward.solve", "parameter dimension mismatch");
  check_finite(y, "forward.solve");
  Vector yc = box_.clamp(y);
  if (clamped) *clamped = !box_.contains(y);
  const Vector a = element_diffusion(yc);
  if (a.minCoeff() <= 0.0)
    throw CoercivityError("forward.solve", "diffusion not positive at requested parameter");

  const double h = mesh_h();
  const Eigen::Index n = n_h_;
  Vector diag(n), off(n - 1 >= 0 ? n - 1 : 0);
  for (Eigen::Index i = 0; i < n; ++i) diag[i] = (a[i] + a[i + 1]) / h;
  for (Eigen::Index i = 0; i + 1 < n; ++i) off[i] = -a[i + 1] / h;

  // Thomas solve (SPD tridiagonal).
  Vector c(n), dvec(n);
  Vector rhs = load_;
  c[0] = diag[0];
  dvec[0] = rhs[0];
  for (Eigen::Index i = 1; i < n; ++i) {
    const double w = off[i - 1] / c[i - 1];
    c[i] = diag[i] - w * off[i - 1];
    dvec[i] = rhs[i] - w * dvec[i - 1];
  }
  Vector u(n);
  u[n - 1] = dvec[n - 1] / c[n - 1];
  for (Eigen::Index i = n - 2; i >= 0; --i) u[i] = (dvec[i] - off[i] * u[i + 1]) / c[i];

  // Discrete residual must vanish to solver precision.
  Vector res = -rhs;
  for (Eigen::Index i = 0; i < n; ++i) {
    double v = diag[i] * u[i];
    if (i > 0) v += off[i - 1] * u[i - 1];
    if (i + 1 < n) v += off[i] * u[i + 1];
    res[i] += v;
  }
  if (res.norm() > 1e-10 * std::max(1e-300, rhs.norm()))
    throw SingularError("forward.solve", "linear-system residual check failed");
  return u;
}

const InnerProductSpace& ParametricModel::space() const {
  if (!space_) {
    const double h = mesh_h();
    Matrix g = Matrix::Zero(n_h_, n_h_);
    for (Eigen::Index i = 0; i < n_h_; ++i) {
      g(i, i) = 2.0 / h;
      if (i + 1 < n_h_) {
        g(i, i + 1) = -1.0 / h;
        g(i + 1, i) = -1.0 / h;
      }
    }
    space_ = std::make_shared<InnerProductSpace>(std::move(g));
  }
  return *space_;
}

std::shared_ptr<const InnerProductSpace> ParametricModel::shared_space() const {
  space();
  return space_;
}

Vector ParametricModel::residual_constant(const CoefficientVector& v) const {
  if (v.size() != n_h_) throw InvalidInputError("forward.residual_constant", "dimension mismatch");
  const double h = mesh_h();
  Vector r(n_h_);
  for (Eigen::Index i = 0; i < n_h_; ++i) {
    double s = (abar_elem_[i] + abar_elem_[i + 1]) / h * v[i];
    if (i > 0) s -= abar_elem_[i] / h * v[i - 1];
    if (i + 1 < n_h_) s -= abar_elem_[i + 1] / h * v[i + 1];
    r[i] = s - load_[i];
  }
  return r;
}

Vector ParametricModel::residual_component(Eigen::Index j, const CoefficientVector& v) const {
  if (j < 0 || j >= n_params())
    throw InvalidInputError("forward.residual_component", "field index out of range");
  if (v.size() != n_h_) throw InvalidInputError("forward.residual_component", "dimension mismatch");
  const double h = mesh_h();
  Vector r(n_h_);
  for (Eigen::Index i = 0; i < n_h_; ++i) {
    double s = (psi_elem_(i, j) + psi_elem_(i + 1, j)) / h * v[i];
    if (i > 0) s -= psi_elem_(i, j) / h * v[i - 1];
    if (i + 1 < n_h_) s -= psi_elem_(i + 1, j) / h * v[i + 1];
    r[i] = s;
  }
  return r;
}

double ParametricModel::value_at(const CoefficientVector& u, double x) const {
  if (u.size() != n_h_) throw InvalidInputError("forward.value_at", "dimension mismatch");
  if (x <= 0.0 || x >= 1.0) return 0.0;
  const double h = mesh_h();
  const auto e = std::min<Eigen::Index>(static_cast<Eigen::Index>(std::floor(x / h)), n_h_);
  const double xl = static_cast<double>(e) * h;
  const double t = (x - xl) / h;
  const double ul = (e == 0) ? 0.0 : u[e - 1];
  const double ur = (e == n_h_) ? 0.0 : u[e];
  return (1.0 - t) * ul + t * ur;
}

namespace {

std::vector<Vector> grid_axes(const ParameterBox& box, const std::vector<Eigen::Index>& resolution) {
  if (static_cast<Eigen::Index>(resolution.size()) != box.dim())
    throw InvalidInputError("forward.sample_training_set", "resolution length must match parameter dimension");
  std::vector<Vector> axes;
  axes.reserve(resolution.size());
  for (Eigen::Index j = 0; j < box.dim(); ++j) {
    const Eigen::Index r = resolution[static_cast<std::size_t>(j)];
    if (r < 1) throw InvalidInputError("forward.sample_training_set", "resolution must be >= 1");
    Vector ax(r);
    if (r == 1) {
      ax[0] = 0.5 * (box.lo[j] + box.hi[j]);
    } else {
      for (Eigen::Index i = 0; i < r; ++i)
        ax[i] = box.lo[j] + static_cast<double>(i) * (box.hi[j] - box.lo[j]) / static_cast<double>(r - 1);
    }
    axes.push_back(std::move(ax));
  }
  return axes;
}

}  // namespace

TrainingSet sample_training_set(const ParametricModel& model,
                                const std::vector<Eigen::Index>& resolution) {
  const auto axes = grid_axes(model.box(), resolution);
  double jd = 1.0;
  for (const auto& ax : axes) jd *= static_cast<double>(ax.size());
  if (jd > 1e6)
    throw InvalidInputError("forward.sample_training_set", "training grid exceeds 1e6 points");
  const auto j_total = static_cast<Eigen::Index>(jd);
  const Eigen::Index d = model.box().dim();

  Matrix params(j_total, d);
  for (Eigen::Index j = 0; j < j_total; ++j) {
    Eigen::Index rem = j;
    for (Eigen::Index ax = d - 1; ax >= 0; --ax) {  // last axis fastest
      const Eigen::Index r = axes[static_cast<std::size_t>(ax)].size();
      params(j, ax) = axes[static_cast<std::size_t>(ax)][rem % r];
      rem /= r;
    }
  }
  TrainingSet t = sample_training_set(model, params);
  t.resolution = resolution;
  return t;
}

TrainingSet sample_training_set(const ParametricModel& model, Eigen::Index resolution) {
  return sample_training_set(
      model, std::vector<Eigen::Index>(static_cast<std::size_t>(model.box().dim()), resolution));
}

TrainingSet sample_training_set(const ParametricModel& model, const Matrix& params) {
  if (params.cols() != model.n_params())
    throw InvalidInputError("forward.sample_training_set", "parameter dimension mismatch");
  if (params.rows() < 1)
    throw InvalidInputError("forward.sample_training_set", "empty parameter list");
  TrainingSet t;
  t.params = params;
  t.snapshots.resize(model.dim(), params.rows());
  parallel_for(params.rows(), thread_count(), [&](Eigen::Index j) {
    t.snapshots.col(j) = model.solve(params.row(j).transpose());
  });
  return t;
}

std::vector<double> pod_width_proxy(const InnerProductSpace& X, const Matrix& snapshots,
                                    Eigen::Index n) {
  const Eigen::Index j_total = snapshots.cols();
  if (j_total == 0) throw InvalidInputError("forward.pod_width_proxy", "empty training set");
  if (n < 0) throw InvalidInputError("forward.pod_width_proxy", "n must be >= 0");
  const Matrix k = gram_matrix(X, snapshots, snapshots);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(k);
  if (eig.info() != Eigen::Success)
    throw SingularError("forward.pod_width_proxy", "correlation eigendecomposition failed");
  // Eigen sorts ascending; walk from the top.
  Vector err2 = k.diagonal();
  std::vector<double> proxy;
  proxy.reserve(static_cast<std::size_t>(n) + 1);
  proxy.push_back(std::sqrt(std::max(0.0, err2.maxCoeff())));
  for (Eigen::Index kk = 1; kk <= n; ++kk) {
    if (kk <= j_total) {
      const Eigen::Index idx = j_total - kk;
      const double lam = std::max(0.0, eig.eigenvalues()[idx]);
      err2 -= lam * eig.eigenvectors().col(idx).cwiseAbs2();
      err2 = err2.cwiseMax(0.0);
    } else {
      err2.setZero();
    }
    proxy.push_back(std::sqrt(err2.maxCoeff()));
  }
  return proxy;
}

std::vector<double> pod_width_proxy(const InnerProductSpace& X, const TrainingSet& training,
                                    Eigen::Index n) {
  return pod_width_proxy(X, training.snapshots, n);
}

GreedyBasis greedy_reduced_basis(const InnerProductSpace& X, const Matrix& snapshots,
                                 Eigen::Index n_max, double eps_target) {
  const Eigen::Index j_total = snapshots.cols();
  if (j_total == 0) throw InvalidInputError("forward.greedy_reduced_basis", "empty training set");
  if (n_max < 0 || n_max > j_total)
    throw InvalidInputError("forward.greedy_reduced_basis", "need 0 <= n_max <= training size");

  GreedyBasis out;
  Matrix q(X.dim(), n_max);
  Eigen::Index k = 0;
  Vector err2(j_total);
  for (Eigen::Index j = 0; j < j_total; ++j) {
    const double nn = X.norm(snapshots.col(j));
    err2[j] = nn * nn;
  }
  auto worst = [&]() {
    Eigen::Index arg = 0;
    for (Eigen::Index j = 1; j < j_total; ++j)
      if (err2[j] > err2[arg]) arg = j;
    return arg;
  };
  Eigen::Index arg = worst();
  out.error_history.push_back(std::sqrt(std::max(0.0, err2[arg])));

  while (k < n_max && out.error_history.back() > eps_target) {
    const Vector u = snapshots.col(arg);
    Vector v = u;
    for (int pass = 0; pass < 2 && k > 0; ++pass)
      v -= q.leftCols(k) * (q.leftCols(k).transpose() * X.apply_gram(v));
    const double nrm = X.norm(v);
    if (nrm <= 1e-12 * std::max(1e-300, X.norm(u))) break;  // training set captured
    v /= nrm;
    // Deterministic sign: first nonnegligible coefficient positive.
    const double scale = v.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (std::abs(v[i]) > 1e-12 * scale) {
        if (v[i] < 0.0) v = -v;
        break;
      }
    }
    q.col(k) = v;
    out.selected.push_back(arg);
    ++k;
    const Vector g = snapshots.transpose() * X.apply_gram(v);
    err2 = (err2 - g.cwiseAbs2()).cwiseMax(0.0);
    arg = worst();
    out.error_history.push_back(std::sqrt(std::max(0.0, err2[arg])));
  }
  out.basis = Subspace{q.leftCols(k), true};
  return out;
}

GreedyBasis greedy_reduced_basis(const InnerProductSpace& X, const TrainingSet& training,
                                 Eigen::Index n_max, double eps_target) {
  return greedy_reduced_basis(X, training.snapshots, n_max, eps_target);
}

SurrogateResult residual_surrogate(const ParametricModel& model, const CoefficientVector& v) {
  const Eigen::Index d = model.n_params();
  const InnerProductSpace& X = model.space();
  const Vector r0 = model.residual_constant(v);
  Matrix rj(model.dim(), d);
  for (Eigen::Index j = 0; j < d; ++j) rj.col(j) = model.residual_component(j, v);

  const Vector s0 = X.solve_gram(r0);
  const Matrix sj = X.solve_gram(rj);
  Matrix h = rj.transpose() * sj;
  h = 0.5 * (h + h.transpose()).eval();
  const Vector g = rj.transpose() * s0;
  const double c0 = r0.dot(s0);

  auto q_of = [&](const Vector& y) {
    return std::max(0.0, y.dot(h * y) + 2.0 * g.dot(y) + c0);
  };

  Eigen::SelfAdjointEigenSolver<Matrix> eig(h);
  const double lam_max = std::max(0.0, eig.eigenvalues().maxCoeff());
  const double lam_min = eig.eigenvalues().minCoeff();

  SurrogateResult out;
  const ParameterBox& box = model.box();
  if (lam_max <= 1e-300) {  // residual does not depend on y
    out.degenerate = true;
    out.minimizer = box.center();
    out.value = std::sqrt(q_of(out.minimizer));
    return out;
  }
  out.degenerate = lam_min <= 1e-12 * lam_max;

  Vector y_u;
  if (!out.degenerate) {
    y_u = -Eigen::LDLT<Matrix>(h).solve(g);
  } else {
    // Pseudo-inverse on the nonnegligible eigenspace; any minimizer works.
    Vector inv = eig.eigenvalues();
    for (Eigen::Index i = 0; i < inv.size(); ++i)
      inv[i] = (inv[i] > 1e-12 * lam_max) ? 1.0 / inv[i] : 0.0;
    y_u = -(eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose() * g);
  }

  if (!out.degenerate && box.contains(y_u, 1e-14)) {
    out.minimizer = box.clamp(y_u);
    out.value = std::sqrt(q_of(out.minimizer));
    return out;
  }

  // Projected gradient from the clamped unconstrained minimizer; the step is
  // the reciprocal of the Hessian's largest eigenvalue (Hessian = 2h).
  Vector y = box.clamp(y_u);
  const double step = 1.0 / (2.0 * lam_max);
  for (int it = 0; it < 500; ++it) {
    const Vector grad = 2.0 * (h * y + g);
    y = box.clamp(y - step * grad);
  }
  out.minimizer = y;
  out.value = std::sqrt(q_of(y));
  return out;
}

double energy_distance(Eigen::Index n_h_a, const CoefficientVector& a, Eigen::Index n_h_b,
                       const CoefficientVector& b) {
  if (a.size() != n_h_a || b.size() != n_h_b)
    throw InvalidInputError("forward.energy_distance", "coefficient length mismatch");
  const double ha = 1.0 / static_cast<double>(n_h_a + 1);
  const double hb = 1.0 / static_cast<double>(n_h_b + 1);
  auto slope = [](const CoefficientVector& u, Eigen::Index e, double h) {
    const Eigen::Index n = u.size();
    const double ul = (e == 0) ? 0.0 : u[e - 1];
    const double ur = (e == n) ? 0.0 : u[e];
    return (ur - ul) / h;
  };
  double acc = 0.0;
  double x = 0.0;
  Eigen::Index ea = 0, eb = 0;
  while (x < 1.0 - 1e-15) {
    const double xa = static_cast<double>(ea + 1) * ha;
    const double xb = static_cast<double>(eb + 1) * hb;
    const double nx = std::min(1.0, std::min(xa, xb));
    const double ds = slope(a, ea, ha) - slope(b, eb, hb);
    acc += ds * ds * (nx - x);
    if (xa <= nx + 1e-15) ++ea;
    if (xb <= nx + 1e-15) ++eb;
    x = nx;
  }
  return std::sqrt(std::max(0.0, acc));
}

}  // namespace redinv
