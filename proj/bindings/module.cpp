// Python bindings for the estimation toolkit. Spaces are implicit: every
// operation that needs the reference metric takes the model, so the Python
// surface never handles Gram matrices or shared_ptr spaces directly. Raw
// basis matrices are orthonormalized on entry.
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "redinv/affine_recovery.hpp"
#include "redinv/benchmark.hpp"
#include "redinv/io.hpp"
#include "redinv/joint.hpp"
#include "redinv/placement.hpp"

namespace py = pybind11;
using namespace redinv;

namespace {

ParametricModel make_model(Eigen::Index n_h, std::vector<double> abar,
                           std::vector<std::vector<double>> psis, std::vector<double> rhs,
                           std::vector<double> lo, std::vector<double> hi) {
  std::vector<PiecewiseConstantField> psi_fields;
  psi_fields.reserve(psis.size());
  for (auto& p : psis) psi_fields.push_back(PiecewiseConstantField{std::move(p)});
  const auto to_vec = [](const std::vector<double>& v) {
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())).eval();
  };
  return ParametricModel(n_h, PiecewiseConstantField{std::move(abar)},
                         std::move(psi_fields), PiecewiseConstantField{std::move(rhs)},
                         ParameterBox(to_vec(lo), to_vec(hi)));
}

ObservationSetup make_observation(const ParametricModel& model,
                                  const std::vector<double>& locations, double width) {
  std::vector<SensorDescriptor> sensors;
  sensors.reserve(locations.size());
  const SensorKind kind = width > 0.0 ? SensorKind::LocalAverage : SensorKind::PointEval;
  for (double x : locations) sensors.push_back({kind, x, width});
  return build_observation(model.shared_space(), sensors);
}

Subspace as_subspace(const ParametricModel& model, const Matrix& basis) {
  return orthonormalize(model.space(), basis);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Variational state estimation from sensor data: reduced bases, "
            "sensor placement, affine and piecewise-affine recovery.";

  py::register_exception<redinv::Error>(m, "RedinvError");

  py::class_<ParametricModel>(m, "Model")
      .def(py::init(&make_model), py::arg("n_h"), py::arg("abar"), py::arg("psis"),
           py::arg("rhs"), py::arg("lo"), py::arg("hi"))
      .def_property_readonly("dim", &ParametricModel::dim)
      .def_property_readonly("n_params", &ParametricModel::n_params)
      .def_property_readonly("mesh_h", &ParametricModel::mesh_h)
      .def_property_readonly("lo", [](const ParametricModel& s) { return s.box().lo; })
      .def_property_readonly("hi", [](const ParametricModel& s) { return s.box().hi; })
      .def("node", &ParametricModel::node, py::arg("i"))
      .def("solve",
           [](const ParametricModel& s, const Vector& y) { return s.solve(y); },
           py::arg("y"))
      .def("value_at", &ParametricModel::value_at, py::arg("u"), py::arg("x"))
      .def("norm",
           [](const ParametricModel& s, const CoefficientVector& u) {
             return s.space().norm(u);
           },
           py::arg("u"))
      .def("inner",
           [](const ParametricModel& s, const CoefficientVector& a,
              const CoefficientVector& b) { return s.space().inner(a, b); },
           py::arg("a"), py::arg("b"));

  py::class_<TrainingSet>(m, "TrainingSet")
      .def_readonly("params", &TrainingSet::params)
      .def_readonly("snapshots", &TrainingSet::snapshots)
      .def_readonly("resolution", &TrainingSet::resolution)
      .def("__len__", &TrainingSet::size);

  m.def("sample_training_set",
        [](const ParametricModel& model, const std::vector<Eigen::Index>& resolution) {
          return sample_training_set(model, resolution);
        },
        py::arg("model"), py::arg("resolution"));
  m.def("sample_training_at",
        [](const ParametricModel& model, const Matrix& params) {
          return sample_training_set(model, params);
        },
        py::arg("model"), py::arg("params"));
  m.def("held_out_grid", &held_out_grid, py::arg("model"), py::arg("resolution"));

  m.def("pod_width_proxy",
        [](const ParametricModel& model, const Matrix& snapshots, Eigen::Index n) {
          return pod_width_proxy(model.space(), snapshots, n);
        },
        py::arg("model"), py::arg("snapshots"), py::arg("n"));

  py::class_<GreedyBasis>(m, "GreedyBasis")
      .def_property_readonly("basis",
                             [](const GreedyBasis& g) { return g.basis.basis; })
      .def_readonly("error_history", &GreedyBasis::error_history)
      .def_readonly("selected", &GreedyBasis::selected);
  m.def("greedy_reduced_basis",
        [](const ParametricModel& model, const Matrix& snapshots, Eigen::Index n_max,
           double eps_target) {
          return greedy_reduced_basis(model.space(), snapshots, n_max, eps_target);
        },
        py::arg("model"), py::arg("snapshots"), py::arg("n_max"),
        py::arg("eps_target") = 0.0);

  py::class_<SurrogateResult>(m, "SurrogateResult")
      .def_readonly("value", &SurrogateResult::value)
      .def_readonly("minimizer", &SurrogateResult::minimizer)
      .def_readonly("degenerate", &SurrogateResult::degenerate);
  m.def("residual_surrogate", &residual_surrogate, py::arg("model"), py::arg("v"));
  m.def("energy_distance", &energy_distance, py::arg("n_h_a"), py::arg("a"),
        py::arg("n_h_b"), py::arg("b"));

  py::class_<ObservationSetup>(m, "Observation")
      .def_property_readonly("representers",
                             [](const ObservationSetup& s) { return s.representers; })
      .def_property_readonly("locations",
                             [](const ObservationSetup& s) {
                               std::vector<double> xs;
                               for (const auto& d : s.sensors) xs.push_back(d.x);
                               return xs;
                             })
      .def("project", &ObservationSetup::project, py::arg("u"))
      .def("w_coordinates", &ObservationSetup::w_coordinates, py::arg("u"))
      .def("__len__", &ObservationSetup::size);
  m.def("point_sensors",
        [](const ParametricModel& model, const std::vector<double>& locations) {
          return make_observation(model, locations, 0.0);
        },
        py::arg("model"), py::arg("locations"));
  m.def("local_average_sensors", &make_observation, py::arg("model"),
        py::arg("locations"), py::arg("width"));

  py::class_<Measurement>(m, "Measurement")
      .def_readonly("z", &Measurement::z)
      .def_readonly("w", &Measurement::w);
  m.def("measure", &measure, py::arg("setup"), py::arg("u"));
  m.def("add_noise", &add_noise, py::arg("setup"), py::arg("w"), py::arg("eps_noise"),
        py::arg("seed"));
  m.def("add_noise_z", &add_noise_z, py::arg("setup"), py::arg("z"), py::arg("eps_noise"),
        py::arg("seed"));

  m.def("inf_sup_beta",
        [](const ParametricModel& model, const Matrix& v, const Matrix& w) {
          return inf_sup_beta(model.space(), as_subspace(model, v),
                              as_subspace(model, w));
        },
        py::arg("model"), py::arg("v"), py::arg("w"));

  py::class_<PbdwOperator>(m, "Pbdw")
      .def_readonly("beta", &PbdwOperator::beta)
      .def_readonly("mu", &PbdwOperator::mu);
  py::class_<AffinePbdw>(m, "AffinePbdw")
      .def_property_readonly("beta",
                             [](const AffinePbdw& o) { return o.linear.beta; })
      .def_property_readonly("mu", [](const AffinePbdw& o) { return o.linear.mu; })
      .def_readonly("ubar", &AffinePbdw::ubar);
  m.def("fit_pbdw",
        [](const ParametricModel& model, const Matrix& basis,
           const ObservationSetup& setup) {
          return fit_pbdw(as_subspace(model, basis), setup);
        },
        py::arg("model"), py::arg("basis"), py::arg("setup"));
  m.def("fit_affine_pbdw",
        [](const ParametricModel& model, const Matrix& basis,
           const ObservationSetup& setup, const CoefficientVector& ubar) {
          return fit_affine_pbdw(as_subspace(model, basis), setup, ubar);
        },
        py::arg("model"), py::arg("basis"), py::arg("setup"), py::arg("ubar"));
  m.def("reconstruct",
        [](const PbdwOperator& op, const CoefficientVector& w) {
          return reconstruct(op, w);
        },
        py::arg("op"), py::arg("w"));
  m.def("reconstruct",
        [](const AffinePbdw& op, const CoefficientVector& w) {
          return reconstruct(op, w);
        },
        py::arg("op"), py::arg("w"));
  m.def("reconstruct_from_z", &reconstruct_from_z, py::arg("op"), py::arg("z"));
  py::class_<ErrorBoundCheck>(m, "ErrorBoundCheck")
      .def_readonly("error", &ErrorBoundCheck::error)
      .def_readonly("mu", &ErrorBoundCheck::mu)
      .def_readonly("dist", &ErrorBoundCheck::dist)
      .def_readonly("satisfied", &ErrorBoundCheck::satisfied);
  m.def("error_bound_check", &error_bound_check, py::arg("op"), py::arg("u"));
  py::class_<WorstCase>(m, "WorstCase")
      .def_readonly("value", &WorstCase::value)
      .def_readonly("argmax", &WorstCase::argmax);
  m.def("worst_case_error",
        [](const PbdwOperator& op, const Matrix& snapshots) {
          return worst_case_error(op, snapshots);
        },
        py::arg("op"), py::arg("snapshots"));
  m.def("worst_case_error",
        [](const AffinePbdw& op, const Matrix& snapshots) {
          return worst_case_error(op, snapshots);
        },
        py::arg("op"), py::arg("snapshots"));

  // Optimal affine recovery.
  py::class_<EpigraphProblem>(m, "EpigraphProblem")
      .def_readonly("m", &EpigraphProblem::m)
      .def_readonly("n", &EpigraphProblem::n)
      .def_readonly("lnorm2_bound", &EpigraphProblem::lnorm2_bound)
      .def("__len__", &EpigraphProblem::samples);
  py::class_<AffineRecoveryMap>(m, "AffineRecoveryMap")
      .def_readonly("cbar", &AffineRecoveryMap::cbar)
      .def_readonly("bbar", &AffineRecoveryMap::bbar);
  py::class_<SolveHistoryEntry>(m, "SolveHistoryEntry")
      .def_readonly("iteration", &SolveHistoryEntry::iteration)
      .def_readonly("objective", &SolveHistoryEntry::objective);
  py::class_<PrimalDualResult>(m, "PrimalDualResult")
      .def_readonly("map", &PrimalDualResult::map)
      .def_readonly("best_objective", &PrimalDualResult::best_objective)
      .def_readonly("iterations", &PrimalDualResult::iterations)
      .def_readonly("early_exit", &PrimalDualResult::early_exit)
      .def_readonly("history", &PrimalDualResult::history);
  py::class_<SubgradientResult>(m, "SubgradientResult")
      .def_readonly("map", &SubgradientResult::map)
      .def_readonly("best_objective", &SubgradientResult::best_objective)
      .def_readonly("history", &SubgradientResult::history);
  m.def("build_problem",
        [](const ParametricModel& model, const Matrix& snapshots,
           const ObservationSetup& setup, const Matrix& zn) {
          return build_problem(model.space(), snapshots, setup, as_subspace(model, zn));
        },
        py::arg("model"), py::arg("snapshots"), py::arg("setup"), py::arg("zn"));
  m.def("primal_dual_solve", &primal_dual_solve, py::arg("problem"),
        py::arg("iterations"), py::arg("gamma_g") = 0.0, py::arg("gamma_f") = 0.0,
        py::arg("theta") = 1.0);
  m.def("subgradient_baseline", &subgradient_baseline, py::arg("problem"),
        py::arg("iterations"), py::arg("c0") = 0.0);
  m.def("apply_recovery", &apply, py::arg("map"), py::arg("w_coords"));
  m.def("apply_recovery_state", &apply_state, py::arg("map"), py::arg("setup"),
        py::arg("u"));
  m.def("project_epigraph",
        [](const Vector& u, Vector v, double t) {
          project_epigraph(u, v, t);
          return std::make_pair(std::move(v), t);
        },
        py::arg("u"), py::arg("v"), py::arg("t"));

  // Sensor dictionaries and greedy placement.
  py::class_<Dictionary>(m, "Dictionary")
      .def_property_readonly("locations",
                             [](const Dictionary& d) {
                               std::vector<double> xs;
                               for (const auto& s : d.sensors()) xs.push_back(s.x);
                               return xs;
                             })
      .def("__len__", &Dictionary::size);
  m.def("point_dictionary",
        [](const ParametricModel& model, Eigen::Index count) {
          return Dictionary::point_grid(model.shared_space(), count);
        },
        py::arg("model"), py::arg("count"));
  m.def("local_average_dictionary",
        [](const ParametricModel& model, Eigen::Index count, double tau) {
          return Dictionary::local_average_grid(model.shared_space(), count, tau);
        },
        py::arg("model"), py::arg("count"), py::arg("tau"));

  py::class_<GreedyRun>(m, "GreedyRun")
      .def_readonly("selected", &GreedyRun::selected)
      .def_readonly("rm_history", &GreedyRun::rm_history)
      .def_readonly("beta_history", &GreedyRun::beta_history)
      .def_readonly("reached", &GreedyRun::reached)
      .def_readonly("stalled", &GreedyRun::stalled)
      .def("__len__", &GreedyRun::size);
  m.def("collective_omp",
        [](const ParametricModel& model, const Matrix& vn, const Dictionary& dict,
           double beta_target, double kappa, Eigen::Index m_max) {
          return collective_omp(as_subspace(model, vn), dict, beta_target, kappa, m_max);
        },
        py::arg("model"), py::arg("vn"), py::arg("dict"), py::arg("beta_target"),
        py::arg("kappa") = 1.0, py::arg("m_max") = 100);
  m.def("worst_case_omp",
        [](const ParametricModel& model, const Matrix& vn, const Dictionary& dict,
           double beta_target, double kappa, Eigen::Index m_max) {
          return worst_case_omp(as_subspace(model, vn), dict, beta_target, kappa, m_max);
        },
        py::arg("model"), py::arg("vn"), py::arg("dict"), py::arg("beta_target"),
        py::arg("kappa") = 1.0, py::arg("m_max") = 100);
  m.def("observation_from_run", &observation_from_run, py::arg("dict"), py::arg("run"));
  m.def("fourier_subspace",
        [](const ParametricModel& model, Eigen::Index n) {
          return fourier_subspace(model.space(), n).basis;
        },
        py::arg("model"), py::arg("n"));
  m.def("fourier_j_constant", &fourier_j_constant, py::arg("n"));

  // Joint basis/sensor enrichment.
  py::class_<JointStep>(m, "JointStep")
      .def_readonly("snapshot", &JointStep::snapshot)
      .def_readonly("new_sensors", &JointStep::new_sensors)
      .def_readonly("m_of_n", &JointStep::m_of_n)
      .def_readonly("err", &JointStep::err)
      .def_readonly("beta", &JointStep::beta);
  py::class_<JointRun>(m, "JointRun")
      .def_readonly("steps", &JointRun::steps)
      .def_property_readonly("vn", [](const JointRun& r) { return r.vn.basis; })
      .def_readonly("setup", &JointRun::setup)
      .def_readonly("sensor_indices", &JointRun::sensor_indices)
      .def_readonly("reached_eps", &JointRun::reached_eps)
      .def_readonly("budget_exhausted", &JointRun::budget_exhausted)
      .def_readonly("captured", &JointRun::captured);
  m.def("nested_greedy", &nested_greedy, py::arg("training"), py::arg("dict"),
        py::arg("beta_lower"), py::arg("eps_stop"), py::arg("n_max"), py::arg("m_max"));
  m.def("geim", &geim, py::arg("training"), py::arg("dict"), py::arg("n_max"),
        py::arg("eps_stop"));

  // Piecewise-affine families.
  py::enum_<TauMode>(m, "TauMode")
      .value("Sigma", TauMode::Sigma)
      .value("EpsMu", TauMode::EpsMu);
  py::enum_<SplitStrategy>(m, "SplitStrategy")
      .value("FullDyadic", SplitStrategy::FullDyadic)
      .value("GreedyCoordinate", SplitStrategy::GreedyCoordinate);
  py::enum_<Selection>(m, "Selection")
      .value("Ideal", Selection::Ideal)
      .value("Surrogate", Selection::Surrogate);
  py::class_<FamilyConfig>(m, "FamilyConfig")
      .def(py::init<>())
      .def_readwrite("mode", &FamilyConfig::mode)
      .def_readwrite("sigma", &FamilyConfig::sigma)
      .def_readwrite("eps", &FamilyConfig::eps)
      .def_readwrite("mu", &FamilyConfig::mu)
      .def_readwrite("strategy", &FamilyConfig::strategy)
      .def_readwrite("max_cells", &FamilyConfig::max_cells)
      .def_readwrite("max_n", &FamilyConfig::max_n);
  py::class_<Cell>(m, "Cell")
      .def_readonly("level", &Cell::level)
      .def_readonly("center", &Cell::center)
      .def_readonly("ubar", &Cell::ubar)
      .def_readonly("eps", &Cell::eps)
      .def_readonly("mu", &Cell::mu)
      .def_readonly("chosen_n", &Cell::chosen_n)
      .def_readonly("tau", &Cell::tau)
      .def_readonly("train_idx", &Cell::train_idx)
      .def_property_readonly("lo", [](const Cell& c) { return c.box.lo; })
      .def_property_readonly("hi", [](const Cell& c) { return c.box.hi; });
  py::class_<AdmissibleFamily>(m, "AdmissibleFamily")
      .def_readonly("cells", &AdmissibleFamily::cells)
      .def_readonly("complete", &AdmissibleFamily::complete)
      .def("__len__", &AdmissibleFamily::size);
  py::class_<CellEstimate>(m, "CellEstimate")
      .def_readonly("cell", &CellEstimate::cell)
      .def_readonly("n", &CellEstimate::n)
      .def_readonly("beta", &CellEstimate::beta)
      .def_readonly("score", &CellEstimate::score)
      .def_readonly("error_truth", &CellEstimate::error_truth)
      .def_readonly("usable", &CellEstimate::usable);
  py::class_<FamilyEstimate>(m, "FamilyEstimate")
      .def_readonly("state", &FamilyEstimate::state)
      .def_readonly("chosen_cell", &FamilyEstimate::chosen_cell)
      .def_readonly("diagnostics", &FamilyEstimate::diagnostics);
  m.def("build_family", &build_family, py::arg("model"), py::arg("training"),
        py::arg("setup"), py::arg("config"));
  m.def("partition_defect", &partition_defect, py::arg("family"));
  m.def("estimate",
        [](const AdmissibleFamily& family, const ParametricModel& model,
           const TrainingSet& training, const ObservationSetup& setup,
           const CoefficientVector& w, Selection selection,
           py::object truth) {
          if (truth.is_none()) return estimate(family, model, training, setup, w, selection);
          const CoefficientVector t = truth.cast<CoefficientVector>();
          return estimate(family, model, training, setup, w, selection, &t);
        },
        py::arg("family"), py::arg("model"), py::arg("training"), py::arg("setup"),
        py::arg("w"), py::arg("selection") = Selection::Surrogate,
        py::arg("truth") = py::none());

  // Benchmarks.
  py::class_<DeltaRow>(m, "DeltaRow")
      .def_readonly("sigma", &DeltaRow::sigma)
      .def_readonly("delta", &DeltaRow::delta)
      .def_readonly("delta_2sigma", &DeltaRow::delta_2sigma)
      .def_readonly("frame_lo", &DeltaRow::frame_lo)
      .def_readonly("frame_hi", &DeltaRow::frame_hi);
  m.def("delta_tilde",
        [](const Matrix& snapshots, const ObservationSetup& setup,
           const std::vector<double>& sigmas) {
          return delta_tilde(snapshots, setup, sigmas);
        },
        py::arg("snapshots"), py::arg("setup"), py::arg("sigmas"));
  py::class_<ChebyshevBall>(m, "ChebyshevBall")
      .def_readonly("center", &ChebyshevBall::center)
      .def_readonly("radius", &ChebyshevBall::radius)
      .def_readonly("iterations", &ChebyshevBall::iterations)
      .def_readonly("gap", &ChebyshevBall::gap);
  m.def("chebyshev_finite",
        [](const ParametricModel& model, const Matrix& points) {
          return chebyshev_finite(model.space(), points);
        },
        py::arg("model"), py::arg("points"));
  py::class_<EstimatorRow>(m, "EstimatorRow")
      .def_readonly("name", &EstimatorRow::name)
      .def_readonly("worst", &EstimatorRow::worst)
      .def_readonly("mean", &EstimatorRow::mean);
  py::class_<BenchmarkConfig>(m, "BenchmarkConfig")
      .def(py::init<>())
      .def_readwrite("n", &BenchmarkConfig::n)
      .def_readwrite("recovery_iterations", &BenchmarkConfig::recovery_iterations)
      .def_readwrite("family", &BenchmarkConfig::family)
      .def_readwrite("sigmas", &BenchmarkConfig::sigmas)
      .def_readwrite("width_proxy_n", &BenchmarkConfig::width_proxy_n)
      .def_readwrite("noise", &BenchmarkConfig::noise)
      .def_readwrite("seed", &BenchmarkConfig::seed);
  py::class_<BenchmarkReport>(m, "BenchmarkReport")
      .def_readonly("rows", &BenchmarkReport::rows)
      .def_readonly("delta", &BenchmarkReport::delta)
      .def_readonly("width_proxy", &BenchmarkReport::width_proxy)
      .def_readonly("train_size", &BenchmarkReport::train_size)
      .def_readonly("test_size", &BenchmarkReport::test_size)
      .def_readonly("family_cells", &BenchmarkReport::family_cells)
      .def_readonly("family_complete", &BenchmarkReport::family_complete);
  m.def("compare_estimators", &compare_estimators, py::arg("model"), py::arg("train"),
        py::arg("test"), py::arg("setup"), py::arg("config"));
  m.def("save_benchmark", &save_benchmark, py::arg("dir"), py::arg("report"));
}
