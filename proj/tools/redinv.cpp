// redinv: config-driven experiment pipelines over the estimator library.
// Exit codes: 0 ok, 2 config/schema violation (with field path), 3 numerical
// failure (with module.op), 1 command-line misuse.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "redinv/affine_recovery.hpp"
#include "redinv/benchmark.hpp"
#include "redinv/io.hpp"
#include "redinv/joint.hpp"
#include "redinv/piecewise.hpp"
#include "redinv/placement.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace redinv;

namespace {

constexpr const char* kVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Config schema: every object has a closed key set; violations carry the
// field path and exit with code 2.

struct SchemaError {
  std::string path;
  std::string message;
};

[[noreturn]] void fail(const std::string& path, const std::string& message) {
  throw SchemaError{path, message};
}

void check_keys(const json& obj, const std::string& path,
                std::initializer_list<std::string_view> allowed) {
  for (const auto& item : obj.items()) {
    bool ok = false;
    for (auto k : allowed)
      if (item.key() == k) ok = true;
    if (!ok) fail(path + "." + item.key(), "unknown key");
  }
}

const json& require_key(const json& obj, const std::string& path, const std::string& key) {
  if (!obj.is_object() || !obj.contains(key)) fail(path + "." + key, "missing required key");
  return obj.at(key);
}

long long require_int(const json& obj, const std::string& path, const std::string& key,
                      long long min_value) {
  const json& v = require_key(obj, path, key);
  if (!v.is_number_integer()) fail(path + "." + key, "expected an integer");
  const long long x = v.get<long long>();
  if (x < min_value)
    fail(path + "." + key, "must be at least " + std::to_string(min_value));
  return x;
}

long long optional_int(const json& obj, const std::string& path, const std::string& key,
                       long long min_value, long long fallback) {
  if (!obj.is_object() || !obj.contains(key)) return fallback;
  return require_int(obj, path, key, min_value);
}

double require_num(const json& obj, const std::string& path, const std::string& key) {
  const json& v = require_key(obj, path, key);
  if (!v.is_number()) fail(path + "." + key, "expected a number");
  return v.get<double>();
}

double optional_num(const json& obj, const std::string& path, const std::string& key,
                    double fallback) {
  if (!obj.is_object() || !obj.contains(key)) return fallback;
  return require_num(obj, path, key);
}

std::string require_str(const json& obj, const std::string& path, const std::string& key) {
  const json& v = require_key(obj, path, key);
  if (!v.is_string()) fail(path + "." + key, "expected a string");
  return v.get<std::string>();
}

std::string optional_str(const json& obj, const std::string& path, const std::string& key,
                         const std::string& fallback) {
  if (!obj.is_object() || !obj.contains(key)) return fallback;
  return require_str(obj, path, key);
}

std::vector<double> num_array(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) fail(path, "expected a nonempty array of numbers");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) fail(path, "expected a nonempty array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

std::vector<Eigen::Index> int_array(const json& v, const std::string& path, long long min_value) {
  if (!v.is_array() || v.empty()) fail(path, "expected a nonempty array of integers");
  std::vector<Eigen::Index> out;
  for (const auto& x : v) {
    if (!x.is_number_integer()) fail(path, "expected a nonempty array of integers");
    const long long value = x.get<long long>();
    if (value < min_value) fail(path, "entries must be at least " + std::to_string(min_value));
    out.push_back(static_cast<Eigen::Index>(value));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Config sections.

ParametricModel model_from_config(const json& cfg) {
  const json& m = require_key(cfg, "config", "model");
  check_keys(m, "config.model", {"n_h", "abar", "psis", "rhs", "Y"});
  const Eigen::Index n_h = static_cast<Eigen::Index>(require_int(m, "config.model", "n_h", 1));
  PiecewiseConstantField abar{num_array(require_key(m, "config.model", "abar"),
                                        "config.model.abar")};
  const json& psis_j = require_key(m, "config.model", "psis");
  if (!psis_j.is_array() || psis_j.empty())
    fail("config.model.psis", "expected a nonempty array of fields");
  std::vector<PiecewiseConstantField> psis;
  for (std::size_t i = 0; i < psis_j.size(); ++i)
    psis.push_back({num_array(psis_j.at(i), "config.model.psis[" + std::to_string(i) + "]")});
  PiecewiseConstantField rhs{num_array(require_key(m, "config.model", "rhs"),
                                       "config.model.rhs")};
  const json& y = require_key(m, "config.model", "Y");
  check_keys(y, "config.model.Y", {"lo", "hi"});
  const std::vector<double> lo = num_array(require_key(y, "config.model.Y", "lo"),
                                           "config.model.Y.lo");
  const std::vector<double> hi = num_array(require_key(y, "config.model.Y", "hi"),
                                           "config.model.Y.hi");
  if (lo.size() != psis.size()) fail("config.model.Y.lo", "arity must match psis");
  if (hi.size() != lo.size()) fail("config.model.Y.hi", "arity must match lo");
  for (std::size_t i = 0; i < lo.size(); ++i)
    if (!(lo[i] < hi[i])) fail("config.model.Y.lo", "lo must be strictly below hi");
  Vector vlo(static_cast<Eigen::Index>(lo.size())), vhi(static_cast<Eigen::Index>(hi.size()));
  for (std::size_t i = 0; i < lo.size(); ++i) {
    vlo[static_cast<Eigen::Index>(i)] = lo[i];
    vhi[static_cast<Eigen::Index>(i)] = hi[i];
  }
  return ParametricModel(n_h, std::move(abar), std::move(psis), std::move(rhs),
                         ParameterBox(std::move(vlo), std::move(vhi)));
}

std::vector<Eigen::Index> training_resolution(const json& cfg, const ParametricModel& model) {
  const json& t = require_key(cfg, "config", "training");
  check_keys(t, "config.training", {"resolution"});
  auto res = int_array(require_key(t, "config.training", "resolution"),
                       "config.training.resolution", 1);
  if (static_cast<Eigen::Index>(res.size()) != model.box().dim())
    fail("config.training.resolution", "one entry per parameter required");
  return res;
}

struct SensorSpec {
  bool has_dictionary = false;
  SensorKind dict_kind = SensorKind::PointEval;
  Eigen::Index dict_count = 0;
  double dict_width = 0.0;
  bool has_explicit = false;
  std::vector<SensorDescriptor> explicit_sensors;
};

SensorKind parse_kind(const std::string& s, const std::string& path) {
  if (s == "point") return SensorKind::PointEval;
  if (s == "local_average") return SensorKind::LocalAverage;
  fail(path, "expected 'point' or 'local_average'");
}

SensorSpec sensors_from_config(const json& cfg) {
  SensorSpec spec;
  const json& s = require_key(cfg, "config", "sensors");
  check_keys(s, "config.sensors", {"dictionary", "explicit"});
  if (s.contains("dictionary")) {
    const json& d = s.at("dictionary");
    check_keys(d, "config.sensors.dictionary", {"kind", "count", "width"});
    spec.has_dictionary = true;
    spec.dict_kind = parse_kind(require_str(d, "config.sensors.dictionary", "kind"),
                                "config.sensors.dictionary.kind");
    spec.dict_count =
        static_cast<Eigen::Index>(require_int(d, "config.sensors.dictionary", "count", 1));
    if (spec.dict_kind == SensorKind::LocalAverage) {
      spec.dict_width = require_num(d, "config.sensors.dictionary", "width");
      if (!(spec.dict_width > 0.0))
        fail("config.sensors.dictionary.width", "must be positive");
    } else if (d.contains("width")) {
      fail("config.sensors.dictionary.width", "only valid for local_average sensors");
    }
  }
  if (s.contains("explicit")) {
    const json& e = s.at("explicit");
    check_keys(e, "config.sensors.explicit", {"kind", "locations", "widths", "width"});
    spec.has_explicit = true;
    const SensorKind kind = parse_kind(require_str(e, "config.sensors.explicit", "kind"),
                                       "config.sensors.explicit.kind");
    const std::vector<double> locs = num_array(
        require_key(e, "config.sensors.explicit", "locations"),
        "config.sensors.explicit.locations");
    std::vector<double> widths(locs.size(), 0.0);
    if (kind == SensorKind::LocalAverage) {
      if (e.contains("widths")) {
        widths = num_array(e.at("widths"), "config.sensors.explicit.widths");
        if (widths.size() != locs.size())
          fail("config.sensors.explicit.widths", "one width per location required");
      } else {
        const double w = require_num(e, "config.sensors.explicit", "width");
        std::fill(widths.begin(), widths.end(), w);
      }
      for (double w : widths)
        if (!(w > 0.0)) fail("config.sensors.explicit.widths", "widths must be positive");
    } else if (e.contains("widths") || e.contains("width")) {
      fail("config.sensors.explicit.widths", "only valid for local_average sensors");
    }
    for (std::size_t i = 0; i < locs.size(); ++i)
      spec.explicit_sensors.push_back({kind, locs[i], widths[i]});
  }
  if (!spec.has_dictionary && !spec.has_explicit)
    fail("config.sensors", "need 'dictionary' or 'explicit'");
  return spec;
}

std::string method_name(const json& cfg, const std::string& command,
                        std::initializer_list<std::string_view> allowed) {
  const json& m = require_key(cfg, "config", "method");
  const std::string name = require_str(m, "config.method", "name");
  for (auto a : allowed)
    if (name == a) return name;
  fail("config.method.name", "'" + name + "' is not valid for command '" + command + "'");
}

FamilyConfig family_from_json(const json& f, const std::string& path) {
  check_keys(f, path, {"mode", "sigma", "eps", "mu", "strategy", "max_cells", "max_n"});
  FamilyConfig out;
  const std::string mode = optional_str(f, path, "mode", "sigma");
  if (mode == "sigma")
    out.mode = TauMode::Sigma;
  else if (mode == "eps_mu")
    out.mode = TauMode::EpsMu;
  else
    fail(path + ".mode", "expected 'sigma' or 'eps_mu'");
  out.sigma = optional_num(f, path, "sigma", out.sigma);
  out.eps = optional_num(f, path, "eps", out.eps);
  out.mu = optional_num(f, path, "mu", out.mu);
  if (out.mode == TauMode::Sigma && !(out.sigma > 0.0)) fail(path + ".sigma", "must be positive");
  if (out.mode == TauMode::EpsMu && !(out.eps > 0.0)) fail(path + ".eps", "must be positive");
  if (out.mode == TauMode::EpsMu && !(out.mu >= 1.0)) fail(path + ".mu", "must be at least 1");
  const std::string strategy = optional_str(f, path, "strategy", "full_dyadic");
  if (strategy == "full_dyadic")
    out.strategy = SplitStrategy::FullDyadic;
  else if (strategy == "greedy_coordinate")
    out.strategy = SplitStrategy::GreedyCoordinate;
  else
    fail(path + ".strategy", "expected 'full_dyadic' or 'greedy_coordinate'");
  out.max_cells = static_cast<Eigen::Index>(optional_int(f, path, "max_cells", 1, 64));
  out.max_n = static_cast<Eigen::Index>(optional_int(f, path, "max_n", -1, -1));
  return out;
}

struct TestSpec {
  std::vector<Eigen::Index> resolution;  // midpoint grid when nonempty
  Matrix params;                         // explicit points otherwise
  double noise = 0.0;
  std::uint64_t seed = 0;
};

TestSpec test_from_config(const json& cfg, const ParametricModel& model) {
  TestSpec spec;
  const json& t = require_key(cfg, "config", "test");
  check_keys(t, "config.test", {"resolution", "params", "noise", "seed"});
  const bool has_res = t.contains("resolution");
  const bool has_params = t.contains("params");
  if (has_res == has_params)
    fail("config.test", "need exactly one of 'resolution' or 'params'");
  if (has_res) {
    spec.resolution = int_array(t.at("resolution"), "config.test.resolution", 1);
    if (static_cast<Eigen::Index>(spec.resolution.size()) != model.box().dim())
      fail("config.test.resolution", "one entry per parameter required");
  } else {
    const json& rows = t.at("params");
    if (!rows.is_array() || rows.empty())
      fail("config.test.params", "expected a nonempty array of parameter rows");
    spec.params.resize(static_cast<Eigen::Index>(rows.size()), model.box().dim());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto row = num_array(rows.at(r), "config.test.params[" + std::to_string(r) + "]");
      if (static_cast<Eigen::Index>(row.size()) != model.box().dim())
        fail("config.test.params[" + std::to_string(r) + "]", "wrong parameter arity");
      for (std::size_t i = 0; i < row.size(); ++i)
        spec.params(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) = row[i];
    }
  }
  spec.noise = optional_num(t, "config.test", "noise", 0.0);
  if (spec.noise < 0.0) fail("config.test.noise", "must be nonnegative");
  if (spec.noise > 0.0) {
    if (!t.contains("seed")) fail("config.test.seed", "required when noise > 0");
    spec.seed = static_cast<std::uint64_t>(require_int(t, "config.test", "seed", 0));
  } else if (t.contains("seed")) {
    spec.seed = static_cast<std::uint64_t>(require_int(t, "config.test", "seed", 0));
  }
  return spec;
}

// ---------------------------------------------------------------------------
// Manifest and stage caching.

json load_manifest(const fs::path& out_dir) {
  const fs::path path = out_dir / "manifest.json";
  if (!fs::exists(path)) {
    json m;
    m["kind"] = "redinv.manifest";
    m["stages"] = json::object();
    return m;
  }
  std::ifstream in(path);
  json m = json::parse(in, nullptr, false);
  if (m.is_discarded() || m.value("kind", "") != "redinv.manifest") {
    json fresh;
    fresh["kind"] = "redinv.manifest";
    fresh["stages"] = json::object();
    return fresh;
  }
  if (!m.contains("stages") || !m["stages"].is_object()) m["stages"] = json::object();
  return m;
}

void store_manifest(const fs::path& out_dir, json& manifest, const json& config) {
  manifest["kind"] = "redinv.manifest";
  manifest["config_hash"] = hash_hex(fnv1a(config.dump()));
  manifest["versions"] = {{"redinv", kVersion},
                          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                        std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                        std::to_string(EIGEN_MINOR_VERSION)}};
  std::ofstream out(out_dir / "manifest.json", std::ios::binary);
  out << manifest.dump(2) << "\n";
}

std::string section_hash(std::initializer_list<const json*> sections) {
  std::string text;
  for (const json* s : sections) text += s->dump();
  return hash_hex(fnv1a(text));
}

class StageClock {
 public:
  StageClock() : start_(std::chrono::steady_clock::now()) {}
  long long ms() const {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

void record_stage(json& manifest, const std::string& name, const std::string& input_hash,
                  const std::vector<fs::path>& outputs, long long ms) {
  json outs = json::object();
  for (const auto& p : outputs) outs[p.filename().string()] = hash_hex(file_fnv1a(p.string()));
  manifest["stages"][name] = {{"hash", input_hash}, {"outputs", outs}, {"ms", ms}};
}

bool stage_fresh(const json& manifest, const std::string& name, const std::string& input_hash,
                 const fs::path& out_dir) {
  const json& stages = manifest.at("stages");
  if (!stages.contains(name)) return false;
  const json& stage = stages.at(name);
  if (stage.value("hash", "") != input_hash) return false;
  if (!stage.contains("outputs")) return false;
  for (const auto& item : stage.at("outputs").items())
    if (!fs::exists(out_dir / item.key())) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Pipeline pieces shared by the commands.

struct Pipeline {
  json config;
  fs::path out_dir;
  json manifest;
  ParametricModel model;
  std::string snapshots_hash;

  explicit Pipeline(const json& cfg)
      : config(cfg),
        out_dir(require_str(cfg, "config", "output")),
        model(model_from_config(cfg)) {
    fs::create_directories(out_dir);
    manifest = load_manifest(out_dir);
    snapshots_hash = section_hash({&config.at("model"), &config.at("training")});
  }

  void flush() { store_manifest(out_dir, manifest, config); }

  TrainingSet ensure_training() {
    const fs::path json_path = out_dir / "snapshots.json";
    const fs::path csv_path = out_dir / "snapshots.csv";
    if (stage_fresh(manifest, "snapshots", snapshots_hash, out_dir)) {
      TrainingArchive archive = load_training(json_path.string());
      return std::move(archive.training);
    }
    const StageClock clock;
    TrainingSet training = sample_training_set(model, training_resolution(config, model));
    save_training(json_path.string(), csv_path.string(), model, training);
    record_stage(manifest, "snapshots", snapshots_hash, {json_path, csv_path}, clock.ms());
    return training;
  }

  Dictionary dictionary(const SensorSpec& spec) {
    if (!spec.has_dictionary)
      fail("config.sensors.dictionary", "this command needs a sensor dictionary");
    if (spec.dict_kind == SensorKind::PointEval)
      return Dictionary::point_grid(model.shared_space(), spec.dict_count);
    return Dictionary::local_average_grid(model.shared_space(), spec.dict_count,
                                          spec.dict_width);
  }

  // W for fit/estimate/family/benchmark: explicit sensors win; otherwise the
  // sensors.json written by a `place` run in the same output directory.
  ObservationSetup ensure_setup(const SensorSpec& spec) {
    if (spec.has_explicit)
      return build_observation(model.shared_space(), spec.explicit_sensors);
    const fs::path path = out_dir / "sensors.json";
    if (!fs::exists(path))
      fail("config.sensors",
           "no explicit sensors given and no sensors.json in the output directory; "
           "run `redinv place` first");
    return build_observation(model.shared_space(), load_sensors(path.string()));
  }
};

void write_summary(const fs::path& path, const json& summary) {
  std::ofstream out(path, std::ios::binary);
  out << summary.dump(2) << "\n";
}

Matrix solve_columns(const ParametricModel& model, const Matrix& params) {
  Matrix snaps(model.dim(), params.rows());
  for (Eigen::Index j = 0; j < params.rows(); ++j)
    snaps.col(j) = model.solve(params.row(j).transpose());
  return snaps;
}

TrainingSet test_points(const Pipeline& pipe, const TestSpec& spec) {
  if (!spec.resolution.empty()) return held_out_grid(pipe.model, spec.resolution);
  TrainingSet set;
  set.params = spec.params;
  set.snapshots = solve_columns(pipe.model, spec.params);
  return set;
}

// ---------------------------------------------------------------------------
// Commands.

int cmd_snapshots(const json& cfg) {
  Pipeline pipe(cfg);
  method_name(cfg, "snapshots", {"pbdw", "affine_opt", "omp_place", "nested", "geim",
                                 "piecewise", "benchmark"});
  pipe.ensure_training();
  pipe.flush();
  return 0;
}

int cmd_place(const json& cfg) {
  Pipeline pipe(cfg);
  const std::string name = method_name(cfg, "place", {"omp_place", "nested", "geim"});
  const json& m = cfg.at("method");
  const SensorSpec spec = sensors_from_config(cfg);
  const TrainingSet training = pipe.ensure_training();
  const Dictionary dict = pipe.dictionary(spec);

  const std::string input_hash =
      section_hash({&cfg.at("model"), &cfg.at("training"), &cfg.at("sensors"), &m});
  const StageClock clock;
  std::vector<fs::path> outputs;
  json summary;
  summary["method"] = name;

  if (name == "omp_place") {
    check_keys(m, "config.method",
               {"name", "n", "score", "beta_target", "kappa", "m_max"});
    const Eigen::Index n = static_cast<Eigen::Index>(require_int(m, "config.method", "n", 1));
    const std::string score = optional_str(m, "config.method", "score", "collective");
    if (score != "collective" && score != "worst_case")
      fail("config.method.score", "expected 'collective' or 'worst_case'");
    const double beta_target = optional_num(m, "config.method", "beta_target", 0.0);
    const double kappa = optional_num(m, "config.method", "kappa", 1.0);
    const Eigen::Index m_max =
        static_cast<Eigen::Index>(require_int(m, "config.method", "m_max", 1));

    const GreedyBasis gb = greedy_reduced_basis(pipe.model.space(), training, n);
    const GreedyRun run = score == "collective"
                              ? collective_omp(gb.basis, dict, beta_target, kappa, m_max)
                              : worst_case_omp(gb.basis, dict, beta_target, kappa, m_max);

    const fs::path place_csv = pipe.out_dir / "placement.csv";
    save_greedy_run(place_csv.string(), run, dict);
    std::vector<SensorDescriptor> sensors;
    for (Eigen::Index idx : run.selected) sensors.push_back(dict.descriptor(idx));
    const fs::path sensors_json = pipe.out_dir / "sensors.json";
    save_sensors(sensors_json.string(), sensors);
    outputs = {place_csv, sensors_json};

    summary["n"] = gb.basis.dim();
    summary["m"] = run.size();
    summary["beta"] = run.beta_history.back();
    summary["reached"] = run.reached;
    summary["stalled"] = run.stalled;
  } else {
    check_keys(m, "config.method",
               {"name", "beta_lower", "eps_stop", "n_max", "m_max"});
    const double eps_stop = optional_num(m, "config.method", "eps_stop", 0.0);
    JointRun run;
    if (name == "nested") {
      const double beta_lower = require_num(m, "config.method", "beta_lower");
      const Eigen::Index n_max =
          static_cast<Eigen::Index>(require_int(m, "config.method", "n_max", 1));
      const Eigen::Index m_max =
          static_cast<Eigen::Index>(require_int(m, "config.method", "m_max", 1));
      run = nested_greedy(training, dict, beta_lower, eps_stop, n_max, m_max);
    } else {
      if (m.contains("beta_lower")) fail("config.method.beta_lower", "unknown key");
      if (m.contains("m_max")) fail("config.method.m_max", "unknown key");
      const Eigen::Index n_max =
          static_cast<Eigen::Index>(require_int(m, "config.method", "n_max", 1));
      run = geim(training, dict, n_max, eps_stop);
    }
    const fs::path joint_csv = pipe.out_dir / "joint_run.csv";
    save_joint_run(joint_csv.string(), run);
    const fs::path sensors_json = pipe.out_dir / "sensors.json";
    save_sensors(sensors_json.string(), run.setup.sensors);
    outputs = {joint_csv, sensors_json};

    summary["n"] = run.vn.dim();
    summary["m"] = static_cast<Eigen::Index>(run.sensor_indices.size());
    summary["beta"] = run.steps.empty() ? 0.0 : run.steps.back().beta;
    summary["err"] = run.steps.empty() ? 0.0 : run.steps.back().err;
    summary["reached_eps"] = run.reached_eps;
    summary["budget_exhausted"] = run.budget_exhausted;
    summary["captured"] = run.captured;
  }

  const fs::path summary_json = pipe.out_dir / "place.json";
  write_summary(summary_json, summary);
  outputs.push_back(summary_json);
  record_stage(pipe.manifest, "place", input_hash, outputs, clock.ms());
  pipe.flush();
  return 0;
}

int cmd_fit(const json& cfg) {
  Pipeline pipe(cfg);
  const std::string name = method_name(cfg, "fit", {"pbdw", "affine_opt"});
  const json& m = cfg.at("method");
  const SensorSpec spec = sensors_from_config(cfg);
  const TrainingSet training = pipe.ensure_training();
  const ObservationSetup setup = pipe.ensure_setup(spec);

  const std::string input_hash =
      section_hash({&cfg.at("model"), &cfg.at("training"), &cfg.at("sensors"), &m});
  const StageClock clock;
  std::vector<fs::path> outputs;
  json summary;
  summary["method"] = name;
  summary["m"] = setup.size();

  if (name == "pbdw") {
    check_keys(m, "config.method", {"name", "n", "offset"});
    const Eigen::Index n = static_cast<Eigen::Index>(require_int(m, "config.method", "n", 0));
    const std::string offset = optional_str(m, "config.method", "offset", "none");
    if (offset != "none" && offset != "center")
      fail("config.method.offset", "expected 'none' or 'center'");

    Matrix snaps = training.snapshots;
    CoefficientVector ubar;
    if (offset == "center") {
      ubar = pipe.model.solve(pipe.model.box().center());
      snaps.colwise() -= ubar;
    }
    const GreedyBasis gb = greedy_reduced_basis(pipe.model.space(), snaps, n);

    std::vector<std::vector<std::string>> rows;
    double worst = 0.0, mean = 0.0;
    if (offset == "center") {
      const AffinePbdw op = fit_affine_pbdw(gb.basis, setup, ubar);
      summary["beta"] = op.linear.beta;
      summary["mu"] = op.linear.mu;
      summary["n"] = op.linear.n();
      for (Eigen::Index j = 0; j < training.size(); ++j) {
        const CoefficientVector w = setup.project(training.snapshots.col(j));
        const double err =
            pipe.model.space().norm(training.snapshots.col(j) - reconstruct(op, w));
        rows.push_back({std::to_string(j), format_double(err)});
        worst = std::max(worst, err);
        mean += err;
      }
    } else {
      const PbdwOperator op = fit_pbdw(gb.basis, setup);
      summary["beta"] = op.beta;
      summary["mu"] = op.mu;
      summary["n"] = op.n();
      for (Eigen::Index j = 0; j < training.size(); ++j) {
        const CoefficientVector w = setup.project(training.snapshots.col(j));
        const double err =
            pipe.model.space().norm(training.snapshots.col(j) - reconstruct(op, w));
        rows.push_back({std::to_string(j), format_double(err)});
        worst = std::max(worst, err);
        mean += err;
      }
    }
    mean /= static_cast<double>(training.size());
    summary["training_worst"] = worst;
    summary["training_mean"] = mean;
    const fs::path errors_csv = pipe.out_dir / "training_errors.csv";
    write_csv(errors_csv.string(), {"snapshot", "error"}, rows);
    outputs.push_back(errors_csv);
  } else {
    check_keys(m, "config.method", {"name", "n", "iterations"});
    const Eigen::Index n = static_cast<Eigen::Index>(require_int(m, "config.method", "n", 1));
    const Eigen::Index iterations =
        static_cast<Eigen::Index>(optional_int(m, "config.method", "iterations", 1, 4000));

    const GreedyBasis gb = greedy_reduced_basis(pipe.model.space(), training, n);
    const EpigraphProblem prob =
        build_problem(pipe.model.space(), training.snapshots, setup, gb.basis);
    const PrimalDualResult result = primal_dual_solve(prob, iterations);

    const fs::path map_json = pipe.out_dir / "recovery_map.json";
    save_recovery_map(map_json.string(), result.map, training.size(), result.iterations,
                      result.best_objective);
    std::vector<std::vector<std::string>> rows;
    for (const auto& h : result.history)
      rows.push_back({std::to_string(h.iteration), format_double(h.objective)});
    const fs::path history_csv = pipe.out_dir / "solve_history.csv";
    write_csv(history_csv.string(), {"iteration", "objective"}, rows);
    outputs = {map_json, history_csv};

    summary["n"] = n;
    summary["iterations"] = result.iterations;
    summary["objective"] = result.best_objective;
    summary["early_exit"] = result.early_exit;
  }

  const fs::path fit_json = pipe.out_dir / "fit.json";
  write_summary(fit_json, summary);
  outputs.push_back(fit_json);
  record_stage(pipe.manifest, "fit", input_hash, outputs, clock.ms());
  pipe.flush();
  return 0;
}

int cmd_family(const json& cfg) {
  Pipeline pipe(cfg);
  method_name(cfg, "family", {"piecewise"});
  const json& m = cfg.at("method");
  check_keys(m, "config.method",
             {"name", "mode", "sigma", "eps", "mu", "strategy", "max_cells", "max_n",
              "selection"});
  json family_keys = m;
  family_keys.erase("name");
  family_keys.erase("selection");
  const FamilyConfig family_cfg = family_from_json(family_keys, "config.method");
  const SensorSpec spec = sensors_from_config(cfg);
  const TrainingSet training = pipe.ensure_training();
  const ObservationSetup setup = pipe.ensure_setup(spec);

  const std::string input_hash =
      section_hash({&cfg.at("model"), &cfg.at("training"), &cfg.at("sensors"), &m});
  const StageClock clock;
  const AdmissibleFamily family = build_family(pipe.model, training, setup, family_cfg);
  const fs::path family_dir = pipe.out_dir / "family";
  save_family(family_dir.string(), family);

  json summary;
  summary["method"] = "piecewise";
  summary["cells"] = family.size();
  summary["complete"] = family.complete;
  int max_level = 0;
  double worst_tau = 0.0;
  for (const Cell& c : family.cells) {
    max_level = std::max(max_level, c.level);
    worst_tau = std::max(worst_tau, c.tau);
  }
  summary["max_level"] = max_level;
  summary["worst_tau"] = worst_tau;
  const fs::path summary_json = pipe.out_dir / "family_summary.json";
  write_summary(summary_json, summary);
  record_stage(pipe.manifest, "family", input_hash,
               {family_dir / "family.json", summary_json}, clock.ms());
  pipe.flush();
  return 0;
}

int cmd_estimate(const json& cfg) {
  Pipeline pipe(cfg);
  const std::string name = method_name(cfg, "estimate", {"pbdw", "affine_opt", "piecewise"});
  const json& m = cfg.at("method");
  const SensorSpec spec = sensors_from_config(cfg);
  const TrainingSet training = pipe.ensure_training();
  const ObservationSetup setup = pipe.ensure_setup(spec);
  const TestSpec test_spec = test_from_config(cfg, pipe.model);
  const TrainingSet test = test_points(pipe, test_spec);

  const std::string input_hash = section_hash(
      {&cfg.at("model"), &cfg.at("training"), &cfg.at("sensors"), &m, &cfg.at("test")});
  const StageClock clock;
  const InnerProductSpace& X = pipe.model.space();
  const Eigen::Index t_total = test.size();

  // Measurements shared by all methods; dumped as CSV for the record.
  Matrix w_meas(pipe.model.dim(), t_total);
  Matrix z_dump(t_total, setup.size());
  for (Eigen::Index t = 0; t < t_total; ++t) {
    CoefficientVector w = setup.project(test.snapshots.col(t));
    if (test_spec.noise > 0.0)
      w = add_noise(setup, w, test_spec.noise,
                    test_spec.seed + static_cast<std::uint64_t>(t));
    w_meas.col(t) = w;
    z_dump.row(t) = (setup.representers.transpose() * X.apply_gram(w)).transpose();
  }

  Matrix states(pipe.model.dim(), t_total);
  json summary;
  summary["method"] = name;
  summary["m"] = setup.size();
  summary["test_count"] = t_total;
  summary["noise"] = test_spec.noise;
  Eigen::Index worst_index = 0;

  if (name == "pbdw") {
    check_keys(m, "config.method", {"name", "n", "offset"});
    const Eigen::Index n = static_cast<Eigen::Index>(require_int(m, "config.method", "n", 0));
    const std::string offset = optional_str(m, "config.method", "offset", "none");
    if (offset != "none" && offset != "center")
      fail("config.method.offset", "expected 'none' or 'center'");
    if (offset == "center") {
      const CoefficientVector ubar = pipe.model.solve(pipe.model.box().center());
      Matrix snaps = training.snapshots.colwise() - ubar;
      const GreedyBasis gb = greedy_reduced_basis(X, snaps, n);
      const AffinePbdw op = fit_affine_pbdw(gb.basis, setup, ubar);
      summary["beta"] = op.linear.beta;
      summary["mu"] = op.linear.mu;
      summary["n"] = op.linear.n();
      for (Eigen::Index t = 0; t < t_total; ++t)
        states.col(t) = reconstruct(op, w_meas.col(t));
    } else {
      const GreedyBasis gb = greedy_reduced_basis(X, training, n);
      const PbdwOperator op = fit_pbdw(gb.basis, setup);
      summary["beta"] = op.beta;
      summary["mu"] = op.mu;
      summary["n"] = op.n();
      for (Eigen::Index t = 0; t < t_total; ++t)
        states.col(t) = reconstruct(op, w_meas.col(t));
    }
  } else if (name == "affine_opt") {
    check_keys(m, "config.method", {"name", "n", "iterations"});
    const Eigen::Index n = static_cast<Eigen::Index>(require_int(m, "config.method", "n", 1));
    const Eigen::Index iterations =
        static_cast<Eigen::Index>(optional_int(m, "config.method", "iterations", 1, 4000));
    const fs::path map_json = pipe.out_dir / "recovery_map.json";
    AffineRecoveryMap map;
    if (fs::exists(map_json)) {
      map = load_recovery_map(map_json.string(), &setup);
    } else {
      const GreedyBasis gb = greedy_reduced_basis(X, training, n);
      const EpigraphProblem prob = build_problem(X, training.snapshots, setup, gb.basis);
      const PrimalDualResult result = primal_dual_solve(prob, iterations);
      map = result.map;
      save_recovery_map(map_json.string(), map, training.size(), result.iterations,
                        result.best_objective);
    }
    summary["n"] = map.z_basis.cols();
    for (Eigen::Index t = 0; t < t_total; ++t)
      states.col(t) = apply(map, setup.w_coordinates(w_meas.col(t)));
  } else {
    check_keys(m, "config.method",
               {"name", "mode", "sigma", "eps", "mu", "strategy", "max_cells", "max_n",
                "selection"});
    const std::string sel_name = optional_str(m, "config.method", "selection", "surrogate");
    if (sel_name != "ideal" && sel_name != "surrogate")
      fail("config.method.selection", "expected 'ideal' or 'surrogate'");
    const Selection sel = sel_name == "ideal" ? Selection::Ideal : Selection::Surrogate;
    json family_keys = m;
    family_keys.erase("name");
    family_keys.erase("selection");
    const FamilyConfig family_cfg = family_from_json(family_keys, "config.method");

    const fs::path family_dir = pipe.out_dir / "family";
    AdmissibleFamily family;
    if (fs::exists(family_dir / "family.json")) {
      family = load_family(family_dir.string());
    } else {
      family = build_family(pipe.model, training, setup, family_cfg);
      save_family(family_dir.string(), family);
    }
    summary["cells"] = family.size();
    summary["selection"] = sel_name;

    double worst_err = -1.0;
    FamilyEstimate worst_est;
    for (Eigen::Index t = 0; t < t_total; ++t) {
      const CoefficientVector truth = test.snapshots.col(t);
      FamilyEstimate est =
          estimate(family, pipe.model, training, setup, w_meas.col(t), sel, &truth);
      states.col(t) = est.state;
      const double err = X.norm(truth - est.state);
      if (err > worst_err) {
        worst_err = err;
        worst_est = std::move(est);
        worst_index = t;
      }
    }
    // Selection diagnostics for the hardest test point.
    const fs::path diag_csv = pipe.out_dir / "diagnostics.csv";
    save_estimate_diagnostics(diag_csv.string(), worst_est);
    summary["worst_chosen_cell"] = worst_est.chosen_cell;
  }

  // Error table and summary shared by all methods.
  std::vector<std::string> header;
  for (Eigen::Index i = 0; i < pipe.model.box().dim(); ++i)
    header.push_back("y_" + std::to_string(i));
  header.push_back("error");
  std::vector<std::vector<std::string>> rows;
  double worst = 0.0, mean = 0.0;
  for (Eigen::Index t = 0; t < t_total; ++t) {
    const double err = X.norm(test.snapshots.col(t) - states.col(t));
    std::vector<std::string> row;
    for (Eigen::Index i = 0; i < test.params.cols(); ++i)
      row.push_back(format_double(test.params(t, i)));
    row.push_back(format_double(err));
    rows.push_back(std::move(row));
    if (err > worst) {
      worst = err;
      worst_index = t;
    }
    mean += err;
  }
  mean /= static_cast<double>(t_total);
  summary["worst"] = worst;
  summary["mean"] = mean;
  summary["worst_index"] = worst_index;

  const fs::path errors_csv = pipe.out_dir / "errors.csv";
  write_csv(errors_csv.string(), header, rows);
  const fs::path meas_csv = pipe.out_dir / "measurements.csv";
  save_measurements(meas_csv.string(), test.params, z_dump);
  const fs::path summary_json = pipe.out_dir / "summary.json";
  write_summary(summary_json, summary);
  record_stage(pipe.manifest, "estimate", input_hash, {errors_csv, meas_csv, summary_json},
               clock.ms());
  pipe.flush();
  return 0;
}

int cmd_benchmark(const json& cfg) {
  Pipeline pipe(cfg);
  method_name(cfg, "benchmark", {"benchmark"});
  const json& m = cfg.at("method");
  check_keys(m, "config.method",
             {"name", "n", "iterations", "sigmas", "family", "width_proxy_n", "noise",
              "seed", "test_resolution"});
  BenchmarkConfig bench;
  bench.n = static_cast<Eigen::Index>(require_int(m, "config.method", "n", 0));
  bench.recovery_iterations =
      static_cast<Eigen::Index>(optional_int(m, "config.method", "iterations", 1, 4000));
  if (m.contains("sigmas"))
    for (double s : num_array(m.at("sigmas"), "config.method.sigmas")) {
      if (s < 0.0) fail("config.method.sigmas", "levels must be nonnegative");
      bench.sigmas.push_back(s);
    }
  bench.family = family_from_json(require_key(m, "config.method", "family"),
                                  "config.method.family");
  bench.width_proxy_n =
      static_cast<Eigen::Index>(optional_int(m, "config.method", "width_proxy_n", 0, 8));
  bench.noise = optional_num(m, "config.method", "noise", 0.0);
  if (bench.noise < 0.0) fail("config.method.noise", "must be nonnegative");
  if (bench.noise > 0.0 && !m.contains("seed"))
    fail("config.method.seed", "required when noise > 0");
  bench.seed = static_cast<std::uint64_t>(optional_int(m, "config.method", "seed", 0, 0));

  const SensorSpec spec = sensors_from_config(cfg);
  const TrainingSet training = pipe.ensure_training();
  const ObservationSetup setup = pipe.ensure_setup(spec);

  std::vector<Eigen::Index> test_res;
  if (m.contains("test_resolution")) {
    test_res = int_array(m.at("test_resolution"), "config.method.test_resolution", 1);
    if (static_cast<Eigen::Index>(test_res.size()) != pipe.model.box().dim())
      fail("config.method.test_resolution", "one entry per parameter required");
  } else {
    test_res = training_resolution(cfg, pipe.model);
  }
  const TrainingSet test = held_out_grid(pipe.model, test_res);

  const std::string input_hash =
      section_hash({&cfg.at("model"), &cfg.at("training"), &cfg.at("sensors"), &m});
  const StageClock clock;
  const BenchmarkReport report = compare_estimators(pipe.model, training, test, setup, bench);
  save_benchmark(pipe.out_dir.string(), report);
  record_stage(pipe.manifest, "benchmark", input_hash,
               {pipe.out_dir / "estimators.csv", pipe.out_dir / "delta.csv",
                pipe.out_dir / "width.csv", pipe.out_dir / "report.json"},
               clock.ms());
  pipe.flush();
  return 0;
}

// ---------------------------------------------------------------------------
// report: scan run directories and print a fixed-width summary table.

struct ReportRow {
  std::string run;
  std::string stage;
  std::string detail;  // method or estimator name
  std::string worst = "-", mean = "-", beta = "-", mu = "-", cells = "-", m = "-",
              sigma = "-", delta = "-";
};

std::string fmt_num(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number()) return "-";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4e", j.at(key).get<double>());
  return buf;
}

std::string fmt_int(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number_integer()) return "-";
  return std::to_string(j.at(key).get<long long>());
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) return json();
  json j = json::parse(in, nullptr, false);
  return j.is_discarded() ? json() : j;
}

void collect_rows(const fs::path& dir, const std::string& run, std::vector<ReportRow>& rows) {
  if (const json j = read_json_file(dir / "place.json"); j.is_object()) {
    ReportRow r{run, "place", j.value("method", "-")};
    r.beta = fmt_num(j, "beta");
    r.m = fmt_int(j, "m");
    r.worst = fmt_num(j, "err");
    rows.push_back(std::move(r));
  }
  if (const json j = read_json_file(dir / "fit.json"); j.is_object()) {
    ReportRow r{run, "fit", j.value("method", "-")};
    r.beta = fmt_num(j, "beta");
    r.mu = fmt_num(j, "mu");
    r.m = fmt_int(j, "m");
    r.worst = fmt_num(j, "training_worst");
    r.mean = fmt_num(j, "training_mean");
    if (r.worst == "-") r.worst = fmt_num(j, "objective");
    rows.push_back(std::move(r));
  }
  if (const json j = read_json_file(dir / "family_summary.json"); j.is_object()) {
    ReportRow r{run, "family", "piecewise"};
    r.cells = fmt_int(j, "cells");
    r.worst = fmt_num(j, "worst_tau");
    rows.push_back(std::move(r));
  }
  if (const json j = read_json_file(dir / "summary.json"); j.is_object()) {
    ReportRow r{run, "estimate", j.value("method", "-")};
    r.worst = fmt_num(j, "worst");
    r.mean = fmt_num(j, "mean");
    r.beta = fmt_num(j, "beta");
    r.mu = fmt_num(j, "mu");
    r.cells = fmt_int(j, "cells");
    r.m = fmt_int(j, "m");
    rows.push_back(std::move(r));
  }
  if (const json j = read_json_file(dir / "report.json"); j.is_object()) {
    std::string sigma = "-", delta = "-";
    if (j.contains("delta") && j.at("delta").is_array() && !j.at("delta").empty()) {
      sigma = fmt_num(j.at("delta").at(0), "sigma");
      delta = fmt_num(j.at("delta").at(0), "delta_tilde");
    }
    if (j.contains("estimators"))
      for (const auto& e : j.at("estimators")) {
        ReportRow r{run, "benchmark", e.value("name", "-")};
        r.worst = fmt_num(e, "worst");
        r.mean = fmt_num(e, "mean");
        r.cells = fmt_int(j, "family_cells");
        r.sigma = sigma;
        r.delta = delta;
        rows.push_back(std::move(r));
      }
  }
}

int cmd_report(const std::string& dir_arg) {
  const fs::path dir(dir_arg);
  std::vector<std::pair<std::string, fs::path>> runs;
  if (fs::exists(dir / "manifest.json")) {
    runs.emplace_back(dir.filename().string(), dir);
  } else if (fs::is_directory(dir)) {
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.is_directory() && fs::exists(entry.path() / "manifest.json"))
        runs.emplace_back(entry.path().filename().string(), entry.path());
    std::sort(runs.begin(), runs.end());
  }
  if (runs.empty()) {
    std::cerr << "error: no manifest found under " << dir_arg << "\n";
    return 2;
  }

  std::vector<ReportRow> rows;
  for (const auto& [name, path] : runs) collect_rows(path, name, rows);
  if (rows.empty()) {
    std::cout << "no runs\n";
    return 0;
  }
  std::sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
    return std::tie(a.run, a.stage, a.detail) < std::tie(b.run, b.stage, b.detail);
  });

  std::printf("%-18s %-10s %-22s %-12s %-12s %-10s %-10s %-5s %-5s %-10s %-12s\n", "run",
              "stage", "detail", "worst", "mean", "beta", "mu", "K", "m", "sigma",
              "delta_tilde");
  for (const ReportRow& r : rows)
    std::printf("%-18s %-10s %-22s %-12s %-12s %-10s %-10s %-5s %-5s %-10s %-12s\n",
                r.run.c_str(), r.stage.c_str(), r.detail.c_str(), r.worst.c_str(),
                r.mean.c_str(), r.beta.c_str(), r.mu.c_str(), r.cells.c_str(), r.m.c_str(),
                r.sigma.c_str(), r.delta.c_str());

  json twin;
  twin["kind"] = "redinv.report";
  json jrows = json::array();
  for (const ReportRow& r : rows)
    jrows.push_back({{"run", r.run},
                     {"stage", r.stage},
                     {"detail", r.detail},
                     {"worst", r.worst},
                     {"mean", r.mean},
                     {"beta", r.beta},
                     {"mu", r.mu},
                     {"K", r.cells},
                     {"m", r.m},
                     {"sigma", r.sigma},
                     {"delta_tilde", r.delta}});
  twin["rows"] = jrows;
  std::ofstream out(dir / "report_summary.json", std::ios::binary);
  out << twin.dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("config", "cannot read " + path);
  json cfg = json::parse(in, nullptr, false);
  if (cfg.is_discarded()) fail("config", "malformed JSON in " + path);
  check_keys(cfg, "config",
             {"model", "training", "sensors", "method", "test", "output", "threads"});
  require_key(cfg, "config", "model");
  require_key(cfg, "config", "training");
  require_key(cfg, "config", "method");
  require_str(cfg, "config", "output");
  return cfg;
}

void configure_threads(const json& cfg, int flag_threads) {
  long long threads = 1;
  if (cfg.is_object() && cfg.contains("threads"))
    threads = require_int(cfg, "config", "threads", 1);
  if (flag_threads > 0) threads = flag_threads;
  if (const char* env = std::getenv("REDINV_THREADS")) {
    char* end = nullptr;
    const long long parsed = std::strtoll(env, &end, 10);
    if (end == env || *end != '\0' || parsed < 1)
      fail("REDINV_THREADS", "must be a positive integer");
    threads = parsed;
  }
  set_thread_count(static_cast<int>(threads));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"reduced-model state estimation pipelines"};
  app.require_subcommand(1);
  int flag_threads = 0;
  app.add_option("--threads", flag_threads, "worker pool size (REDINV_THREADS overrides)");

  std::string cfg_path, report_dir;
  CLI::App* sub_snapshots = app.add_subcommand("snapshots", "sample the training set");
  sub_snapshots->add_option("config", cfg_path, "JSON config")->required();
  CLI::App* sub_place = app.add_subcommand("place", "select sensors");
  sub_place->add_option("config", cfg_path, "JSON config")->required();
  CLI::App* sub_fit = app.add_subcommand("fit", "fit an estimator");
  sub_fit->add_option("config", cfg_path, "JSON config")->required();
  CLI::App* sub_estimate = app.add_subcommand("estimate", "run an estimator on test points");
  sub_estimate->add_option("config", cfg_path, "JSON config")->required();
  CLI::App* sub_family = app.add_subcommand("family", "build a piecewise family");
  sub_family->add_option("config", cfg_path, "JSON config")->required();
  CLI::App* sub_benchmark = app.add_subcommand("benchmark", "compare all estimators");
  sub_benchmark->add_option("config", cfg_path, "JSON config")->required();
  CLI::App* sub_report = app.add_subcommand("report", "summarize run directories");
  sub_report->add_option("dir", report_dir, "results directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (sub_report->parsed()) {
      configure_threads(json(), flag_threads);
      return cmd_report(report_dir);
    }
    const json cfg = load_config(cfg_path);
    configure_threads(cfg, flag_threads);
    if (sub_snapshots->parsed()) return cmd_snapshots(cfg);
    if (sub_place->parsed()) return cmd_place(cfg);
    if (sub_fit->parsed()) return cmd_fit(cfg);
    if (sub_estimate->parsed()) return cmd_estimate(cfg);
    if (sub_family->parsed()) return cmd_family(cfg);
    if (sub_benchmark->parsed()) return cmd_benchmark(cfg);
  } catch (const SchemaError& e) {
    std::cerr << "config error at " << e.path << ": " << e.message << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "numerical failure in " << e.where() << ": " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 1;
}
