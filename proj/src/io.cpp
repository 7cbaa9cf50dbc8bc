#include "redinv/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace redinv {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t file_fnv1a(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInputError("io.hash", "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return fnv1a(ss.str());
}

std::uint64_t matrix_fnv1a(const Matrix& m) {
  std::string bytes;
  bytes.reserve(16 + static_cast<std::size_t>(m.size()) * sizeof(double));
  const auto push = [&bytes](const void* p, std::size_t len) {
    bytes.append(static_cast<const char*>(p), len);
  };
  const std::int64_t rows = m.rows(), cols = m.cols();
  push(&rows, sizeof rows);
  push(&cols, sizeof cols);
  push(m.data(), static_cast<std::size_t>(m.size()) * sizeof(double));
  return fnv1a(bytes);
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

double parse_double(std::string_view cell, const std::string& where) {
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  const auto res = std::from_chars(begin, end, value);
  if (res.ec != std::errc{} || res.ptr != end)
    throw InvalidInputError(where, "bad numeric cell '" + std::string(cell) + "'");
  return value;
}

long long parse_int(std::string_view cell, const std::string& where) {
  long long value = 0;
  const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size())
    throw InvalidInputError(where, "bad integer cell '" + std::string(cell) + "'");
  return value;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInputError("io.write", "cannot open " + path);
  out << text;
  if (!out) throw InvalidInputError("io.write", "short write to " + path);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInputError("io.read", "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse_json(const std::string& path) {
  json j = json::parse(read_text(path), nullptr, false);
  if (j.is_discarded()) throw InvalidInputError("io.read", "malformed JSON in " + path);
  return j;
}

// Infinity is not representable in JSON; unstable rungs round-trip as "inf".
json mu_to_json(const std::vector<double>& mu) {
  json arr = json::array();
  for (double v : mu) {
    if (std::isfinite(v))
      arr.push_back(v);
    else
      arr.push_back("inf");
  }
  return arr;
}

std::vector<double> mu_from_json(const json& arr, const std::string& where) {
  std::vector<double> mu;
  for (const auto& v : arr) {
    if (v.is_number())
      mu.push_back(v.get<double>());
    else if (v.is_string() && v.get<std::string>() == "inf")
      mu.push_back(std::numeric_limits<double>::infinity());
    else
      throw InvalidInputError(where, "bad stability entry");
  }
  return mu;
}

json vector_to_json(const Vector& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Vector vector_from_json(const json& arr, const std::string& where) {
  if (!arr.is_array()) throw InvalidInputError(where, "expected an array");
  Vector v(static_cast<Eigen::Index>(arr.size()));
  Eigen::Index i = 0;
  for (const auto& x : arr) {
    if (!x.is_number()) throw InvalidInputError(where, "expected numbers");
    v[i++] = x.get<double>();
  }
  return v;
}

json matrix_to_json(const Matrix& m) {  // row-major nested arrays
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vector_to_json(m.row(i)));
  return rows;
}

Matrix matrix_from_json(const json& rows, const std::string& where) {
  if (!rows.is_array()) throw InvalidInputError(where, "expected an array of rows");
  const Eigen::Index r = static_cast<Eigen::Index>(rows.size());
  if (r == 0) return Matrix(0, 0);
  Matrix m;
  Eigen::Index i = 0;
  for (const auto& row : rows) {
    const Vector v = vector_from_json(row, where);
    if (i == 0) m.resize(r, v.size());
    if (v.size() != m.cols()) throw InvalidInputError(where, "ragged matrix rows");
    m.row(i++) = v;
  }
  return m;
}

std::vector<double> field_values(const json& arr, const std::string& where) {
  if (!arr.is_array() || arr.empty())
    throw InvalidInputError(where, "expected a nonempty array");
  std::vector<double> v;
  for (const auto& x : arr) {
    if (!x.is_number()) throw InvalidInputError(where, "expected numbers");
    v.push_back(x.get<double>());
  }
  return v;
}

json model_json_obj(const ParametricModel& model) {
  json j;
  j["n_h"] = model.dim();
  j["abar"] = model.abar_field().values;
  json psis = json::array();
  for (const auto& psi : model.psi_fields()) psis.push_back(psi.values);
  j["psis"] = psis;
  j["rhs"] = model.rhs_field().values;
  j["box"] = {{"lo", vector_to_json(model.box().lo)}, {"hi", vector_to_json(model.box().hi)}};
  return j;
}

ParametricModel model_from_json_obj(const json& j, const std::string& where) {
  if (!j.is_object()) throw InvalidInputError(where, "expected a model object");
  for (const char* key : {"n_h", "abar", "psis", "rhs", "box"})
    if (!j.contains(key)) throw InvalidInputError(where, std::string("missing ") + key);
  const Eigen::Index n_h = j["n_h"].get<Eigen::Index>();
  PiecewiseConstantField abar{field_values(j["abar"], where + ".abar")};
  std::vector<PiecewiseConstantField> psis;
  if (!j["psis"].is_array()) throw InvalidInputError(where + ".psis", "expected an array");
  for (const auto& p : j["psis"]) psis.push_back({field_values(p, where + ".psis")});
  PiecewiseConstantField rhs{field_values(j["rhs"], where + ".rhs")};
  const json& box = j["box"];
  if (!box.is_object() || !box.contains("lo") || !box.contains("hi"))
    throw InvalidInputError(where + ".box", "expected lo/hi arrays");
  ParameterBox y{vector_from_json(box["lo"], where + ".box.lo"),
                 vector_from_json(box["hi"], where + ".box.hi")};
  return ParametricModel(n_h, std::move(abar), std::move(psis), std::move(rhs), std::move(y));
}

std::string sensor_kind_name(SensorKind k) {
  return k == SensorKind::PointEval ? "point" : "local_average";
}

SensorKind sensor_kind_parse(const std::string& s, const std::string& where) {
  if (s == "point") return SensorKind::PointEval;
  if (s == "local_average") return SensorKind::LocalAverage;
  throw InvalidInputError(where, "unknown sensor kind '" + s + "'");
}

}  // namespace

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ostringstream out;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) out << ',';
    out << header[i];
  }
  out << '\n';
  for (const auto& row : rows) {
    if (row.size() != header.size())
      throw InvalidInputError("io.csv", "row width does not match header in " + path);
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << row[i];
    }
    out << '\n';
  }
  write_text(path, out.str());
}

std::vector<std::vector<std::string>> read_csv(const std::string& path,
                                               std::vector<std::string>* header) {
  const std::string text = read_text(path);
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const std::size_t pos = line.find(',', start);
      if (pos == std::string::npos) {
        cells.push_back(line.substr(start));
        break;
      }
      cells.push_back(line.substr(start, pos - start));
      start = pos + 1;
    }
    if (first && header != nullptr) {
      *header = std::move(cells);
    } else {
      rows.push_back(std::move(cells));
    }
    first = false;
  }
  return rows;
}

std::string model_to_json(const ParametricModel& model) { return model_json_obj(model).dump(2); }

ParametricModel model_from_json(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw InvalidInputError("io.model", "malformed JSON");
  return model_from_json_obj(j, "io.model");
}

void save_training(const std::string& json_path, const std::string& csv_path,
                   const ParametricModel& model, const TrainingSet& training) {
  const Eigen::Index d = model.box().dim();
  std::vector<std::string> header;
  for (Eigen::Index i = 0; i < d; ++i) header.push_back("y_" + std::to_string(i));
  for (Eigen::Index i = 0; i < model.dim(); ++i) header.push_back("u_" + std::to_string(i));
  std::vector<std::vector<std::string>> rows;
  rows.reserve(static_cast<std::size_t>(training.size()));
  for (Eigen::Index j = 0; j < training.size(); ++j) {
    std::vector<std::string> row;
    row.reserve(static_cast<std::size_t>(d + model.dim()));
    for (Eigen::Index i = 0; i < d; ++i) row.push_back(format_double(training.params(j, i)));
    for (Eigen::Index i = 0; i < model.dim(); ++i)
      row.push_back(format_double(training.snapshots(i, j)));
    rows.push_back(std::move(row));
  }
  write_csv(csv_path, header, rows);

  json j;
  j["kind"] = "redinv.training";
  j["model"] = model_json_obj(model);
  j["count"] = training.size();
  json res = json::array();
  for (auto r : training.resolution) res.push_back(r);
  j["resolution"] = res;
  j["snapshots_csv"] = fs::path(csv_path).filename().string();
  j["snapshots_hash"] = hash_hex(file_fnv1a(csv_path));
  write_text(json_path, j.dump(2) + "\n");
}

TrainingArchive load_training(const std::string& json_path) {
  const std::string where = "io.load_training";
  json j = parse_json(json_path);
  if (j.value("kind", "") != "redinv.training")
    throw InvalidInputError(where, "not a training manifest: " + json_path);
  ParametricModel model = model_from_json_obj(j.at("model"), where + ".model");

  const std::string csv_name = j.at("snapshots_csv").get<std::string>();
  const std::string csv_path = (fs::path(json_path).parent_path() / csv_name).string();
  if (j.contains("snapshots_hash") &&
      j["snapshots_hash"].get<std::string>() != hash_hex(file_fnv1a(csv_path)))
    throw InvalidInputError(where, "snapshot file hash mismatch for " + csv_path);

  const Eigen::Index d = model.box().dim();
  std::vector<std::string> header;
  const auto rows = read_csv(csv_path, &header);
  const Eigen::Index j_total = static_cast<Eigen::Index>(rows.size());
  if (j_total != j.at("count").get<Eigen::Index>())
    throw InvalidInputError(where, "row count does not match the manifest");
  if (static_cast<Eigen::Index>(header.size()) != d + model.dim())
    throw InvalidInputError(where, "column count does not match the model");

  TrainingSet training;
  training.params.resize(j_total, d);
  training.snapshots.resize(model.dim(), j_total);
  for (Eigen::Index r = 0; r < j_total; ++r) {
    const auto& row = rows[static_cast<std::size_t>(r)];
    if (static_cast<Eigen::Index>(row.size()) != d + model.dim())
      throw InvalidInputError(where, "short row " + std::to_string(r));
    for (Eigen::Index i = 0; i < d; ++i)
      training.params(r, i) = parse_double(row[static_cast<std::size_t>(i)], where);
    for (Eigen::Index i = 0; i < model.dim(); ++i)
      training.snapshots(i, r) = parse_double(row[static_cast<std::size_t>(d + i)], where);
    if (!model.box().contains(training.params.row(r).transpose(), 1e-9))
      throw InvalidInputError(where, "parameter row " + std::to_string(r) + " outside the box");
  }
  check_finite(training.snapshots, where.c_str());

  for (const auto& r : j.at("resolution")) training.resolution.push_back(r.get<Eigen::Index>());
  if (!training.resolution.empty()) {
    if (static_cast<Eigen::Index>(training.resolution.size()) != d)
      throw InvalidInputError(where, "resolution arity does not match the box");
    Eigen::Index prod = 1;
    for (auto r : training.resolution) prod *= r;
    if (prod != j_total) throw InvalidInputError(where, "resolution does not match row count");
  }
  return TrainingArchive{std::move(model), std::move(training)};
}

void save_sensors(const std::string& path, const std::vector<SensorDescriptor>& sensors) {
  json j;
  j["kind_tag"] = "redinv.sensors";
  bool homogeneous = true;
  for (const auto& s : sensors)
    if (s.kind != sensors.front().kind) homogeneous = false;
  if (sensors.empty() || homogeneous) {
    j["kind"] = sensors.empty() ? "point" : sensor_kind_name(sensors.front().kind);
  } else {
    j["kind"] = "mixed";
    json kinds = json::array();
    for (const auto& s : sensors) kinds.push_back(sensor_kind_name(s.kind));
    j["kinds"] = kinds;
  }
  json locs = json::array(), widths = json::array();
  for (const auto& s : sensors) {
    locs.push_back(s.x);
    widths.push_back(s.width);
  }
  j["locations"] = locs;
  j["widths"] = widths;
  write_text(path, j.dump(2) + "\n");
}

std::vector<SensorDescriptor> load_sensors(const std::string& path) {
  const std::string where = "io.load_sensors";
  json j = parse_json(path);
  const auto locs = j.at("locations");
  const auto widths = j.at("widths");
  if (!locs.is_array() || !widths.is_array() || locs.size() != widths.size())
    throw InvalidInputError(where, "locations/widths must be arrays of equal length");
  const std::string kind = j.at("kind").get<std::string>();
  std::vector<SensorDescriptor> sensors;
  for (std::size_t i = 0; i < locs.size(); ++i) {
    SensorDescriptor s;
    s.kind = kind == "mixed"
                 ? sensor_kind_parse(j.at("kinds").at(i).get<std::string>(), where)
                 : sensor_kind_parse(kind, where);
    s.x = locs.at(i).get<double>();
    s.width = widths.at(i).get<double>();
    sensors.push_back(s);
  }
  return sensors;
}

void save_measurements(const std::string& path, const Matrix& params, const Matrix& z) {
  if (params.rows() != z.rows())
    throw InvalidInputError("io.measurements", "one parameter row per measurement row");
  std::vector<std::string> header;
  for (Eigen::Index i = 0; i < params.cols(); ++i) header.push_back("y_" + std::to_string(i));
  for (Eigen::Index i = 0; i < z.cols(); ++i) header.push_back("z_" + std::to_string(i + 1));
  std::vector<std::vector<std::string>> rows;
  for (Eigen::Index r = 0; r < params.rows(); ++r) {
    std::vector<std::string> row;
    for (Eigen::Index i = 0; i < params.cols(); ++i) row.push_back(format_double(params(r, i)));
    for (Eigen::Index i = 0; i < z.cols(); ++i) row.push_back(format_double(z(r, i)));
    rows.push_back(std::move(row));
  }
  write_csv(path, header, rows);
}

void save_greedy_run(const std::string& path, const GreedyRun& run, const Dictionary& dict) {
  std::vector<std::vector<std::string>> rows;
  rows.push_back({"0", "-1", "-1", format_double(run.rm_history.at(0)),
                  format_double(run.beta_history.at(0))});
  for (std::size_t k = 0; k < run.selected.size(); ++k) {
    const Eigen::Index idx = run.selected[k];
    rows.push_back({std::to_string(k + 1), std::to_string(idx),
                    format_double(dict.descriptor(idx).x),
                    format_double(run.rm_history.at(k + 1)),
                    format_double(run.beta_history.at(k + 1))});
  }
  write_csv(path, {"k", "selected_index", "location", "r_k", "beta_k"}, rows);
}

void save_joint_run(const std::string& path, const JointRun& run) {
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < run.steps.size(); ++i) {
    const JointStep& s = run.steps[i];
    std::string sensors;
    for (std::size_t t = 0; t < s.new_sensors.size(); ++t) {
      if (t) sensors += ';';
      sensors += std::to_string(s.new_sensors[t]);
    }
    rows.push_back({std::to_string(i + 1), std::to_string(s.snapshot), sensors,
                    std::to_string(s.m_of_n), format_double(s.err), format_double(s.beta)});
  }
  write_csv(path, {"n", "snapshot_index", "new_sensor_indices", "m_of_n", "err", "beta"}, rows);
}

void save_recovery_map(const std::string& path, const AffineRecoveryMap& map,
                       Eigen::Index training_count, Eigen::Index iterations,
                       double objective) {
  json j;
  j["kind"] = "redinv.recovery_map";
  j["w_basis_hash"] = hash_hex(matrix_fnv1a(map.w_basis));
  j["cbar"] = vector_to_json(map.cbar);
  j["bbar"] = matrix_to_json(map.bbar);
  j["w_basis"] = matrix_to_json(map.w_basis);
  j["z_basis"] = matrix_to_json(map.z_basis);
  j["training"] = {{"count", training_count},
                   {"iterations", iterations},
                   {"objective", objective}};
  write_text(path, j.dump(2) + "\n");
}

AffineRecoveryMap load_recovery_map(const std::string& path,
                                    const ObservationSetup* expected_setup) {
  const std::string where = "io.load_recovery_map";
  json j = parse_json(path);
  if (j.value("kind", "") != "redinv.recovery_map")
    throw InvalidInputError(where, "not a recovery map: " + path);
  AffineRecoveryMap map;
  map.cbar = vector_from_json(j.at("cbar"), where + ".cbar");
  map.bbar = matrix_from_json(j.at("bbar"), where + ".bbar");
  map.w_basis = matrix_from_json(j.at("w_basis"), where + ".w_basis");
  map.z_basis = matrix_from_json(j.at("z_basis"), where + ".z_basis");
  if (map.bbar.rows() != map.cbar.size() || map.z_basis.cols() != map.cbar.size() ||
      map.w_basis.cols() != map.bbar.cols() || map.w_basis.rows() != map.z_basis.rows())
    throw InvalidInputError(where, "inconsistent map dimensions in " + path);
  if (j.at("w_basis_hash").get<std::string>() != hash_hex(matrix_fnv1a(map.w_basis)))
    throw InvalidInputError(where, "measurement basis hash mismatch in " + path);
  if (expected_setup != nullptr &&
      hash_hex(matrix_fnv1a(expected_setup->w_basis.basis)) !=
          j.at("w_basis_hash").get<std::string>())
    throw InvalidInputError(where, "map was trained against a different sensor basis");
  return map;
}

void save_family(const std::string& dir, const AdmissibleFamily& family) {
  fs::create_directories(dir);
  json j;
  j["kind"] = "redinv.family";
  j["mode"] = family.config.mode == TauMode::Sigma ? "sigma" : "eps_mu";
  j["sigma"] = family.config.sigma;
  j["eps"] = family.config.eps;
  j["mu"] = family.config.mu;
  j["strategy"] = family.config.strategy == SplitStrategy::FullDyadic ? "full_dyadic"
                                                                      : "greedy_coordinate";
  j["max_cells"] = family.config.max_cells;
  j["max_n"] = family.config.max_n;
  j["complete"] = family.complete;
  j["domain"] = {{"lo", vector_to_json(family.domain.lo)},
                 {"hi", vector_to_json(family.domain.hi)}};

  json cells = json::array();
  for (Eigen::Index k = 0; k < family.size(); ++k) {
    const Cell& c = family.cells[static_cast<std::size_t>(k)];
    char name[32];
    std::snprintf(name, sizeof(name), "cell_%04lld.csv", static_cast<long long>(k));

    std::vector<std::string> header;
    for (Eigen::Index i = 0; i < c.ubar.size(); ++i) header.push_back("u_" + std::to_string(i));
    std::vector<std::vector<std::string>> rows;
    auto push_row = [&](const Vector& v) {
      std::vector<std::string> row;
      row.reserve(static_cast<std::size_t>(v.size()));
      for (Eigen::Index i = 0; i < v.size(); ++i) row.push_back(format_double(v[i]));
      rows.push_back(std::move(row));
    };
    push_row(c.ubar);
    for (Eigen::Index n = 0; n < c.basis.cols(); ++n) push_row(c.basis.col(n));
    write_csv((fs::path(dir) / name).string(), header, rows);

    json jc;
    jc["file"] = name;
    jc["lo"] = vector_to_json(c.box.lo);
    jc["hi"] = vector_to_json(c.box.hi);
    jc["level"] = c.level;
    jc["chosen_n"] = c.chosen_n;
    jc["tau"] = c.tau;
    jc["eps"] = c.eps;
    jc["mu"] = mu_to_json(c.mu);
    jc["center"] = vector_to_json(c.center);
    json idx = json::array();
    for (auto t : c.train_idx) idx.push_back(t);
    jc["train_idx"] = idx;
    cells.push_back(jc);
  }
  j["cells"] = cells;
  write_text((fs::path(dir) / "family.json").string(), j.dump(2) + "\n");
}

AdmissibleFamily load_family(const std::string& dir) {
  const std::string where = "io.load_family";
  json j = parse_json((fs::path(dir) / "family.json").string());
  if (j.value("kind", "") != "redinv.family")
    throw InvalidInputError(where, "not a family archive: " + dir);

  AdmissibleFamily family;
  const std::string mode = j.at("mode").get<std::string>();
  family.config.mode = mode == "sigma" ? TauMode::Sigma : TauMode::EpsMu;
  if (mode != "sigma" && mode != "eps_mu")
    throw InvalidInputError(where, "unknown mode '" + mode + "'");
  family.config.sigma = j.at("sigma").get<double>();
  family.config.eps = j.at("eps").get<double>();
  family.config.mu = j.at("mu").get<double>();
  const std::string strategy = j.at("strategy").get<std::string>();
  if (strategy != "full_dyadic" && strategy != "greedy_coordinate")
    throw InvalidInputError(where, "unknown strategy '" + strategy + "'");
  family.config.strategy = strategy == "full_dyadic" ? SplitStrategy::FullDyadic
                                                     : SplitStrategy::GreedyCoordinate;
  family.config.max_cells = j.at("max_cells").get<Eigen::Index>();
  family.config.max_n = j.at("max_n").get<Eigen::Index>();
  family.complete = j.at("complete").get<bool>();
  family.domain = ParameterBox(vector_from_json(j.at("domain").at("lo"), where),
                               vector_from_json(j.at("domain").at("hi"), where));

  for (const auto& jc : j.at("cells")) {
    Cell c;
    c.box = ParameterBox(vector_from_json(jc.at("lo"), where),
                         vector_from_json(jc.at("hi"), where));
    c.level = jc.at("level").get<int>();
    c.chosen_n = jc.at("chosen_n").get<Eigen::Index>();
    c.tau = jc.at("tau").get<double>();
    c.eps = field_values(jc.at("eps"), where + ".eps");
    c.mu = mu_from_json(jc.at("mu"), where + ".mu");
    c.center = vector_from_json(jc.at("center"), where + ".center");
    for (const auto& t : jc.at("train_idx")) c.train_idx.push_back(t.get<Eigen::Index>());

    const std::string csv = (fs::path(dir) / jc.at("file").get<std::string>()).string();
    std::vector<std::string> header;
    const auto rows = read_csv(csv, &header);
    if (rows.empty()) throw InvalidInputError(where, "empty cell file " + csv);
    const Eigen::Index dim = static_cast<Eigen::Index>(rows.front().size());
    c.ubar.resize(dim);
    for (Eigen::Index i = 0; i < dim; ++i)
      c.ubar[i] = parse_double(rows[0][static_cast<std::size_t>(i)], where);
    c.basis.resize(dim, static_cast<Eigen::Index>(rows.size()) - 1);
    for (std::size_t r = 1; r < rows.size(); ++r) {
      if (static_cast<Eigen::Index>(rows[r].size()) != dim)
        throw InvalidInputError(where, "ragged cell file " + csv);
      for (Eigen::Index i = 0; i < dim; ++i)
        c.basis(i, static_cast<Eigen::Index>(r) - 1) =
            parse_double(rows[r][static_cast<std::size_t>(i)], where);
    }

    if (c.eps.size() != c.mu.size() ||
        static_cast<Eigen::Index>(c.eps.size()) != c.basis.cols() + 1)
      throw InvalidInputError(where, "ladder sizes disagree in " + csv);
    if (c.mu.front() != 1.0)
      throw InvalidInputError(where, "stability ladder must start at 1 in " + csv);
    for (std::size_t n = 1; n < c.eps.size(); ++n)
      if (c.eps[n] > c.eps[n - 1] * (1.0 + 1e-12) + 1e-300)
        throw InvalidInputError(where, "accuracy ladder must be nonincreasing in " + csv);
    family.cells.push_back(std::move(c));
  }

  const double vol_scale = [&family] {
    double v = 1.0;
    for (Eigen::Index i = 0; i < family.domain.dim(); ++i)
      v *= family.domain.hi[i] - family.domain.lo[i];
    return std::max(1.0, v);
  }();
  if (partition_defect(family) > 1e-12 * vol_scale)
    throw InvalidInputError(where, "cells do not partition the domain");
  if (family.complete)
    for (const Cell& c : family.cells)
      if (!cell_passes(c, family.config))
        throw InvalidInputError(where, "complete family contains a failing cell");
  return family;
}

void save_estimate_diagnostics(const std::string& path, const FamilyEstimate& est) {
  std::vector<std::vector<std::string>> rows;
  for (const CellEstimate& d : est.diagnostics)
    rows.push_back({std::to_string(d.cell), format_double(d.score),
                    format_double(d.error_truth)});
  write_csv(path, {"cell", "score", "error_truth"}, rows);
}

void save_benchmark(const std::string& dir, const BenchmarkReport& report) {
  fs::create_directories(dir);
  {
    std::vector<std::vector<std::string>> rows;
    for (const auto& row : report.rows)
      rows.push_back({row.name, format_double(row.worst), format_double(row.mean)});
    write_csv((fs::path(dir) / "estimators.csv").string(), {"name", "worst", "mean"}, rows);
  }
  {
    std::vector<std::vector<std::string>> rows;
    for (const auto& row : report.delta)
      rows.push_back({format_double(row.sigma), format_double(row.delta),
                      format_double(row.delta_2sigma), format_double(row.frame_lo),
                      format_double(row.frame_hi)});
    write_csv((fs::path(dir) / "delta.csv").string(),
              {"sigma", "delta_tilde", "delta_tilde_2sigma", "frame_lo", "frame_hi"}, rows);
  }
  {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t k = 0; k < report.width_proxy.size(); ++k)
      rows.push_back({std::to_string(k), format_double(report.width_proxy[k])});
    write_csv((fs::path(dir) / "width.csv").string(), {"n", "width_proxy"}, rows);
  }
  json j;
  j["kind"] = "redinv.benchmark";
  j["train_size"] = report.train_size;
  j["test_size"] = report.test_size;
  j["family_cells"] = report.family_cells;
  j["family_complete"] = report.family_complete;
  json rows = json::array();
  for (const auto& row : report.rows)
    rows.push_back({{"name", row.name}, {"worst", row.worst}, {"mean", row.mean}});
  j["estimators"] = rows;
  json deltas = json::array();
  for (const auto& row : report.delta)
    deltas.push_back({{"sigma", row.sigma},
                      {"delta_tilde", row.delta},
                      {"delta_tilde_2sigma", row.delta_2sigma},
                      {"frame_lo", row.frame_lo},
                      {"frame_hi", row.frame_hi}});
  j["delta"] = deltas;
  j["width_proxy"] = report.width_proxy;
  write_text((fs::path(dir) / "report.json").string(), j.dump(2) + "\n");
}

}  // namespace redinv
