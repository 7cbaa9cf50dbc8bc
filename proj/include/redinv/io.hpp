#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "redinv/affine_recovery.hpp"
#include "redinv/benchmark.hpp"
#include "redinv/joint.hpp"
#include "redinv/placement.hpp"

namespace redinv {

// Round-trip decimal text (%.17g); all CSV numbers go through this.
std::string format_double(double value);

// FNV-1a 64-bit content hashes, printed as 16 hex digits elsewhere.
std::uint64_t fnv1a(std::string_view bytes);
std::uint64_t file_fnv1a(const std::string& path);
std::uint64_t matrix_fnv1a(const Matrix& m);
std::string hash_hex(std::uint64_t h);

// CSV: comma-separated, header row, LF line endings, no quoting (cells must
// not contain commas).
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);
std::vector<std::vector<std::string>> read_csv(const std::string& path,
                                               std::vector<std::string>* header = nullptr);

// Model description round-trip (JSON text).
std::string model_to_json(const ParametricModel& model);
ParametricModel model_from_json(const std::string& text);

// Training archive: JSON manifest carrying the model description, the grid
// resolution, and the content hash of the snapshot CSV next to it (one row
// per snapshot: y then coefficients).
struct TrainingArchive {
  ParametricModel model;
  TrainingSet training;
};

void save_training(const std::string& json_path, const std::string& csv_path,
                   const ParametricModel& model, const TrainingSet& training);
TrainingArchive load_training(const std::string& json_path);

// Sensor list round-trip: {kind, locations[], widths[]}.
void save_sensors(const std::string& path, const std::vector<SensorDescriptor>& sensors);
std::vector<SensorDescriptor> load_sensors(const std::string& path);

// One row per snapshot: parameters then functional values z_1..z_m.
void save_measurements(const std::string& path, const Matrix& params, const Matrix& z);

// Placement run: rows (k, selected_index, location, r_k, beta_k); the k = 0
// row carries the initial residual mass with selected_index = -1.
void save_greedy_run(const std::string& path, const GreedyRun& run, const Dictionary& dict);

// Joint run: rows (n, snapshot_index, new_sensor_indices, m_of_n, err, beta);
// sensor indices within a row are ';'-separated.
void save_joint_run(const std::string& path, const JointRun& run);

// Affine recovery map with the hash of the measurement basis it was trained
// against and minimal training metadata.
void save_recovery_map(const std::string& path, const AffineRecoveryMap& map,
                       Eigen::Index training_count, Eigen::Index iterations,
                       double objective);
AffineRecoveryMap load_recovery_map(const std::string& path,
                                    const ObservationSetup* expected_setup = nullptr);

// Family archive: family.json plus one cell_<k>.csv per cell (row 0 = offset
// state, rows 1.. = orthonormal basis vectors).
void save_family(const std::string& dir, const AdmissibleFamily& family);
AdmissibleFamily load_family(const std::string& dir);

// Per-cell selection diagnostics: rows (cell, score, error_truth).
void save_estimate_diagnostics(const std::string& path, const FamilyEstimate& est);

// Benchmark report: estimators.csv, delta.csv, width.csv and a JSON twin.
void save_benchmark(const std::string& dir, const BenchmarkReport& report);

}  // namespace redinv
