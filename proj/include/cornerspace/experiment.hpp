#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cornerspace/corner.hpp"

namespace cornerspace {

inline constexpr int kConfigSchemaVersion = 1;
inline constexpr const char* kCodeVersion = "0.1.0";

enum class Method { corner, meanfield, brute_force };
// schedule: one pass with m_schedule as plan_merge_schedule reads it;
// progression: one full pass per M; converge: per-node M search.
enum class Strategy { schedule, progression, converge };

struct OutputSpec {
  std::string dir = "out";
  std::string results = "results.csv";
  std::string spectrum = "spectrum.csv";
  std::string timeseries = "timeseries.csv";
  std::string manifest = "manifest.json";
  std::string checkpoint_dir;  // empty disables checkpoints
};

struct ExperimentConfig {
  int schema_version = kConfigSchemaVersion;
  std::string name = "experiment";
  std::string preset;  // informational once resolved
  ModelParams model;
  Geometry target = build_geometry(2, 2, true, true);
  int base_lx = 2, base_ly = 1;
  Method method = Method::corner;
  Strategy strategy = Strategy::progression;
  std::vector<int> m_schedule{0};
  bool include_meanfield = true;  // add a mean-field row to corner runs
  SolverSettings solver;
  MeanFieldOptions meanfield;
  OutputSpec outputs;

  void validate() const;
  Geometry base() const;
};

/// Strict parse: unknown keys and wrong types are config errors naming the
/// offending field.
ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig load_config(const std::string& path);
std::string config_to_json(const ExperimentConfig& c, int indent = 2);

struct ResultRow {
  int lx = 0, ly = 0;
  long long m = 0;
  std::string solver;  // direct | mcwf | meanfield
  ObservableRecord record;
};

struct ExperimentResult {
  std::string run_id;
  std::vector<ResultRow> rows;
  std::vector<SpectrumRow> spectrum;  // root of the final pass
  std::vector<TimePoint> series;      // root of the final pass
  std::vector<NodeSolve> solves;
  std::vector<std::string> warnings;
  bool converged = true;
  int exit_code = 0;  // 0 converged, 2 limits reached without convergence
  std::string manifest_json;
};

/// Runs the pipeline without touching the file system (checkpoints aside).
ExperimentResult execute_experiment(const ExperimentConfig& config);
/// Writes results, spectrum, time series and manifest under outputs.dir.
void write_outputs(const ExperimentConfig& config, const ExperimentResult& result);
ExperimentResult run_experiment(const ExperimentConfig& config);

std::string results_csv(const ExperimentResult& r);
std::string spectrum_csv(const ExperimentResult& r);
std::string timeseries_csv(const ExperimentResult& r);
/// 9 significant digits, empty for absent values.
std::string format_number(std::optional<double> v);

struct PresetInfo {
  std::string name;
  std::string description;
  std::string reproduces;
};

std::vector<PresetInfo> list_presets();
/// One configuration per row of the preset. Overrides apply to every row:
/// a seed replaces the trajectory master seed, m_max drops larger M values
/// (falling back to m_max itself when nothing is left).
std::vector<ExperimentConfig> preset_configs(const std::string& name,
                                             std::optional<std::uint64_t> seed = std::nullopt,
                                             std::optional<int> m_max = std::nullopt);

}  // namespace cornerspace
