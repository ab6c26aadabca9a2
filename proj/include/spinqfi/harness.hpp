#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "spinqfi/decoder.hpp"
#include "spinqfi/evolver.hpp"

namespace spinqfi {

inline constexpr const char* kEngineVersion = "0.1.0";
inline constexpr std::size_t kMaxWorkUnits = 1'000'000;

enum class Experiment { qfi_map, otoc_map, decode_map, hierarchy_series, depletion, rate_fit, analytic_check };

std::string experiment_name(Experiment e);
std::optional<Experiment> parse_experiment(const std::string& name);

/// Malformed or inconsistent configuration; maps to exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TimeGrid {
  double start = 0.0;
  double stop = 3.0;
  int count = 61;

  std::vector<double> points() const;
};

struct RunConfig {
  Experiment experiment = Experiment::qfi_map;
  int sites = 10;
  double coupling = 1.0;
  std::vector<double> fields;  // h list; empty means the experiment's default
  int source = 1;
  TimeGrid time;
  std::vector<int> widths{2, 4};  // block widths w
  std::vector<int> outputs;       // output sites k; empty means {N}
  OptimizerConfig optimizer;
  double fit_lo = 0.8;
  double fit_hi = 1.2;
  double collapse_lo = 0.5;
  double collapse_hi = 1.5;
  std::uint64_t seed = 20240601;
  std::filesystem::path output = "out";
  int workers = 1;
  EvolutionMethod method = EvolutionMethod::automatic;

  /// Fills experiment defaults and throws ConfigError on anything inconsistent.
  void finalize();
};

/// Parses the JSON config document. Unknown keys are errors. `experiment` may
/// be omitted when supplied by the caller.
RunConfig parse_config(const std::string& text, std::optional<Experiment> experiment = std::nullopt);
RunConfig load_config(const std::filesystem::path& path, std::optional<Experiment> experiment = std::nullopt);

/// Canonical JSON rendering of a finalized config (also the manifest echo).
std::string config_json(const RunConfig& config);

std::vector<double> default_fields(Experiment e);

/// One independent piece of work; plain values only.
struct WorkUnit {
  std::size_t index = 0;
  std::size_t field_index = 0;
  double field = 0.0;
  std::optional<std::size_t> time_index;
  std::optional<double> tJ;
  std::optional<int> width;
  std::optional<int> output_site;
  bool baseline = false;  // h = 0 reference curve of depletion / rate_fit
  std::uint64_t seed = 0;
};

/// Expands the config into work units: (h x t) for the maps and analytic
/// check, (h x t x w x k) for decode_map, (h x t) for hierarchy_series and one
/// whole-curve unit per h for depletion and rate_fit (plus the h = 0 baseline).
std::vector<WorkUnit> grid_product(const RunConfig& config);

struct UnitFailure {
  WorkUnit unit;
  std::string message;
};

struct RunResult {
  int exit_code = 0;
  std::size_t unit_count = 0;
  std::vector<std::filesystem::path> files;
  std::vector<UnitFailure> failures;
};

/// Executes the experiment and writes its CSV files, records.csv and
/// manifest.json into config.output. Exit code 0 on success, 2 when any unit
/// failed numerically. Throws ConfigError before any file is written.
/// on_unit runs on the worker thread ahead of each unit; a throw counts as that unit failing.
using UnitObserver = std::function<void(const WorkUnit&)>;
RunResult run(const RunConfig& config, const UnitObserver& on_unit = {});

}  // namespace spinqfi
