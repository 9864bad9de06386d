#pragma once

#include <lamina/lefschetz.hpp>

#include <filesystem>
#include <memory>

namespace lamina {

/// Parsed scenario: atlas, named maps, density, and run parameters. Owns the
/// atlas and maps so reports can reference them for the whole run.
struct Scenario {
  std::unique_ptr<FoliatedAtlas> atlas;
  std::unique_ptr<FoliationMap> phi;
  std::unique_ptr<FoliationMap> psi;  // optional
  std::vector<FoliationMap> family;   // invariance command
  std::unique_ptr<TransverseDensity> density;
  std::string command;
  Options opts;
  std::filesystem::path out_dir = "out";
};

struct CliOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> grid;
  std::optional<double> step;
  std::optional<double> tol_rank;
  std::optional<int> max_attempts;
  std::optional<std::string> out;
};

// Parses and validates a scenario file (JSON). Throws ScenarioError with a
// location-anchored message on malformed input.
Scenario load_scenario(const std::filesystem::path& file, const CliOverrides& overrides = {});

struct RunResult {
  int exit_code = 0;
  std::filesystem::path report_path;
  std::filesystem::path components_csv;
  std::string message;
};

// Executes `command` (or the scenario's run.command) and writes report.json
// plus components.csv under the output directory. Exit code contract:
// 0 success, 1 parse/validation, 2 verification failure, 3 numerical failure.
RunResult run_scenario(const std::filesystem::path& file, const std::string& command = "",
                       const CliOverrides& overrides = {});

// Serializes the polylines of a report as CSV rows
// (component, index, coordinates, chart, classification, singular values, sign).
void emit_plot_data(const LefschetzReport& report, int ambient_dim,
                    const std::filesystem::path& csv_path);

}  // namespace lamina
