#pragma once

#include <optional>
#include <string>
#include <vector>

namespace mopa {

// Every run directory holds exactly one manifest describing how to reproduce
// the run.
struct RunManifest {
  std::string command;
  std::string config_hash;  // hex fnv1a of the canonical configuration
  std::vector<std::uint64_t> seeds;
  std::string code_version;
  std::vector<std::string> outputs;
  std::optional<double> final_log_alpha;
  double wall_clock_sec = 0.0;
};

void write_run_manifest(const std::string& run_dir, const RunManifest& manifest);
std::string version_string();

// generic numeric CSV (header + double rows)
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  int col(const std::string& name) const;  // -1 when absent
  std::vector<double> column(const std::string& name) const;
};
CsvTable read_csv(const std::string& path);

// minimal SVG line chart (learning curves, end-effector traces)
struct Series {
  std::string label;
  std::vector<double> x, y;
};
void write_svg_plot(const std::string& path, const std::string& title, const std::string& xlabel,
                    const std::string& ylabel, const std::vector<Series>& series,
                    bool equal_aspect = false);

}  // namespace mopa
