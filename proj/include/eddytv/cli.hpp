// Copyright eddytv contributors.
// SPDX-License-Identifier: Apache-2.0

#ifndef EDDYTV_CLI_HPP
#define EDDYTV_CLI_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include "eddytv/harness.hpp"

namespace eddytv
{

inline constexpr int kConfigVersion = 1;

//
// Everything a pipeline stage needs. Parsed from a JSON object (schema version 1) laid
// over a preset; see the README for the key list. Unknown keys are rejected.
//
struct RunConfig
{
  int preset_number = 1;
  ExperimentPreset preset = preset_example(1);
  std::filesystem::path output_dir = "out";
  std::filesystem::path mesh_path;   // empty: <output_dir>/mesh.txt
  std::filesystem::path trace_path;  // empty: <output_dir>/trace.txt
  bool log_wall_time = true;         // false writes 0 in the wall_time_s column
  int checkpoint_every = 10;         // 0 disables periodic checkpoints
  int threads = 1;

  std::filesystem::path MeshPath() const;
  std::filesystem::path TracePath() const;

  // Fully resolved configuration as JSON text (echoed into manifests).
  std::string Echo() const;
};

// Command-line overrides applied after the config file.
struct CliOverrides
{
  std::optional<int> preset;
  std::optional<int> refine;
  std::optional<double> noise;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

// Throws ConfigError naming the offending key.
RunConfig parse_run_config(const std::string &json_text, const CliOverrides &overrides = {});
RunConfig load_run_config(const std::filesystem::path &path, const CliOverrides &overrides = {});

// Pipeline stages; progress goes to `out`.
void cmd_mesh(const RunConfig &cfg, std::ostream &out);
void cmd_synth(const RunConfig &cfg, std::ostream &out);
void cmd_invert(const RunConfig &cfg, std::ostream &out,
                const std::filesystem::path &resume_from = {});
void cmd_report(const RunConfig &cfg, std::ostream &out);

// Builds the inversion mesh of the configuration (read from MeshPath() if it exists).
std::shared_ptr<const Mesh> load_or_build_mesh(const RunConfig &cfg);

// Fields over V_h, expanded to all mesh vertices with zeros elsewhere. Empty fields are
// omitted from the file.
struct VtkFields
{
  NodalField sigma, s, y;
};

// Legacy ASCII unstructured grid: tetra cells (type 10), point data sigma, s, y and cell
// data |grad sigma| (0 in Omega0) and subregion tags.
void export_vtk(const FeSpace &space, const VtkFields &fields, const std::filesystem::path &path);

// Entry point of the eddytv executable. Returns 0 on success, 2 for configuration or
// input errors, 3 for numerical failures.
int run_cli(int argc, char **argv);

}  // namespace eddytv

#endif  // EDDYTV_CLI_HPP
