#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "protocore/gradcheck_suite.hpp"
#include "protocore/task_stream.hpp"
#include "protocore/trainer.hpp"

namespace protocore {

struct DatasetConfig {
  GeneratorKind generator = GeneratorKind::split_gaussians;
  GaussianStreamSpec gaussians;
  std::size_t num_classes = 10;
  std::size_t num_tasks = 5;
  std::size_t samples_per_class = 50;
  std::uint64_t seed = 0;
};

struct ExperimentConfig {
  std::string label = "run";
  std::string output_dir;
  DatasetConfig dataset;
  RunConfig run;
};

/// Field-level validation; unknown keys are rejected so typos surface.
/// Requires "method" and "dataset.generator".
ExperimentConfig parse_experiment(const nlohmann::json& j);
/// Every field with its effective value, suitable for re-running.
nlohmann::json resolved_json(const ExperimentConfig& config);

TaskSequence build_sequence(const DatasetConfig& config);

/// output_dir, placed under $PROTOCORE_OUTPUT_ROOT when that is set and the path is relative.
std::filesystem::path output_directory(const ExperimentConfig& config);

/// Writes every run artifact into `dir`.
void write_run_outputs(const std::filesystem::path& dir, const ExperimentConfig& config, const TaskSequence& seq,
                       const RunResult& result);

/// Parses "1;1,2;1,2,3;full" into loss selections. '+' also separates terms.
std::vector<LossSelection> parse_loss_sets(const std::string& list);


// Commands. Return the process exit status: 0 ok, 1 validation, 2 numerical.
int cmd_run(const std::filesystem::path& config_path, std::ostream& out, std::ostream& err);
int cmd_ablate(const std::filesystem::path& config_path, const std::string& losses, const std::string& variants,
               const std::string& seeds, std::ostream& out, std::ostream& err);
int cmd_gradcheck(std::ostream& out, std::ostream& err, std::size_t instances = 20);
int cmd_dump_embeddings(const std::filesystem::path& run_dir, int task, std::ostream& out, std::ostream& err);

/// Builds the embedding dump for checkpoint `task` of a finished run directory.
nlohmann::json dump_embeddings(const std::filesystem::path& run_dir, int task);

}  // namespace protocore
