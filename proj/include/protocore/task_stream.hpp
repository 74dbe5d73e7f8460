#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "protocore/tensor.hpp"

namespace protocore {

struct Sample {
  std::vector<double> x;
  int y = 0;

  bool operator==(const Sample&) const = default;
};

/// One step of a class-incremental stream. `id` is 1-based.
struct Task {
  int id = 1;
  std::vector<int> classes;
  std::vector<Sample> train;
  std::vector<Sample> test;

  bool operator==(const Task&) const = default;
};

enum class GeneratorKind { split_gaussians, split_rings };

/// Generated tasks plus everything needed to regenerate or audit them.
///
/// For Gaussian streams `centers` holds the true class means; for rings it
/// holds the one-element nominal radius of each class.
struct TaskSequence {
  GeneratorKind generator = GeneratorKind::split_gaussians;
  std::size_t num_classes = 0;
  std::size_t input_dim = 0;
  std::uint64_t seed = 0;
  std::vector<std::vector<double>> centers;
  /// Test accuracy of the generator-side oracle (nearest true center or nearest ring).
  double oracle_accuracy = 0.0;
  std::vector<Task> tasks;

  bool operator==(const TaskSequence&) const = default;
};

struct GaussianStreamSpec {
  std::size_t num_classes = 10;
  std::size_t num_tasks = 5;
  std::size_t input_dim = 16;
  std::size_t samples_per_class = 50;
  double separation = 8.0;
  double noise_sd = 0.5;
  std::uint64_t seed = 0;
};

/// Class c is centered on a signed coordinate axis scaled so that every pair
/// of centers is at least `separation` apart (hypercube vertices when there
/// are more classes than signed axes). Each class is split 80/20 train/test.
TaskSequence make_split_gaussians(const GaussianStreamSpec& spec);

/// Concentric 2-D annuli with nominal radius 1 + c and radial noise 0.15.
TaskSequence make_split_rings(std::size_t num_classes, std::size_t num_tasks, std::size_t samples_per_class,
                              std::uint64_t seed);

struct StreamMode {
  enum class Kind { offline, online };
  Kind kind = Kind::offline;
  std::size_t epochs = 1;

  static StreamMode offline(std::size_t epochs) { return {Kind::offline, epochs}; }
  static StreamMode online() { return {Kind::online, 1}; }
};

/// Indices into Task::train.
using Batch = std::vector<std::size_t>;

/// Offline: `epochs` independently shuffled passes. Online: one pass in a
/// fixed seeded order. The last batch of a pass may be short.
std::vector<Batch> iterate(const Task& task, StreamMode mode, std::size_t batch_size, std::uint64_t seed);

/// Stacks the inputs of `samples[indices]` into an [n x d] tensor.
Tensor stack_inputs(std::span<const Sample> samples, std::span<const std::size_t> indices);
Tensor stack_inputs(std::span<const Sample> samples);
std::vector<int> gather_labels(std::span<const Sample> samples, std::span<const std::size_t> indices);
std::vector<int> gather_labels(std::span<const Sample> samples);

nlohmann::json sequence_to_json(const TaskSequence& seq);
TaskSequence sequence_from_json(const nlohmann::json& j);

}  // namespace protocore
