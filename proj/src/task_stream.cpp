#include "protocore/task_stream.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <set>

#include "protocore/errors.hpp"
#include "protocore/rng.hpp"

namespace protocore {

namespace {

void check_split(std::size_t num_classes, std::size_t num_tasks) {
  if (num_tasks == 0 || num_classes == 0) throw ValidationError("num_classes and num_tasks must be positive");
  if (num_classes % num_tasks != 0) {
    throw ValidationError("num_classes (" + std::to_string(num_classes) + ") is not divisible by num_tasks (" +
                          std::to_string(num_tasks) + ")");
  }
}

std::vector<Task> empty_tasks(std::size_t num_classes, std::size_t num_tasks) {
  const std::size_t per_task = num_classes / num_tasks;
  std::vector<Task> tasks(num_tasks);
  for (std::size_t t = 0; t < num_tasks; ++t) {
    tasks[t].id = static_cast<int>(t + 1);
    for (std::size_t k = 0; k < per_task; ++k) tasks[t].classes.push_back(static_cast<int>(t * per_task + k));
  }
  return tasks;
}

std::size_t train_count(std::size_t n) { return (n * 4) / 5; }

std::vector<std::vector<double>> gaussian_centers(const GaussianStreamSpec& spec, Rng& rng) {
  const std::size_t d = spec.input_dim;
  std::vector<std::vector<double>> centers;
  if (spec.num_classes <= 2 * d) {
    std::vector<std::size_t> axes(2 * d);
    std::iota(axes.begin(), axes.end(), 0);
    std::shuffle(axes.begin(), axes.end(), rng);
    const double a = spec.separation / std::numbers::sqrt2;
    for (std::size_t c = 0; c < spec.num_classes; ++c) {
      std::vector<double> center(d, 0.0);
      center[axes[c] / 2] = (axes[c] % 2 == 0) ? a : -a;
      centers.push_back(std::move(center));
    }
    return centers;
  }
  if (d < 63 && spec.num_classes > (std::size_t{1} << d)) {
    throw ValidationError("too many classes for the hypercube lattice in dimension " + std::to_string(d));
  }
  std::set<std::vector<double>> used;
  std::bernoulli_distribution coin(0.5);
  const double a = spec.separation / 2.0;
  while (centers.size() < spec.num_classes) {
    std::vector<double> center(d);
    for (auto& v : center) v = coin(rng) ? a : -a;
    if (used.insert(center).second) centers.push_back(std::move(center));
  }
  return centers;
}

double nearest_center_accuracy(const std::vector<Task>& tasks, const std::vector<std::vector<double>>& centers) {
  std::size_t correct = 0, total = 0;
  for (const auto& task : tasks) {
    for (const auto& s : task.test) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < centers.size(); ++c) {
        double dist = 0.0;
        for (std::size_t k = 0; k < s.x.size(); ++k) dist += (s.x[k] - centers[c][k]) * (s.x[k] - centers[c][k]);
        if (dist < best_d) {
          best_d = dist;
          best = c;
        }
      }
      correct += static_cast<int>(best) == s.y;
      ++total;
    }
  }
  return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

}  // namespace

TaskSequence make_split_gaussians(const GaussianStreamSpec& spec) {
  check_split(spec.num_classes, spec.num_tasks);
  if (!(spec.separation > 0.0)) throw ValidationError("separation must be positive");
  if (spec.noise_sd < 0.0) throw ValidationError("noise_sd must be non-negative");
  if (spec.samples_per_class < 4) throw ValidationError("samples_per_class must be at least 4");
  if (spec.input_dim == 0) throw ValidationError("input_dim must be positive");

  Rng center_rng = make_rng(spec.seed, "gaussian-centers");
  Rng noise_rng = make_rng(spec.seed, "gaussian-samples");
  std::normal_distribution<double> noise(0.0, spec.noise_sd);

  TaskSequence seq;
  seq.generator = GeneratorKind::split_gaussians;
  seq.num_classes = spec.num_classes;
  seq.input_dim = spec.input_dim;
  seq.seed = spec.seed;
  seq.centers = gaussian_centers(spec, center_rng);
  seq.tasks = empty_tasks(spec.num_classes, spec.num_tasks);

  const std::size_t n_train = train_count(spec.samples_per_class);
  for (auto& task : seq.tasks) {
    for (int c : task.classes) {
      const auto& center = seq.centers[static_cast<std::size_t>(c)];
      for (std::size_t i = 0; i < spec.samples_per_class; ++i) {
        Sample s;
        s.y = c;
        s.x.resize(spec.input_dim);
        for (std::size_t k = 0; k < spec.input_dim; ++k) s.x[k] = center[k] + (spec.noise_sd > 0 ? noise(noise_rng) : 0.0);
        (i < n_train ? task.train : task.test).push_back(std::move(s));
      }
    }
  }
  seq.oracle_accuracy = nearest_center_accuracy(seq.tasks, seq.centers);
  return seq;
}

TaskSequence make_split_rings(std::size_t num_classes, std::size_t num_tasks, std::size_t samples_per_class,
                              std::uint64_t seed) {
  check_split(num_classes, num_tasks);
  if (samples_per_class < 4) throw ValidationError("samples_per_class must be at least 4");
  constexpr double kRadialNoise = 0.15;
  Rng rng = make_rng(seed, "ring-samples");
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> radial(0.0, kRadialNoise);

  TaskSequence seq;
  seq.generator = GeneratorKind::split_rings;
  seq.num_classes = num_classes;
  seq.input_dim = 2;
  seq.seed = seed;
  for (std::size_t c = 0; c < num_classes; ++c) seq.centers.push_back({1.0 + static_cast<double>(c)});
  seq.tasks = empty_tasks(num_classes, num_tasks);

  const std::size_t n_train = train_count(samples_per_class);
  for (auto& task : seq.tasks) {
    for (int c : task.classes) {
      const double r0 = seq.centers[static_cast<std::size_t>(c)][0];
      for (std::size_t i = 0; i < samples_per_class; ++i) {
        const double a = angle(rng);
        const double r = r0 + radial(rng);
        Sample s{{r * std::cos(a), r * std::sin(a)}, c};
        (i < n_train ? task.train : task.test).push_back(std::move(s));
      }
    }
  }
  // Nearest nominal radius.
  std::size_t correct = 0, total = 0;
  for (const auto& task : seq.tasks) {
    for (const auto& s : task.test) {
      const double r = std::hypot(s.x[0], s.x[1]);
      const auto pred = static_cast<long>(std::lround(std::clamp(r - 1.0, 0.0, static_cast<double>(num_classes - 1))));
      correct += pred == s.y;
      ++total;
    }
  }
  seq.oracle_accuracy = static_cast<double>(correct) / static_cast<double>(total);
  return seq;
}

std::vector<Batch> iterate(const Task& task, StreamMode mode, std::size_t batch_size, std::uint64_t seed) {
  if (batch_size == 0) throw ValidationError("batch_size must be at least 1");
  if (task.train.empty()) throw ValidationError("task " + std::to_string(task.id) + " has no training samples");
  if (mode.kind == StreamMode::Kind::offline && mode.epochs == 0) throw ValidationError("offline mode needs epochs >= 1");
  const std::size_t passes = mode.kind == StreamMode::Kind::online ? 1 : mode.epochs;
  Rng rng = make_rng(seed, "iterate", static_cast<std::uint64_t>(task.id));
  std::vector<Batch> batches;
  std::vector<std::size_t> order(task.train.size());
  for (std::size_t e = 0; e < passes; ++e) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t stop = std::min(order.size(), start + batch_size);
      batches.emplace_back(order.begin() + static_cast<long>(start), order.begin() + static_cast<long>(stop));
    }
  }
  return batches;
}

Tensor stack_inputs(std::span<const Sample> samples, std::span<const std::size_t> indices) {
  if (indices.empty()) throw ShapeError("stack_inputs: no samples");
  const std::size_t d = samples[indices[0]].x.size();
  std::vector<double> values;
  values.reserve(indices.size() * d);
  for (auto i : indices) {
    if (samples[i].x.size() != d) throw ShapeError("stack_inputs: ragged sample dimensions");
    values.insert(values.end(), samples[i].x.begin(), samples[i].x.end());
  }
  return Tensor::matrix(indices.size(), d, std::move(values));
}

Tensor stack_inputs(std::span<const Sample> samples) {
  std::vector<std::size_t> all(samples.size());
  std::iota(all.begin(), all.end(), 0);
  return stack_inputs(samples, all);
}

std::vector<int> gather_labels(std::span<const Sample> samples, std::span<const std::size_t> indices) {
  std::vector<int> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(samples[i].y);
  return out;
}

std::vector<int> gather_labels(std::span<const Sample> samples) {
  std::vector<int> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.y);
  return out;
}

namespace {

nlohmann::json samples_to_json(const std::vector<Sample>& samples) {
  nlohmann::json xs = nlohmann::json::array(), ys = nlohmann::json::array();
  for (const auto& s : samples) {
    xs.push_back(s.x);
    ys.push_back(s.y);
  }
  return nlohmann::json{{"x", xs}, {"y", ys}};
}

std::vector<Sample> samples_from_json(const nlohmann::json& j) {
  const auto xs = j.at("x").get<std::vector<std::vector<double>>>();
  const auto ys = j.at("y").get<std::vector<int>>();
  if (xs.size() != ys.size()) throw ValidationError("sample arrays differ in length");
  std::vector<Sample> out;
  for (std::size_t i = 0; i < xs.size(); ++i) out.push_back({xs[i], ys[i]});
  return out;
}

}  // namespace

nlohmann::json sequence_to_json(const TaskSequence& seq) {
  nlohmann::json tasks = nlohmann::json::array();
  for (const auto& t : seq.tasks) {
    tasks.push_back({{"id", t.id}, {"classes", t.classes}, {"train", samples_to_json(t.train)},
                     {"test", samples_to_json(t.test)}});
  }
  return nlohmann::json{{"format", "protocore-sequence"},
                        {"version", 1},
                        {"generator", seq.generator == GeneratorKind::split_gaussians ? "split_gaussians" : "split_rings"},
                        {"num_classes", seq.num_classes},
                        {"input_dim", seq.input_dim},
                        {"seed", seq.seed},
                        {"centers", seq.centers},
                        {"oracle_accuracy", seq.oracle_accuracy},
                        {"tasks", tasks}};
}

TaskSequence sequence_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "protocore-sequence" || j.at("version").get<int>() != 1) {
      throw ValidationError("not a version-1 protocore sequence");
    }
    TaskSequence seq;
    const auto gen = j.at("generator").get<std::string>();
    if (gen == "split_gaussians") seq.generator = GeneratorKind::split_gaussians;
    else if (gen == "split_rings") seq.generator = GeneratorKind::split_rings;
    else throw ValidationError("unknown generator " + gen);
    seq.num_classes = j.at("num_classes").get<std::size_t>();
    seq.input_dim = j.at("input_dim").get<std::size_t>();
    seq.seed = j.at("seed").get<std::uint64_t>();
    seq.centers = j.at("centers").get<std::vector<std::vector<double>>>();
    seq.oracle_accuracy = j.at("oracle_accuracy").get<double>();
    for (const auto& t : j.at("tasks")) {
      Task task;
      task.id = t.at("id").get<int>();
      task.classes = t.at("classes").get<std::vector<int>>();
      task.train = samples_from_json(t.at("train"));
      task.test = samples_from_json(t.at("test"));
      seq.tasks.push_back(std::move(task));
    }
    return seq;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed sequence: ") + e.what());
  }
}

}  // namespace protocore
