#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "protocore/errors.hpp"
#include "protocore/exemplar.hpp"
#include "protocore/memory.hpp"
#include "protocore/model.hpp"
#include "protocore/optimizer.hpp"
#include "protocore/proto.hpp"
#include "protocore/task_stream.hpp"

namespace protocore {

enum class Method { protocore, protocore_synth_only, finetune, reservoir_er, joint };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

/// Loss terms numbered as in the component ablation:
/// (1) cur_syn (2) pre_syn (3) shift (4) cur_pro (5) pre_pro (6) task_cur (7) task_pre.
struct LossSelection {
  bool cur_syn = true;
  bool pre_syn = true;
  bool shift = true;
  bool cur_pro = true;
  bool pre_pro = true;
  bool task_cur = true;
  bool task_pre = true;

  /// Selects exactly the listed terms. With no synthesis term listed all three
  /// are kept; with no training term listed (6) and (7) are kept.
  static LossSelection from_flags(std::span<const int> flags);
  std::vector<int> flags() const;
  std::string label() const;
  bool full() const;
  bool operator==(const LossSelection&) const = default;
};

struct RunConfig {
  Method method = Method::protocore;
  ProtoLossVariant loss_variant = ProtoLossVariant::contrastive;
  DistanceKind distance = DistanceKind::mse;
  double temperature = 0.1;
  double alpha1 = 1.0;  // pre_pro
  double alpha2 = 1.0;  // task_pre
  double alpha3 = 1.0;  // task_cur
  double replay_weight = 1.0;  // lambda of the reservoir baseline
  double beta_real = 0.95;
  double beta_synth = 0.05;
  /// Scale prototypes of memory-only classes by beta_synth instead of 1.
  bool scale_synthetic_only_prototypes = false;
  std::optional<double> perturbation_variance;
  std::size_t perturbation_draws = 4;
  std::size_t transform_draws = 3;
  double transform_scale = 0.05;
  std::size_t epochs = 10;
  bool online = false;
  OptimizerConfig optimizer{OptimizerKind::adam, 0.005};
  std::size_t batch_size = 16;
  std::size_t memory_batch_size = 16;
  /// Reservoir capacity = real_per_class * total classes.
  std::size_t real_per_class = 0;
  SynthConfig synthesis;
  EncoderConfig encoder;
  DecoderKind decoder = DecoderKind::identity;
  std::size_t decoder_latent_dim = 0;  // 0: input dimension
  std::size_t decoder_pretrain_steps = 300;
  LossSelection losses;
  std::uint64_t seed = 0;
};

void validate(const RunConfig& config);

/// A[tau][t] for t <= tau, 0-based.
struct AccuracyMatrix {
  std::vector<std::vector<double>> rows;

  std::size_t tasks() const { return rows.size(); }
  double at(std::size_t tau, std::size_t t) const { return rows.at(tau).at(t); }
};

struct MetricsReport {
  double last_accuracy = 0.0;
  double average_accuracy = 0.0;
  double learning_accuracy = 0.0;
  double forgetting = 0.0;
};

MetricsReport compute_metrics(const AccuracyMatrix& a);

// ---------------------------------------------------------------------------
// Task-head losses

/// Mean cross-entropy with classes outside `seen` masked out.
LossValue loss_task_cur(Var logits, std::span<const int> labels, const std::vector<bool>& seen);

/// Mean cross-entropy of f_phi(e_i + zeta) over `n_draws` draws of every row.
/// Noise is drawn from Rng(seed) draw by draw, row by row, coordinate by coordinate.
LossValue loss_task_pre(std::optional<Var> exemplar_embeddings, std::span<const int> labels,
                        const Classifier& classifier, std::span<const Var> classifier_params, double variance,
                        std::size_t n_draws, std::uint64_t seed, const std::vector<bool>& seen = {});

/// cur_pro + alpha1 * pre_pro + alpha2 * task_pre + alpha3 * task_cur.
LossValue total_loss(const LossValue& cur_pro, const LossValue& pre_pro, const LossValue& task_pre,
                     const LossValue& task_cur, double alpha1, double alpha2, double alpha3);

// ---------------------------------------------------------------------------
// Training

struct ModelState {
  Encoder encoder;
  Classifier classifier;
  Decoder decoder;
};

ModelState make_model(const TaskSequence& seq, const RunConfig& config);

struct EpochLog {
  int task = 0;
  std::size_t epoch = 0;
  std::size_t batches = 0;
  double cur_pro = 0.0;
  double pre_pro = 0.0;
  double task_pre = 0.0;
  double task_cur = 0.0;
  double replay = 0.0;
  double total = 0.0;
};

struct TaskOutcome {
  std::vector<EpochLog> epochs;
  std::optional<SynthResult> synthesis;
};

/// Thrown when a loss or gradient stops being finite. `diagnostic` holds the
/// state at the failing step.
class TrainingAborted : public NumericalError {
 public:
  TrainingAborted(const std::string& what, nlohmann::json diagnostic)
      : NumericalError(what), diagnostic_(std::move(diagnostic)) {}
  const nlohmann::json& diagnostic() const { return diagnostic_; }

 private:
  nlohmann::json diagnostic_;
};

struct TrainContext {
  const TaskSequence* sequence = nullptr;
  /// Index of the task within the sequence (0-based).
  std::size_t index = 0;
  const RunConfig* config = nullptr;
};

TaskOutcome train_task(const TrainContext& ctx, ModelState& model, MemoryPool& memory);

/// Masked argmax accuracy on `samples`.
double evaluate_accuracy(const ModelState& model, std::span<const Sample> samples, const std::vector<bool>& seen);

/// Classes of tasks 0..index, as a mask over every class.
std::vector<bool> seen_mask(const TaskSequence& seq, std::size_t index);

struct TaskArtifacts {
  std::vector<NamedTensor> parameters;
  MemoryPool memory;
};

struct RunResult {
  AccuracyMatrix accuracy;
  MetricsReport metrics;
  std::vector<EpochLog> log;
  MemoryPool memory;
  ModelState model;
  std::vector<TaskArtifacts> checkpoints;
  std::vector<SynthResult> synthesis;
  double seconds = 0.0;
};

RunResult run_sequence(const TaskSequence& seq, const RunConfig& config);

nlohmann::json metrics_to_json(const RunResult& r, const RunConfig& config);
std::string accuracy_csv(const AccuracyMatrix& a);
std::string loss_log_csv(const std::vector<EpochLog>& log);
std::vector<NamedTensor> model_parameters(const ModelState& m);

}  // namespace protocore
