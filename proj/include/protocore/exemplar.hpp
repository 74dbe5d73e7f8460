#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "protocore/autodiff.hpp"
#include "protocore/memory.hpp"
#include "protocore/model.hpp"
#include "protocore/task_stream.hpp"
#include "protocore/types.hpp"

namespace protocore {

enum class InitStrategy { class_input_mean, gaussian };

/// three_term: cur_syn + alpha1 * pre_syn + alpha2 * shift.
/// two_term: alpha * cur_syn + (1 - alpha) * pre_syn, no shift term.
enum class SynthObjective { three_term, two_term };

struct SynthConfig {
  std::size_t iterations = 50;
  double step_size = 0.1;
  bool cosine_schedule = true;
  double weight_decay = 0.0;
  InitStrategy init = InitStrategy::class_input_mean;
  double init_weight = 1e-4;
  SynthObjective objective = SynthObjective::three_term;
  double alpha1 = 0.1;
  double alpha2 = 0.1;
  double alpha = 0.9;
  /// Exemplars per class (SPC_s).
  std::size_t per_class = 1;
  /// Build prototype targets from correctly classified samples only.
  bool filter_misclassified = true;
  /// Individual terms may be switched off for ablations.
  bool use_cur_syn = true;
  bool use_pre_syn = true;
  bool use_shift = true;
};

void validate(const SynthConfig& config);

/// New exemplar for `class_id`. class_input_mean starts from the latent of
/// the mean training input of that class; gaussian draws z ~ N(0, init_weight^2).
SyntheticExemplar init_exemplar(int class_id, InitStrategy strategy, std::span<const Sample> data,
                                const Decoder& decoder, double init_weight, std::uint64_t seed, int origin_task);

/// Sum over rows of mean((a_i - b_i)^2).
Var row_mse_sum(Var a, Var b);

/// Rows of `exemplar_embeddings` against their prototype targets (one target row each).
LossValue loss_cur_syn(Var exemplar_embeddings, const Tensor& prototype_targets);
/// Rows against the current-encoder embeddings of the stored exemplars they replace.
LossValue loss_pre_syn(std::optional<Var> exemplar_embeddings, const Tensor& stored_embeddings);
/// Rows against stored real-prototype anchors.
LossValue loss_shift(std::optional<Var> exemplar_embeddings, const Tensor& anchors);

struct ExemplarTrace {
  int class_id = 0;
  bool current = false;
  double initial_distance = 0.0;
  double final_distance = 0.0;
};

struct SynthResult {
  std::vector<SyntheticExemplar> exemplars;
  /// Real prototypes of the current classes over the filtered survivors.
  std::vector<Prototype> prototypes;
  /// Mean within-class per-dimension embedding variance of the survivors.
  double embedding_variance = 0.0;
  std::vector<int> fallback_classes;
  std::vector<ExemplarTrace> traces;
  /// Objective value before each step and after the last one.
  std::vector<double> loss_history;
  std::vector<LossTerm> final_terms;
  bool aborted = false;
  std::size_t steps_taken = 0;
};

struct SynthInputs {
  const Task* task = nullptr;
  const Encoder* encoder = nullptr;
  const Classifier* classifier = nullptr;
  const Decoder* decoder = nullptr;
  const MemoryPool* memory = nullptr;
  /// Mask of classes seen so far, used when filtering.
  std::vector<bool> seen;
};

/// Optimizes latents only; encoder, classifier and decoder are read-only.
/// Returns exemplars for every current class and every class in M_s.
SynthResult optimize_exemplars(const SynthInputs& inputs, const SynthConfig& config, std::uint64_t seed);

/// Deterministic k-means (farthest-point seeding, Lloyd iterations).
/// Returns a group id per row; groups are ordered by their lowest member.
std::vector<std::size_t> kmeans_groups(const Tensor& rows, std::size_t k, std::size_t iterations = 25);

/// [{class_id, origin_task, z, s, embedding}]
nlohmann::json exemplar_dump(const std::vector<SyntheticExemplar>& exemplars, const Encoder& encoder);

}  // namespace protocore
