#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "protocore/autodiff.hpp"
#include "protocore/memory.hpp"
#include "protocore/model.hpp"
#include "protocore/task_stream.hpp"
#include "protocore/types.hpp"

namespace protocore {

enum class DistanceKind { mse, squared_euclidean };
enum class ProtoLossVariant { prototypical, contrastive };

struct ProtoLossOptions {
  ProtoLossVariant variant = ProtoLossVariant::prototypical;
  DistanceKind distance = DistanceKind::mse;
  /// Contrastive temperature.
  double temperature = 0.1;
  /// Literal ratio exp(s_y) / sum_{c != y} exp(s_c) without the -log.
  /// Grows as the fit improves, so it is for inspection, not for training.
  bool strict_ratio = false;
};

/// Coordinate-wise mean. Rejects an empty list and ragged rows.
Prototype compute_prototype(const std::vector<std::vector<double>>& embeddings,
                            PrototypeSource source = PrototypeSource::real_current);

struct FilterResult {
  std::vector<std::size_t> kept;
  /// True when every sample was misclassified and the whole input was kept.
  bool fallback = false;
};

/// Indices of samples whose masked argmax prediction matches the label.
FilterResult filter_misclassified(std::span<const Sample> samples, const Encoder& encoder,
                                  const Classifier& classifier, const std::vector<bool>& allowed = {});

struct Perturbation {
  enum class Kind { identity, input_noise, embedding_noise };
  Kind kind = Kind::identity;
  /// Standard deviation for input noise, variance for embedding noise.
  double scale = 0.0;
};

/// Transformation set F. Each member h is a fixed function: the noise vector
/// it adds is drawn once from (seed, member index) and reused for every input.
class TransformSet {
 public:
  TransformSet(std::vector<Perturbation> members, std::uint64_t seed);
  static TransformSet identity();
  /// Identity plus `draws` input-noise members at sd 0.05 * input_scale.
  static TransformSet standard(double input_scale, std::uint64_t seed, std::size_t draws = 3);

  std::size_t size() const { return members_.size(); }
  const std::vector<Perturbation>& members() const { return members_; }
  std::uint64_t seed() const { return seed_; }

  /// Noise added by member h to each row of a [n x dim] input (zeros for
  /// identity and embedding members).
  std::vector<double> input_offset(std::size_t h, std::size_t dim) const;
  std::vector<double> embedding_offset(std::size_t h, std::size_t dim) const;

  Tensor apply_input(std::size_t h, const Tensor& x) const;

 private:
  std::vector<double> offset(std::size_t h, std::size_t dim, Perturbation::Kind want) const;

  std::vector<Perturbation> members_;
  std::uint64_t seed_;
};

using EncodeFn = std::function<Var(Var)>;

/// f(h(x)) for every member h, stacked member-major: rows [h*n, (h+1)*n).
Var perturbed_embeddings(Tape& tape, const TransformSet& F, Var inputs, const EncodeFn& encode);
Tensor perturbed_embeddings(const TransformSet& F, const Tensor& inputs, const Encoder& encoder);

/// Prototype from real embeddings and/or embeddings of perturbed exemplars.
///  both present: beta_real * mean(real) + beta_synth * mean(synth)
///  synthetic only: beta_synth * mean(synth)
///  real only: mean(real)
Var blend_prototype(const std::optional<Var>& real_embeddings, const std::optional<Var>& synthetic_embeddings,
                    double beta_real, double beta_synth);

/// Plain-value form. `exemplar` is the stored decoded input s^c (may be null).
Prototype blend_prototypes(const std::vector<std::vector<double>>& real_embeddings,
                           const std::vector<double>* exemplar, const TransformSet& F, const Encoder& encoder,
                           double beta_real, double beta_synth);

/// Pairwise distance [n x P] under the chosen metric.
Var proto_distance(Var z, Var prototypes, DistanceKind kind);

/// Softmax of negative distance to each prototype row. Needs >= 2 prototypes.
Tensor proto_posterior(const Tensor& z, const Tensor& prototypes, DistanceKind kind = DistanceKind::squared_euclidean);

/// Mean over rows of the prototype loss of each embedding against its class prototype.
/// `proto_classes[i]` is the class of prototype row i.
Var prototype_loss(Var embeddings, std::span<const int> labels, Var prototypes, std::span<const int> proto_classes,
                   const ProtoLossOptions& options);

LossValue loss_cur_pro(Var embeddings, std::span<const int> labels, Var prototypes,
                       std::span<const int> proto_classes, const ProtoLossOptions& options);

/// Pre-computed item embeddings form: rows are f(h(s)) of exemplars and,
/// in full-replay mode, f(x) of real memory samples.
LossValue loss_pre_pro(std::optional<Var> item_embeddings, std::span<const int> labels, Var prototypes,
                       std::span<const int> proto_classes, const ProtoLossOptions& options);

struct PreProInputs {
  const SynthMemory* synth = nullptr;
  /// Real replay items; null outside full-replay mode.
  const std::vector<Sample>* real = nullptr;
  /// Classes of the current task. Memory entries of these classes are skipped.
  std::span<const int> current_classes;
};

/// Builds the item embeddings from memory and evaluates loss_pre_pro.
LossValue loss_pre_pro(Tape& tape, const PreProInputs& memory, Var prototypes, std::span<const int> proto_classes,
                       const TransformSet& F, const EncodeFn& encode, const ProtoLossOptions& options);

/// -log softmax of cosine similarities / tau at `positive` among `candidates` rows.
Var info_nce(Var anchor, Var candidates, std::size_t positive, double temperature);
double info_nce(const std::vector<double>& anchor, const std::vector<double>& positive,
                const std::vector<std::vector<double>>& negatives, double temperature);

}  // namespace protocore
