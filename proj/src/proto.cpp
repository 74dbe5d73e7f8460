#include "protocore/proto.hpp"

#include <cmath>
#include <map>
#include <string>

#include "protocore/errors.hpp"
#include "protocore/rng.hpp"

namespace protocore {

Prototype compute_prototype(const std::vector<std::vector<double>>& embeddings, PrototypeSource source) {
  if (embeddings.empty()) throw ValidationError("compute_prototype: empty embedding list");
  const std::size_t d = embeddings.front().size();
  std::vector<double> acc(d, 0.0);
  for (const auto& e : embeddings) {
    if (e.size() != d) throw ShapeError("compute_prototype: ragged embeddings");
    for (std::size_t j = 0; j < d; ++j) acc[j] += e[j];
  }
  const double n = static_cast<double>(embeddings.size());
  for (auto& v : acc) v /= n;
  return {0, std::move(acc), source};
}

FilterResult filter_misclassified(std::span<const Sample> samples, const Encoder& encoder,
                                  const Classifier& classifier, const std::vector<bool>& allowed) {
  FilterResult out;
  if (samples.empty()) return out;
  const auto logits = classifier.classify(encoder.encode(stack_inputs(samples)));
  const auto pred = argmax_rows(logits, allowed);
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (pred[i] == samples[i].y) out.kept.push_back(i);
  if (out.kept.empty()) {
    out.fallback = true;
    out.kept.resize(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) out.kept[i] = i;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Transformation set

TransformSet::TransformSet(std::vector<Perturbation> members, std::uint64_t seed)
    : members_(std::move(members)), seed_(seed) {
  if (members_.empty()) throw ValidationError("transformation set must have at least one member");
  for (const auto& m : members_)
    if (!(m.scale >= 0.0) || !std::isfinite(m.scale)) throw ValidationError("perturbation scale must be finite and >= 0");
}

TransformSet TransformSet::identity() { return TransformSet({Perturbation{}}, 0); }

TransformSet TransformSet::standard(double input_scale, std::uint64_t seed, std::size_t draws) {
  std::vector<Perturbation> m{Perturbation{}};
  for (std::size_t i = 0; i < draws; ++i) m.push_back({Perturbation::Kind::input_noise, 0.05 * input_scale});
  return TransformSet(std::move(m), seed);
}

std::vector<double> TransformSet::offset(std::size_t h, std::size_t dim, Perturbation::Kind want) const {
  if (h >= members_.size()) throw ValidationError("transformation index out of range");
  std::vector<double> out(dim, 0.0);
  const auto& m = members_[h];
  if (m.kind != want || m.scale == 0.0) return out;
  const double sd = m.kind == Perturbation::Kind::embedding_noise ? std::sqrt(m.scale) : m.scale;
  auto rng = make_rng(seed_, "transform", h);
  std::normal_distribution<double> n(0.0, sd);
  for (auto& v : out) v = n(rng);
  return out;
}

std::vector<double> TransformSet::input_offset(std::size_t h, std::size_t dim) const {
  return offset(h, dim, Perturbation::Kind::input_noise);
}

std::vector<double> TransformSet::embedding_offset(std::size_t h, std::size_t dim) const {
  return offset(h, dim, Perturbation::Kind::embedding_noise);
}

Tensor TransformSet::apply_input(std::size_t h, const Tensor& x) const {
  Tensor out = x;
  const auto off = input_offset(h, x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) out.at(r, c) += off[c];
  return out;
}

namespace {

bool all_zero(const std::vector<double>& v) {
  for (double x : v)
    if (x != 0.0) return false;
  return true;
}

}  // namespace

Var perturbed_embeddings(Tape& tape, const TransformSet& F, Var inputs, const EncodeFn& encode) {
  std::vector<Var> blocks;
  for (std::size_t h = 0; h < F.size(); ++h) {
    Var x = inputs;
    const auto in_off = F.input_offset(h, inputs.cols());
    if (!all_zero(in_off)) x = add(x, tape.constant(Tensor::row(in_off)));
    Var e = encode(x);
    const auto emb_off = F.embedding_offset(h, e.cols());
    if (!all_zero(emb_off)) e = add(e, tape.constant(Tensor::row(emb_off)));
    blocks.push_back(e);
  }
  return blocks.size() == 1 ? blocks.front() : concat_rows(blocks);
}

Tensor perturbed_embeddings(const TransformSet& F, const Tensor& inputs, const Encoder& encoder) {
  Tape tape;
  std::vector<Var> params;
  for (const auto& nt : encoder.named_parameters()) params.push_back(tape.constant(nt.tensor));
  return perturbed_embeddings(tape, F, tape.constant(inputs),
                              [&](Var x) { return encoder.encode(params, x); })
      .value();
}

Var blend_prototype(const std::optional<Var>& real_embeddings, const std::optional<Var>& synthetic_embeddings,
                    double beta_real, double beta_synth) {
  if (!real_embeddings && !synthetic_embeddings) throw ValidationError("blend_prototype: no source embeddings");
  if (!synthetic_embeddings) return mean_rows(*real_embeddings);
  Var synth = scale(mean_rows(*synthetic_embeddings), beta_synth);
  if (!real_embeddings) return synth;
  return add(scale(mean_rows(*real_embeddings), beta_real), synth);
}

Prototype blend_prototypes(const std::vector<std::vector<double>>& real_embeddings,
                           const std::vector<double>* exemplar, const TransformSet& F, const Encoder& encoder,
                           double beta_real, double beta_synth) {
  Tape tape;
  std::optional<Var> real, synth;
  if (!real_embeddings.empty()) {
    const std::size_t d = real_embeddings.front().size();
    std::vector<double> flat;
    for (const auto& e : real_embeddings) {
      if (e.size() != d) throw ShapeError("blend_prototypes: ragged embeddings");
      flat.insert(flat.end(), e.begin(), e.end());
    }
    real = tape.constant(Tensor::matrix(real_embeddings.size(), d, std::move(flat)));
  }
  if (exemplar != nullptr) synth = tape.constant(perturbed_embeddings(F, Tensor::row(*exemplar), encoder));
  const auto p = blend_prototype(real, synth, beta_real, beta_synth);
  PrototypeSource src = PrototypeSource::blended;
  if (!real) src = PrototypeSource::synthetic_memory;
  else if (!synth) src = PrototypeSource::real_current;
  return {0, p.value().values, src};
}

// ---------------------------------------------------------------------------
// Posterior and losses

Var proto_distance(Var z, Var prototypes, DistanceKind kind) {
  Var d = squared_euclidean(z, prototypes);
  if (kind == DistanceKind::mse) d = scale(d, 1.0 / static_cast<double>(z.cols()));
  for (double v : d.value().values)
    if (!std::isfinite(v)) throw NumericalError("prototype distance is not finite");
  return d;
}

Tensor proto_posterior(const Tensor& z, const Tensor& prototypes, DistanceKind kind) {
  if (prototypes.rows() < 2) throw ValidationError("proto_posterior needs at least two prototypes");
  Tape tape;
  const Tensor d = proto_distance(tape.constant(z), tape.constant(prototypes), kind).value();
  Tensor out = d;
  for (std::size_t r = 0; r < d.rows(); ++r) {
    double lo = d.at(r, 0);
    for (std::size_t c = 1; c < d.cols(); ++c) lo = std::min(lo, d.at(r, c));
    double total = 0.0;
    for (std::size_t c = 0; c < d.cols(); ++c) total += out.at(r, c) = std::exp(lo - d.at(r, c));
    for (std::size_t c = 0; c < d.cols(); ++c) out.at(r, c) /= total;
  }
  return out;
}

namespace {

std::vector<std::size_t> label_columns(std::span<const int> labels, std::span<const int> proto_classes) {
  std::map<int, std::size_t> col;
  for (std::size_t i = 0; i < proto_classes.size(); ++i) {
    if (!col.emplace(proto_classes[i], i).second)
      throw ValidationError("duplicate prototype for class " + std::to_string(proto_classes[i]));
  }
  std::vector<std::size_t> out;
  out.reserve(labels.size());
  for (int y : labels) {
    auto it = col.find(y);
    if (it == col.end()) throw ValidationError("no prototype for label " + std::to_string(y));
    out.push_back(it->second);
  }
  return out;
}

}  // namespace

Var prototype_loss(Var embeddings, std::span<const int> labels, Var prototypes, std::span<const int> proto_classes,
                   const ProtoLossOptions& options) {
  if (labels.size() != embeddings.rows())
    throw ShapeError("prototype_loss: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(embeddings.rows()) + " embeddings");
  if (proto_classes.size() != prototypes.rows())
    throw ShapeError("prototype_loss: class list does not match prototype rows");
  if (!(options.temperature > 0.0)) throw ValidationError("temperature must be positive");
  const auto cols = label_columns(labels, proto_classes);

  Var logits = options.variant == ProtoLossVariant::prototypical
                   ? neg(proto_distance(embeddings, prototypes, options.distance))
                   : scale(cosine_similarity(embeddings, prototypes), 1.0 / options.temperature);
  if (!options.strict_ratio) {
    std::vector<int> idx(cols.begin(), cols.end());
    return softmax_cross_entropy(logits, idx);
  }
  if (prototypes.rows() < 2) throw ValidationError("strict ratio needs at least two prototypes");
  Var ex = exp(logits);
  Var num = pick(ex, cols);
  return mean(div(num, sub(row_sum(ex), num)));
}

LossValue loss_cur_pro(Var embeddings, std::span<const int> labels, Var prototypes,
                       std::span<const int> proto_classes, const ProtoLossOptions& options) {
  return LossValue::from(prototype_loss(embeddings, labels, prototypes, proto_classes, options), "cur_pro");
}

LossValue loss_pre_pro(std::optional<Var> item_embeddings, std::span<const int> labels, Var prototypes,
                       std::span<const int> proto_classes, const ProtoLossOptions& options) {
  if (!item_embeddings || labels.empty()) return LossValue::zero("pre_pro", "no previous classes");
  return LossValue::from(prototype_loss(*item_embeddings, labels, prototypes, proto_classes, options), "pre_pro");
}

LossValue loss_pre_pro(Tape& tape, const PreProInputs& memory, Var prototypes, std::span<const int> proto_classes,
                       const TransformSet& F, const EncodeFn& encode, const ProtoLossOptions& options) {
  auto is_current = [&](int c) {
    for (int k : memory.current_classes)
      if (k == c) return true;
    return false;
  };
  std::vector<Var> blocks;
  std::vector<int> labels;
  if (memory.synth != nullptr) {
    std::vector<double> flat;
    std::vector<int> ys;
    std::size_t dim = 0;
    for (const auto& e : memory.synth->entries()) {
      if (is_current(e.class_id)) continue;
      dim = e.s.size();
      flat.insert(flat.end(), e.s.begin(), e.s.end());
      ys.push_back(e.class_id);
    }
    if (!ys.empty()) {
      Var s = tape.constant(Tensor::matrix(ys.size(), dim, std::move(flat)));
      blocks.push_back(perturbed_embeddings(tape, F, s, encode));
      for (std::size_t h = 0; h < F.size(); ++h) labels.insert(labels.end(), ys.begin(), ys.end());
    }
  }
  if (memory.real != nullptr) {
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < memory.real->size(); ++i)
      if (!is_current((*memory.real)[i].y)) keep.push_back(i);
    if (!keep.empty()) {
      blocks.push_back(encode(tape.constant(stack_inputs(*memory.real, keep))));
      const auto ys = gather_labels(*memory.real, keep);
      labels.insert(labels.end(), ys.begin(), ys.end());
    }
  }
  if (blocks.empty()) return LossValue::zero("pre_pro", "no previous classes");
  Var items = blocks.size() == 1 ? blocks.front() : concat_rows(blocks);
  return loss_pre_pro(items, labels, prototypes, proto_classes, options);
}

Var info_nce(Var anchor, Var candidates, std::size_t positive, double temperature) {
  if (!(temperature > 0.0)) throw ValidationError("info_nce: temperature must be positive");
  if (anchor.rows() != 1) throw ShapeError("info_nce: anchor must be a single row, got " + shape_string(anchor.shape()));
  if (positive >= candidates.rows()) throw ValidationError("info_nce: positive index out of range");
  const int label = static_cast<int>(positive);
  return softmax_cross_entropy(scale(cosine_similarity(anchor, candidates), 1.0 / temperature),
                               std::span<const int>(&label, 1));
}

double info_nce(const std::vector<double>& anchor, const std::vector<double>& positive,
                const std::vector<std::vector<double>>& negatives, double temperature) {
  Tape tape;
  std::vector<double> flat = positive;
  for (const auto& n : negatives) {
    if (n.size() != positive.size()) throw ShapeError("info_nce: ragged candidates");
    flat.insert(flat.end(), n.begin(), n.end());
  }
  Var c = tape.constant(Tensor::matrix(1 + negatives.size(), positive.size(), std::move(flat)));
  return info_nce(tape.constant(Tensor::row(anchor)), c, 0, temperature).item();
}

}  // namespace protocore
