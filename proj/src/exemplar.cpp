#include "protocore/exemplar.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "protocore/errors.hpp"
#include "protocore/optimizer.hpp"
#include "protocore/proto.hpp"
#include "protocore/rng.hpp"

namespace protocore {

void validate(const SynthConfig& c) {
  if (c.iterations < 1) throw ValidationError("synthesis.iterations must be >= 1");
  if (!(c.step_size > 0.0)) throw ValidationError("synthesis.step_size must be positive");
  if (c.alpha1 < 0.0 || c.alpha2 < 0.0) throw ValidationError("synthesis weights must be >= 0");
  if (c.alpha < 0.0 || c.alpha > 1.0) throw ValidationError("synthesis.alpha must lie in [0, 1]");
  if (c.per_class < 1) throw ValidationError("synthesis.per_class must be >= 1");
  if (c.init_weight < 0.0) throw ValidationError("synthesis.init_weight must be >= 0");
  if (c.weight_decay < 0.0) throw ValidationError("synthesis.weight_decay must be >= 0");
}

SyntheticExemplar init_exemplar(int class_id, InitStrategy strategy, std::span<const Sample> data,
                                const Decoder& decoder, double init_weight, std::uint64_t seed, int origin_task) {
  SyntheticExemplar e;
  e.class_id = class_id;
  e.origin_task = origin_task;
  Tensor z;
  if (strategy == InitStrategy::class_input_mean) {
    std::vector<double> mean(decoder.output_dim(), 0.0);
    std::size_t n = 0;
    for (const auto& s : data) {
      if (s.y != class_id) continue;
      if (s.x.size() != mean.size()) throw ShapeError("init_exemplar: sample width does not match decoder output");
      for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += s.x[j];
      ++n;
    }
    if (n == 0) throw ValidationError("init_exemplar: no data for class " + std::to_string(class_id));
    for (auto& v : mean) v /= static_cast<double>(n);
    z = decoder.project(Tensor::row(mean));
  } else {
    bool known = data.empty();
    for (const auto& s : data) known = known || s.y == class_id;
    if (!known) throw ValidationError("init_exemplar: unknown class " + std::to_string(class_id));
    Rng rng(seed);
    std::normal_distribution<double> n(0.0, init_weight);
    z = Tensor::zeros({1, decoder.latent_dim()});
    for (auto& v : z.values) v = n(rng);
  }
  e.z = z.values;
  e.s = decoder.decode(z).values;
  for (double v : e.s)
    if (!std::isfinite(v)) throw NumericalError("init_exemplar: decoded exemplar is not finite");
  return e;
}

Var row_mse_sum(Var a, Var b) {
  if (a.shape() != b.shape()) throw ShapeError("row_mse_sum: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  return scale(mse(a, b), static_cast<double>(a.rows()));
}

namespace {

LossValue target_loss(std::optional<Var> e, const Tensor& targets, const char* name) {
  if (!e) return LossValue::zero(name, "no targets");
  Tape& tape = *e->tape;
  return LossValue::from(row_mse_sum(*e, tape.constant(targets)), name);
}

}  // namespace

LossValue loss_cur_syn(Var exemplar_embeddings, const Tensor& prototype_targets) {
  return target_loss(exemplar_embeddings, prototype_targets, "cur_syn");
}

LossValue loss_pre_syn(std::optional<Var> exemplar_embeddings, const Tensor& stored_embeddings) {
  return target_loss(exemplar_embeddings, stored_embeddings, "pre_syn");
}

LossValue loss_shift(std::optional<Var> exemplar_embeddings, const Tensor& anchors) {
  return target_loss(exemplar_embeddings, anchors, "shift");
}

std::vector<std::size_t> kmeans_groups(const Tensor& rows, std::size_t k, std::size_t iterations) {
  const std::size_t n = rows.rows(), d = rows.cols();
  if (n == 0 || k == 0) throw ValidationError("kmeans_groups: need rows and k >= 1");
  k = std::min(k, n);
  auto dist = [&](std::size_t i, const std::vector<double>& c) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += (rows.at(i, j) - c[j]) * (rows.at(i, j) - c[j]);
    return s;
  };
  std::vector<std::vector<double>> centers;
  auto row_vec = [&](std::size_t i) {
    auto r = rows.row_span(i);
    return std::vector<double>(r.begin(), r.end());
  };
  centers.push_back(row_vec(0));
  while (centers.size() < k) {
    std::size_t best = 0;
    double best_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      double m = std::numeric_limits<double>::infinity();
      for (const auto& c : centers) m = std::min(m, dist(i, c));
      if (m > best_d) best_d = m, best = i;
    }
    centers.push_back(row_vec(best));
  }
  std::vector<std::size_t> assign(n, 0);
  for (std::size_t it = 0; it < iterations; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < k; ++c)
        if (dist(i, centers[c]) < dist(i, centers[best])) best = c;
      changed = changed || best != assign[i];
      assign[i] = best;
    }
    for (std::size_t c = 0; c < k; ++c) {
      std::vector<double> acc(d, 0.0);
      std::size_t m = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (assign[i] != c) continue;
        for (std::size_t j = 0; j < d; ++j) acc[j] += rows.at(i, j);
        ++m;
      }
      if (m == 0) continue;
      for (auto& v : acc) v /= static_cast<double>(m);
      centers[c] = acc;
    }
    if (!changed && it > 0) break;
  }
  // Relabel groups by first appearance and drop empty ones.
  std::map<std::size_t, std::size_t> relabel;
  for (auto& a : assign) {
    auto [it, fresh] = relabel.emplace(a, relabel.size());
    a = it->second;
  }
  return assign;
}

namespace {

struct Slot {
  SyntheticExemplar start;
  bool current = false;
  std::vector<double> cur_target;
  std::vector<double> pre_target;
  std::vector<double> shift_target;
};

std::vector<double> mean_of_rows(const Tensor& t, std::span<const std::size_t> idx) {
  std::vector<double> acc(t.cols(), 0.0);
  for (auto i : idx)
    for (std::size_t j = 0; j < t.cols(); ++j) acc[j] += t.at(i, j);
  for (auto& v : acc) v /= static_cast<double>(idx.size());
  return acc;
}

double euclid(std::span<const double> a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t j = 0; j < b.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return std::sqrt(s);
}

Tensor stack(const std::vector<std::vector<double>>& rows) {
  std::vector<double> flat;
  for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
  return Tensor::matrix(rows.size(), rows.front().size(), std::move(flat));
}

}  // namespace

SynthResult optimize_exemplars(const SynthInputs& in, const SynthConfig& config, std::uint64_t seed) {
  validate(config);
  if (!in.task || !in.encoder || !in.classifier || !in.decoder || !in.memory)
    throw ValidationError("optimize_exemplars: incomplete inputs");
  const Task& task = *in.task;
  const Encoder& encoder = *in.encoder;
  const Decoder& decoder = *in.decoder;
  const MemoryPool& memory = *in.memory;

  SynthResult result;
  std::vector<Slot> slots;
  double variance_sum = 0.0;
  std::size_t variance_classes = 0;

  for (int c : task.classes) {
    std::vector<Sample> own;
    for (const auto& s : task.train)
      if (s.y == c) own.push_back(s);
    if (own.empty()) continue;
    std::vector<Sample> survivors = own;
    if (config.filter_misclassified) {
      const auto f = filter_misclassified(own, encoder, *in.classifier, in.seen);
      if (f.fallback) result.fallback_classes.push_back(c);
      survivors.clear();
      for (auto i : f.kept) survivors.push_back(own[i]);
    }
    const Tensor emb = encoder.encode(stack_inputs(survivors));
    std::vector<std::size_t> all(survivors.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    const auto proto = mean_of_rows(emb, all);
    result.prototypes.push_back({c, proto, PrototypeSource::real_current});

    double var = 0.0;
    for (std::size_t i = 0; i < emb.rows(); ++i)
      for (std::size_t j = 0; j < emb.cols(); ++j) var += (emb.at(i, j) - proto[j]) * (emb.at(i, j) - proto[j]);
    variance_sum += var / static_cast<double>(emb.rows() * emb.cols());
    ++variance_classes;

    const auto groups = kmeans_groups(emb, config.per_class);
    const std::size_t k = *std::max_element(groups.begin(), groups.end()) + 1;
    for (std::size_t g = 0; g < k; ++g) {
      std::vector<std::size_t> members;
      std::vector<Sample> member_samples;
      for (std::size_t i = 0; i < groups.size(); ++i)
        if (groups[i] == g) members.push_back(i), member_samples.push_back(survivors[i]);
      Slot slot;
      slot.current = true;
      slot.start = init_exemplar(c, config.init, member_samples, decoder, config.init_weight,
                                 derive_seed(seed, "synth-init", static_cast<std::uint64_t>(c) * 1024 + g), task.id);
      slot.cur_target = k == 1 ? proto : mean_of_rows(emb, members);
      if (memory.synth.contains(c)) {
        const auto& stored = memory.synth.at(c);
        slot.pre_target = encoder.encode(Tensor::row(stored[std::min(g, stored.size() - 1)].s)).values;
      }
      if (memory.protos.contains(c)) slot.shift_target = memory.protos.at(c);
      slots.push_back(std::move(slot));
    }
  }
  if (variance_classes > 0) result.embedding_variance = variance_sum / static_cast<double>(variance_classes);

  for (int c : memory.synth.classes()) {
    if (std::find(task.classes.begin(), task.classes.end(), c) != task.classes.end()) continue;
    for (const auto& stored : memory.synth.at(c)) {
      Slot slot;
      slot.start = stored;
      slot.pre_target = encoder.encode(Tensor::row(stored.s)).values;
      if (memory.protos.contains(c)) slot.shift_target = memory.protos.at(c);
      slots.push_back(std::move(slot));
    }
  }
  if (slots.empty()) return result;

  double w_cur = 1.0, w_pre = config.alpha1, w_shift = config.alpha2;
  if (config.objective == SynthObjective::two_term) w_cur = config.alpha, w_pre = 1.0 - config.alpha, w_shift = 0.0;
  if (!config.use_cur_syn) w_cur = 0.0;
  if (!config.use_pre_syn) w_pre = 0.0;
  if (!config.use_shift) w_shift = 0.0;

  std::vector<std::size_t> cur_idx, pre_idx, shift_idx;
  std::vector<std::vector<double>> cur_t, pre_t, shift_t;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (!slots[i].cur_target.empty()) cur_idx.push_back(i), cur_t.push_back(slots[i].cur_target);
    if (!slots[i].pre_target.empty()) pre_idx.push_back(i), pre_t.push_back(slots[i].pre_target);
    if (!slots[i].shift_target.empty()) shift_idx.push_back(i), shift_t.push_back(slots[i].shift_target);
  }

  std::vector<std::vector<double>> z_rows;
  for (const auto& s : slots) z_rows.push_back(s.start.z);
  Tensor Z = stack(z_rows);
  const auto frozen = encoder.named_parameters();

  struct Eval {
    Tensor embeddings;
    std::vector<LossTerm> terms;
    double total = 0.0;
  };
  // Builds the objective on `tape`; returns the root when any term is active.
  auto build = [&](Tape& tape, Var z, Eval& ev) -> std::optional<Var> {
    std::vector<Var> params;
    for (const auto& nt : frozen) params.push_back(tape.constant(nt.tensor));
    Var e = encoder.encode(params, decoder.decode(tape, z));
    ev.embeddings = e.value();
    std::optional<Var> total;
    auto add_term = [&](const char* name, double w, const std::vector<std::size_t>& idx,
                        const std::vector<std::vector<double>>& targets) {
      if (idx.empty()) {
        ev.terms.push_back({name, w, 0.0});
        return;
      }
      auto lv = target_loss(gather_rows(e, idx), stack(targets), name);
      ev.terms.push_back({name, w, lv.value});
      if (w == 0.0) return;
      Var part = w == 1.0 ? lv.var : scale(lv.var, w);
      total = total ? add(*total, part) : part;
    };
    add_term("cur_syn", w_cur, cur_idx, cur_t);
    add_term("pre_syn", w_pre, pre_idx, pre_t);
    add_term("shift", w_shift, shift_idx, shift_t);
    ev.total = total ? total->item() : 0.0;
    return total;
  };

  auto evaluate = [&](const Tensor& z_values) {
    Tape tape;
    Eval ev;
    build(tape, tape.constant(z_values), ev);
    return ev;
  };

  const Eval initial = evaluate(Z);
  OptimizerConfig oc;
  oc.kind = OptimizerKind::adam;
  oc.step_size = config.step_size;
  oc.schedule = config.cosine_schedule ? ScheduleKind::cosine : ScheduleKind::constant;
  oc.horizon = config.iterations;
  oc.weight_decay = config.weight_decay;
  Optimizer opt(oc, {&Z});

  Eval last = initial;
  for (std::size_t k = 0; k < config.iterations; ++k) {
    Tape tape;
    Eval ev;
    const std::vector<double> previous = Z.values;
    Z.zero_grad();
    auto root = build(tape, tape.leaf(Z), ev);
    if (!std::isfinite(ev.total)) {
      result.aborted = true;
      break;
    }
    result.loss_history.push_back(ev.total);
    last = ev;
    if (!root) break;
    tape.backward(*root);
    if (!opt.step()) {
      result.aborted = true;
      break;
    }
    ++result.steps_taken;
    const Eval after = evaluate(Z);
    if (!std::isfinite(after.total) || !Z.all_finite()) {
      Z.values = previous;
      result.aborted = true;
      break;
    }
    last = after;
  }
  if (!result.aborted && result.steps_taken == config.iterations) result.loss_history.push_back(last.total);
  result.final_terms = last.terms;

  const Tensor S = decoder.decode(Z);
  for (std::size_t i = 0; i < slots.size(); ++i) {
    SyntheticExemplar e = slots[i].start;
    auto zr = Z.row_span(i);
    auto sr = S.row_span(i);
    e.z.assign(zr.begin(), zr.end());
    e.s.assign(sr.begin(), sr.end());
    result.exemplars.push_back(e);

    ExemplarTrace tr;
    tr.class_id = e.class_id;
    tr.current = slots[i].current;
    const auto& target = !slots[i].cur_target.empty()     ? slots[i].cur_target
                         : !slots[i].shift_target.empty() ? slots[i].shift_target
                                                          : slots[i].pre_target;
    tr.initial_distance = euclid(initial.embeddings.row_span(i), target);
    tr.final_distance = euclid(last.embeddings.row_span(i), target);
    result.traces.push_back(tr);
  }
  return result;
}

nlohmann::json exemplar_dump(const std::vector<SyntheticExemplar>& exemplars, const Encoder& encoder) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& e : exemplars) {
    const auto emb = encoder.encode(Tensor::row(e.s)).values;
    out.push_back({{"class_id", e.class_id}, {"origin_task", e.origin_task}, {"z", e.z}, {"s", e.s}, {"embedding", emb}});
  }
  return out;
}

}  // namespace protocore
