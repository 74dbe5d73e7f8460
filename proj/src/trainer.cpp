#include "protocore/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "protocore/rng.hpp"

namespace protocore {

std::string method_name(Method m) {
  switch (m) {
    case Method::protocore: return "protocore";
    case Method::protocore_synth_only: return "protocore-synth-only";
    case Method::finetune: return "finetune";
    case Method::reservoir_er: return "reservoir-er";
    case Method::joint: return "joint";
  }
  return "unknown";
}

Method method_from_name(const std::string& name) {
  for (auto m : {Method::protocore, Method::protocore_synth_only, Method::finetune, Method::reservoir_er, Method::joint})
    if (method_name(m) == name) return m;
  throw ValidationError("method: unknown value '" + name + "'");
}

LossSelection LossSelection::from_flags(std::span<const int> flags) {
  if (flags.empty()) throw ValidationError("loss selection is empty");
  LossSelection s{false, false, false, false, false, false, false};
  for (int f : flags) {
    switch (f) {
      case 1: s.cur_syn = true; break;
      case 2: s.pre_syn = true; break;
      case 3: s.shift = true; break;
      case 4: s.cur_pro = true; break;
      case 5: s.pre_pro = true; break;
      case 6: s.task_cur = true; break;
      case 7: s.task_pre = true; break;
      default: throw ValidationError("loss flag " + std::to_string(f) + " is outside 1..7");
    }
  }
  if (!s.cur_syn && !s.pre_syn && !s.shift) s.cur_syn = s.pre_syn = s.shift = true;
  if (!s.cur_pro && !s.pre_pro && !s.task_cur && !s.task_pre) s.task_cur = s.task_pre = true;
  return s;
}

std::vector<int> LossSelection::flags() const {
  std::vector<int> out;
  const bool on[] = {cur_syn, pre_syn, shift, cur_pro, pre_pro, task_cur, task_pre};
  for (int i = 0; i < 7; ++i)
    if (on[i]) out.push_back(i + 1);
  return out;
}

std::string LossSelection::label() const {
  if (full()) return "full";
  std::string out;
  for (int f : flags()) out += (out.empty() ? "(" : "+(") + std::to_string(f) + ")";
  return out;
}

bool LossSelection::full() const { return flags().size() == 7; }

void validate(const RunConfig& c) {
  auto nonneg = [](double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError(std::string(name) + " must be finite and >= 0");
  };
  nonneg(c.alpha1, "alpha1");
  nonneg(c.alpha2, "alpha2");
  nonneg(c.alpha3, "alpha3");
  nonneg(c.replay_weight, "replay_weight");
  nonneg(c.beta_real, "beta_real");
  nonneg(c.beta_synth, "beta_synth");
  nonneg(c.transform_scale, "transform_scale");
  if (c.perturbation_variance) nonneg(*c.perturbation_variance, "perturbation_variance");
  if (!(c.temperature > 0.0)) throw ValidationError("temperature must be positive");
  if (c.epochs < 1) throw ValidationError("epochs must be >= 1");
  if (c.batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (c.perturbation_draws < 1) throw ValidationError("perturbation_draws must be >= 1");
  validate(c.synthesis);
}

MetricsReport compute_metrics(const AccuracyMatrix& a) {
  const std::size_t T = a.tasks();
  if (T == 0) throw ValidationError("accuracy matrix is empty");
  for (std::size_t tau = 0; tau < T; ++tau) {
    if (a.rows[tau].size() != tau + 1)
      throw ValidationError("accuracy matrix row " + std::to_string(tau + 1) + " has " +
                            std::to_string(a.rows[tau].size()) + " entries, expected " + std::to_string(tau + 1));
    for (double v : a.rows[tau])
      if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("accuracy entries must lie in [0, 1]");
  }
  MetricsReport m;
  const auto& last = a.rows[T - 1];
  for (double v : last) m.last_accuracy += v;
  m.last_accuracy /= static_cast<double>(T);
  for (std::size_t tau = 0; tau < T; ++tau) {
    double s = 0.0;
    for (double v : a.rows[tau]) s += v;
    m.average_accuracy += s / static_cast<double>(tau + 1);
    m.learning_accuracy += a.rows[tau][tau];
  }
  m.average_accuracy /= static_cast<double>(T);
  m.learning_accuracy /= static_cast<double>(T);
  if (T > 1) {
    for (std::size_t t = 0; t + 1 < T; ++t) {
      double peak = a.rows[t][t];
      for (std::size_t tau = t; tau < T; ++tau) peak = std::max(peak, a.rows[tau][t]);
      m.forgetting += peak - last[t];
    }
    m.forgetting /= static_cast<double>(T - 1);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Task-head losses

LossValue loss_task_cur(Var logits, std::span<const int> labels, const std::vector<bool>& seen) {
  return LossValue::from(softmax_cross_entropy(logits, labels, seen), "task_cur");
}

LossValue loss_task_pre(std::optional<Var> exemplar_embeddings, std::span<const int> labels,
                        const Classifier& classifier, std::span<const Var> classifier_params, double variance,
                        std::size_t n_draws, std::uint64_t seed, const std::vector<bool>& seen) {
  if (!exemplar_embeddings || labels.empty()) return LossValue::zero("task_pre", "empty synthetic memory");
  if (!(variance >= 0.0)) throw ValidationError("perturbation variance must be >= 0");
  if (n_draws < 1) throw ValidationError("n_draws must be >= 1");
  Var e = *exemplar_embeddings;
  if (labels.size() != e.rows()) throw ShapeError("loss_task_pre: label count does not match embedding rows");
  Tape& tape = *e.tape;
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(variance));
  std::vector<Var> draws;
  std::vector<int> ys;
  for (std::size_t d = 0; d < n_draws; ++d) {
    if (variance > 0.0) {
      Tensor zeta = Tensor::zeros(e.shape());
      for (auto& v : zeta.values) v = normal(rng);
      draws.push_back(add(e, tape.constant(std::move(zeta))));
    } else {
      draws.push_back(e);
    }
    ys.insert(ys.end(), labels.begin(), labels.end());
  }
  Var z = draws.size() == 1 ? draws.front() : concat_rows(draws);
  return LossValue::from(softmax_cross_entropy(classifier.classify(classifier_params, z), ys, seen), "task_pre");
}

LossValue total_loss(const LossValue& cur_pro, const LossValue& pre_pro, const LossValue& task_pre,
                     const LossValue& task_cur, double alpha1, double alpha2, double alpha3) {
  const std::pair<const LossValue*, double> parts[] = {
      {&cur_pro, 1.0}, {&pre_pro, alpha1}, {&task_pre, alpha2}, {&task_cur, alpha3}};
  const char* names[] = {"cur_pro", "pre_pro", "task_pre", "task_cur"};
  LossValue out;
  std::optional<Var> acc;
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& [part, w] = parts[i];
    if (!std::isfinite(part->value)) throw NumericalError(std::string("loss part ") + names[i] + " is not finite");
    if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("loss weights must be finite and >= 0");
    out.terms.push_back({names[i], w, part->value});
    out.value += w * part->value;
    if (w == 0.0 || !part->has_var) continue;
    Var v = w == 1.0 ? part->var : scale(part->var, w);
    acc = acc ? add(*acc, v) : v;
  }
  if (acc) {
    out.var = *acc;
    out.has_var = true;
    out.value = acc->item();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training

ModelState make_model(const TaskSequence& seq, const RunConfig& config) {
  EncoderConfig ec = config.encoder;
  ec.input_dim = seq.input_dim;
  Rng enc_rng = make_rng(config.seed, "init-encoder");
  Rng cls_rng = make_rng(config.seed, "init-classifier");
  Encoder encoder(ec, enc_rng);
  Classifier classifier(ec.embedding_dim, seq.num_classes, cls_rng);
  Decoder decoder = Decoder::identity(seq.input_dim);
  if (config.decoder == DecoderKind::linear) {
    const std::size_t latent = config.decoder_latent_dim == 0 ? seq.input_dim : config.decoder_latent_dim;
    decoder = Decoder::pretrain_linear(stack_inputs(seq.tasks.front().train), latent, config.decoder_pretrain_steps,
                                       derive_seed(config.seed, "decoder"));
  }
  return {std::move(encoder), std::move(classifier), std::move(decoder)};
}

std::vector<bool> seen_mask(const TaskSequence& seq, std::size_t index) {
  std::vector<bool> mask(seq.num_classes, false);
  for (std::size_t t = 0; t <= index && t < seq.tasks.size(); ++t)
    for (int c : seq.tasks[t].classes) mask.at(static_cast<std::size_t>(c)) = true;
  return mask;
}

double evaluate_accuracy(const ModelState& model, std::span<const Sample> samples, const std::vector<bool>& seen) {
  if (samples.empty()) return 0.0;
  const auto pred = argmax_rows(model.classifier.classify(model.encoder.encode(stack_inputs(samples))), seen);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) hits += pred[i] == samples[i].y;
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

std::vector<NamedTensor> model_parameters(const ModelState& m) {
  auto out = m.encoder.named_parameters();
  for (auto& p : m.classifier.named_parameters()) out.push_back(std::move(p));
  for (auto& p : m.decoder.named_parameters()) out.push_back(std::move(p));
  return out;
}

namespace {

double input_scale(const Task& task) {
  const Tensor x = stack_inputs(task.train);
  double total = 0.0;
  for (std::size_t j = 0; j < x.cols(); ++j) {
    double mean = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) mean += x.at(i, j);
    mean /= static_cast<double>(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) sq += (x.at(i, j) - mean) * (x.at(i, j) - mean);
    total += std::sqrt(sq / static_cast<double>(x.rows()));
  }
  return total / static_cast<double>(x.cols());
}

bool contains(std::span<const int> v, int c) { return std::find(v.begin(), v.end(), c) != v.end(); }

nlohmann::json diagnostic_state(const Task& task, std::size_t epoch, std::size_t batch, std::size_t step,
                                const LossValue& loss, const ModelState& model) {
  nlohmann::json terms = nlohmann::json::object();
  for (const auto& t : loss.terms) terms[t.name] = std::isfinite(t.value) ? nlohmann::json(t.value) : nlohmann::json(std::to_string(t.value));
  nlohmann::json params = nlohmann::json::array();
  for (const auto& p : model_parameters(model)) {
    std::size_t bad_values = 0, bad_grads = 0;
    for (double v : p.tensor.values) bad_values += !std::isfinite(v);
    for (double g : p.tensor.grad) bad_grads += !std::isfinite(g);
    params.push_back({{"name", p.name}, {"non_finite_values", bad_values}, {"non_finite_grads", bad_grads}});
  }
  return {{"task", task.id}, {"epoch", epoch}, {"batch", batch}, {"step", step}, {"terms", terms}, {"parameters", params}};
}

}  // namespace

TaskOutcome train_task(const TrainContext& ctx, ModelState& model, MemoryPool& memory) {
  if (!ctx.sequence || !ctx.config) throw ValidationError("train_task: incomplete context");
  const TaskSequence& seq = *ctx.sequence;
  const RunConfig& cfg = *ctx.config;
  const Task& task = seq.tasks.at(ctx.index);
  const auto seen = seen_mask(seq, ctx.index);
  const bool proto_method = cfg.method == Method::protocore || cfg.method == Method::protocore_synth_only;
  const bool full_replay = cfg.method == Method::protocore && memory.real.capacity() > 0;
  const LossSelection L = proto_method ? cfg.losses : LossSelection{};

  Task view = task;
  if (cfg.method == Method::joint) {
    view.train.clear();
    for (std::size_t t = 0; t <= ctx.index; ++t)
      view.train.insert(view.train.end(), seq.tasks[t].train.begin(), seq.tasks[t].train.end());
  }
  const StreamMode mode = cfg.online ? StreamMode::online() : StreamMode::offline(cfg.epochs);
  const auto batches = iterate(view, mode, cfg.batch_size, derive_seed(cfg.seed, "batches"));
  const std::size_t per_epoch = (view.train.size() + cfg.batch_size - 1) / cfg.batch_size;

  std::vector<Tensor*> params = model.encoder.parameters();
  for (auto* p : model.classifier.parameters()) params.push_back(p);
  OptimizerConfig oc = cfg.optimizer;
  oc.horizon = batches.size();
  Optimizer opt(oc, params);

  const TransformSet F = TransformSet::standard(input_scale(seq.tasks.front()), derive_seed(cfg.seed, "transform"),
                                                cfg.transform_draws);
  const double variance = cfg.perturbation_variance.value_or(memory.perturbation_variance);
  ProtoLossOptions popts;
  popts.variant = cfg.loss_variant;
  popts.distance = cfg.distance;
  popts.temperature = cfg.temperature;

  // Stored exemplars of classes outside the current task.
  std::vector<SyntheticExemplar> previous;
  if (proto_method)
    for (const auto& e : memory.synth.entries())
      if (!contains(task.classes, e.class_id)) previous.push_back(e);
  std::vector<int> prev_labels;
  for (const auto& e : previous) prev_labels.push_back(e.class_id);
  Tensor prev_inputs;
  if (!previous.empty()) {
    std::vector<double> flat;
    for (const auto& e : previous) flat.insert(flat.end(), e.s.begin(), e.s.end());
    prev_inputs = Tensor::matrix(previous.size(), previous.front().s.size(), std::move(flat));
  }

  TaskOutcome outcome;
  EpochLog acc;
  const std::uint64_t step_base = static_cast<std::uint64_t>(task.id) << 32;
  for (std::size_t b = 0; b < batches.size(); ++b) {
    const std::size_t epoch = b / per_epoch;
    const std::uint64_t step = step_base + b;
    Tape tape;
    auto enc = model.encoder.bind(tape, true);
    auto cls = model.classifier.bind(tape, true);
    const EncodeFn encode = [&](Var in) { return model.encoder.encode(enc, in); };
    const auto& batch = batches[b];
    const auto y = gather_labels(view.train, batch);
    Var e = encode(tape.constant(stack_inputs(view.train, batch)));
    Var logits = model.classifier.classify(cls, e);

    LossValue cur_pro = LossValue::zero("cur_pro"), pre_pro = LossValue::zero("pre_pro");
    LossValue task_pre = LossValue::zero("task_pre"), task_cur = LossValue::zero("task_cur");
    double replay_value = 0.0;
    LossValue total;

    // Real replay batch B_m.
    std::vector<std::size_t> mem_idx;
    const bool wants_memory_batch = (cfg.method == Method::reservoir_er && cfg.replay_weight != 0.0) || full_replay;
    if (wants_memory_batch && !memory.real.empty())
      mem_idx = memory.real.sample_batch(cfg.memory_batch_size, derive_seed(cfg.seed, "memory-batch", step));
    auto memory_ce = [&]() -> std::optional<Var> {
      if (mem_idx.empty()) return std::nullopt;
      const auto& items = memory.real.items();
      Var em = encode(tape.constant(stack_inputs(items, mem_idx)));
      const auto ym = gather_labels(items, mem_idx);
      return softmax_cross_entropy(model.classifier.classify(cls, em), ym, seen);
    };

    try {
      if (!proto_method) {
        task_cur = loss_task_cur(logits, y, seen);
        total = task_cur;
        if (auto r = cfg.method == Method::reservoir_er ? memory_ce() : std::nullopt) {
          replay_value = r->item();
          Var w = cfg.replay_weight == 1.0 ? *r : scale(*r, cfg.replay_weight);
          total.var = add(total.var, w);
          total.value = total.var.item();
          total.terms.push_back({"replay", cfg.replay_weight, replay_value});
        }
      } else {
        if (L.task_cur) task_cur = loss_task_cur(logits, y, seen);

        const bool need_protos = L.cur_pro || (L.pre_pro && cfg.alpha1 != 0.0);
        std::optional<Var> prev_perturbed;
        if (!previous.empty() && need_protos)
          prev_perturbed = perturbed_embeddings(tape, F, tape.constant(prev_inputs), encode);

        if (need_protos) {
          std::map<int, std::vector<std::size_t>> real_rows, synth_rows;
          for (std::size_t i = 0; i < y.size(); ++i) real_rows[y[i]].push_back(i);
          const std::size_t k = previous.size();
          for (std::size_t h = 0; h < F.size(); ++h)
            for (std::size_t i = 0; i < k; ++i) synth_rows[prev_labels[i]].push_back(h * k + i);
          std::set<int> classes;
          for (const auto& [c, r] : real_rows) classes.insert(c);
          for (const auto& [c, r] : synth_rows) classes.insert(c);
          std::vector<Var> rows;
          std::vector<int> proto_classes;
          for (int c : classes) {
            std::optional<Var> real, synth;
            if (real_rows.contains(c)) real = gather_rows(e, real_rows[c]);
            if (synth_rows.contains(c)) synth = gather_rows(*prev_perturbed, synth_rows[c]);
            double bs = cfg.beta_synth;
            if (!real && !cfg.scale_synthetic_only_prototypes) bs = 1.0;
            rows.push_back(blend_prototype(real, synth, cfg.beta_real, bs));
            proto_classes.push_back(c);
          }
          Var P = rows.size() == 1 ? rows.front() : concat_rows(rows);

          if (L.cur_pro) cur_pro = loss_cur_pro(e, y, P, proto_classes, popts);
          if (L.pre_pro && cfg.alpha1 != 0.0) {
            std::vector<Var> items;
            std::vector<int> labels;
            if (prev_perturbed) {
              items.push_back(*prev_perturbed);
              for (std::size_t h = 0; h < F.size(); ++h) labels.insert(labels.end(), prev_labels.begin(), prev_labels.end());
            }
            if (full_replay && !memory.real.empty()) {
              std::vector<std::size_t> keep;
              const auto& real_items = memory.real.items();
              for (std::size_t i = 0; i < real_items.size(); ++i)
                if (!contains(task.classes, real_items[i].y) && contains(proto_classes, real_items[i].y)) keep.push_back(i);
              if (!keep.empty()) {
                items.push_back(encode(tape.constant(stack_inputs(real_items, keep))));
                const auto ys = gather_labels(real_items, keep);
                labels.insert(labels.end(), ys.begin(), ys.end());
              }
            }
            std::optional<Var> stacked;
            if (!items.empty()) stacked = items.size() == 1 ? items.front() : concat_rows(items);
            pre_pro = loss_pre_pro(stacked, labels, P, proto_classes, popts);
          }
        }

        if (L.task_pre && cfg.alpha2 != 0.0) {
          std::optional<Var> clean;
          if (!previous.empty()) clean = encode(tape.constant(prev_inputs));
          task_pre = loss_task_pre(clean, prev_labels, model.classifier, cls, variance, cfg.perturbation_draws,
                                   derive_seed(cfg.seed, "task-pre", step), seen);
          if (full_replay) {
            if (auto r = memory_ce()) {
              replay_value = r->item();
              task_pre.var = task_pre.has_var ? add(task_pre.var, *r) : *r;
              task_pre.has_var = true;
              task_pre.value = task_pre.var.item();
              task_pre.terms.push_back({"replay", 1.0, replay_value});
            }
          }
        }
        total = total_loss(cur_pro, pre_pro, task_pre, task_cur, cfg.alpha1, cfg.alpha2, cfg.alpha3);
      }
    } catch (const NumericalError& err) {
      LossValue partial;
      for (const LossValue* part : {&cur_pro, &pre_pro, &task_pre, &task_cur})
        partial.terms.insert(partial.terms.end(), part->terms.begin(), part->terms.end());
      throw TrainingAborted(std::string(err.what()) + " at task " + std::to_string(task.id) + ", batch " +
                                std::to_string(b),
                            diagnostic_state(task, epoch, b, b, partial, model));
    }

    if (!std::isfinite(total.value))
      throw TrainingAborted("non-finite loss at task " + std::to_string(task.id) + ", batch " + std::to_string(b),
                            diagnostic_state(task, epoch, b, b, total, model));
    opt.zero_grad();
    if (total.has_var) {
      tape.backward(total.var);
      if (!opt.step())
        throw TrainingAborted("non-finite gradient at task " + std::to_string(task.id) + ", batch " + std::to_string(b),
                              diagnostic_state(task, epoch, b, b, total, model));
    }

    if (acc.batches == 0) acc = EpochLog{task.id, epoch};
    ++acc.batches;
    acc.cur_pro += cur_pro.value;
    acc.pre_pro += pre_pro.value;
    acc.task_pre += task_pre.value;
    acc.task_cur += task_cur.value;
    acc.replay += replay_value;
    acc.total += total.value;
    if (b + 1 == batches.size() || (b + 1) / per_epoch != epoch) {
      const double n = static_cast<double>(acc.batches);
      for (double* v : {&acc.cur_pro, &acc.pre_pro, &acc.task_pre, &acc.task_cur, &acc.replay, &acc.total}) *v /= n;
      outcome.epochs.push_back(acc);
      acc = EpochLog{};
    }
  }

  if (proto_method) {
    SynthConfig sc = cfg.synthesis;
    if (cfg.method == Method::protocore_synth_only) sc.objective = SynthObjective::two_term;
    sc.use_cur_syn = L.cur_syn;
    sc.use_pre_syn = L.pre_syn;
    sc.use_shift = L.shift;
    SynthInputs in{&task, &model.encoder, &model.classifier, &model.decoder, &memory, seen};
    outcome.synthesis = optimize_exemplars(in, sc, derive_seed(cfg.seed, "synthesis", static_cast<std::uint64_t>(task.id)));
  }

  if (cfg.method == Method::reservoir_er || full_replay) {
    Rng rng = make_rng(cfg.seed, "reservoir", static_cast<std::uint64_t>(task.id));
    for (const auto& s : task.train) memory.real.reservoir_update(s, rng);
  }
  if (outcome.synthesis) {
    memory.synth.replace(outcome.synthesis->exemplars);
    if (cfg.method == Method::protocore) {
      auto anchors = outcome.synthesis->prototypes;
      for (auto& p : anchors) p.source = PrototypeSource::anchor;
      memory.protos.replace(anchors);
    }
    memory.perturbation_variance = outcome.synthesis->embedding_variance;
  }
  return outcome;
}

RunResult run_sequence(const TaskSequence& seq, const RunConfig& config) {
  validate(config);
  if (seq.tasks.empty()) throw ValidationError("sequence has no tasks");
  const auto start = std::chrono::steady_clock::now();
  RunResult r{AccuracyMatrix{}, MetricsReport{}, {}, MemoryPool{}, make_model(seq, config), {}, {}, 0.0};
  const bool uses_real = config.method == Method::reservoir_er || config.method == Method::protocore;
  r.memory.real = RealMemory(uses_real ? config.real_per_class * seq.num_classes : 0);
  r.memory.synth = SynthMemory(config.synthesis.per_class);
  for (std::size_t t = 0; t < seq.tasks.size(); ++t) {
    auto outcome = train_task({&seq, t, &config}, r.model, r.memory);
    r.log.insert(r.log.end(), outcome.epochs.begin(), outcome.epochs.end());
    if (outcome.synthesis) r.synthesis.push_back(std::move(*outcome.synthesis));
    const auto seen = seen_mask(seq, t);
    std::vector<double> row;
    for (std::size_t j = 0; j <= t; ++j) row.push_back(evaluate_accuracy(r.model, seq.tasks[j].test, seen));
    r.accuracy.rows.push_back(std::move(row));
    r.checkpoints.push_back({model_parameters(r.model), r.memory});
  }
  r.metrics = compute_metrics(r.accuracy);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

nlohmann::json metrics_to_json(const RunResult& r, const RunConfig& config) {
  nlohmann::json synth = nlohmann::json::array();
  for (std::size_t i = 0; i < r.synthesis.size(); ++i) {
    const auto& s = r.synthesis[i];
    synth.push_back({{"task", i + 1},
                     {"steps", s.steps_taken},
                     {"aborted", s.aborted},
                     {"fallback_classes", s.fallback_classes},
                     {"initial_loss", s.loss_history.empty() ? 0.0 : s.loss_history.front()},
                     {"final_loss", s.loss_history.empty() ? 0.0 : s.loss_history.back()},
                     {"embedding_variance", s.embedding_variance}});
  }
  return {
      {"format", "protocore-metrics"},
      {"version", 1},
      {"method", method_name(config.method)},
      {"losses", config.losses.label()},
      {"seed", config.seed},
      {"metrics",
       {{"last_accuracy", r.metrics.last_accuracy},
        {"average_accuracy", r.metrics.average_accuracy},
        {"learning_accuracy", r.metrics.learning_accuracy},
        {"forgetting", r.metrics.forgetting}}},
      {"accuracy_matrix", r.accuracy.rows},
      {"memory", footprint_to_json(memory_footprint(r.memory))},
      {"synthesis", synth},
  };
}

std::string accuracy_csv(const AccuracyMatrix& a) {
  std::ostringstream os;
  os << "after_task";
  for (std::size_t t = 0; t < a.tasks(); ++t) os << ",task_" << t + 1;
  os << '\n';
  for (std::size_t tau = 0; tau < a.tasks(); ++tau) {
    os << tau + 1;
    for (std::size_t t = 0; t < a.tasks(); ++t) {
      os << ',';
      if (t <= tau) os << fmt(a.at(tau, t));
    }
    os << '\n';
  }
  return os.str();
}

std::string loss_log_csv(const std::vector<EpochLog>& log) {
  std::ostringstream os;
  os << "task,epoch,batches,cur_pro,pre_pro,task_pre,task_cur,replay,total\n";
  for (const auto& e : log)
    os << e.task << ',' << e.epoch << ',' << e.batches << ',' << fmt(e.cur_pro) << ',' << fmt(e.pre_pro) << ','
       << fmt(e.task_pre) << ',' << fmt(e.task_cur) << ',' << fmt(e.replay) << ',' << fmt(e.total) << '\n';
  return os.str();
}

}  // namespace protocore
