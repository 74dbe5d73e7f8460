#include "protocore/gradcheck_suite.hpp"

#include <algorithm>

#include "protocore/exemplar.hpp"
#include "protocore/gradcheck.hpp"
#include "protocore/proto.hpp"
#include "protocore/rng.hpp"
#include "protocore/trainer.hpp"

namespace protocore {

namespace {

constexpr std::size_t kIn = 4;
constexpr std::size_t kEmb = 3;
constexpr std::size_t kClasses = 4;

Tensor randn(std::size_t rows, std::size_t cols, Rng& rng, double sd = 1.0) {
  std::normal_distribution<double> n(0.0, sd);
  Tensor t = Tensor::zeros({rows, cols});
  for (auto& v : t.values) v = n(rng);
  return t;
}

// A random small network, a labeled batch over classes {0, 1} and two stored
// exemplars of classes {2, 3}.
struct Instance {
  Rng rng;
  Encoder encoder;
  Classifier classifier;
  Tensor batch;
  std::vector<int> labels{0, 0, 0, 1, 1, 1};
  Tensor exemplars;
  std::vector<int> exemplar_labels{2, 3};
  SynthMemory synth;
  TransformSet F = TransformSet::identity();

  explicit Instance(std::uint64_t seed)
      : rng(seed),
        encoder(EncoderConfig{kIn, 8, 2, kEmb}, rng),
        classifier(kEmb, kClasses, rng),
        batch(randn(6, kIn, rng)),
        exemplars(randn(2, kIn, rng)),
        F(TransformSet::standard(1.0, seed, 2)) {
    // Nudge biases off zero so relu kinks are not aligned with the origin.
    for (auto* p : encoder.parameters())
      if (p->rank() == 1)
        for (auto& v : p->values) v = std::normal_distribution<double>(0.0, 0.1)(rng);
    std::vector<SyntheticExemplar> ex;
    for (std::size_t i = 0; i < 2; ++i) {
      auto r = exemplars.row_span(i);
      ex.push_back({exemplar_labels[i], {r.begin(), r.end()}, {r.begin(), r.end()}, 1});
    }
    synth.replace(ex);
  }

  std::vector<Tensor*> encoder_params() { return encoder.parameters(); }
  std::vector<Tensor*> all_params() {
    auto p = encoder.parameters();
    for (auto* q : classifier.parameters()) p.push_back(q);
    return p;
  }
};

std::span<const Var> head(std::span<const Var> v, std::size_t n) { return v.subspan(0, n); }

// Prototypes of the batch classes (differentiable means) and of the memory
// classes (synthetic-only branch over F).
struct Protos {
  Var P;
  std::vector<int> classes;
};

Protos build_protos(Tape& tape, Instance& in, Var e, const EncodeFn& encode) {
  std::vector<Var> rows;
  std::vector<int> classes;
  for (int c : {0, 1}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < in.labels.size(); ++i)
      if (in.labels[i] == c) idx.push_back(i);
    rows.push_back(blend_prototype(gather_rows(e, idx), std::nullopt, 0.95, 0.05));
    classes.push_back(c);
  }
  Var z = perturbed_embeddings(tape, in.F, tape.constant(in.exemplars), encode);
  for (std::size_t i = 0; i < in.exemplar_labels.size(); ++i) {
    std::vector<std::size_t> idx;
    for (std::size_t h = 0; h < in.F.size(); ++h) idx.push_back(h * in.exemplar_labels.size() + i);
    rows.push_back(blend_prototype(std::nullopt, gather_rows(z, idx), 0.95, 1.0));
    classes.push_back(in.exemplar_labels[i]);
  }
  return {concat_rows(rows), classes};
}

double synth_case(std::uint64_t seed, int which) {
  Instance in(seed);
  Tensor z = randn(2, kIn, in.rng);
  const Tensor cur_t = randn(2, kEmb, in.rng);
  const Tensor pre_t = randn(1, kEmb, in.rng);
  const Tensor shift_t = randn(1, kEmb, in.rng);
  auto params = in.encoder_params();
  params.push_back(&z);
  const std::size_t n_enc = params.size() - 1;
  const std::vector<std::size_t> prev{1};
  return finite_diff_check(
      [&](Tape&, std::span<const Var> leaves) {
        Var e = in.encoder.encode(head(leaves, n_enc), leaves[n_enc]);
        switch (which) {
          case 0: return loss_cur_syn(e, cur_t).var;
          case 1: return loss_pre_syn(gather_rows(e, prev), pre_t).var;
          case 2: return loss_shift(gather_rows(e, prev), shift_t).var;
          default: {
            Var cur = loss_cur_syn(e, cur_t).var;
            Var pre = loss_pre_syn(gather_rows(e, prev), pre_t).var;
            Var sh = loss_shift(gather_rows(e, prev), shift_t).var;
            return add(add(cur, scale(pre, 0.1)), scale(sh, 0.1));
          }
        }
      },
      params);
}

double cur_pro_case(std::uint64_t seed, ProtoLossVariant variant) {
  Instance in(seed);
  auto params = in.encoder_params();
  ProtoLossOptions opts;
  opts.variant = variant;
  return finite_diff_check(
      [&](Tape& tape, std::span<const Var> leaves) {
        EncodeFn encode = [&](Var x) { return in.encoder.encode(leaves, x); };
        Var e = encode(tape.constant(in.batch));
        auto pr = build_protos(tape, in, e, encode);
        return loss_cur_pro(e, in.labels, pr.P, pr.classes, opts).var;
      },
      params);
}

double pre_pro_case(std::uint64_t seed, ProtoLossVariant variant) {
  Instance in(seed);
  auto params = in.encoder_params();
  ProtoLossOptions opts;
  opts.variant = variant;
  const std::vector<int> current{0, 1};
  return finite_diff_check(
      [&](Tape& tape, std::span<const Var> leaves) {
        EncodeFn encode = [&](Var x) { return in.encoder.encode(leaves, x); };
        Var e = encode(tape.constant(in.batch));
        auto pr = build_protos(tape, in, e, encode);
        PreProInputs mem{&in.synth, nullptr, current};
        return loss_pre_pro(tape, mem, pr.P, pr.classes, in.F, encode, opts).var;
      },
      params);
}

double task_cur_case(std::uint64_t seed) {
  Instance in(seed);
  auto params = in.all_params();
  const std::size_t n_enc = in.encoder_params().size();
  const std::vector<bool> seen{true, true, true, false};
  return finite_diff_check(
      [&](Tape& tape, std::span<const Var> leaves) {
        Var e = in.encoder.encode(head(leaves, n_enc), tape.constant(in.batch));
        return loss_task_cur(in.classifier.classify(leaves.subspan(n_enc), e), in.labels, seen).var;
      },
      params);
}

double task_pre_case(std::uint64_t seed) {
  Instance in(seed);
  auto params = in.all_params();
  const std::size_t n_enc = in.encoder_params().size();
  return finite_diff_check(
      [&](Tape& tape, std::span<const Var> leaves) {
        Var e = in.encoder.encode(head(leaves, n_enc), tape.constant(in.exemplars));
        return loss_task_pre(e, in.exemplar_labels, in.classifier, leaves.subspan(n_enc), 0.3, 4, seed).var;
      },
      params);
}

double info_nce_case(std::uint64_t seed) {
  Rng rng(seed);
  Tensor anchor = randn(1, kEmb, rng);
  Tensor candidates = randn(4, kEmb, rng);
  std::vector<Tensor*> params{&anchor, &candidates};
  return finite_diff_check(
      [&](Tape&, std::span<const Var> leaves) { return info_nce(leaves[0], leaves[1], 0, 0.1); }, params);
}

double total_case(std::uint64_t seed) {
  Instance in(seed);
  auto params = in.all_params();
  const std::size_t n_enc = in.encoder_params().size();
  const std::vector<int> current{0, 1};
  ProtoLossOptions opts;
  opts.variant = ProtoLossVariant::contrastive;
  return finite_diff_check(
      [&](Tape& tape, std::span<const Var> leaves) {
        auto enc = head(leaves, n_enc);
        auto cls = leaves.subspan(n_enc);
        EncodeFn encode = [&](Var x) { return in.encoder.encode(enc, x); };
        Var e = encode(tape.constant(in.batch));
        auto pr = build_protos(tape, in, e, encode);
        auto cur = loss_cur_pro(e, in.labels, pr.P, pr.classes, opts);
        PreProInputs mem{&in.synth, nullptr, current};
        auto pre = loss_pre_pro(tape, mem, pr.P, pr.classes, in.F, encode, opts);
        auto tp = loss_task_pre(encode(tape.constant(in.exemplars)), in.exemplar_labels, in.classifier, cls, 0.3, 4, seed);
        auto tc = loss_task_cur(in.classifier.classify(cls, e), in.labels, {});
        return total_loss(cur, pre, tp, tc, 0.7, 1.3, 0.5).var;
      },
      params);
}

const std::vector<std::pair<std::string, GradcheckCase>>& builtin_cases() {
  static const std::vector<std::pair<std::string, GradcheckCase>> cases = {
      {"cur_syn", [](std::uint64_t s) { return synth_case(s, 0); }},
      {"pre_syn", [](std::uint64_t s) { return synth_case(s, 1); }},
      {"shift", [](std::uint64_t s) { return synth_case(s, 2); }},
      {"sync_proto", [](std::uint64_t s) { return synth_case(s, 3); }},
      {"cur_pro_prototypical", [](std::uint64_t s) { return cur_pro_case(s, ProtoLossVariant::prototypical); }},
      {"cur_pro_contrastive", [](std::uint64_t s) { return cur_pro_case(s, ProtoLossVariant::contrastive); }},
      {"pre_pro_prototypical", [](std::uint64_t s) { return pre_pro_case(s, ProtoLossVariant::prototypical); }},
      {"pre_pro_contrastive", [](std::uint64_t s) { return pre_pro_case(s, ProtoLossVariant::contrastive); }},
      {"task_cur", task_cur_case},
      {"task_pre", task_pre_case},
      {"info_nce", info_nce_case},
      {"total", total_case},
  };
  return cases;
}

}  // namespace

std::vector<std::string> gradcheck_case_names() {
  std::vector<std::string> out;
  for (const auto& [name, fn] : builtin_cases()) out.push_back(name);
  return out;
}

std::vector<GradcheckEntry> run_gradcheck_suite(std::size_t instances, std::uint64_t seed,
                                                const std::vector<std::pair<std::string, GradcheckCase>>& extra) {
  std::vector<GradcheckEntry> out;
  auto run = [&](const std::string& name, const GradcheckCase& fn) {
    GradcheckEntry e{name, 0.0, instances};
    for (std::size_t i = 0; i < instances; ++i) e.max_error = std::max(e.max_error, fn(derive_seed(seed, name, i)));
    out.push_back(e);
  };
  for (const auto& [name, fn] : builtin_cases()) run(name, fn);
  for (const auto& [name, fn] : extra) run(name, fn);
  return out;
}

}  // namespace protocore
