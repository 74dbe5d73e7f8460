#include "protocore/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "protocore/checkpoint.hpp"
#include "protocore/errors.hpp"
#include "protocore/rng.hpp"

namespace protocore {

using nlohmann::json;

namespace {

// Reads one JSON object, remembers which keys were consumed and rejects the rest.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("", "expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  template <typename T>
  T get(const std::string& key, T fallback) {
    used_.insert(key);
    if (!has(key)) return fallback;
    return read<T>(key);
  }

  template <typename T>
  T require(const std::string& key) {
    used_.insert(key);
    if (!has(key)) fail(key, "required field is missing");
    return read<T>(key);
  }

  const json& object(const std::string& key) {
    used_.insert(key);
    static const json empty = json::object();
    if (!has(key)) return empty;
    if (!j_.at(key).is_object()) fail(key, "expected an object");
    return j_.at(key);
  }

  const json& raw(const std::string& key) {
    used_.insert(key);
    return j_.at(key);
  }

  std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!used_.contains(k)) fail(k, "unknown field");
  }

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    const auto where = key.empty() ? path_ : child(key);
    throw ValidationError("field '" + (where.empty() ? std::string("<root>") : where) + "': " + msg);
  }

 private:
  template <typename T>
  T read(const std::string& key) {
    const json& v = j_.at(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) fail(key, "expected a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) fail(key, "expected a string");
      return v.get<std::string>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0))
        fail(key, "expected a non-negative integer");
      return v.get<T>();
    } else {
      if (!v.is_number()) fail(key, "expected a number");
      return v.get<T>();
    }
  }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

template <typename E>
E enum_field(Fields& f, const std::string& key, E fallback, const std::vector<std::pair<std::string, E>>& names) {
  std::string current;
  for (const auto& [n, e] : names)
    if (e == fallback) current = n;
  const auto v = f.get<std::string>(key, current);
  for (const auto& [n, e] : names)
    if (n == v) return e;
  std::string allowed;
  for (const auto& [n, e] : names) allowed += (allowed.empty() ? "" : ", ") + n;
  f.fail(key, "unknown value '" + v + "' (expected one of: " + allowed + ")");
}

const std::vector<std::pair<std::string, GeneratorKind>> kGenerators{{"split_gaussians", GeneratorKind::split_gaussians},
                                                                     {"split_rings", GeneratorKind::split_rings}};
const std::vector<std::pair<std::string, ProtoLossVariant>> kVariants{{"contrastive", ProtoLossVariant::contrastive},
                                                                      {"prototypical", ProtoLossVariant::prototypical}};
const std::vector<std::pair<std::string, DistanceKind>> kDistances{{"mse", DistanceKind::mse},
                                                                   {"squared_euclidean", DistanceKind::squared_euclidean}};
const std::vector<std::pair<std::string, OptimizerKind>> kOptimizers{{"adam", OptimizerKind::adam},
                                                                     {"gradient_descent", OptimizerKind::gradient_descent}};
const std::vector<std::pair<std::string, ScheduleKind>> kSchedules{{"constant", ScheduleKind::constant},
                                                                   {"cosine", ScheduleKind::cosine}};
const std::vector<std::pair<std::string, DecoderKind>> kDecoders{{"identity", DecoderKind::identity},
                                                                 {"linear", DecoderKind::linear}};
const std::vector<std::pair<std::string, InitStrategy>> kInits{{"class_input_mean", InitStrategy::class_input_mean},
                                                               {"gaussian", InitStrategy::gaussian}};
const std::vector<std::pair<std::string, SynthObjective>> kObjectives{{"three_term", SynthObjective::three_term},
                                                                      {"two_term", SynthObjective::two_term}};

template <typename E>
std::string name_of(E e, const std::vector<std::pair<std::string, E>>& names) {
  for (const auto& [n, v] : names)
    if (v == e) return n;
  return "unknown";
}

}  // namespace

ExperimentConfig parse_experiment(const json& j) {
  ExperimentConfig cfg;
  Fields root(j, "");
  cfg.label = root.get<std::string>("label", cfg.label);
  cfg.output_dir = root.get<std::string>("output_dir", "runs/" + cfg.label);
  const auto method = root.require<std::string>("method");
  try {
    cfg.run.method = method_from_name(method);
  } catch (const ValidationError&) {
    root.fail("method", "unknown value '" + method + "'");
  }
  RunConfig& r = cfg.run;
  r.seed = root.get<std::uint64_t>("seed", 0);

  if (!root.has("dataset")) root.fail("dataset", "required field is missing");
  {
    Fields f(root.object("dataset"), "dataset");
    if (!f.has("generator")) f.fail("generator", "required field is missing");
    auto& d = cfg.dataset;
    d.generator = enum_field(f, "generator", d.generator, kGenerators);
    d.num_classes = f.get<std::size_t>("num_classes", d.num_classes);
    d.num_tasks = f.get<std::size_t>("num_tasks", d.num_tasks);
    d.samples_per_class = f.get<std::size_t>("samples_per_class", d.samples_per_class);
    d.seed = f.get<std::uint64_t>("seed", derive_seed(r.seed, "data"));
    auto& g = d.gaussians;
    g.input_dim = f.get<std::size_t>("input_dim", g.input_dim);
    g.separation = f.get<double>("separation", g.separation);
    g.noise_sd = f.get<double>("noise_sd", g.noise_sd);
    if (d.generator == GeneratorKind::split_rings && g.input_dim != 2 && f.has("input_dim"))
      f.fail("input_dim", "ring streams are two-dimensional");
    f.finish();
  }
  {
    Fields f(root.object("model"), "model");
    r.encoder.hidden_dim = f.get<std::size_t>("hidden_dim", r.encoder.hidden_dim);
    r.encoder.hidden_layers = f.get<std::size_t>("hidden_layers", r.encoder.hidden_layers);
    r.encoder.embedding_dim = f.get<std::size_t>("embedding_dim", r.encoder.embedding_dim);
    r.decoder = enum_field(f, "decoder", r.decoder, kDecoders);
    r.decoder_latent_dim = f.get<std::size_t>("decoder_latent_dim", r.decoder_latent_dim);
    r.decoder_pretrain_steps = f.get<std::size_t>("decoder_pretrain_steps", r.decoder_pretrain_steps);
    if (r.encoder.embedding_dim == 0 || r.encoder.hidden_dim == 0) f.fail("embedding_dim", "dimensions must be positive");
    f.finish();
  }
  {
    Fields f(root.object("training"), "training");
    r.epochs = f.get<std::size_t>("epochs", r.epochs);
    r.online = f.get<bool>("online", r.online);
    r.batch_size = f.get<std::size_t>("batch_size", r.batch_size);
    r.memory_batch_size = f.get<std::size_t>("memory_batch_size", r.memory_batch_size);
    r.optimizer.kind = enum_field(f, "optimizer", r.optimizer.kind, kOptimizers);
    r.optimizer.step_size = f.get<double>("step_size", r.optimizer.step_size);
    r.optimizer.schedule = enum_field(f, "schedule", r.optimizer.schedule, kSchedules);
    r.optimizer.weight_decay = f.get<double>("weight_decay", r.optimizer.weight_decay);
    if (!(r.optimizer.step_size > 0.0)) f.fail("step_size", "must be positive");
    if (r.epochs == 0) f.fail("epochs", "must be >= 1");
    if (r.batch_size == 0) f.fail("batch_size", "must be >= 1");
    f.finish();
  }
  {
    Fields f(root.object("losses"), "losses");
    r.loss_variant = enum_field(f, "variant", r.loss_variant, kVariants);
    r.distance = enum_field(f, "distance", r.distance, kDistances);
    r.temperature = f.get<double>("temperature", r.temperature);
    r.alpha1 = f.get<double>("alpha1", r.alpha1);
    r.alpha2 = f.get<double>("alpha2", r.alpha2);
    r.alpha3 = f.get<double>("alpha3", r.alpha3);
    r.replay_weight = f.get<double>("replay_weight", r.replay_weight);
    r.beta_real = f.get<double>("beta_real", r.beta_real);
    r.beta_synth = f.get<double>("beta_synth", r.beta_synth);
    r.scale_synthetic_only_prototypes = f.get<bool>("scale_synthetic_only_prototypes", r.scale_synthetic_only_prototypes);
    if (f.has("perturbation_variance")) r.perturbation_variance = f.get<double>("perturbation_variance", 0.0);
    else f.get<double>("perturbation_variance", 0.0);
    r.perturbation_draws = f.get<std::size_t>("perturbation_draws", r.perturbation_draws);
    r.transform_draws = f.get<std::size_t>("transform_draws", r.transform_draws);
    r.transform_scale = f.get<double>("transform_scale", r.transform_scale);
    if (f.has("terms")) {
      const auto& t = f.raw("terms");
      if (!t.is_array()) f.fail("terms", "expected an array of term numbers 1..7");
      std::vector<int> flags;
      for (const auto& v : t) {
        if (!v.is_number_integer()) f.fail("terms", "expected an array of term numbers 1..7");
        flags.push_back(v.get<int>());
      }
      try {
        r.losses = LossSelection::from_flags(flags);
      } catch (const ValidationError& e) {
        f.fail("terms", e.what());
      }
    } else {
      f.get<bool>("terms", false);
    }
    f.finish();
  }
  {
    Fields f(root.object("memory"), "memory");
    r.real_per_class = f.get<std::size_t>("real_per_class", r.real_per_class);
    r.synthesis.per_class = f.get<std::size_t>("synthetic_per_class", r.synthesis.per_class);
    if (r.synthesis.per_class == 0) f.fail("synthetic_per_class", "must be >= 1");
    f.finish();
  }
  {
    Fields f(root.object("synthesis"), "synthesis");
    auto& s = r.synthesis;
    s.iterations = f.get<std::size_t>("iterations", s.iterations);
    s.step_size = f.get<double>("step_size", s.step_size);
    s.cosine_schedule = f.get<bool>("cosine_schedule", s.cosine_schedule);
    s.weight_decay = f.get<double>("weight_decay", s.weight_decay);
    s.init = enum_field(f, "init", s.init, kInits);
    s.init_weight = f.get<double>("init_weight", s.init_weight);
    s.objective = enum_field(f, "objective", s.objective, kObjectives);
    s.alpha1 = f.get<double>("alpha1", s.alpha1);
    s.alpha2 = f.get<double>("alpha2", s.alpha2);
    s.alpha = f.get<double>("alpha", s.alpha);
    s.filter_misclassified = f.get<bool>("filter_misclassified", s.filter_misclassified);
    if (s.iterations == 0) f.fail("iterations", "must be >= 1");
    f.finish();
  }
  root.finish();
  try {
    validate(r);
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  return cfg;
}

json resolved_json(const ExperimentConfig& c) {
  const RunConfig& r = c.run;
  const auto& d = c.dataset;
  return {
      {"label", c.label},
      {"output_dir", c.output_dir},
      {"method", method_name(r.method)},
      {"seed", r.seed},
      {"dataset",
       {{"generator", name_of(d.generator, kGenerators)},
        {"num_classes", d.num_classes},
        {"num_tasks", d.num_tasks},
        {"samples_per_class", d.samples_per_class},
        {"seed", d.seed},
        {"input_dim", d.generator == GeneratorKind::split_rings ? 2 : d.gaussians.input_dim},
        {"separation", d.gaussians.separation},
        {"noise_sd", d.gaussians.noise_sd}}},
      {"model",
       {{"hidden_dim", r.encoder.hidden_dim},
        {"hidden_layers", r.encoder.hidden_layers},
        {"embedding_dim", r.encoder.embedding_dim},
        {"decoder", name_of(r.decoder, kDecoders)},
        {"decoder_latent_dim", r.decoder_latent_dim},
        {"decoder_pretrain_steps", r.decoder_pretrain_steps}}},
      {"training",
       {{"epochs", r.epochs},
        {"online", r.online},
        {"batch_size", r.batch_size},
        {"memory_batch_size", r.memory_batch_size},
        {"optimizer", name_of(r.optimizer.kind, kOptimizers)},
        {"step_size", r.optimizer.step_size},
        {"schedule", name_of(r.optimizer.schedule, kSchedules)},
        {"weight_decay", r.optimizer.weight_decay}}},
      {"losses",
       {{"variant", name_of(r.loss_variant, kVariants)},
        {"distance", name_of(r.distance, kDistances)},
        {"temperature", r.temperature},
        {"alpha1", r.alpha1},
        {"alpha2", r.alpha2},
        {"alpha3", r.alpha3},
        {"replay_weight", r.replay_weight},
        {"beta_real", r.beta_real},
        {"beta_synth", r.beta_synth},
        {"scale_synthetic_only_prototypes", r.scale_synthetic_only_prototypes},
        {"perturbation_variance", r.perturbation_variance ? json(*r.perturbation_variance) : json(nullptr)},
        {"perturbation_draws", r.perturbation_draws},
        {"transform_draws", r.transform_draws},
        {"transform_scale", r.transform_scale},
        {"terms", r.losses.flags()}}},
      {"memory", {{"real_per_class", r.real_per_class}, {"synthetic_per_class", r.synthesis.per_class}}},
      {"synthesis",
       {{"iterations", r.synthesis.iterations},
        {"step_size", r.synthesis.step_size},
        {"cosine_schedule", r.synthesis.cosine_schedule},
        {"weight_decay", r.synthesis.weight_decay},
        {"init", name_of(r.synthesis.init, kInits)},
        {"init_weight", r.synthesis.init_weight},
        {"objective", name_of(r.synthesis.objective, kObjectives)},
        {"alpha1", r.synthesis.alpha1},
        {"alpha2", r.synthesis.alpha2},
        {"alpha", r.synthesis.alpha},
        {"filter_misclassified", r.synthesis.filter_misclassified}}},
  };
}

TaskSequence build_sequence(const DatasetConfig& d) {
  if (d.generator == GeneratorKind::split_rings)
    return make_split_rings(d.num_classes, d.num_tasks, d.samples_per_class, d.seed);
  GaussianStreamSpec g = d.gaussians;
  g.num_classes = d.num_classes;
  g.num_tasks = d.num_tasks;
  g.samples_per_class = d.samples_per_class;
  g.seed = d.seed;
  return make_split_gaussians(g);
}

std::filesystem::path output_directory(const ExperimentConfig& config) {
  std::filesystem::path p = config.output_dir;
  if (p.is_relative()) {
    if (const char* root = std::getenv("PROTOCORE_OUTPUT_ROOT"); root != nullptr && *root != '\0') p = root / p;
  }
  return p;
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ValidationError("cannot write " + path.string());
  os << text;
}

std::string checkpoint_name(std::size_t task) { return "task_" + std::to_string(task); }

}  // namespace

void write_run_outputs(const std::filesystem::path& dir, const ExperimentConfig& config, const TaskSequence& seq,
                       const RunResult& result) {
  std::filesystem::create_directories(dir / "checkpoints");
  write_json_file(dir / "resolved_config.json", resolved_json(config));
  write_json_file(dir / "sequence.json", sequence_to_json(seq));
  write_json_file(dir / "metrics.json", metrics_to_json(result, config.run));
  write_text(dir / "accuracy.csv", accuracy_csv(result.accuracy));
  write_text(dir / "loss_log.csv", loss_log_csv(result.log));
  write_json_file(dir / "memory.json", memory_to_json(result.memory));
  write_json_file(dir / "exemplars.json", exemplar_dump(result.memory.synth.entries(), result.model.encoder));
  for (std::size_t t = 0; t < result.checkpoints.size(); ++t) {
    const auto& ck = result.checkpoints[t];
    write_json_file(dir / "checkpoints" / (checkpoint_name(t + 1) + ".json"), parameters_to_json(ck.parameters));
    write_json_file(dir / "checkpoints" / (checkpoint_name(t + 1) + "_memory.json"), memory_to_json(ck.memory));
  }
  write_json_file(dir / "timing.json", {{"seconds", result.seconds}});
}

std::vector<LossSelection> parse_loss_sets(const std::string& list) {
  std::vector<LossSelection> out;
  std::stringstream sets(list);
  std::string set;
  while (std::getline(sets, set, ';')) {
    std::string trimmed;
    for (char ch : set)
      if (!std::isspace(static_cast<unsigned char>(ch))) trimmed += ch;
    if (trimmed.empty()) continue;
    if (trimmed == "full") {
      out.push_back(LossSelection{});
      continue;
    }
    std::vector<int> flags;
    std::string tok;
    for (char& ch : trimmed)
      if (ch == '+' || ch == '(' || ch == ')') ch = ',';
    std::stringstream terms(trimmed);
    while (std::getline(terms, tok, ',')) {
      if (tok.empty()) continue;
      try {
        std::size_t used = 0;
        flags.push_back(std::stoi(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw ValidationError("--losses: '" + tok + "' is not a term number");
      }
    }
    out.push_back(LossSelection::from_flags(flags));
  }
  if (out.empty()) throw ValidationError("--losses: empty loss selection");
  return out;
}

namespace {

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const TrainingAborted& e) {
    err << "numerical failure: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "validation error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

ExperimentConfig load_config(const std::filesystem::path& path) { return parse_experiment(read_json_file(path)); }

}  // namespace

int cmd_run(const std::filesystem::path& config_path, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto config = load_config(config_path);
    const auto dir = output_directory(config);
    const auto seq = build_sequence(config.dataset);
    std::filesystem::create_directories(dir);
    write_json_file(dir / "resolved_config.json", resolved_json(config));
    auto result = [&] {
      try {
        return run_sequence(seq, config.run);
      } catch (const TrainingAborted& e) {
        write_json_file(dir / "diagnostic.json", e.diagnostic());
        throw;
      }
    }();
    write_run_outputs(dir, config, seq, result);
    const auto& m = result.metrics;
    out << "run " << config.label << " (" << method_name(config.run.method) << ") -> " << dir.string() << '\n'
        << std::fixed << std::setprecision(4) << "  last_accuracy " << m.last_accuracy << "  average_accuracy "
        << m.average_accuracy << "  learning_accuracy " << m.learning_accuracy << "  forgetting " << m.forgetting
        << '\n';
    return 0;
  });
}

int cmd_ablate(const std::filesystem::path& config_path, const std::string& losses, const std::string& variants,
               const std::string& seeds, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto base = load_config(config_path);
    auto sets = parse_loss_sets(losses);
    if (std::none_of(sets.begin(), sets.end(), [](const LossSelection& s) { return s.full(); }))
      sets.push_back(LossSelection{});

    std::vector<ProtoLossVariant> vs;
    if (variants.empty()) {
      vs.push_back(base.run.loss_variant);
    } else {
      std::stringstream ss(variants);
      std::string v;
      while (std::getline(ss, v, ',')) {
        if (v == "contrastive") vs.push_back(ProtoLossVariant::contrastive);
        else if (v == "prototypical") vs.push_back(ProtoLossVariant::prototypical);
        else throw ValidationError("--variants: unknown variant '" + v + "'");
      }
    }
    std::vector<std::uint64_t> seed_list;
    if (seeds.empty()) {
      seed_list.push_back(base.run.seed);
    } else {
      std::stringstream ss(seeds);
      std::string v;
      while (std::getline(ss, v, ',')) {
        try {
          seed_list.push_back(std::stoull(v));
        } catch (const std::exception&) {
          throw ValidationError("--seeds: '" + v + "' is not a seed");
        }
      }
    }

    std::ostringstream csv;
    csv << "losses,variant,seeds,last_accuracy,forgetting,average_accuracy\n";
    for (auto v : vs) {
      for (const auto& sel : sets) {
        double at = 0.0, fg = 0.0, avg = 0.0;
        for (auto seed : seed_list) {
          ExperimentConfig cfg = base;
          cfg.run.seed = seed;
          if (!seeds.empty()) cfg.dataset.seed = derive_seed(seed, "data");
          cfg.run.losses = sel;
          cfg.run.loss_variant = v;
          const auto r = run_sequence(build_sequence(cfg.dataset), cfg.run);
          at += r.metrics.last_accuracy;
          fg += r.metrics.forgetting;
          avg += r.metrics.average_accuracy;
        }
        const double n = static_cast<double>(seed_list.size());
        csv << sel.label() << ',' << name_of(v, kVariants) << ',' << seed_list.size() << ',' << at / n << ','
            << fg / n << ',' << avg / n << '\n';
      }
    }
    const auto dir = output_directory(base);
    std::filesystem::create_directories(dir);
    write_json_file(dir / "resolved_config.json", resolved_json(base));
    write_text(dir / "ablation.csv", csv.str());
    out << csv.str();
    return 0;
  });
}

int cmd_gradcheck(std::ostream& out, std::ostream& err, std::size_t instances) {
  return guarded(err, [&] {
    const auto report = run_gradcheck_suite(instances, 2024);
    bool ok = true;
    for (const auto& e : report) {
      out << std::left << std::setw(24) << e.name << std::scientific << std::setprecision(3) << e.max_error
          << (e.passed() ? "  ok" : "  FAIL") << '\n';
      ok = ok && e.passed();
    }
    if (!ok) {
      err << "gradient check exceeded " << kGradcheckTolerance << '\n';
      return 2;
    }
    return 0;
  });
}

json dump_embeddings(const std::filesystem::path& run_dir, int task) {
  const auto ck = run_dir / "checkpoints" / ("task_" + std::to_string(task) + ".json");
  const auto mk = run_dir / "checkpoints" / ("task_" + std::to_string(task) + "_memory.json");
  if (!std::filesystem::exists(ck)) throw ValidationError("missing checkpoint " + ck.string());
  if (!std::filesystem::exists(mk)) throw ValidationError("missing memory snapshot " + mk.string());
  const auto config = parse_experiment(read_json_file(run_dir / "resolved_config.json"));
  const auto seq = sequence_from_json(read_json_file(run_dir / "sequence.json"));
  if (task < 1 || static_cast<std::size_t>(task) > seq.tasks.size())
    throw ValidationError("task " + std::to_string(task) + " is outside 1.." + std::to_string(seq.tasks.size()));

  EncoderConfig ec = config.run.encoder;
  ec.input_dim = seq.input_dim;
  Encoder encoder(ec);
  std::vector<NamedTensor> enc_params;
  for (auto& p : parameters_from_json(read_json_file(ck)))
    if (p.name.rfind("encoder.", 0) == 0) enc_params.push_back(std::move(p));
  encoder.load(enc_params);
  const auto memory = memory_from_json(read_json_file(mk));

  json rows = json::array();
  for (int t = 0; t < task; ++t) {
    const auto& test = seq.tasks[static_cast<std::size_t>(t)].test;
    const Tensor e = encoder.encode(stack_inputs(test));
    for (std::size_t i = 0; i < test.size(); ++i) {
      auto r = e.row_span(i);
      rows.push_back({{"kind", "test"}, {"class_id", test[i].y}, {"task", t + 1}, {"input", test[i].x},
                      {"embedding", std::vector<double>(r.begin(), r.end())}});
    }
  }
  const auto seen = seen_mask(seq, static_cast<std::size_t>(task - 1));
  for (std::size_t c = 0; c < seen.size(); ++c) {
    if (!seen[c]) continue;
    const int cls = static_cast<int>(c);
    if (memory.protos.contains(cls)) {
      rows.push_back({{"kind", "prototype"}, {"class_id", cls}, {"source", "anchor"}, {"embedding", memory.protos.at(cls)}});
      continue;
    }
    std::vector<Sample> own;
    for (int t = 0; t < task; ++t)
      for (const auto& s : seq.tasks[static_cast<std::size_t>(t)].train)
        if (s.y == cls) own.push_back(s);
    const Tensor e = encoder.encode(stack_inputs(own));
    std::vector<double> mean(e.cols(), 0.0);
    for (std::size_t i = 0; i < e.rows(); ++i)
      for (std::size_t j = 0; j < e.cols(); ++j) mean[j] += e.at(i, j) / static_cast<double>(e.rows());
    rows.push_back({{"kind", "prototype"}, {"class_id", cls}, {"source", "recomputed"}, {"embedding", mean}});
  }
  for (const auto& x : memory.synth.entries()) {
    rows.push_back({{"kind", "synthetic"}, {"class_id", x.class_id}, {"origin_task", x.origin_task}, {"input", x.s},
                    {"embedding", encoder.encode(Tensor::row(x.s)).values}});
  }
  return {{"format", "protocore-embeddings"},
          {"version", 1},
          {"task", task},
          {"embedding_dim", ec.embedding_dim},
          {"rows", rows}};
}

int cmd_dump_embeddings(const std::filesystem::path& run_dir, int task, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto j = dump_embeddings(run_dir, task);
    const auto path = run_dir / ("embeddings_task_" + std::to_string(task) + ".json");
    write_json_file(path, j);
    out << "wrote " << j.at("rows").size() << " rows to " << path.string() << '\n';
    return 0;
  });
}

}  // namespace protocore
