#include "protocore/memory.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "protocore/errors.hpp"

namespace protocore {

void RealMemory::reservoir_update(const Sample& item, Rng& rng) {
  ++seen_;
  if (capacity_ == 0) return;
  if (items_.size() < capacity_) {
    items_.push_back(item);
    return;
  }
  std::uniform_int_distribution<std::uint64_t> pick(0, seen_ - 1);
  const auto j = pick(rng);
  if (j < capacity_) items_[j] = item;
}

std::vector<std::size_t> RealMemory::sample_batch(std::size_t batch_size, std::uint64_t seed) const {
  std::vector<std::size_t> all(items_.size());
  std::iota(all.begin(), all.end(), 0);
  if (batch_size >= all.size()) return all;
  Rng rng(seed);
  // Partial Fisher-Yates: the first batch_size slots form a uniform subset.
  for (std::size_t i = 0; i < batch_size; ++i) {
    std::uniform_int_distribution<std::size_t> d(i, all.size() - 1);
    std::swap(all[i], all[d(rng)]);
  }
  all.resize(batch_size);
  return all;
}

SynthMemory::SynthMemory(std::size_t per_class) : per_class_(per_class) {
  if (per_class_ == 0) throw ValidationError("synthetic memory needs at least one slot per class");
}

void SynthMemory::replace(const std::vector<SyntheticExemplar>& exemplars) {
  std::map<int, std::vector<SyntheticExemplar>> update;
  for (const auto& e : exemplars) update[e.class_id].push_back(e);
  for (const auto& [c, list] : update) {
    if (list.size() > per_class_)
      throw ValidationError("replace_synth: " + std::to_string(list.size()) + " exemplars for class " +
                            std::to_string(c) + " exceed the per-class budget of " + std::to_string(per_class_));
  }
  for (auto& [c, list] : update) slots_[c] = std::move(list);
}

std::size_t SynthMemory::size() const {
  std::size_t n = 0;
  for (const auto& [c, list] : slots_) n += list.size();
  return n;
}

std::vector<int> SynthMemory::classes() const {
  std::vector<int> out;
  for (const auto& [c, list] : slots_) out.push_back(c);
  return out;
}

const std::vector<SyntheticExemplar>& SynthMemory::at(int class_id) const {
  auto it = slots_.find(class_id);
  if (it == slots_.end()) throw ValidationError("no synthetic exemplar for class " + std::to_string(class_id));
  return it->second;
}

std::vector<SyntheticExemplar> SynthMemory::entries() const {
  std::vector<SyntheticExemplar> out;
  for (const auto& [c, list] : slots_) out.insert(out.end(), list.begin(), list.end());
  return out;
}

void ProtoMemory::replace(const std::vector<Prototype>& prototypes) {
  std::set<int> seen;
  for (const auto& p : prototypes) {
    if (!seen.insert(p.class_id).second)
      throw ValidationError("replace_proto: more than one prototype for class " + std::to_string(p.class_id));
    if (p.vector.empty()) throw ValidationError("replace_proto: empty prototype vector");
    const std::size_t d = dim_ == 0 ? p.vector.size() : dim_;
    if (p.vector.size() != d)
      throw ShapeError("replace_proto: prototype of dimension " + std::to_string(p.vector.size()) +
                       ", memory holds dimension " + std::to_string(d));
    dim_ = d;
  }
  for (const auto& p : prototypes) protos_[p.class_id] = p.vector;
}

std::vector<int> ProtoMemory::classes() const {
  std::vector<int> out;
  for (const auto& [c, v] : protos_) out.push_back(c);
  return out;
}

const std::vector<double>& ProtoMemory::at(int class_id) const {
  auto it = protos_.find(class_id);
  if (it == protos_.end()) throw ValidationError("no stored prototype for class " + std::to_string(class_id));
  return it->second;
}

MemoryFootprint memory_footprint(const MemoryPool& pool) {
  MemoryFootprint f;
  f.real_items = pool.real.size();
  std::set<int> real_classes;
  for (const auto& s : pool.real.items()) {
    f.real_values += s.x.size();
    real_classes.insert(s.y);
  }
  if (!real_classes.empty()) f.real_per_class = static_cast<double>(f.real_items) / real_classes.size();
  for (int c : pool.synth.classes()) {
    const auto& list = pool.synth.at(c);
    f.synth_per_class = std::max(f.synth_per_class, list.size());
    for (const auto& e : list) f.synth_values += e.s.size();
    f.synth_entries += list.size();
  }
  f.proto_entries = pool.protos.size();
  f.proto_values = pool.protos.size() * pool.protos.dim();
  f.total_values = f.real_values + f.synth_values + f.proto_values;
  f.total_bytes = f.total_values * sizeof(double);
  return f;
}

nlohmann::json footprint_to_json(const MemoryFootprint& f) {
  return {
      {"real", {{"items", f.real_items}, {"values", f.real_values}, {"per_class", f.real_per_class}}},
      {"synthetic", {{"entries", f.synth_entries}, {"values", f.synth_values}, {"per_class", f.synth_per_class}}},
      {"prototypes", {{"entries", f.proto_entries}, {"values", f.proto_values}}},
      {"total_values", f.total_values},
      {"total_bytes", f.total_bytes},
  };
}

nlohmann::json memory_to_json(const MemoryPool& pool) {
  nlohmann::json real_items = nlohmann::json::array();
  for (const auto& s : pool.real.items()) real_items.push_back({{"x", s.x}, {"y", s.y}});
  nlohmann::json synth = nlohmann::json::array();
  for (const auto& e : pool.synth.entries())
    synth.push_back({{"class_id", e.class_id}, {"origin_task", e.origin_task}, {"z", e.z}, {"s", e.s}});
  nlohmann::json protos = nlohmann::json::array();
  for (int c : pool.protos.classes()) protos.push_back({{"class_id", c}, {"vector", pool.protos.at(c)}});
  return {
      {"format", "protocore-memory"},
      {"version", kMemorySnapshotVersion},
      {"real", {{"capacity", pool.real.capacity()}, {"seen_count", pool.real.seen_count()}, {"items", real_items}}},
      {"synthetic", {{"per_class", pool.synth.per_class()}, {"entries", synth}}},
      {"prototypes", {{"dim", pool.protos.dim()}, {"entries", protos}}},
      {"perturbation_variance", pool.perturbation_variance},
  };
}

RealMemory real_memory_from_json(const nlohmann::json& j) {
  RealMemory m(j.at("capacity").get<std::size_t>());
  m.seen_ = j.at("seen_count").get<std::uint64_t>();
  for (const auto& it : j.at("items")) m.items_.push_back({it.at("x").get<std::vector<double>>(), it.at("y").get<int>()});
  if (m.items_.size() > m.capacity_) throw ValidationError("memory snapshot: real items exceed capacity");
  return m;
}

MemoryPool memory_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "protocore-memory") throw ValidationError("not a memory snapshot");
    if (j.at("version").get<int>() != kMemorySnapshotVersion)
      throw ValidationError("unsupported memory snapshot version " + j.at("version").dump());
    MemoryPool pool;
    pool.real = real_memory_from_json(j.at("real"));
    pool.synth = SynthMemory(j.at("synthetic").at("per_class").get<std::size_t>());
    std::vector<SyntheticExemplar> ex;
    for (const auto& e : j.at("synthetic").at("entries"))
      ex.push_back({e.at("class_id").get<int>(), e.at("z").get<std::vector<double>>(),
                    e.at("s").get<std::vector<double>>(), e.at("origin_task").get<int>()});
    pool.synth.replace(ex);
    std::vector<Prototype> protos;
    for (const auto& p : j.at("prototypes").at("entries"))
      protos.push_back({p.at("class_id").get<int>(), p.at("vector").get<std::vector<double>>(), PrototypeSource::anchor});
    pool.protos.replace(protos);
    pool.perturbation_variance = j.at("perturbation_variance").get<double>();
    return pool;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("memory snapshot: ") + e.what());
  }
}

}  // namespace protocore
