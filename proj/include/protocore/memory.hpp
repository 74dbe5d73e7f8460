#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <vector>

#include <json.hpp>

#include "protocore/rng.hpp"
#include "protocore/task_stream.hpp"
#include "protocore/types.hpp"

namespace protocore {

/// Global reservoir of real samples (M_x).
class RealMemory {
 public:
  RealMemory() = default;
  explicit RealMemory(std::size_t capacity) : capacity_(capacity) {}

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  std::uint64_t seen_count() const { return seen_; }
  const std::vector<Sample>& items() const { return items_; }

  /// Classic reservoir step: fill while below capacity, afterwards keep the
  /// new item with probability capacity / seen_count in a uniform slot.
  void reservoir_update(const Sample& item, Rng& rng);

  /// Uniform draw without replacement. Returns every index (in order) when
  /// batch_size >= size().
  std::vector<std::size_t> sample_batch(std::size_t batch_size, std::uint64_t seed) const;

  bool operator==(const RealMemory&) const = default;

 private:
  friend RealMemory real_memory_from_json(const nlohmann::json& j);
  std::size_t capacity_ = 0;
  std::uint64_t seen_ = 0;
  std::vector<Sample> items_;
};

/// Per-class synthetic exemplars (M_s), at most `per_class` entries each.
class SynthMemory {
 public:
  SynthMemory() : SynthMemory(1) {}
  explicit SynthMemory(std::size_t per_class);

  std::size_t per_class() const { return per_class_; }
  /// Overwrites the slot of every class present in `exemplars`; other classes are untouched.
  void replace(const std::vector<SyntheticExemplar>& exemplars);

  bool empty() const { return slots_.empty(); }
  bool contains(int class_id) const { return slots_.contains(class_id); }
  std::size_t size() const;
  std::vector<int> classes() const;
  const std::vector<SyntheticExemplar>& at(int class_id) const;
  /// Every entry, ordered by class id then slot.
  std::vector<SyntheticExemplar> entries() const;

  bool operator==(const SynthMemory&) const = default;

 private:
  std::size_t per_class_;
  std::map<int, std::vector<SyntheticExemplar>> slots_;
};

/// One stored real prototype per class (M_p).
class ProtoMemory {
 public:
  void replace(const std::vector<Prototype>& prototypes);

  bool empty() const { return protos_.empty(); }
  bool contains(int class_id) const { return protos_.contains(class_id); }
  std::size_t size() const { return protos_.size(); }
  std::size_t dim() const { return dim_; }
  std::vector<int> classes() const;
  const std::vector<double>& at(int class_id) const;

  bool operator==(const ProtoMemory&) const = default;

 private:
  std::size_t dim_ = 0;
  std::map<int, std::vector<double>> protos_;
};

struct MemoryPool {
  RealMemory real;
  SynthMemory synth;
  ProtoMemory protos;
  /// Embedding perturbation variance estimated at the last synthesis.
  double perturbation_variance = 0.0;

  bool operator==(const MemoryPool&) const = default;
};

struct MemoryFootprint {
  std::size_t real_items = 0;
  std::size_t real_values = 0;
  std::size_t synth_entries = 0;
  /// Decoded inputs only: d_in values per entry.
  std::size_t synth_values = 0;
  std::size_t proto_entries = 0;
  std::size_t proto_values = 0;
  std::size_t total_values = 0;
  std::size_t total_bytes = 0;
  /// Real items divided by the number of distinct classes they cover.
  double real_per_class = 0.0;
  std::size_t synth_per_class = 0;
};

MemoryFootprint memory_footprint(const MemoryPool& pool);
nlohmann::json footprint_to_json(const MemoryFootprint& f);

inline constexpr int kMemorySnapshotVersion = 1;

nlohmann::json memory_to_json(const MemoryPool& pool);
MemoryPool memory_from_json(const nlohmann::json& j);

}  // namespace protocore
