#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace protocore {

inline constexpr double kGradcheckTolerance = 1e-4;

struct GradcheckEntry {
  std::string name;
  double max_error = 0.0;
  std::size_t instances = 0;
  bool passed() const { return max_error <= kGradcheckTolerance; }
};

/// One randomized instance of a check; returns its max relative error.
using GradcheckCase = std::function<double(std::uint64_t instance_seed)>;

/// Names of the built-in cases, in report order.
std::vector<std::string> gradcheck_case_names();

/// Runs every built-in loss check on `instances` random small networks
/// (at most two hidden layers of width <= 32), then any extra cases.
std::vector<GradcheckEntry> run_gradcheck_suite(std::size_t instances, std::uint64_t seed,
                                                const std::vector<std::pair<std::string, GradcheckCase>>& extra = {});

}  // namespace protocore
