#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace protocore {

using Rng = std::mt19937_64;

/// Splits a root seed into an independent stream per named consumer.
std::uint64_t derive_seed(std::uint64_t root, std::string_view stream, std::uint64_t index = 0);

inline Rng make_rng(std::uint64_t root, std::string_view stream, std::uint64_t index = 0) {
  return Rng(derive_seed(root, stream, index));
}

}  // namespace protocore
