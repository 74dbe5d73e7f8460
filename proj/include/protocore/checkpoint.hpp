#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "protocore/tensor.hpp"

namespace protocore {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

inline constexpr int kCheckpointVersion = 1;

nlohmann::json tensor_to_json(const Tensor& t);
Tensor tensor_from_json(const nlohmann::json& j);

/// {"format": "protocore-parameters", "version": 1, "parameters": [{name, shape, values}]}
/// Doubles are written in shortest round-trip form, so load(save(x)) == x bit for bit.
nlohmann::json parameters_to_json(const std::vector<NamedTensor>& params);
std::vector<NamedTensor> parameters_from_json(const nlohmann::json& j);

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace protocore
