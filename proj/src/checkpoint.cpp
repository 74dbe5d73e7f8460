#include "protocore/checkpoint.hpp"

#include <fstream>

#include "protocore/errors.hpp"

namespace protocore {

nlohmann::json tensor_to_json(const Tensor& t) {
  return nlohmann::json{{"shape", t.shape}, {"values", t.values}};
}

Tensor tensor_from_json(const nlohmann::json& j) {
  try {
    return Tensor(j.at("shape").get<Shape>(), j.at("values").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed tensor: ") + e.what());
  }
}

nlohmann::json parameters_to_json(const std::vector<NamedTensor>& params) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& p : params) {
    auto entry = tensor_to_json(p.tensor);
    entry["name"] = p.name;
    list.push_back(std::move(entry));
  }
  return nlohmann::json{{"format", "protocore-parameters"}, {"version", kCheckpointVersion}, {"parameters", list}};
}

std::vector<NamedTensor> parameters_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "protocore-parameters") throw ValidationError("not a parameter checkpoint");
  if (j.value("version", 0) != kCheckpointVersion) {
    throw ValidationError("unsupported checkpoint version " + j.value("version", nlohmann::json()).dump());
  }
  std::vector<NamedTensor> out;
  for (const auto& entry : j.at("parameters")) {
    out.push_back({entry.at("name").get<std::string>(), tensor_from_json(entry)});
  }
  return out;
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

}  // namespace protocore
