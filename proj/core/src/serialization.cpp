#include "dmshm/serialization.hpp"

#include <fstream>
#include <stdexcept>

#include "dmshm/errors.hpp"

namespace dmshm {

namespace {

constexpr int kVersion = 1;

void copy_into(const nlohmann::json& arr, std::span<double> dst, const char* name) {
  if (!arr.is_array() || arr.size() != dst.size())
    throw DataError(std::string("checkpoint field '") + name + "' has the wrong length");
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = arr[i].get<double>();
}

void expect_format(const nlohmann::json& j, const char* format) {
  if (!j.is_object() || j.value("format", "") != format)
    throw DataError(std::string("document is not a ") + format);
  if (j.value("version", 0) != kVersion)
    throw DataError(std::string("unsupported ") + format + " version");
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

}  // namespace

nlohmann::ordered_json checkpoint_to_json(const RegressorParams& params) {
  const auto& s = params.shape();
  nlohmann::ordered_json j;
  j["format"] = "dmshm-checkpoint";
  j["version"] = kVersion;
  j["shape"] = {{"input", s.input}, {"hidden", s.hidden}, {"output", s.output}};
  auto arr = [](std::span<const double> v) { return std::vector<double>(v.begin(), v.end()); };
  j["hidden_weight"] = arr(params.hidden_weight());
  j["hidden_bias"] = arr(params.hidden_bias());
  j["head_weight"] = arr(params.head_weight());
  j["head_bias"] = arr(params.head_bias());
  return j;
}

RegressorParams checkpoint_from_json(const nlohmann::json& j) {
  expect_format(j, "dmshm-checkpoint");
  try {
    const auto& s = j.at("shape");
    RegressorParams p(Shape{s.at("input").get<std::size_t>(), s.at("hidden").get<std::size_t>(),
                            s.at("output").get<std::size_t>()});
    copy_into(j.at("hidden_weight"), p.hidden_weight(), "hidden_weight");
    copy_into(j.at("hidden_bias"), p.hidden_bias(), "hidden_bias");
    copy_into(j.at("head_weight"), p.head_weight(), "head_weight");
    copy_into(j.at("head_bias"), p.head_bias(), "head_bias");
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const RegressorParams& params) {
  write_json(path, checkpoint_to_json(params));
}

RegressorParams load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_json(read_json(path));
}

nlohmann::ordered_json memory_to_json(const MemorySet& memory) {
  nlohmann::ordered_json j;
  j["format"] = "dmshm-memory";
  j["version"] = kVersion;
  j["period"] = memory.period;
  j["budget"] = memory.budget;
  j["cumulative"] = memory.cumulative;
  auto entries = nlohmann::ordered_json::array();
  for (const auto& e : memory.entries)
    entries.push_back({{"x", e.x}, {"z", e.z}, {"y", e.y}});
  j["entries"] = std::move(entries);
  return j;
}

MemorySet memory_from_json(const nlohmann::json& j) {
  expect_format(j, "dmshm-memory");
  try {
    MemorySet m;
    m.period = j.at("period").get<std::size_t>();
    m.budget = j.at("budget").get<std::size_t>();
    m.cumulative = j.at("cumulative").get<std::size_t>();
    for (const auto& e : j.at("entries"))
      m.entries.push_back({e.at("x").get<Vector>(), e.at("z").get<Vector>(), e.at("y").get<Vector>()});
    if (m.entries.size() > m.budget) throw DataError("memory snapshot exceeds its budget");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed memory snapshot: ") + e.what());
  }
}

void save_memory(const std::filesystem::path& path, const MemorySet& memory) {
  write_json(path, memory_to_json(memory));
}

MemorySet load_memory(const std::filesystem::path& path) { return memory_from_json(read_json(path)); }

}  // namespace dmshm
