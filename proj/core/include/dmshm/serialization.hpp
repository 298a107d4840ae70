#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "dmshm/memory.hpp"
#include "dmshm/model.hpp"

namespace dmshm {

// Model checkpoint:
//   {"format": "dmshm-checkpoint", "version": 1,
//    "shape": {"input": k, "hidden": r, "output": m},
//    "hidden_weight": [...], "hidden_bias": [...],
//    "head_weight": [...], "head_bias": [...]}
// Doubles are written in shortest round-trip form, so load(save(p)) == p
// bit for bit.
nlohmann::ordered_json checkpoint_to_json(const RegressorParams& params);
RegressorParams checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const std::filesystem::path& path, const RegressorParams& params);
RegressorParams load_checkpoint(const std::filesystem::path& path);

// Memory snapshot:
//   {"format": "dmshm-memory", "version": 1,
//    "period": n, "budget": M, "cumulative": A,
//    "entries": [{"x": [...], "z": [...], "y": [...]}, ...]}
nlohmann::ordered_json memory_to_json(const MemorySet& memory);
MemorySet memory_from_json(const nlohmann::json& j);

void save_memory(const std::filesystem::path& path, const MemorySet& memory);
MemorySet load_memory(const std::filesystem::path& path);

}  // namespace dmshm
