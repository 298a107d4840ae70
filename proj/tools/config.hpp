#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "dmshm/data.hpp"
#include "dmshm/harness.hpp"
#include "dmshm/model.hpp"

namespace dmshm::cli {

struct CsvSource {
  std::filesystem::path path;
  std::size_t period_length = 0;
  std::vector<std::string> target_columns{"y"};
};

struct SyntheticSource {
  std::string preset = "drift8";  // empty: fully spelled-out stream
  StreamConfig stream = stream_preset("drift8", 0);
  // When unset the stream is regenerated from each run's seed.
  std::optional<std::uint64_t> seed;
};

/// Experiment description read from a strict JSON document. Every key is
/// optional; unknown keys are rejected.
///
///   {
///     "csv":       {"path": str, "period_length": int, "target_columns": [str]},
///     "synthetic": {"preset": "drift8", "seed": int, "periods": int,
///                   "samples_per_period": int, "input_dim": int,
///                   "target_dim": int, "noise_std": num,
///                   "shifts": [{"period": int, "mean_offset": [num], "scale": num}]},
///     "methods": ["dmshm", "dmshm_no_dms", "dmshm_no_hint", "finetune"],
///     "memory_budget": 50,
///     "loss_weights": {"alpha": 1, "beta": 1, "xi": 1, "delta": 1},
///     "train": {"learning_rate": 0.001, "epochs": 100, "batch_size": 64,
///               "optimizer": "adam" | "sgd", "hidden_dim": 32},
///     "future_fraction": 0.1,
///     "seeds": [0],
///     "output_dir": "runs",
///     "jobs": 1,
///     "projection": false
///   }
///
/// At most one of "csv" / "synthetic"; the default source is the drift8
/// preset. A relative csv path is resolved against the config file's folder.
struct ExperimentConfig {
  std::variant<SyntheticSource, CsvSource> data;
  std::vector<MethodKind> methods{MethodKind::kDmshm, MethodKind::kDmshmNoDms,
                                  MethodKind::kDmshmNoHint, MethodKind::kFinetune};
  std::size_t memory_budget = 50;
  TrainConfig train;  // loss_weights lives here
  double future_fraction = 0.1;
  std::vector<std::uint64_t> seeds{0};
  std::filesystem::path output_dir = "runs";
  std::size_t jobs = 1;
  bool projection = false;
};

/// Throws ConfigError naming the offending key.
ExperimentConfig parse_config(const nlohmann::json& doc,
                              const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Fully resolved form; parse_config(to_json(c)) reproduces `c`.
nlohmann::ordered_json to_json(const ExperimentConfig& config);

}  // namespace dmshm::cli
