#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dmshm/data.hpp"
#include "dmshm/memory.hpp"
#include "dmshm/model.hpp"

namespace dmshm {

enum class MethodKind { kDmshm, kDmshmNoDms, kDmshmNoHint, kFinetune };

std::string method_name(MethodKind kind);
/// Inverse of method_name; std::nullopt for unknown names.
std::optional<MethodKind> parse_method(const std::string& name);
std::vector<std::string> method_names();

/// A method variant. Finetune keeps no memory and trains on the current
/// loss alone; dmshm_no_dms selects memory with gamma pinned to 1;
/// dmshm_no_hint drops the hint term (xi = 0).
struct MethodSpec {
  MethodKind kind = MethodKind::kDmshm;
  std::optional<LossWeights> loss_weights;
  std::optional<std::size_t> budget;
};

LossWeights effective_loss_weights(const MethodSpec& method, const LossWeights& base);
std::size_t effective_budget(const MethodSpec& method, std::size_t base);
SelectionOptions selection_options(const MethodSpec& method);

struct PeriodRecord {
  std::size_t period = 0;
  double historical_mse = 0.0;
  double future_mse = 0.0;
  double gamma = 0.0;
  double bandwidth = 0.0;
  double train_loss_final = 0.0;
  std::size_t memory_size = 0;
};

struct ProjectionRow {
  std::size_t period = 0;
  double x1 = 0.0;
  double x2 = 0.0;
};

struct MetricsReport {
  MethodSpec method;
  std::uint64_t seed = 0;
  std::vector<PeriodRecord> records;
  double fe = 0.0;  // mean historical MSE over all periods
  double pe = 0.0;  // future MSE after the final period
  std::vector<ProjectionRow> projection;
};

double forgetting_error(std::span<const PeriodRecord> records);
double prediction_error(std::span<const PeriodRecord> records);

struct EvalSets {
  PeriodDataset historical;
  PeriodDataset future;
};

/// historical = period 1; future = ceil(fraction * total) samples drawn
/// uniformly without replacement from every period.
EvalSets build_eval_sets(const Stream& stream, double future_fraction, std::uint64_t seed);

/// Mean over samples of the mean-over-dimensions squared error.
double mse(const RegressorParams& params, const PeriodDataset& dataset);

/// As above for a model trained on scaled data: inputs go through
/// `features`, predictions are mapped back through `targets` and compared
/// with the raw targets of `dataset`.
double mse(const RegressorParams& params, const PeriodDataset& dataset,
           const FeatureScaler& features, const FeatureScaler& targets);

struct PcaProjection {
  std::array<Vector, 2> components;
  std::array<double, 2> eigenvalues{};
  std::vector<std::array<double, 2>> coords;
};

/// Top-2 principal components by power iteration with deflation; each
/// component's largest-magnitude loading is made positive.
PcaProjection pca_project_2d(std::span<const Vector> points);

struct ExperimentOptions {
  TrainConfig train;
  std::size_t budget = 50;
  double future_fraction = 0.1;
  std::uint64_t seed = 0;
  bool projection = false;
};

/// Continual-learning loop: per period train, evaluate, then update memory.
/// Features and targets are standardized with scalers fit on period 1.
/// TrainingDivergence is rethrown with the period set.
MetricsReport run_experiment(const Stream& stream, const MethodSpec& method,
                             const ExperimentOptions& options);

/// Writes metrics.json, periods.csv and (when present) projection.csv.
void write_run_outputs(const std::filesystem::path& dir, const MetricsReport& report);

std::string metrics_json(const MetricsReport& report);
std::string periods_csv(const MetricsReport& report);

}  // namespace dmshm
