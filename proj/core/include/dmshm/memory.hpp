#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "dmshm/data.hpp"

namespace dmshm {

/// A replayed sample plus the representation z = h(x) recorded when it
/// was (re)selected.
struct MemoryEntry {
  Vector x;
  Vector z;
  Vector y;

  bool operator==(const MemoryEntry&) const = default;
};

/// Fixed-budget replay store. `cumulative` is the number of samples seen
/// in all periods folded in so far.
struct MemorySet {
  std::vector<MemoryEntry> entries;
  std::size_t budget = 0;
  std::size_t cumulative = 0;
  std::size_t period = 0;  // last period folded in; 0 for a fresh set

  std::size_t size() const noexcept { return entries.size(); }
  bool empty() const noexcept { return entries.empty(); }

  bool operator==(const MemorySet&) const = default;
};

/// Selection weights over memory entries followed by current samples.
struct WeightSet {
  static constexpr double kFloor = 1e-12;
  std::vector<double> weights;
};

using ScoreFn = std::function<double(std::span<const double>)>;
using ReprFn = std::function<Vector(std::span<const double>)>;

/// Memory entry i:  (1 - gamma) q(x_i) + gamma * A / (A + N)
/// Current sample:  (1 - gamma) q(x)   + gamma * M / (A + N)
/// with A = memory.cumulative, N = dataset.size(), M = memory.budget.
WeightSet sample_weight(const MemorySet& memory, const PeriodDataset& dataset, const ScoreFn& q,
                        double gamma);

/// Same, with the scores already evaluated (`scores` aligned with the
/// concatenation memory ++ dataset).
WeightSet sample_weight(const MemorySet& memory, const PeriodDataset& dataset,
                        std::span<const double> scores, double gamma);

/// Inclusion probabilities proportional to `weights`, capped at 1, that
/// sum to min(count, n).
std::vector<double> inclusion_probabilities(std::span<const double> weights, std::size_t count);

/// Draws `count` distinct indices so that index i is included with
/// probability inclusion_probabilities(weights, count)[i] (randomized
/// systematic sampling). Returns every index when the pool is no larger
/// than `count`. Output is sorted ascending.
std::vector<std::size_t> weighted_sample_without_replacement(std::span<const double> weights,
                                                             std::size_t count,
                                                             std::uint64_t seed);

struct SelectionOptions {
  /// Pins gamma instead of estimating it; 1 gives pure biased-coefficient
  /// (reservoir) selection and skips density estimation entirely.
  std::optional<double> fixed_gamma;
  /// Bandwidth candidates for the density model; empty uses the default grid.
  std::vector<double> bandwidth_grid;
};

struct MemoryUpdate {
  MemorySet memory;
  double gamma = 1.0;
  double bandwidth = 0.0;  // 0 when no density model was fitted
  std::vector<double> scores;
  WeightSet weights;
};

/// One round of density-based memory selection: score memory ++ dataset
/// with the density model of the current memory inputs, estimate the shift
/// level, weight, draw `budget` entries and refresh every selected z with
/// `repr`. The first update (empty memory, nothing seen) draws uniformly.
MemoryUpdate update_memory(const MemorySet& memory, const PeriodDataset& dataset,
                           const ReprFn& repr, std::uint64_t seed,
                           const SelectionOptions& options = {});

}  // namespace dmshm
