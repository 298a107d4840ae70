#include "dmshm/memory.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "dmshm/density.hpp"
#include "dmshm/random.hpp"

namespace dmshm {

namespace {

void check_gamma(double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0))
    throw std::invalid_argument("gamma must lie in [0, 1]");
}

}  // namespace

WeightSet sample_weight(const MemorySet& memory, const PeriodDataset& dataset,
                        std::span<const double> scores, double gamma) {
  check_gamma(gamma);
  if (dataset.empty()) throw std::invalid_argument("sample_weight: dataset is empty");
  const auto pool = memory.size() + dataset.size();
  if (scores.size() != pool) throw std::invalid_argument("sample_weight: score count mismatch");

  const auto total = static_cast<double>(memory.cumulative + dataset.size());
  const double memory_bias = static_cast<double>(memory.cumulative) / total;
  const double current_bias = static_cast<double>(memory.budget) / total;

  WeightSet out;
  out.weights.resize(pool);
  for (std::size_t i = 0; i < pool; ++i) {
    if (!std::isfinite(scores[i])) throw std::invalid_argument("sample_weight: non-finite score");
    const double bias = i < memory.size() ? memory_bias : current_bias;
    out.weights[i] = std::max((1.0 - gamma) * scores[i] + gamma * bias, WeightSet::kFloor);
  }
  return out;
}

WeightSet sample_weight(const MemorySet& memory, const PeriodDataset& dataset, const ScoreFn& q,
                        double gamma) {
  check_gamma(gamma);
  std::vector<double> scores;
  scores.reserve(memory.size() + dataset.size());
  for (const auto& e : memory.entries) scores.push_back(q(e.x));
  for (const auto& s : dataset.samples) scores.push_back(q(s.x));
  return sample_weight(memory, dataset, scores, gamma);
}

std::vector<double> inclusion_probabilities(std::span<const double> weights, std::size_t count) {
  const auto n = weights.size();
  if (n == 0) throw std::invalid_argument("inclusion_probabilities: no weights");
  for (double w : weights)
    if (!(w > 0.0) || !std::isfinite(w))
      throw std::invalid_argument("inclusion_probabilities: weights must be positive and finite");
  if (count >= n) return std::vector<double>(n, 1.0);

  std::vector<double> pi(n, 0.0);
  std::vector<bool> capped(n, false);
  std::size_t n_capped = 0;
  for (;;) {
    double free_weight = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (!capped[i]) free_weight += weights[i];
    const double c = static_cast<double>(count - n_capped) / free_weight;
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (capped[i]) continue;
      if (c * weights[i] >= 1.0) {
        capped[i] = true;
        ++n_capped;
        changed = true;
      }
    }
    if (!changed) {
      for (std::size_t i = 0; i < n; ++i) pi[i] = capped[i] ? 1.0 : c * weights[i];
      return pi;
    }
  }
}

std::vector<std::size_t> weighted_sample_without_replacement(std::span<const double> weights,
                                                             std::size_t count,
                                                             std::uint64_t seed) {
  if (count == 0) throw std::invalid_argument("weighted sampling: count must be >= 1");
  const auto n = weights.size();
  if (n == 0) throw std::invalid_argument("weighted sampling: no weights");

  std::vector<std::size_t> chosen;
  if (n <= count) {
    chosen.resize(n);
    std::iota(chosen.begin(), chosen.end(), std::size_t{0});
    return chosen;
  }

  const auto pi = inclusion_probabilities(weights, count);

  Rng rng(seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  const double start = std::uniform_real_distribution<double>(0.0, 1.0)(rng);

  // Points start, start+1, ..., start+count-1 on the stacked intervals of
  // lengths pi[order[0]], pi[order[1]], ...; the last boundary is pinned at
  // `count` so rounding cannot drop a point.
  std::vector<bool> taken(n, false);
  chosen.reserve(count);
  double cum = 0.0;
  double next = start;
  for (std::size_t pos = 0; pos < n && chosen.size() < count; ++pos) {
    const auto idx = order[pos];
    const double upper = pos + 1 == n ? static_cast<double>(count) : cum + pi[idx];
    if (next < upper) {
      chosen.push_back(idx);
      taken[idx] = true;
      next += 1.0;
    }
    cum = upper;
  }
  // Only reachable through pathological rounding.
  while (chosen.size() < count) {
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i)
      if (!taken[i] && (best == n || pi[i] > pi[best])) best = i;
    chosen.push_back(best);
    taken[best] = true;
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

MemoryUpdate update_memory(const MemorySet& memory, const PeriodDataset& dataset,
                           const ReprFn& repr, std::uint64_t seed,
                           const SelectionOptions& options) {
  if (dataset.empty()) throw std::invalid_argument("update_memory: dataset is empty");
  if (!repr) throw std::invalid_argument("update_memory: representation function is required");
  if (options.fixed_gamma) check_gamma(*options.fixed_gamma);

  MemoryUpdate out;
  out.memory.budget = memory.budget;
  out.memory.cumulative = memory.cumulative + dataset.size();
  out.memory.period = dataset.index;
  if (memory.budget == 0) return out;

  const auto pool = memory.size() + dataset.size();
  const bool first = memory.empty() && memory.cumulative == 0;

  if (first) {
    // SampleWeight(empty, M, S, N, A = 0, q = 0.5, gamma = 1)
    out.gamma = 1.0;
    out.scores.assign(pool, 0.5);
  } else if (options.fixed_gamma && *options.fixed_gamma == 1.0) {
    out.gamma = 1.0;
    out.scores.assign(pool, 0.5);
  } else if (memory.size() < 2) {
    // Too few memory points to cross-validate a bandwidth.
    out.gamma = 1.0;
    out.scores.assign(pool, 0.5);
  } else {
    std::vector<Vector> points;
    points.reserve(memory.size());
    for (const auto& e : memory.entries) points.push_back(e.x);
    const auto kde = fit_density(std::move(points), options.bandwidth_grid);
    out.bandwidth = kde.bandwidth();

    out.scores.reserve(pool);
    for (const auto& e : memory.entries) out.scores.push_back(density_score(kde(e.x)));
    for (const auto& s : dataset.samples) out.scores.push_back(density_score(kde(s.x)));

    if (options.fixed_gamma) {
      out.gamma = *options.fixed_gamma;
    } else {
      GmmOptions gmm;
      gmm.seed = derive_seed(seed, 0x47'4d'4d);
      out.gamma = shift_level_score(out.scores, gmm).gamma;
    }
  }

  out.weights = sample_weight(memory, dataset, out.scores, out.gamma);
  const auto picked = weighted_sample_without_replacement(out.weights.weights, memory.budget, seed);

  out.memory.entries.reserve(picked.size());
  for (auto i : picked) {
    MemoryEntry e;
    if (i < memory.size()) {
      e.x = memory.entries[i].x;
      e.y = memory.entries[i].y;
    } else {
      const auto& s = dataset.samples[i - memory.size()];
      e.x = s.x;
      e.y = s.y;
    }
    e.z = repr(e.x);
    out.memory.entries.push_back(std::move(e));
  }
  return out;
}

}  // namespace dmshm
