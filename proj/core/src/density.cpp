#include "dmshm/density.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

#include "dmshm/random.hpp"

namespace dmshm {

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double e = a[j] - b[j];
    acc += e * e;
  }
  return acc;
}

// log of 1 / (n b^k (2 pi)^(k/2))
double log_normalizer(std::size_t n, std::size_t k, double bandwidth) {
  const auto kd = static_cast<double>(k);
  return -std::log(static_cast<double>(n)) - kd * std::log(bandwidth) -
         0.5 * kd * std::log(2.0 * std::numbers::pi);
}

std::size_t common_dim(std::span<const Vector> points) {
  if (points.empty()) throw std::invalid_argument("density: no points");
  const auto k = points.front().size();
  if (k == 0) throw std::invalid_argument("density: points must have dimension >= 1");
  for (const auto& p : points) {
    if (p.size() != k) throw std::invalid_argument("density: points differ in dimension");
    for (double v : p)
      if (!std::isfinite(v)) throw std::invalid_argument("density: non-finite point");
  }
  return k;
}

double percentile_sorted(std::span<const double> sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

DensityModel::DensityModel(std::vector<Vector> points, double bandwidth)
    : points_(std::move(points)), bandwidth_(bandwidth), dim_(common_dim(points_)) {
  if (!(bandwidth_ > 0.0) || !std::isfinite(bandwidth_))
    throw std::invalid_argument("density: bandwidth must be positive and finite");
}

double DensityModel::operator()(std::span<const double> x) const {
  if (x.size() != dim_) throw std::invalid_argument("density: query dimension mismatch");
  const double inv_two_b2 = 1.0 / (2.0 * bandwidth_ * bandwidth_);
  double sum = 0.0;
  for (const auto& p : points_) sum += std::exp(-squared_distance(x, p) * inv_two_b2);
  if (sum == 0.0) return 0.0;
  const double d = sum * std::exp(log_normalizer(points_.size(), dim_, bandwidth_));
  return std::isfinite(d) ? d : std::numeric_limits<double>::max();
}

double loo_log_likelihood(std::span<const Vector> points, double bandwidth) {
  const auto k = common_dim(points);
  const auto n = points.size();
  if (n < 2) throw std::invalid_argument("MLCV needs at least 2 points");
  if (!(bandwidth > 0.0)) throw std::invalid_argument("bandwidth must be positive");

  const double inv_two_b2 = 1.0 / (2.0 * bandwidth * bandwidth);
  const double log_norm = log_normalizer(n - 1, k, bandwidth);
  double total = 0.0;
  std::vector<double> exponents(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t e = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) exponents[e++] = -squared_distance(points[i], points[j]) * inv_two_b2;
    const double top = *std::max_element(exponents.begin(), exponents.end());
    double acc = 0.0;
    for (double v : exponents) acc += std::exp(v - top);
    total += std::max(log_norm + top + std::log(acc), kLogDensityFloor);
  }
  return total;
}

std::vector<double> default_bandwidth_grid(std::span<const Vector> points) {
  const auto k = common_dim(points);
  const auto n = static_cast<double>(points.size());
  double mean_sd = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    double mean = 0.0;
    for (const auto& p : points) mean += p[j];
    mean /= n;
    double var = 0.0;
    for (const auto& p : points) var += (p[j] - mean) * (p[j] - mean);
    mean_sd += std::sqrt(var / n);
  }
  mean_sd /= static_cast<double>(k);
  if (!(mean_sd > 0.0)) mean_sd = 1.0;

  constexpr std::size_t kCount = 20;
  const double lo = std::log(0.05 * mean_sd);
  const double hi = std::log(5.0 * mean_sd);
  std::vector<double> grid(kCount);
  for (std::size_t i = 0; i < kCount; ++i)
    grid[i] = std::exp(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(kCount - 1));
  return grid;
}

double fit_bandwidth_mlcv(std::span<const Vector> points, std::span<const double> grid) {
  if (points.size() < 2) throw std::invalid_argument("MLCV needs at least 2 points");
  if (grid.empty()) throw std::invalid_argument("MLCV bandwidth grid is empty");
  for (double b : grid)
    if (!(b > 0.0) || !std::isfinite(b))
      throw std::invalid_argument("MLCV grid entries must be positive");

  double best_b = grid.front();
  double best_score = -std::numeric_limits<double>::infinity();
  for (double b : grid) {
    const double score = loo_log_likelihood(points, b);
    if (score > best_score || (score == best_score && b > best_b)) {
      best_score = score;
      best_b = b;
    }
  }
  return best_b;
}

DensityModel fit_density(std::vector<Vector> points, std::span<const double> grid) {
  double b = 0.0;
  if (grid.empty()) {
    const auto defaults = default_bandwidth_grid(points);
    b = fit_bandwidth_mlcv(points, defaults);
  } else {
    b = fit_bandwidth_mlcv(points, grid);
  }
  return DensityModel(std::move(points), b);
}

double density_score(double density) {
  if (!std::isfinite(density) || density < 0.0)
    throw std::invalid_argument("density_score: density must be finite and >= 0");
  return 1.0 / (1.0 + std::exp(-density));
}

// ---------------------------------------------------------------------------

GmmFit fit_gmm2(std::span<const double> values, const GmmOptions& options) {
  const auto n = values.size();
  if (n < 2) throw std::invalid_argument("GMM fit needs at least 2 values");
  for (double v : values)
    if (!std::isfinite(v)) throw std::invalid_argument("GMM fit: non-finite value");

  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const auto nd = static_cast<double>(n);

  double mean = 0.0;
  for (double v : sorted) mean += v;
  mean /= nd;
  double var = 0.0;
  for (double v : sorted) var += (v - mean) * (v - mean);
  const double init_var = std::max(var / nd, options.variance_floor);

  GmmFit fit;
  if (sorted.front() == sorted.back()) {
    // One point mass: both components sit on it.
    fit.means[0] = fit.means[1] = sorted.front();
    fit.variances[0] = fit.variances[1] = options.variance_floor;
    fit.log_likelihood_trace.push_back(
        -0.5 * nd * (std::log(2.0 * std::numbers::pi) + std::log(options.variance_floor)));
    return fit;
  }
  fit.means[0] = percentile_sorted(sorted, 0.25);
  fit.means[1] = percentile_sorted(sorted, 0.75);
  fit.variances[0] = fit.variances[1] = init_var;

  Rng rng(options.seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<double> resp(n);  // responsibility of component 0
  const double log_2pi = std::log(2.0 * std::numbers::pi);

  for (std::size_t iter = 0; iter < options.max_iterations; ++iter) {
    // E-step
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double lp[2];
      for (int c = 0; c < 2; ++c) {
        const double e = sorted[i] - fit.means[c];
        lp[c] = std::log(fit.mixing[c]) - 0.5 * (log_2pi + std::log(fit.variances[c])) -
                e * e / (2.0 * fit.variances[c]);
      }
      const double top = std::max(lp[0], lp[1]);
      const double lse = top + std::log(std::exp(lp[0] - top) + std::exp(lp[1] - top));
      resp[i] = std::exp(lp[0] - lse);
      ll += lse;
    }
    const bool converged =
        !fit.log_likelihood_trace.empty() && ll - fit.log_likelihood_trace.back() < options.tolerance;
    fit.log_likelihood_trace.push_back(ll);
    if (converged) break;

    // M-step
    double mass[2] = {0.0, 0.0};
    double sum[2] = {0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
      mass[0] += resp[i];
      mass[1] += 1.0 - resp[i];
      sum[0] += resp[i] * sorted[i];
      sum[1] += (1.0 - resp[i]) * sorted[i];
    }
    if (mass[0] < options.min_component_mass || mass[1] < options.min_component_mass) {
      const int dead = mass[0] < options.min_component_mass ? 0 : 1;
      fit.means[dead] = sorted[pick(rng)];
      fit.variances[0] = fit.variances[1] = init_var;
      fit.mixing[0] = fit.mixing[1] = 0.5;
      ++fit.reseeds;
      // Monotonicity only holds between re-seeds.
      fit.log_likelihood_trace.clear();
      ++fit.iterations;
      continue;
    }
    for (int c = 0; c < 2; ++c) fit.means[c] = sum[c] / mass[c];
    double sq[2] = {0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
      const double e0 = sorted[i] - fit.means[0];
      const double e1 = sorted[i] - fit.means[1];
      sq[0] += resp[i] * e0 * e0;
      sq[1] += (1.0 - resp[i]) * e1 * e1;
    }
    for (int c = 0; c < 2; ++c) fit.variances[c] = std::max(sq[c] / mass[c], options.variance_floor);
    fit.mixing[0] = mass[0] / nd;
    fit.mixing[1] = 1.0 - fit.mixing[0];
    ++fit.iterations;
  }
  return fit;
}

ShiftLevel shift_level_score(std::span<const double> scores, const GmmOptions& options) {
  if (scores.size() < 2) throw std::invalid_argument("shift_level_score needs at least 2 scores");
  ShiftLevel out;
  out.gmm = fit_gmm2(scores, options);
  out.gamma = std::clamp(std::abs(out.gmm.means[0] - out.gmm.means[1]), 0.0, 1.0);
  return out;
}

}  // namespace dmshm
