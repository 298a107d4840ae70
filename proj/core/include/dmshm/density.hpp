#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dmshm/data.hpp"

namespace dmshm {

/// Gaussian kernel density estimate with one scalar bandwidth shared by
/// all dimensions:
///
///   d(x) = 1 / (n b^k) * sum_i (2 pi)^(-k/2) exp(-|x - x_i|^2 / (2 b^2))
class DensityModel {
 public:
  DensityModel(std::vector<Vector> points, double bandwidth);

  const std::vector<Vector>& points() const noexcept { return points_; }
  double bandwidth() const noexcept { return bandwidth_; }
  std::size_t dim() const noexcept { return dim_; }

  /// Density at `x`; >= 0 and finite. Far queries underflow to 0.
  double operator()(std::span<const double> x) const;

 private:
  std::vector<Vector> points_;
  double bandwidth_;
  std::size_t dim_;
};

/// Smallest value the leave-one-out log density is allowed to take.
inline constexpr double kLogDensityFloor = -745.0;

/// Sum over i of log d_{-i}(x_i), each term floored at kLogDensityFloor.
double loo_log_likelihood(std::span<const Vector> points, double bandwidth);

/// 20 log-spaced values from 0.05 s to 5 s, where s is the mean
/// per-dimension stddev of `points` (1 when the points are all identical).
std::vector<double> default_bandwidth_grid(std::span<const Vector> points);

/// Grid value maximizing loo_log_likelihood; ties go to the larger bandwidth.
double fit_bandwidth_mlcv(std::span<const Vector> points, std::span<const double> grid);

/// Convenience: MLCV bandwidth over `grid` (default grid when empty).
DensityModel fit_density(std::vector<Vector> points, std::span<const double> grid = {});

/// Sigmoid of a density value; lies in [0.5, 1) for d >= 0.
double density_score(double density);

struct GmmFit {
  double means[2] = {0.0, 0.0};
  double variances[2] = {1.0, 1.0};
  double mixing[2] = {0.5, 0.5};
  std::vector<double> log_likelihood_trace;
  std::size_t iterations = 0;
  std::size_t reseeds = 0;
};

struct GmmOptions {
  std::size_t max_iterations = 200;
  double tolerance = 1e-8;
  double variance_floor = 1e-10;
  double min_component_mass = 1e-6;
  std::uint64_t seed = 0;
};

/// Two-component 1-D Gaussian mixture fitted by EM. Means start at the 25th
/// and 75th percentiles, both variances at the overall variance, mixing 1/2.
/// A component whose responsibility mass collapses below
/// `min_component_mass` is re-seeded at a random value.
GmmFit fit_gmm2(std::span<const double> values, const GmmOptions& options = {});

struct ShiftLevel {
  double gamma = 0.0;
  GmmFit gmm;
};

/// gamma = |mu_1 - mu_2| of the two-component fit over `scores`, clamped
/// to [0, 1]. Order of `scores` does not affect the result.
ShiftLevel shift_level_score(std::span<const double> scores, const GmmOptions& options = {});

}  // namespace dmshm
