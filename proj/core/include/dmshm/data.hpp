#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace dmshm {

using Vector = std::vector<double>;

/// One regression pair: features x in R^k, target y in R^m.
struct Sample {
  Vector x;
  Vector y;

  bool operator==(const Sample&) const = default;
};

/// The batch of samples that arrives in one period (1-based index).
struct PeriodDataset {
  std::size_t index = 1;
  std::vector<Sample> samples;

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }
  std::size_t input_dim() const { return samples.empty() ? 0 : samples.front().x.size(); }
  std::size_t target_dim() const { return samples.empty() ? 0 : samples.front().y.size(); }

  bool operator==(const PeriodDataset&) const = default;
};

using Stream = std::vector<PeriodDataset>;

/// Throws std::invalid_argument unless every sample is finite and shares
/// the dimensions of the first one.
void validate_dataset(const PeriodDataset& dataset);

/// Per-column standardization. Fit once, reused for every later period.
class FeatureScaler {
 public:
  static constexpr double kStddevFloor = 1e-8;

  FeatureScaler() = default;
  FeatureScaler(Vector means, Vector stddevs);

  const Vector& means() const noexcept { return means_; }
  const Vector& stddevs() const noexcept { return stddevs_; }
  std::size_t dim() const noexcept { return means_.size(); }

  Vector apply(std::span<const double> v) const;
  Vector invert(std::span<const double> v) const;

 private:
  Vector means_;
  Vector stddevs_;
};

// Which half of each sample a scaler acts on.
enum class ScaleTarget { kFeatures, kTargets };

/// Population mean/stddev per column over all samples of `datasets`.
FeatureScaler fit_scaler(std::span<const PeriodDataset> datasets,
                         ScaleTarget which = ScaleTarget::kFeatures);
PeriodDataset apply_scaler(const FeatureScaler& scaler, const PeriodDataset& dataset,
                           ScaleTarget which = ScaleTarget::kFeatures);
PeriodDataset invert_scaler(const FeatureScaler& scaler, const PeriodDataset& dataset,
                            ScaleTarget which = ScaleTarget::kFeatures);

// ---------------------------------------------------------------------------
// CSV ingestion

/// Reads a header-first CSV and cuts its rows into periods of
/// `period_length` rows (the last one may be shorter). A column named
/// `timestamp` is skipped; every other non-target column is a feature.
/// Throws DataError on any malformed input.
Stream load_csv_stream(const std::filesystem::path& path, std::size_t period_length,
                       const std::vector<std::string>& target_columns);

/// Reads the named columns of a header-first CSV as a multichannel series,
/// one row per time step (input for make_windows).
std::vector<Vector> load_csv_series(const std::filesystem::path& path,
                                    const std::vector<std::string>& columns);

/// Writes `stream` in the layout load_csv_stream reads back: a `timestamp`
/// column (running row number), features x0..x{k-1}, then targets
/// (`y` when m == 1, otherwise y0..y{m-1}). Values use 17 significant digits.
void write_csv_stream(const std::filesystem::path& path, const Stream& stream);

/// Target column names produced by write_csv_stream for an m-dimensional target.
std::vector<std::string> default_target_columns(std::size_t target_dim);

// ---------------------------------------------------------------------------
// Synthetic drifting stream

/// From `period` onwards, x ~ N(mean_offset, scale^2 I) and the linear
/// target map (W, c) is redrawn.
struct ShiftEvent {
  std::size_t period = 1;
  Vector mean_offset;
  double scale = 1.0;
};

struct StreamConfig {
  std::size_t periods = 8;
  std::size_t samples_per_period = 200;
  std::size_t input_dim = 4;
  std::size_t target_dim = 1;
  std::vector<ShiftEvent> shift_schedule;
  double noise_std = 0.1;
  std::uint64_t seed = 0;
};

void validate_stream_config(const StreamConfig& config);

/// Deterministic function of `config`: x drawn around the active shift's
/// mean and scale, y = W x + c + N(0, noise_std^2).
Stream generate_synthetic_stream(const StreamConfig& config);

/// Named stream configurations. Throws std::out_of_range for unknown names.
StreamConfig stream_preset(const std::string& name, std::uint64_t seed);
std::vector<std::string> stream_preset_names();

// ---------------------------------------------------------------------------
// Lag windows

/// `series[t]` is one multichannel observation; channel `target_channel`
/// is forecast. Sample i: x = series[i, i+window) flattened row-major,
/// y = target channel over [i+window, i+window+horizon).
PeriodDataset make_windows(std::span<const Vector> series, std::size_t window,
                           std::size_t horizon, std::size_t target_channel = 0);

}  // namespace dmshm
