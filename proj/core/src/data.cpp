#include "dmshm/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "dmshm/errors.hpp"
#include "dmshm/random.hpp"

namespace dmshm {

namespace {

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double d) { return std::isfinite(d); });
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_row(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(trim(line.substr(start)));
      return cells;
    }
    cells.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
}

bool parse_double(std::string_view cell, double& out) {
  if (cell.empty()) return false;
  if (cell.front() == '+') cell.remove_prefix(1);
  const auto* end = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(cell.data(), end, out);
  return ec == std::errc{} && ptr == end && std::isfinite(out);
}

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

void validate_dataset(const PeriodDataset& dataset) {
  if (dataset.empty()) throw std::invalid_argument("period dataset is empty");
  const auto k = dataset.input_dim();
  const auto m = dataset.target_dim();
  if (k == 0 || m == 0) throw std::invalid_argument("samples need k >= 1 and m >= 1");
  for (const auto& s : dataset.samples) {
    if (s.x.size() != k || s.y.size() != m)
      throw std::invalid_argument("samples in a period must share dimensions");
    if (!all_finite(s.x) || !all_finite(s.y))
      throw std::invalid_argument("sample contains a non-finite value");
  }
}

// ---------------------------------------------------------------------------

FeatureScaler::FeatureScaler(Vector means, Vector stddevs)
    : means_(std::move(means)), stddevs_(std::move(stddevs)) {
  if (means_.size() != stddevs_.size())
    throw std::invalid_argument("scaler means/stddevs length mismatch");
  for (auto& s : stddevs_) s = std::max(s, kStddevFloor);
}

Vector FeatureScaler::apply(std::span<const double> v) const {
  if (v.size() != dim()) throw std::invalid_argument("scaler dimension mismatch");
  Vector out(v.size());
  for (std::size_t j = 0; j < v.size(); ++j) out[j] = (v[j] - means_[j]) / stddevs_[j];
  return out;
}

Vector FeatureScaler::invert(std::span<const double> v) const {
  if (v.size() != dim()) throw std::invalid_argument("scaler dimension mismatch");
  Vector out(v.size());
  for (std::size_t j = 0; j < v.size(); ++j) out[j] = v[j] * stddevs_[j] + means_[j];
  return out;
}

namespace {

const Vector& pick(const Sample& s, ScaleTarget which) {
  return which == ScaleTarget::kFeatures ? s.x : s.y;
}
Vector& pick(Sample& s, ScaleTarget which) {
  return which == ScaleTarget::kFeatures ? s.x : s.y;
}

}  // namespace

FeatureScaler fit_scaler(std::span<const PeriodDataset> datasets, ScaleTarget which) {
  std::size_t count = 0;
  std::size_t dim = 0;
  for (const auto& d : datasets) {
    for (const auto& s : d.samples) {
      const auto& v = pick(s, which);
      if (count == 0) dim = v.size();
      if (v.size() != dim) throw std::invalid_argument("fit_scaler: inconsistent dimensions");
      ++count;
    }
  }
  if (count == 0) throw std::invalid_argument("fit_scaler: no samples");

  Vector mean(dim, 0.0);
  for (const auto& d : datasets)
    for (const auto& s : d.samples)
      for (std::size_t j = 0; j < dim; ++j) mean[j] += pick(s, which)[j];
  for (auto& v : mean) v /= static_cast<double>(count);

  Vector var(dim, 0.0);
  for (const auto& d : datasets)
    for (const auto& s : d.samples)
      for (std::size_t j = 0; j < dim; ++j) {
        const double e = pick(s, which)[j] - mean[j];
        var[j] += e * e;
      }
  Vector stddev(dim);
  for (std::size_t j = 0; j < dim; ++j) stddev[j] = std::sqrt(var[j] / static_cast<double>(count));
  return FeatureScaler(std::move(mean), std::move(stddev));
}

PeriodDataset apply_scaler(const FeatureScaler& scaler, const PeriodDataset& dataset,
                           ScaleTarget which) {
  PeriodDataset out = dataset;
  for (auto& s : out.samples) pick(s, which) = scaler.apply(pick(s, which));
  return out;
}

PeriodDataset invert_scaler(const FeatureScaler& scaler, const PeriodDataset& dataset,
                            ScaleTarget which) {
  PeriodDataset out = dataset;
  for (auto& s : out.samples) pick(s, which) = scaler.invert(pick(s, which));
  return out;
}

// ---------------------------------------------------------------------------

namespace {

struct CsvHeader {
  std::vector<std::string> names;
  std::map<std::string, std::size_t> column_of;

  std::size_t require(const std::string& name, const char* role) const {
    const auto it = column_of.find(name);
    if (it == column_of.end())
      throw DataError(std::string(role) + " column '" + name + "' not found in CSV header");
    return it->second;
  }
};

// Reads the header, lets `choose` pick the columns to keep, then parses
// every data row into the chosen columns (in the chosen order).
std::vector<Vector> read_csv(const std::filesystem::path& path,
                             const std::function<std::vector<std::size_t>(const CsvHeader&)>& choose) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open CSV file '" + path.string() + "'");

  std::string header_line;
  if (!std::getline(in, header_line) || trim(header_line).empty())
    throw DataError("CSV file '" + path.string() + "' is empty");
  if (header_line.size() >= 3 && header_line.compare(0, 3, "\xEF\xBB\xBF") == 0)
    header_line.erase(0, 3);

  CsvHeader header;
  for (auto cell : split_row(header_line)) header.names.emplace_back(cell);
  for (std::size_t c = 0; c < header.names.size(); ++c) {
    if (header.names[c].empty())
      throw DataError("CSV header has an empty column name at position " + std::to_string(c + 1));
    if (!header.column_of.emplace(header.names[c], c).second)
      throw DataError("CSV header repeats column '" + header.names[c] + "'");
  }
  const auto columns = choose(header);

  std::vector<Vector> rows;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_row(line);
    const auto row_no = rows.size() + 1;
    if (cells.size() != header.names.size())
      throw DataError("row " + std::to_string(row_no) + " (line " + std::to_string(line_no) +
                      ") has " + std::to_string(cells.size()) + " cells, header has " +
                      std::to_string(header.names.size()));
    Vector row;
    row.reserve(columns.size());
    for (auto c : columns) {
      double v = 0.0;
      if (!parse_double(cells[c], v))
        throw DataError("non-numeric cell '" + std::string(cells[c]) + "' at row " +
                        std::to_string(row_no) + " (line " + std::to_string(line_no) +
                        "), column '" + header.names[c] + "'");
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError("CSV file '" + path.string() + "' has no data rows");
  return rows;
}

}  // namespace

Stream load_csv_stream(const std::filesystem::path& path, std::size_t period_length,
                       const std::vector<std::string>& target_columns) {
  if (period_length == 0) throw DataError("period_length must be >= 1");
  if (target_columns.empty()) throw DataError("at least one target column is required");

  std::size_t k = 0;
  const auto rows = read_csv(path, [&](const CsvHeader& h) {
    std::vector<std::size_t> target_idx;
    for (const auto& name : target_columns) target_idx.push_back(h.require(name, "target"));
    std::vector<std::size_t> cols;
    for (std::size_t c = 0; c < h.names.size(); ++c) {
      if (h.names[c] == "timestamp") continue;
      if (std::find(target_idx.begin(), target_idx.end(), c) != target_idx.end()) continue;
      cols.push_back(c);
    }
    if (cols.empty()) throw DataError("CSV has no feature columns");
    k = cols.size();
    cols.insert(cols.end(), target_idx.begin(), target_idx.end());
    return cols;
  });

  Stream stream;
  for (std::size_t start = 0; start < rows.size(); start += period_length) {
    PeriodDataset period;
    period.index = stream.size() + 1;
    const auto stop = std::min(rows.size(), start + period_length);
    for (std::size_t i = start; i < stop; ++i) {
      const auto split = rows[i].begin() + static_cast<std::ptrdiff_t>(k);
      period.samples.push_back({Vector(rows[i].begin(), split), Vector(split, rows[i].end())});
    }
    stream.push_back(std::move(period));
  }
  return stream;
}

std::vector<Vector> load_csv_series(const std::filesystem::path& path,
                                    const std::vector<std::string>& columns) {
  if (columns.empty()) throw DataError("at least one series column is required");
  return read_csv(path, [&](const CsvHeader& h) {
    std::vector<std::size_t> cols;
    for (const auto& name : columns) cols.push_back(h.require(name, "series"));
    return cols;
  });
}

std::vector<std::string> default_target_columns(std::size_t target_dim) {
  if (target_dim == 1) return {"y"};
  std::vector<std::string> names;
  for (std::size_t j = 0; j < target_dim; ++j) names.push_back("y" + std::to_string(j));
  return names;
}

void write_csv_stream(const std::filesystem::path& path, const Stream& stream) {
  if (stream.empty() || stream.front().empty()) throw DataError("cannot write an empty stream");
  const auto k = stream.front().input_dim();
  const auto m = stream.front().target_dim();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");

  out << "timestamp";
  for (std::size_t j = 0; j < k; ++j) out << ",x" << j;
  for (const auto& name : default_target_columns(m)) out << ',' << name;
  out << '\n';

  std::size_t t = 0;
  for (const auto& period : stream) {
    for (const auto& s : period.samples) {
      out << t++;
      for (double v : s.x) out << ',' << format_double(v);
      for (double v : s.y) out << ',' << format_double(v);
      out << '\n';
    }
  }
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

// ---------------------------------------------------------------------------

void validate_stream_config(const StreamConfig& config) {
  if (config.periods == 0) throw std::invalid_argument("stream config: periods must be >= 1");
  if (config.samples_per_period == 0)
    throw std::invalid_argument("stream config: samples_per_period must be >= 1");
  if (config.input_dim == 0 || config.target_dim == 0)
    throw std::invalid_argument("stream config: input_dim and target_dim must be >= 1");
  if (!(config.noise_std >= 0.0) || !std::isfinite(config.noise_std))
    throw std::invalid_argument("stream config: noise_std must be finite and >= 0");
  std::vector<std::size_t> seen;
  for (const auto& shift : config.shift_schedule) {
    if (shift.period == 0 || shift.period > config.periods)
      throw std::invalid_argument("stream config: shift period out of range");
    if (std::find(seen.begin(), seen.end(), shift.period) != seen.end())
      throw std::invalid_argument("stream config: two shifts scheduled for one period");
    seen.push_back(shift.period);
    if (!shift.mean_offset.empty() && shift.mean_offset.size() != config.input_dim)
      throw std::invalid_argument("stream config: mean_offset length must equal input_dim");
    if (!all_finite(shift.mean_offset))
      throw std::invalid_argument("stream config: mean_offset must be finite");
    if (!(shift.scale > 0.0) || !std::isfinite(shift.scale))
      throw std::invalid_argument("stream config: shift scale must be positive");
  }
}

Stream generate_synthetic_stream(const StreamConfig& config) {
  validate_stream_config(config);
  const auto k = config.input_dim;
  const auto m = config.target_dim;

  Rng rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  Vector weights(m * k);
  Vector bias(m);
  auto draw_target_map = [&] {
    const double w_scale = 1.0 / std::sqrt(static_cast<double>(k));
    for (auto& w : weights) w = normal(rng) * w_scale;
    for (auto& c : bias) c = normal(rng);
  };
  draw_target_map();

  Vector mean(k, 0.0);
  double scale = 1.0;

  Stream stream;
  stream.reserve(config.periods);
  for (std::size_t n = 1; n <= config.periods; ++n) {
    for (const auto& shift : config.shift_schedule) {
      if (shift.period != n) continue;
      mean = shift.mean_offset.empty() ? Vector(k, 0.0) : shift.mean_offset;
      scale = shift.scale;
      draw_target_map();
    }

    PeriodDataset period;
    period.index = n;
    period.samples.reserve(config.samples_per_period);
    for (std::size_t i = 0; i < config.samples_per_period; ++i) {
      Sample s;
      s.x.resize(k);
      for (std::size_t j = 0; j < k; ++j) s.x[j] = mean[j] + scale * normal(rng);
      s.y.resize(m);
      for (std::size_t r = 0; r < m; ++r) {
        double acc = bias[r];
        for (std::size_t j = 0; j < k; ++j) acc += weights[r * k + j] * s.x[j];
        // Skip the draw entirely so noise_std == 0 gives y == W x + c exactly.
        if (config.noise_std > 0.0) acc += config.noise_std * normal(rng);
        s.y[r] = acc;
      }
      period.samples.push_back(std::move(s));
    }
    stream.push_back(std::move(period));
  }
  return stream;
}

StreamConfig stream_preset(const std::string& name, std::uint64_t seed) {
  if (name == "drift8") {
    // Five near-identical periods, then a configuration change at period 6
    // that moves the inputs and rewires the target map.
    StreamConfig c;
    c.periods = 8;
    c.samples_per_period = 200;
    c.input_dim = 4;
    c.target_dim = 1;
    c.noise_std = 0.1;
    c.shift_schedule.push_back({6, {3.0, 0.0, 0.0, 0.0}, 1.0});
    c.seed = seed;
    return c;
  }
  throw std::out_of_range("unknown stream preset '" + name + "'");
}

std::vector<std::string> stream_preset_names() { return {"drift8"}; }

// ---------------------------------------------------------------------------

PeriodDataset make_windows(std::span<const Vector> series, std::size_t window,
                           std::size_t horizon, std::size_t target_channel) {
  if (window == 0 || horizon == 0) throw std::invalid_argument("window and horizon must be >= 1");
  if (series.size() < window + horizon)
    throw std::invalid_argument("series of length " + std::to_string(series.size()) +
                                " is shorter than window + horizon = " +
                                std::to_string(window + horizon));
  const auto channels = series.front().size();
  if (channels == 0) throw std::invalid_argument("series observations must be non-empty");
  if (target_channel >= channels) throw std::invalid_argument("target channel out of range");
  for (const auto& obs : series)
    if (obs.size() != channels) throw std::invalid_argument("series channels must be constant");

  PeriodDataset out;
  const auto count = series.size() - window - horizon + 1;
  out.samples.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Sample s;
    s.x.reserve(window * channels);
    for (std::size_t t = i; t < i + window; ++t)
      s.x.insert(s.x.end(), series[t].begin(), series[t].end());
    s.y.reserve(horizon);
    for (std::size_t t = i + window; t < i + window + horizon; ++t)
      s.y.push_back(series[t][target_channel]);
    out.samples.push_back(std::move(s));
  }
  return out;
}

}  // namespace dmshm
