#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "dmshm/data.hpp"
#include "dmshm/errors.hpp"
#include "test_util.hpp"

namespace dmshm {
namespace {

using test::TempDir;

std::filesystem::path write_file(const TempDir& dir, const std::string& name, const std::string& body) {
  const auto path = dir.path() / name;
  std::ofstream(path) << body;
  return path;
}

std::string rows_csv(std::size_t rows) {
  std::string s = "timestamp,a,b,y\n";
  for (std::size_t i = 0; i < rows; ++i)
    s += std::to_string(i) + "," + std::to_string(i) + "," + std::to_string(2 * i) + "," +
         std::to_string(3 * i) + "\n";
  return s;
}

TEST(LoadCsvStream, SixRowsPeriodThreeGivesTwoPeriods) {
  TempDir dir;
  const auto stream = load_csv_stream(write_file(dir, "a.csv", rows_csv(6)), 3, {"y"});
  ASSERT_EQ(stream.size(), 2u);
  EXPECT_EQ(stream[0].size(), 3u);
  EXPECT_EQ(stream[1].size(), 3u);
  EXPECT_EQ(stream[0].index, 1u);
  EXPECT_EQ(stream[1].index, 2u);
}

TEST(LoadCsvStream, KeepsShortFinalPeriod) {
  TempDir dir;
  const auto stream = load_csv_stream(write_file(dir, "a.csv", rows_csv(7)), 3, {"y"});
  ASSERT_EQ(stream.size(), 3u);
  EXPECT_EQ(stream[0].size(), 3u);
  EXPECT_EQ(stream[1].size(), 3u);
  EXPECT_EQ(stream[2].size(), 1u);
}

TEST(LoadCsvStream, TimestampIgnoredAndFeaturesInHeaderOrder) {
  TempDir dir;
  const auto stream =
      load_csv_stream(write_file(dir, "a.csv", "b,timestamp,y,a\n1,2020-01-01,5,2\n"), 1, {"y"});
  ASSERT_EQ(stream.size(), 1u);
  EXPECT_EQ(stream[0].samples[0].x, (Vector{1.0, 2.0}));
  EXPECT_EQ(stream[0].samples[0].y, (Vector{5.0}));
}

TEST(LoadCsvStream, MultipleTargetsFollowRequestedOrder) {
  TempDir dir;
  const auto stream = load_csv_stream(write_file(dir, "a.csv", "x,t1,t2\n1,2,3\n"), 5, {"t2", "t1"});
  EXPECT_EQ(stream[0].samples[0].y, (Vector{3.0, 2.0}));
  EXPECT_EQ(stream[0].samples[0].x, (Vector{1.0}));
}

TEST(LoadCsvStream, NonNumericCellNamesRowAndColumn) {
  TempDir dir;
  const auto path = write_file(dir, "a.csv", "a,b,y\n1,2,3\n4,abc,6\n");
  try {
    load_csv_stream(path, 2, {"y"});
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("row 2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("'b'"), std::string::npos) << msg;
    EXPECT_NE(msg.find("abc"), std::string::npos) << msg;
  }
}

TEST(LoadCsvStream, Errors) {
  TempDir dir;
  EXPECT_THROW(load_csv_stream(dir.path() / "missing.csv", 3, {"y"}), DataError);
  EXPECT_THROW(load_csv_stream(write_file(dir, "e.csv", ""), 3, {"y"}), DataError);
  EXPECT_THROW(load_csv_stream(write_file(dir, "h.csv", "a,y\n"), 3, {"y"}), DataError);
  EXPECT_THROW(load_csv_stream(write_file(dir, "t.csv", "a,b\n1,2\n"), 3, {"y"}), DataError);
  EXPECT_THROW(load_csv_stream(write_file(dir, "r.csv", "a,y\n1,2\n3\n"), 3, {"y"}), DataError);
  EXPECT_THROW(load_csv_stream(write_file(dir, "p.csv", rows_csv(3)), 0, {"y"}), DataError);
}

TEST(LoadCsvStream, PartitionPreservesOrderAndCount) {
  TempDir dir;
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t rows = 1 + rng() % 40;
    const std::size_t period = 1 + rng() % 9;
    const auto stream = load_csv_stream(write_file(dir, "p.csv", rows_csv(rows)), period, {"y"});
    EXPECT_EQ(stream.size(), (rows + period - 1) / period);
    std::size_t next = 0;
    for (const auto& p : stream) {
      EXPECT_LE(p.size(), period);
      for (const auto& s : p.samples) EXPECT_EQ(s.x[0], static_cast<double>(next++));
    }
    EXPECT_EQ(next, rows);
  }
}

TEST(WriteCsvStream, RoundTripsThroughLoader) {
  TempDir dir;
  StreamConfig c;
  c.periods = 3;
  c.samples_per_period = 7;
  c.input_dim = 2;
  c.target_dim = 2;
  c.seed = 4;
  const auto stream = generate_synthetic_stream(c);
  write_csv_stream(dir.path() / "s.csv", stream);
  const auto back = load_csv_stream(dir.path() / "s.csv", 7, default_target_columns(2));
  EXPECT_EQ(back, stream);
}

TEST(LoadCsvSeries, SelectedColumnsInRequestedOrder) {
  TempDir dir;
  const auto path = write_file(dir, "s.csv", "timestamp,a,b,c\n2020-01-01,1,2,3\n2020-01-02,4,5,6\n");
  const auto series = load_csv_series(path, {"c", "a"});
  ASSERT_EQ(series.size(), 2u);
  EXPECT_EQ(series[0], (Vector{3, 1}));
  EXPECT_EQ(series[1], (Vector{6, 4}));
  EXPECT_THROW(load_csv_series(path, {"d"}), DataError);
  EXPECT_THROW(load_csv_series(path, {"timestamp"}), DataError);
}

// ---------------------------------------------------------------------------

TEST(SyntheticStream, DeterministicForSeed) {
  auto c = stream_preset("drift8", 3);
  EXPECT_EQ(generate_synthetic_stream(c), generate_synthetic_stream(c));
  auto other = c;
  other.seed = 4;
  EXPECT_NE(generate_synthetic_stream(c), generate_synthetic_stream(other));
}

TEST(SyntheticStream, ShiftMovesFeatureMeanByOffset) {
  StreamConfig c;
  c.periods = 6;
  c.samples_per_period = 400;
  c.input_dim = 3;
  c.shift_schedule.push_back({6, {3.0, 0.0, 0.0}, 1.0});
  c.seed = 8;
  const auto stream = generate_synthetic_stream(c);

  auto mean_sd = [](const PeriodDataset& p) {
    double m = 0.0, ss = 0.0;
    for (const auto& s : p.samples) m += s.x[0];
    m /= static_cast<double>(p.size());
    for (const auto& s : p.samples) ss += (s.x[0] - m) * (s.x[0] - m);
    return std::pair{m, std::sqrt(ss / static_cast<double>(p.size() - 1))};
  };
  const auto [m5, sd5] = mean_sd(stream[4]);
  const auto [m6, sd6] = mean_sd(stream[5]);
  const double se = std::sqrt(sd5 * sd5 / 400.0 + sd6 * sd6 / 400.0);
  EXPECT_NEAR(m6 - m5, 3.0, 5.0 * se);
}

TEST(SyntheticStream, ZeroNoiseTargetsAreExactlyAffine) {
  StreamConfig c;
  c.periods = 2;
  c.samples_per_period = 30;
  c.input_dim = 2;
  c.target_dim = 1;
  c.noise_std = 0.0;
  c.seed = 21;
  const auto stream = generate_synthetic_stream(c);
  // Solve for (w0, w1, c) from three samples, then check every sample.
  const auto& s = stream[0].samples;
  double a[3][4];
  for (int r = 0; r < 3; ++r) {
    a[r][0] = s[r].x[0];
    a[r][1] = s[r].x[1];
    a[r][2] = 1.0;
    a[r][3] = s[r].y[0];
  }
  for (int col = 0; col < 3; ++col) {
    int piv = col;
    for (int r = col + 1; r < 3; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    std::swap(a[col], a[piv]);
    for (int r = 0; r < 3; ++r) {
      if (r == col) continue;
      const double f = a[r][col] / a[col][col];
      for (int j = col; j < 4; ++j) a[r][j] -= f * a[col][j];
    }
  }
  const double w0 = a[0][3] / a[0][0], w1 = a[1][3] / a[1][1], c0 = a[2][3] / a[2][2];
  for (const auto& p : stream)
    for (const auto& x : p.samples) EXPECT_NEAR(x.y[0], w0 * x.x[0] + w1 * x.x[1] + c0, 1e-9);
}

TEST(SyntheticStream, RejectsInvalidConfig) {
  StreamConfig c;
  c.noise_std = -1.0;
  EXPECT_THROW(generate_synthetic_stream(c), std::invalid_argument);
  c = StreamConfig{};
  c.periods = 0;
  EXPECT_THROW(generate_synthetic_stream(c), std::invalid_argument);
  c = StreamConfig{};
  c.shift_schedule.push_back({2, {1.0}, 1.0});  // wrong offset length
  EXPECT_THROW(generate_synthetic_stream(c), std::invalid_argument);
  EXPECT_THROW(stream_preset("nope", 1), std::out_of_range);
}

// ---------------------------------------------------------------------------

TEST(MakeWindows, Example) {
  const std::vector<Vector> series{{1}, {2}, {3}, {4}, {5}};
  const auto d = make_windows(series, 3, 1);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d.samples[0].x, (Vector{1, 2, 3}));
  EXPECT_EQ(d.samples[0].y, (Vector{4}));
  EXPECT_EQ(d.samples[1].x, (Vector{2, 3, 4}));
  EXPECT_EQ(d.samples[1].y, (Vector{5}));
}

TEST(MakeWindows, MultichannelFlattensRowMajor) {
  const std::vector<Vector> series{{1, 10}, {2, 20}, {3, 30}, {4, 40}};
  const auto d = make_windows(series, 2, 2, 1);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d.samples[0].x, (Vector{1, 10, 2, 20}));
  EXPECT_EQ(d.samples[0].y, (Vector{30, 40}));
}

TEST(MakeWindows, CountFormulaHolds) {
  std::vector<Vector> ten(10, Vector{0.0});
  EXPECT_EQ(make_windows(ten, 4, 2).size(), 5u);

  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t window = 1 + rng() % 6;
    const std::size_t horizon = 1 + rng() % 4;
    const std::size_t len = window + horizon + rng() % 30;
    std::vector<Vector> series(len, Vector{1.0, 2.0});
    EXPECT_EQ(make_windows(series, window, horizon).size(), len - window - horizon + 1);
  }
}

TEST(MakeWindows, TooShortThrows) {
  std::vector<Vector> series(4, Vector{0.0});
  EXPECT_THROW(make_windows(series, 3, 2), std::invalid_argument);
}

// ---------------------------------------------------------------------------

TEST(FeatureScaler, StandardizesFittingData) {
  StreamConfig c;
  c.periods = 1;
  c.samples_per_period = 500;
  c.input_dim = 3;
  c.shift_schedule.push_back({1, {5.0, -2.0, 0.5}, 3.0});
  c.seed = 2;
  const auto stream = generate_synthetic_stream(c);
  const auto scaler = fit_scaler(stream);
  const auto scaled = apply_scaler(scaler, stream[0]);
  for (std::size_t j = 0; j < 3; ++j) {
    double m = 0.0, ss = 0.0;
    for (const auto& s : scaled.samples) m += s.x[j];
    m /= 500.0;
    for (const auto& s : scaled.samples) ss += (s.x[j] - m) * (s.x[j] - m);
    EXPECT_LT(std::abs(m), 1e-9);
    EXPECT_LT(std::abs(std::sqrt(ss / 500.0) - 1.0), 1e-9);
  }
  // Refitting already standardized data is close to the identity.
  const auto again = fit_scaler(std::vector{scaled});
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_NEAR(again.means()[j], 0.0, 1e-9);
    EXPECT_NEAR(again.stddevs()[j], 1.0, 1e-9);
  }
}

TEST(FeatureScaler, ConstantFeatureClampsStddev) {
  PeriodDataset d;
  for (int i = 0; i < 5; ++i) d.samples.push_back({{7.0, static_cast<double>(i)}, {0.0}});
  const auto scaler = fit_scaler(std::vector{d});
  EXPECT_EQ(scaler.stddevs()[0], FeatureScaler::kStddevFloor);
  for (const auto& s : apply_scaler(scaler, d).samples) EXPECT_EQ(s.x[0], 0.0);
}

TEST(FeatureScaler, InvertUndoesApply) {
  const auto stream = generate_synthetic_stream(stream_preset("drift8", 9));
  const auto scaler = fit_scaler(std::span(stream).first(1));
  for (const auto& s : stream[6].samples) {
    const auto back = scaler.invert(scaler.apply(s.x));
    for (std::size_t j = 0; j < back.size(); ++j) EXPECT_NEAR(back[j], s.x[j], 1e-9);
  }
  const auto targets = fit_scaler(std::span(stream).first(1), ScaleTarget::kTargets);
  const auto round = invert_scaler(targets, apply_scaler(targets, stream[2], ScaleTarget::kTargets),
                                   ScaleTarget::kTargets);
  for (std::size_t i = 0; i < round.size(); ++i)
    EXPECT_NEAR(round.samples[i].y[0], stream[2].samples[i].y[0], 1e-9);
}

TEST(FeatureScaler, EmptyInputThrows) {
  EXPECT_THROW(fit_scaler(std::vector<PeriodDataset>{}), std::invalid_argument);
  EXPECT_THROW(fit_scaler(std::vector<PeriodDataset>{PeriodDataset{}}), std::invalid_argument);
}

}  // namespace
}  // namespace dmshm
