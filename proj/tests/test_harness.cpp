#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "dmshm/errors.hpp"
#include "dmshm/harness.hpp"
#include "dmshm/serialization.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace dmshm {
namespace {

Stream small_stream(std::size_t periods, std::size_t n, std::uint64_t seed) {
  StreamConfig c;
  c.periods = periods;
  c.samples_per_period = n;
  c.input_dim = 3;
  c.shift_schedule.push_back({periods, {2.0, 0.0, 0.0}, 1.0});
  c.seed = seed;
  return generate_synthetic_stream(c);
}

ExperimentOptions quick_options(std::uint64_t seed) {
  ExperimentOptions o;
  o.train.hidden_dim = 6;
  o.train.epochs = 3;
  o.train.batch_size = 16;
  o.budget = 20;
  o.seed = seed;
  return o;
}

TEST(Methods, NamesRoundTrip) {
  for (const auto& name : method_names()) {
    const auto kind = parse_method(name);
    ASSERT_TRUE(kind.has_value()) << name;
    EXPECT_EQ(method_name(*kind), name);
  }
  EXPECT_FALSE(parse_method("dmshm2").has_value());
}

TEST(Methods, VariantsAdjustWeightsAndBudget) {
  const LossWeights base{0.5, 0.6, 0.7, 0.8};
  EXPECT_EQ(effective_loss_weights({MethodKind::kDmshm, {}, {}}, base), base);
  EXPECT_EQ(effective_loss_weights({MethodKind::kDmshmNoHint, {}, {}}, base),
            (LossWeights{0.5, 0.6, 0.0, 0.8}));
  EXPECT_EQ(effective_loss_weights({MethodKind::kFinetune, {}, {}}, base),
            (LossWeights{0.0, 0.0, 0.0, 0.8}));
  EXPECT_EQ(effective_budget({MethodKind::kFinetune, {}, {}}, 50), 0u);
  EXPECT_EQ(effective_budget({MethodKind::kDmshm, {}, 7}, 50), 7u);
  EXPECT_EQ(selection_options({MethodKind::kDmshmNoDms, {}, {}}).fixed_gamma, 1.0);
  EXPECT_FALSE(selection_options({MethodKind::kDmshm, {}, {}}).fixed_gamma.has_value());
}

// ---------------------------------------------------------------------------

TEST(EvalSets, FullFractionIsPermutation) {
  const auto stream = small_stream(3, 20, 1);
  const auto sets = build_eval_sets(stream, 1.0, 5);
  ASSERT_EQ(sets.future.size(), 60u);
  std::vector<Vector> all, got;
  for (const auto& p : stream)
    for (const auto& s : p.samples) all.push_back(s.x);
  for (const auto& s : sets.future.samples) got.push_back(s.x);
  std::sort(all.begin(), all.end());
  std::sort(got.begin(), got.end());
  EXPECT_EQ(all, got);
  EXPECT_EQ(sets.historical, stream.front());
}

TEST(EvalSets, CeilingSizeAndDeterminism) {
  const auto stream = small_stream(8, 100, 2);
  const auto a = build_eval_sets(stream, 0.1, 9);
  EXPECT_EQ(a.future.size(), 80u);
  EXPECT_EQ(a.future, build_eval_sets(stream, 0.1, 9).future);
  EXPECT_NE(a.future, build_eval_sets(stream, 0.1, 10).future);
  EXPECT_EQ(build_eval_sets(stream, 0.0101, 9).future.size(), 9u);
  EXPECT_THROW(build_eval_sets(stream, 0.0, 1), std::invalid_argument);
  EXPECT_THROW(build_eval_sets(stream, 1.5, 1), std::invalid_argument);
}

// ---------------------------------------------------------------------------

TEST(Mse, HandValues) {
  RegressorParams zero(Shape{1, 1, 1});
  PeriodDataset d;
  d.samples = {{{0.3}, {1.0}}, {{-0.2}, {-1.0}}};
  EXPECT_EQ(mse(zero, d), 1.0);

  d.samples = {{{0.3}, {3.0}}, {{-0.2}, {-4.0}}};
  EXPECT_EQ(mse(zero, d), 12.5);

  std::mt19937_64 rng(3);
  const auto p = test::random_params(rng, Shape{2, 3, 2});
  PeriodDataset perfect;
  for (int i = 0; i < 10; ++i) {
    auto x = test::random_vector(rng, 2);
    perfect.samples.push_back({x, forward(p, x).yhat});
  }
  EXPECT_EQ(mse(p, perfect), 0.0);
  EXPECT_THROW(mse(p, PeriodDataset{}), std::invalid_argument);
}

TEST(Mse, ScaledOverloadWorksInOriginalUnits) {
  RegressorParams p(Shape{1, 1, 1});
  p.head_bias()[0] = 1.0;  // predicts +1 in standardized units
  PeriodDataset d;
  d.samples = {{{0.0}, {10.0}}, {{1.0}, {14.0}}};
  const auto fx = fit_scaler(std::vector{d});
  const auto fy = fit_scaler(std::vector{d}, ScaleTarget::kTargets);  // mean 12, sd 2
  // Prediction in original units is 14 for both samples: residuals 4 and 0.
  EXPECT_NEAR(mse(p, d, fx, fy), 8.0, 1e-12);
}

TEST(Metrics, FeIsMeanOfHistoricalAndPeIsLastFuture) {
  std::vector<PeriodRecord> r(3);
  r[0].historical_mse = 2.0;
  r[1].historical_mse = 4.0;
  r[2].historical_mse = 6.0;
  r[2].future_mse = 1.5;
  EXPECT_EQ(forgetting_error(r), 4.0);
  EXPECT_EQ(prediction_error(r), 1.5);
}

// ---------------------------------------------------------------------------

TEST(RunExperiment, OneRecordPerPeriodAndConsistentMetrics) {
  const auto stream = generate_synthetic_stream(stream_preset("drift8", 1));
  auto opts = quick_options(1);
  const auto report = run_experiment(stream, {MethodKind::kDmshm, {}, {}}, opts);
  ASSERT_EQ(report.records.size(), 8u);
  EXPECT_EQ(report.fe, forgetting_error(report.records));
  EXPECT_EQ(report.pe, prediction_error(report.records));
  for (std::size_t i = 0; i < 8; ++i) {
    const auto& r = report.records[i];
    EXPECT_EQ(r.period, i + 1);
    EXPECT_EQ(r.memory_size, 20u);
    EXPECT_GE(r.gamma, 0.0);
    EXPECT_LE(r.gamma, 1.0);
    EXPECT_TRUE(std::isfinite(r.historical_mse) && std::isfinite(r.future_mse));
  }
  EXPECT_EQ(report.records[0].gamma, 1.0);
}

TEST(RunExperiment, Deterministic) {
  const auto stream = small_stream(4, 60, 2);
  const auto opts = quick_options(5);
  for (const auto kind : {MethodKind::kDmshm, MethodKind::kFinetune}) {
    const auto a = run_experiment(stream, {kind, {}, {}}, opts);
    const auto b = run_experiment(stream, {kind, {}, {}}, opts);
    EXPECT_EQ(metrics_json(a), metrics_json(b));
    EXPECT_EQ(periods_csv(a), periods_csv(b));
  }
}

TEST(RunExperiment, FinetuneNeverStoresMemory) {
  const auto stream = small_stream(4, 60, 3);
  const auto report = run_experiment(stream, {MethodKind::kFinetune, {}, {}}, quick_options(2));
  for (const auto& r : report.records) {
    EXPECT_EQ(r.memory_size, 0u);
    EXPECT_EQ(r.bandwidth, 0.0);
  }
}

TEST(RunExperiment, NoDmsSkipsDensityModel) {
  const auto stream = small_stream(4, 60, 4);
  const auto report = run_experiment(stream, {MethodKind::kDmshmNoDms, {}, {}}, quick_options(2));
  for (const auto& r : report.records) {
    EXPECT_EQ(r.gamma, 1.0);
    EXPECT_EQ(r.bandwidth, 0.0);
  }
}

TEST(RunExperiment, ProjectionCoversEverySample) {
  const auto stream = small_stream(3, 30, 5);
  auto opts = quick_options(1);
  opts.projection = true;
  const auto report = run_experiment(stream, {MethodKind::kFinetune, {}, {}}, opts);
  ASSERT_EQ(report.projection.size(), 90u);
  EXPECT_EQ(report.projection.front().period, 1u);
  EXPECT_EQ(report.projection.back().period, 3u);
}

TEST(RunExperiment, OutputsFiles) {
  test::TempDir dir;
  const auto stream = small_stream(3, 30, 6);
  const auto report = run_experiment(stream, {MethodKind::kDmshm, {}, {}}, quick_options(1));
  write_run_outputs(dir.path(), report);
  const auto csv = test::read_file(dir.path() / "periods.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "period,historical_mse,future_mse,gamma,bandwidth,train_loss_final");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  const auto metrics = nlohmann::json::parse(test::read_file(dir.path() / "metrics.json"));
  EXPECT_EQ(metrics["method"], "dmshm");
  EXPECT_EQ(metrics["FE"].get<double>(), report.fe);
  EXPECT_FALSE(std::filesystem::exists(dir.path() / "projection.csv"));
}

// ---------------------------------------------------------------------------

TEST(Pca, CollinearPointsHaveNoSecondCoordinate) {
  std::vector<Vector> pts;
  for (int i = 0; i < 20; ++i) {
    const double t = 0.3 * i - 2.0;
    pts.push_back({t, 2.0 * t + 1.0, -t});
  }
  const auto proj = pca_project_2d(pts);
  for (const auto& c : proj.coords) EXPECT_NEAR(c[1], 0.0, 1e-6);
}

TEST(Pca, TwoDimensionalProjectionPreservesDistances) {
  const auto raw = oracle::normal_points(30, 2, 7);
  std::vector<Vector> pts(raw.begin(), raw.end());
  const auto proj = pca_project_2d(pts);
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      const double d0 = std::hypot(pts[i][0] - pts[j][0], pts[i][1] - pts[j][1]);
      const double d1 =
          std::hypot(proj.coords[i][0] - proj.coords[j][0], proj.coords[i][1] - proj.coords[j][1]);
      EXPECT_NEAR(d0, d1, 1e-9);
    }
}

TEST(Pca, EigenvaluesMatchClosedForm) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Vector> pts;
    std::normal_distribution<double> n(0.0, 1.0);
    const double s0 = 0.5 + trial, s1 = 1.0, s2 = 0.2;
    for (int i = 0; i < 50; ++i) {
      const double a = s0 * n(rng), b = s1 * n(rng), c = s2 * n(rng);
      pts.push_back({a + 0.3 * b, b - 0.2 * c, c + 0.1 * a});
    }
    Vector mean(3, 0.0);
    for (const auto& p : pts)
      for (int j = 0; j < 3; ++j) mean[j] += p[j] / 50.0;
    std::array<std::array<double, 3>, 3> cov{};
    for (const auto& p : pts)
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) cov[r][c] += (p[r] - mean[r]) * (p[c] - mean[c]) / 49.0;
    const auto expected = oracle::sym3_eigenvalues(cov);
    const auto proj = pca_project_2d(pts);
    EXPECT_NEAR(proj.eigenvalues[0], expected[0], 1e-6);
    EXPECT_NEAR(proj.eigenvalues[1], expected[1], 1e-6);
    for (const auto& comp : proj.components) {
      const auto big = std::max_element(comp.begin(), comp.end(),
                                        [](double x, double y) { return std::abs(x) < std::abs(y); });
      EXPECT_GT(*big, 0.0);
    }
  }
}

TEST(Pca, Errors) {
  const std::vector<Vector> same(5, Vector{1.0, 2.0});
  EXPECT_THROW(pca_project_2d(same), std::invalid_argument);
  const std::vector<Vector> two{{0.0, 1.0}, {1.0, 0.0}};
  EXPECT_THROW(pca_project_2d(two), std::invalid_argument);
}

// ---------------------------------------------------------------------------

TEST(MemorySnapshot, RoundTrip) {
  std::mt19937_64 rng(9);
  test::TempDir dir;
  auto memory = test::random_memory(rng, 7, Shape{3, 4, 2}, 10, 123);
  memory.period = 4;
  save_memory(dir.path() / "m.json", memory);
  EXPECT_EQ(load_memory(dir.path() / "m.json"), memory);
  EXPECT_THROW(memory_from_json(nlohmann::json::parse(R"({"format":"dmshm-memory"})")), DataError);
}

}  // namespace
}  // namespace dmshm
