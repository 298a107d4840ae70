#include "dmshm/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "dmshm/errors.hpp"
#include "dmshm/random.hpp"

namespace dmshm {

namespace {

constexpr std::uint64_t kTrainStream = 0x5452'4e;  // "TRN"
constexpr std::uint64_t kMemoryStream = 0x4d45'4d;  // "MEM"
constexpr std::uint64_t kEvalStream = 0x4556'4c;    // "EVL"

struct MethodEntry {
  MethodKind kind;
  const char* name;
};

constexpr MethodEntry kMethods[] = {
    {MethodKind::kDmshm, "dmshm"},
    {MethodKind::kDmshmNoDms, "dmshm_no_dms"},
    {MethodKind::kDmshmNoHint, "dmshm_no_hint"},
    {MethodKind::kFinetune, "finetune"},
};

std::string fmt17(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

void normalize(Vector& v) {
  const double n = std::sqrt(dot(v, v));
  for (auto& x : v) x /= n;
}

Vector mat_vec(const std::vector<Vector>& a, std::span<const double> v) {
  Vector out(a.size(), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = dot(a[i], v);
  return out;
}

// Removes the components of `v` along the unit vectors in `basis`.
void orthogonalize(Vector& v, std::span<const Vector> basis) {
  for (const auto& b : basis) {
    const double p = dot(v, b);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= p * b[i];
  }
}

// Any unit vector orthogonal to `basis`.
Vector complement(std::size_t k, std::span<const Vector> basis) {
  for (std::size_t j = 0; j < k; ++j) {
    Vector e(k, 0.0);
    e[j] = 1.0;
    orthogonalize(e, basis);
    if (std::sqrt(dot(e, e)) > 1e-6) {
      normalize(e);
      return e;
    }
  }
  throw std::logic_error("pca: no orthogonal complement");
}

Vector power_iteration(const std::vector<Vector>& cov, std::span<const Vector> found,
                       double scale) {
  constexpr double kTolerance = 1e-9;
  constexpr std::size_t kMaxIterations = 1000;
  const auto k = cov.size();

  std::size_t diag = 0;
  for (std::size_t j = 1; j < k; ++j)
    if (cov[j][j] > cov[diag][diag]) diag = j;
  Vector v(k);
  for (std::size_t j = 0; j < k; ++j) v[j] = 0.1 / static_cast<double>(j + 1);
  v[diag] += 1.0;
  orthogonalize(v, found);
  if (std::sqrt(dot(v, v)) < 1e-6) return complement(k, found);
  normalize(v);

  for (std::size_t it = 0; it < kMaxIterations; ++it) {
    auto w = mat_vec(cov, v);
    orthogonalize(w, found);
    const double norm = std::sqrt(dot(w, w));
    if (norm <= 1e-14 * scale) return complement(k, found);
    for (auto& x : w) x /= norm;
    double diff = 0.0;
    for (std::size_t j = 0; j < k; ++j) diff += (w[j] - v[j]) * (w[j] - v[j]);
    v = std::move(w);
    if (std::sqrt(diff) < kTolerance) break;
  }
  return v;
}

}  // namespace

std::string method_name(MethodKind kind) {
  for (const auto& m : kMethods)
    if (m.kind == kind) return m.name;
  throw std::invalid_argument("unknown method kind");
}

std::optional<MethodKind> parse_method(const std::string& name) {
  for (const auto& m : kMethods)
    if (name == m.name) return m.kind;
  return std::nullopt;
}

std::vector<std::string> method_names() {
  std::vector<std::string> out;
  for (const auto& m : kMethods) out.emplace_back(m.name);
  return out;
}

LossWeights effective_loss_weights(const MethodSpec& method, const LossWeights& base) {
  LossWeights w = method.loss_weights.value_or(base);
  switch (method.kind) {
    case MethodKind::kFinetune:
      w.alpha = w.beta = w.xi = 0.0;
      break;
    case MethodKind::kDmshmNoHint:
      w.xi = 0.0;
      break;
    case MethodKind::kDmshm:
    case MethodKind::kDmshmNoDms:
      break;
  }
  return w;
}

std::size_t effective_budget(const MethodSpec& method, std::size_t base) {
  if (method.kind == MethodKind::kFinetune) return 0;
  return method.budget.value_or(base);
}

SelectionOptions selection_options(const MethodSpec& method) {
  SelectionOptions opts;
  if (method.kind == MethodKind::kDmshmNoDms) opts.fixed_gamma = 1.0;
  return opts;
}

double forgetting_error(std::span<const PeriodRecord> records) {
  if (records.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& r : records) acc += r.historical_mse;
  return acc / static_cast<double>(records.size());
}

double prediction_error(std::span<const PeriodRecord> records) {
  return records.empty() ? 0.0 : records.back().future_mse;
}

EvalSets build_eval_sets(const Stream& stream, double future_fraction, std::uint64_t seed) {
  if (stream.empty()) throw std::invalid_argument("build_eval_sets: empty stream");
  if (!(future_fraction > 0.0 && future_fraction <= 1.0))
    throw std::invalid_argument("future_fraction must lie in (0, 1]");

  std::vector<const Sample*> all;
  for (const auto& p : stream)
    for (const auto& s : p.samples) all.push_back(&s);
  if (all.empty()) throw std::invalid_argument("build_eval_sets: stream has no samples");

  // The epsilon keeps e.g. 0.1 * 800 from rounding up to 81.
  const auto wanted = static_cast<std::size_t>(
      std::ceil(future_fraction * static_cast<double>(all.size()) - 1e-9));
  const auto count = std::clamp<std::size_t>(wanted, 1, all.size());

  Rng rng(seed);
  std::vector<std::size_t> order(all.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  EvalSets sets;
  sets.historical = stream.front();
  sets.future.index = 0;
  sets.future.samples.reserve(count);
  for (std::size_t i = 0; i < count; ++i) sets.future.samples.push_back(*all[order[i]]);
  return sets;
}

double mse(const RegressorParams& params, const PeriodDataset& dataset) {
  if (dataset.empty()) throw std::invalid_argument("mse: empty dataset");
  double acc = 0.0;
  for (const auto& s : dataset.samples) {
    const auto p = forward(params, s.x);
    if (s.y.size() != p.yhat.size()) throw std::invalid_argument("mse: target dimension mismatch");
    double se = 0.0;
    for (std::size_t j = 0; j < s.y.size(); ++j) se += (p.yhat[j] - s.y[j]) * (p.yhat[j] - s.y[j]);
    acc += se / static_cast<double>(s.y.size());
  }
  return acc / static_cast<double>(dataset.size());
}

double mse(const RegressorParams& params, const PeriodDataset& dataset,
           const FeatureScaler& features, const FeatureScaler& targets) {
  if (dataset.empty()) throw std::invalid_argument("mse: empty dataset");
  double acc = 0.0;
  for (const auto& s : dataset.samples) {
    const auto yhat = targets.invert(forward(params, features.apply(s.x)).yhat);
    double se = 0.0;
    for (std::size_t j = 0; j < s.y.size(); ++j) se += (yhat[j] - s.y[j]) * (yhat[j] - s.y[j]);
    acc += se / static_cast<double>(s.y.size());
  }
  return acc / static_cast<double>(dataset.size());
}

PcaProjection pca_project_2d(std::span<const Vector> points) {
  if (points.size() < 3) throw std::invalid_argument("pca: need at least 3 points");
  const auto k = points.front().size();
  if (k < 2) throw std::invalid_argument("pca: need dimension >= 2");
  for (const auto& p : points)
    if (p.size() != k) throw std::invalid_argument("pca: points differ in dimension");

  const auto n = static_cast<double>(points.size());
  Vector mean(k, 0.0);
  for (const auto& p : points)
    for (std::size_t j = 0; j < k; ++j) mean[j] += p[j];
  for (auto& m : mean) m /= n;

  // Sample covariance (n - 1 denominator).
  std::vector<Vector> cov(k, Vector(k, 0.0));
  for (const auto& p : points)
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = 0; b < k; ++b) cov[a][b] += (p[a] - mean[a]) * (p[b] - mean[b]);
  double trace = 0.0;
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = 0; b < k; ++b) cov[a][b] /= n - 1.0;
    trace += cov[a][a];
  }
  if (!(trace > 0.0)) throw std::invalid_argument("pca: all points are identical");

  PcaProjection out;
  std::vector<Vector> found;
  for (std::size_t c = 0; c < 2; ++c) {
    auto v = power_iteration(cov, found, trace);
    std::size_t big = 0;
    for (std::size_t j = 1; j < k; ++j)
      if (std::abs(v[j]) > std::abs(v[big])) big = j;
    if (v[big] < 0.0)
      for (auto& x : v) x = -x;
    out.eigenvalues[c] = dot(v, mat_vec(cov, v));
    found.push_back(v);
    // Deflate so the next search sees only the remaining spectrum.
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = 0; b < k; ++b) cov[a][b] -= out.eigenvalues[c] * v[a] * v[b];
    out.components[c] = std::move(v);
  }

  out.coords.reserve(points.size());
  Vector centered(k);
  for (const auto& p : points) {
    for (std::size_t j = 0; j < k; ++j) centered[j] = p[j] - mean[j];
    out.coords.push_back({dot(centered, out.components[0]), dot(centered, out.components[1])});
  }
  return out;
}

MetricsReport run_experiment(const Stream& stream, const MethodSpec& method,
                             const ExperimentOptions& options) {
  if (stream.empty()) throw std::invalid_argument("run_experiment: empty stream");
  for (const auto& p : stream) validate_dataset(p);
  const auto k = stream.front().input_dim();
  const auto m = stream.front().target_dim();
  for (const auto& p : stream)
    if (p.input_dim() != k || p.target_dim() != m)
      throw DataError("periods of the stream differ in dimensions");

  const auto x_scaler = fit_scaler(std::span(stream).first(1), ScaleTarget::kFeatures);
  const auto y_scaler = fit_scaler(std::span(stream).first(1), ScaleTarget::kTargets);
  const auto eval = build_eval_sets(stream, options.future_fraction,
                                    derive_seed(options.seed, kEvalStream));

  TrainConfig train = options.train;
  train.loss_weights = effective_loss_weights(method, options.train.loss_weights);
  const auto select = selection_options(method);

  MetricsReport report;
  report.method = method;
  report.seed = options.seed;

  MemorySet memory;
  memory.budget = effective_budget(method, options.budget);

  std::optional<RegressorParams> previous;
  for (const auto& raw : stream) {
    auto period = apply_scaler(x_scaler, raw, ScaleTarget::kFeatures);
    period = apply_scaler(y_scaler, period, ScaleTarget::kTargets);

    train.seed = derive_seed(options.seed, kTrainStream, previous ? raw.index : 0);
    TrainResult trained;
    try {
      trained = train_period(previous ? &*previous : nullptr, memory, period, train);
    } catch (TrainingDivergence& e) {
      e.set_period(raw.index);
      throw;
    }

    PeriodRecord rec;
    rec.period = raw.index;
    rec.historical_mse = mse(trained.params, eval.historical, x_scaler, y_scaler);
    rec.future_mse = mse(trained.params, eval.future, x_scaler, y_scaler);
    rec.train_loss_final = trained.loss_trace.back();

    if (memory.budget > 0) {
      const auto& net = trained.params;
      auto update = update_memory(memory, period,
                                  [&net](std::span<const double> x) { return represent(net, x); },
                                  derive_seed(options.seed, kMemoryStream, raw.index), select);
      rec.gamma = update.gamma;
      rec.bandwidth = update.bandwidth;
      memory = std::move(update.memory);
    } else {
      memory.cumulative += period.size();
      memory.period = raw.index;
    }
    rec.memory_size = memory.size();
    report.records.push_back(rec);
    previous = std::move(trained.params);
  }

  report.fe = forgetting_error(report.records);
  report.pe = prediction_error(report.records);

  if (options.projection) {
    std::vector<Vector> points;
    std::vector<std::size_t> owner;
    for (const auto& p : stream)
      for (const auto& s : p.samples) {
        points.push_back(x_scaler.apply(s.x));
        owner.push_back(p.index);
      }
    if (k >= 2 && points.size() >= 3) {
      const auto proj = pca_project_2d(points);
      for (std::size_t i = 0; i < points.size(); ++i)
        report.projection.push_back({owner[i], proj.coords[i][0], proj.coords[i][1]});
    }
  }
  return report;
}

std::string metrics_json(const MetricsReport& report) {
  nlohmann::ordered_json j;
  j["method"] = method_name(report.method.kind);
  j["seed"] = report.seed;
  j["FE"] = report.fe;
  j["PE"] = report.pe;
  j["periods"] = report.records.size();
  return j.dump(2) + "\n";
}

std::string periods_csv(const MetricsReport& report) {
  std::ostringstream os;
  os << "period,historical_mse,future_mse,gamma,bandwidth,train_loss_final\n";
  for (const auto& r : report.records)
    os << r.period << ',' << fmt17(r.historical_mse) << ',' << fmt17(r.future_mse) << ','
       << fmt17(r.gamma) << ',' << fmt17(r.bandwidth) << ',' << fmt17(r.train_loss_final) << '\n';
  return os.str();
}

void write_run_outputs(const std::filesystem::path& dir, const MetricsReport& report) {
  std::filesystem::create_directories(dir);
  auto write = [&](const char* name, const std::string& body) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
    out << body;
  };
  write("metrics.json", metrics_json(report));
  write("periods.csv", periods_csv(report));
  if (!report.projection.empty()) {
    std::ostringstream os;
    os << "period,x1,x2\n";
    for (const auto& r : report.projection) os << r.period << ',' << fmt17(r.x1) << ',' << fmt17(r.x2) << '\n';
    write("projection.csv", os.str());
  }
}

}  // namespace dmshm
