#include "dmshm/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "dmshm/errors.hpp"
#include "dmshm/random.hpp"

namespace dmshm {

namespace {

constexpr std::uint64_t kShuffleStream = 0x5348'5546;  // "SHUF"

double mae(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) acc += std::abs(a[j] - b[j]);
  return acc / static_cast<double>(a.size());
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw TrainingDivergence(0, std::string("non-finite ") + what);
}

void check_dims(const RegressorParams& params, const LossInputs& in) {
  const auto& s = params.shape();
  if (in.previous && in.previous->shape() != s)
    throw std::invalid_argument("previous model shape differs from current model");
  for (const auto& e : in.memory)
    if (e.x.size() != s.input || e.z.size() != s.hidden || e.y.size() != s.output)
      throw std::invalid_argument("memory entry dimensions do not match the model");
  for (const auto& b : in.batch)
    if (b.x.size() != s.input || b.y.size() != s.output)
      throw std::invalid_argument("batch sample dimensions do not match the model");
  if (!in.batch_weights.empty() && in.batch_weights.size() != in.batch.size())
    throw std::invalid_argument("batch_weights must align with the batch");
}

// Per-sample weight of the current-data term, normalized to sum to 1.
double batch_weight(const LossInputs& in, std::size_t i, double weight_sum) {
  if (in.batch_weights.empty()) return 1.0 / static_cast<double>(in.batch.size());
  return in.batch_weights[i] / weight_sum;
}

double batch_weight_sum(const LossInputs& in) {
  if (in.batch_weights.empty()) return static_cast<double>(in.batch.size());
  double s = 0.0;
  for (double w : in.batch_weights) {
    if (!(w >= 0.0) || !std::isfinite(w))
      throw std::invalid_argument("batch weights must be finite and non-negative");
    s += w;
  }
  if (!(s > 0.0)) throw std::invalid_argument("batch weights sum to zero");
  return s;
}

// Accumulates dL/dparams for one input given dL/dz (excluding the head's
// contribution) and dL/dyhat.
void backprop(const RegressorParams& params, std::span<const double> x, const Prediction& p,
              std::span<double> dz, std::span<const double> dyhat, ParamGradient& grad) {
  const auto& s = params.shape();
  const auto wg = params.head_weight();
  auto gwg = grad.head_weight();
  auto gbg = grad.head_bias();
  for (std::size_t o = 0; o < s.output; ++o) {
    if (dyhat[o] == 0.0) continue;
    gbg[o] += dyhat[o];
    for (std::size_t h = 0; h < s.hidden; ++h) {
      gwg[o * s.hidden + h] += dyhat[o] * p.z[h];
      dz[h] += dyhat[o] * wg[o * s.hidden + h];
    }
  }
  auto gwh = grad.hidden_weight();
  auto gbh = grad.hidden_bias();
  for (std::size_t h = 0; h < s.hidden; ++h) {
    const double da = dz[h] * (1.0 - p.z[h] * p.z[h]);
    if (da == 0.0) continue;
    gbh[h] += da;
    for (std::size_t j = 0; j < s.input; ++j) gwh[h * s.input + j] += da * x[j];
  }
}

}  // namespace

RegressorParams::RegressorParams(Shape shape)
    : shape_(shape), values_(shape.parameter_count(), 0.0) {
  if (shape.input == 0 || shape.hidden == 0 || shape.output == 0)
    throw std::invalid_argument("model shape entries must be >= 1");
}

RegressorParams RegressorParams::initialize(Shape shape, std::uint64_t seed) {
  RegressorParams p(shape);
  Rng rng(seed);
  const double hidden_bound = 1.0 / std::sqrt(static_cast<double>(shape.input));
  const double head_bound = 1.0 / std::sqrt(static_cast<double>(shape.hidden));
  std::uniform_real_distribution<double> hidden_dist(-hidden_bound, hidden_bound);
  std::uniform_real_distribution<double> head_dist(-head_bound, head_bound);
  for (auto& v : p.hidden_weight()) v = hidden_dist(rng);
  for (auto& v : p.hidden_bias()) v = hidden_dist(rng);
  for (auto& v : p.head_weight()) v = head_dist(rng);
  for (auto& v : p.head_bias()) v = head_dist(rng);
  return p;
}

Vector represent(const RegressorParams& params, std::span<const double> x) {
  const auto& s = params.shape();
  if (x.size() != s.input) throw std::invalid_argument("forward: input dimension mismatch");
  const auto wh = params.hidden_weight();
  const auto bh = params.hidden_bias();
  Vector z(s.hidden);
  for (std::size_t h = 0; h < s.hidden; ++h) {
    double a = bh[h];
    for (std::size_t j = 0; j < s.input; ++j) a += wh[h * s.input + j] * x[j];
    z[h] = std::tanh(a);
  }
  return z;
}

Prediction forward(const RegressorParams& params, std::span<const double> x) {
  const auto& s = params.shape();
  Prediction p;
  p.z = represent(params, x);
  const auto wg = params.head_weight();
  const auto bg = params.head_bias();
  p.yhat.resize(s.output);
  for (std::size_t o = 0; o < s.output; ++o) {
    double acc = bg[o];
    for (std::size_t h = 0; h < s.hidden; ++h) acc += wg[o * s.hidden + h] * p.z[h];
    p.yhat[o] = acc;
  }
  return p;
}

void validate_loss_weights(const LossWeights& w) {
  for (double v : {w.alpha, w.beta, w.xi, w.delta})
    if (!(v >= 0.0) || !std::isfinite(v))
      throw std::invalid_argument("loss weights must be finite and non-negative");
}

LossTerms loss_terms(const RegressorParams& params, const LossInputs& in) {
  check_dims(params, in);
  validate_loss_weights(in.weights);

  LossTerms t;
  if (!in.batch.empty()) {
    const double wsum = batch_weight_sum(in);
    for (std::size_t i = 0; i < in.batch.size(); ++i) {
      const auto& sample = in.batch[i];
      const auto p = forward(params, sample.x);
      t.current += batch_weight(in, i, wsum) * mae(sample.y, p.yhat);
      if (in.previous) t.hint += mae(represent(*in.previous, sample.x), p.z);
    }
    if (in.previous) t.hint /= static_cast<double>(in.batch.size());
  }
  if (!in.memory.empty()) {
    for (const auto& e : in.memory) {
      const auto p = forward(params, e.x);
      t.memory_repr += mae(e.z, p.z);
      t.memory_pred += mae(e.y, p.yhat);
    }
    t.memory_repr /= static_cast<double>(in.memory.size());
    t.memory_pred /= static_cast<double>(in.memory.size());
  }
  const auto& w = in.weights;
  t.total = (w.alpha * t.memory_repr + w.beta * t.memory_pred) + w.xi * t.hint + w.delta * t.current;
  check_finite(t.total, "loss");
  return t;
}

ParamGradient gradient(const RegressorParams& params, const LossInputs& in) {
  check_dims(params, in);
  validate_loss_weights(in.weights);
  const auto& s = params.shape();
  const auto& w = in.weights;
  ParamGradient grad(s);

  Vector dz(s.hidden);
  Vector dyhat(s.output);
  const double inv_r = 1.0 / static_cast<double>(s.hidden);
  const double inv_m = 1.0 / static_cast<double>(s.output);

  const bool use_current = w.delta != 0.0;
  const bool use_hint = in.previous != nullptr && w.xi != 0.0;
  if (!in.batch.empty() && (use_current || use_hint)) {
    const double wsum = batch_weight_sum(in);
    const double hint_scale = w.xi * inv_r / static_cast<double>(in.batch.size());
    for (std::size_t i = 0; i < in.batch.size(); ++i) {
      const auto& sample = in.batch[i];
      const auto p = forward(params, sample.x);
      std::fill(dz.begin(), dz.end(), 0.0);
      std::fill(dyhat.begin(), dyhat.end(), 0.0);
      if (use_hint) {
        const auto teacher = represent(*in.previous, sample.x);
        for (std::size_t h = 0; h < s.hidden; ++h) dz[h] += hint_scale * sign(p.z[h] - teacher[h]);
      }
      if (use_current) {
        const double scale = w.delta * batch_weight(in, i, wsum) * inv_m;
        for (std::size_t o = 0; o < s.output; ++o) dyhat[o] = scale * sign(p.yhat[o] - sample.y[o]);
      }
      backprop(params, sample.x, p, dz, dyhat, grad);
    }
  }

  if (!in.memory.empty() && (w.alpha != 0.0 || w.beta != 0.0)) {
    const double count = static_cast<double>(in.memory.size());
    const double repr_scale = w.alpha * inv_r / count;
    const double pred_scale = w.beta * inv_m / count;
    for (const auto& e : in.memory) {
      const auto p = forward(params, e.x);
      std::fill(dz.begin(), dz.end(), 0.0);
      std::fill(dyhat.begin(), dyhat.end(), 0.0);
      if (w.alpha != 0.0)
        for (std::size_t h = 0; h < s.hidden; ++h) dz[h] = repr_scale * sign(p.z[h] - e.z[h]);
      if (w.beta != 0.0)
        for (std::size_t o = 0; o < s.output; ++o) dyhat[o] = pred_scale * sign(p.yhat[o] - e.y[o]);
      backprop(params, e.x, p, dz, dyhat, grad);
    }
  }

  for (double g : grad.values()) check_finite(g, "gradient");
  return grad;
}

void validate_train_config(const TrainConfig& c) {
  if (!(c.learning_rate >= 0.0) || !std::isfinite(c.learning_rate))
    throw std::invalid_argument("learning_rate must be finite and >= 0");
  if (c.epochs == 0) throw std::invalid_argument("epochs must be >= 1");
  if (c.batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
  if (c.hidden_dim == 0) throw std::invalid_argument("hidden_dim must be >= 1");
  if (!(c.adam_beta1 >= 0.0 && c.adam_beta1 < 1.0) || !(c.adam_beta2 >= 0.0 && c.adam_beta2 < 1.0))
    throw std::invalid_argument("adam betas must lie in [0, 1)");
  if (!(c.adam_epsilon > 0.0)) throw std::invalid_argument("adam epsilon must be positive");
  validate_loss_weights(c.loss_weights);
}

TrainResult train_period(const RegressorParams* previous, const MemorySet& memory,
                         const PeriodDataset& dataset, const TrainConfig& config) {
  validate_train_config(config);
  validate_dataset(dataset);
  const Shape shape{dataset.input_dim(), config.hidden_dim, dataset.target_dim()};
  if (previous && previous->shape() != shape)
    throw std::invalid_argument("previous model shape does not match data and hidden_dim");

  TrainResult result;
  result.params = previous ? *previous : RegressorParams::initialize(shape, config.seed);
  auto theta = result.params.values();

  const auto n_params = shape.parameter_count();
  std::vector<double> m1(n_params, 0.0);
  std::vector<double> m2(n_params, 0.0);
  double beta1_pow = 1.0;
  double beta2_pow = 1.0;

  Rng rng(derive_seed(config.seed, kShuffleStream));
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Sample> batch;
  batch.reserve(config.batch_size);

  LossInputs in;
  in.previous = previous;
  in.memory = memory.entries;
  in.weights = config.loss_weights;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const auto stop = std::min(order.size(), start + config.batch_size);
      batch.clear();
      for (auto i = start; i < stop; ++i) batch.push_back(dataset.samples[order[i]]);
      in.batch = batch;

      ParamGradient grad;
      try {
        grad = gradient(result.params, in);
      } catch (const TrainingDivergence& e) {
        throw TrainingDivergence(epoch + 1, std::string(e.what()) + " at epoch " +
                                                std::to_string(epoch + 1));
      }
      const auto g = grad.values();
      if (config.optimizer == OptimizerKind::kGradientDescent) {
        for (std::size_t i = 0; i < n_params; ++i) theta[i] -= config.learning_rate * g[i];
      } else {
        beta1_pow *= config.adam_beta1;
        beta2_pow *= config.adam_beta2;
        for (std::size_t i = 0; i < n_params; ++i) {
          m1[i] = config.adam_beta1 * m1[i] + (1.0 - config.adam_beta1) * g[i];
          m2[i] = config.adam_beta2 * m2[i] + (1.0 - config.adam_beta2) * g[i] * g[i];
          const double mhat = m1[i] / (1.0 - beta1_pow);
          const double vhat = m2[i] / (1.0 - beta2_pow);
          theta[i] -= config.learning_rate * mhat / (std::sqrt(vhat) + config.adam_epsilon);
        }
      }
    }

    in.batch = dataset.samples;
    try {
      result.final_terms = loss_terms(result.params, in);
    } catch (const TrainingDivergence& e) {
      throw TrainingDivergence(epoch + 1, std::string(e.what()) + " at epoch " +
                                              std::to_string(epoch + 1));
    }
    result.loss_trace.push_back(result.final_terms.total);
  }
  return result;
}

}  // namespace dmshm
