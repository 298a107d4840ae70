#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dmshm/data.hpp"
#include "dmshm/memory.hpp"

namespace dmshm {

/// (k, r, m): input width, representation width, output width.
struct Shape {
  std::size_t input = 0;
  std::size_t hidden = 0;
  std::size_t output = 0;

  std::size_t parameter_count() const noexcept {
    return hidden * input + hidden + output * hidden + output;
  }
  bool operator==(const Shape&) const = default;
};

/// Parameters of f = g . h with h(x) = tanh(W_h x + b_h), g(z) = W_g z + b_g.
/// Stored flat as [W_h (r x k, row-major) | b_h | W_g (m x r) | b_g]; the
/// same layout is used for gradients.
class RegressorParams {
 public:
  RegressorParams() = default;
  explicit RegressorParams(Shape shape);

  /// Fan-in uniform init: each layer's entries ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  static RegressorParams initialize(Shape shape, std::uint64_t seed);

  const Shape& shape() const noexcept { return shape_; }
  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  std::span<double> hidden_weight() noexcept { return values().subspan(0, shape_.hidden * shape_.input); }
  std::span<const double> hidden_weight() const noexcept {
    return values().subspan(0, shape_.hidden * shape_.input);
  }
  std::span<double> hidden_bias() noexcept { return values().subspan(hidden_bias_offset(), shape_.hidden); }
  std::span<const double> hidden_bias() const noexcept {
    return values().subspan(hidden_bias_offset(), shape_.hidden);
  }
  std::span<double> head_weight() noexcept {
    return values().subspan(head_weight_offset(), shape_.output * shape_.hidden);
  }
  std::span<const double> head_weight() const noexcept {
    return values().subspan(head_weight_offset(), shape_.output * shape_.hidden);
  }
  std::span<double> head_bias() noexcept { return values().subspan(head_bias_offset(), shape_.output); }
  std::span<const double> head_bias() const noexcept {
    return values().subspan(head_bias_offset(), shape_.output);
  }

  bool operator==(const RegressorParams&) const = default;

 private:
  std::size_t hidden_bias_offset() const noexcept { return shape_.hidden * shape_.input; }
  std::size_t head_weight_offset() const noexcept { return hidden_bias_offset() + shape_.hidden; }
  std::size_t head_bias_offset() const noexcept {
    return head_weight_offset() + shape_.output * shape_.hidden;
  }

  Shape shape_;
  std::vector<double> values_;
};

using ParamGradient = RegressorParams;

struct Prediction {
  Vector z;
  Vector yhat;
};

/// z = tanh(W_h x + b_h), yhat = W_g z + b_g.
Prediction forward(const RegressorParams& params, std::span<const double> x);

/// h(x) only.
Vector represent(const RegressorParams& params, std::span<const double> x);

/// Coefficients of the total loss
///   alpha * memory_repr + beta * memory_pred + xi * hint + delta * current.
struct LossWeights {
  double alpha = 1.0;
  double beta = 1.0;
  double xi = 1.0;
  double delta = 1.0;

  bool operator==(const LossWeights&) const = default;
};

void validate_loss_weights(const LossWeights& w);

struct LossTerms {
  double total = 0.0;
  double hint = 0.0;          // mean over batch of MAE(h_prev(x), h(x))
  double memory_repr = 0.0;   // mean over memory of MAE(z, h(x))
  double memory_pred = 0.0;   // mean over memory of MAE(y, f(x))
  double current = 0.0;       // (weighted) mean over batch of MAE(y, f(x))
};

/// Everything the loss depends on besides the trainable parameters.
/// `previous` is the frozen model of the last period (null in period 1).
/// `batch_weights`, when non-empty, weights the current-data term per
/// sample (normalized by their sum); empty means uniform.
struct LossInputs {
  const RegressorParams* previous = nullptr;
  std::span<const MemoryEntry> memory;
  std::span<const Sample> batch;
  LossWeights weights;
  std::span<const double> batch_weights;
};

/// Throws TrainingDivergence (epoch 0) on a non-finite intermediate.
LossTerms loss_terms(const RegressorParams& params, const LossInputs& in);

/// Analytic gradient of LossTerms::total; MAE subgradient at a zero
/// residual is 0. Terms with a zero coefficient are skipped.
ParamGradient gradient(const RegressorParams& params, const LossInputs& in);

enum class OptimizerKind { kGradientDescent, kAdam };

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::size_t hidden_dim = 32;
  LossWeights loss_weights;
  std::uint64_t seed = 0;
};

void validate_train_config(const TrainConfig& config);

struct TrainResult {
  RegressorParams params;
  std::vector<double> loss_trace;  // total loss over the full period after each epoch
  LossTerms final_terms;
};

/// Trains one period. Starts from `previous` when given (which stays frozen
/// as the hint teacher), else from RegressorParams::initialize with
/// config.seed. Each epoch shuffles the dataset into minibatches; every step
/// adds the full-memory terms. Throws TrainingDivergence with the epoch index.
TrainResult train_period(const RegressorParams* previous, const MemorySet& memory,
                         const PeriodDataset& dataset, const TrainConfig& config);

}  // namespace dmshm
