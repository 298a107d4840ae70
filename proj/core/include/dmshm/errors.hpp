#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dmshm {

/// Malformed or unreadable input data (CSV files, stream shapes).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid experiment configuration. `key()` names the offending field.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error(what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// A non-finite loss or gradient was produced during training.
class TrainingDivergence : public std::runtime_error {
 public:
  TrainingDivergence(std::size_t epoch, const std::string& what)
      : std::runtime_error(what), epoch_(epoch) {}

  std::size_t epoch() const noexcept { return epoch_; }
  // 0 when raised outside of an experiment loop.
  std::size_t period() const noexcept { return period_; }
  void set_period(std::size_t period) noexcept { period_ = period; }

 private:
  std::size_t epoch_;
  std::size_t period_ = 0;
};

}  // namespace dmshm
