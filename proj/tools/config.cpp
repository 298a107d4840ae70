#include "config.hpp"

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <string_view>

#include "dmshm/errors.hpp"

namespace dmshm::cli {

namespace {

using nlohmann::json;

std::string join(std::string_view prefix, std::string_view key) {
  return prefix.empty() ? std::string(key) : std::string(prefix) + "." + std::string(key);
}

[[noreturn]] void fail(const std::string& key, const std::string& why) {
  throw ConfigError(key, "config key '" + key + "': " + why);
}

void check_object(const json& j, const std::string& path) {
  if (!j.is_object()) fail(path.empty() ? "<root>" : path, "expected a JSON object");
}

void reject_unknown(const json& j, const std::string& path,
                    std::initializer_list<std::string_view> allowed) {
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      std::string list;
      for (auto a : allowed) list += (list.empty() ? "" : ", ") + std::string(a);
      fail(join(path, key), "unknown key (allowed: " + list + ")");
    }
  }
}

std::size_t read_count(const json& v, const std::string& key) {
  if (!v.is_number_integer() || v.get<long long>() < 0) fail(key, "expected a non-negative integer");
  return v.get<std::size_t>();
}

std::uint64_t read_seed(const json& v, const std::string& key) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
    fail(key, "expected a non-negative integer");
  return v.get<std::uint64_t>();
}

double read_real(const json& v, const std::string& key) {
  if (!v.is_number()) fail(key, "expected a number");
  return v.get<double>();
}

std::string read_string(const json& v, const std::string& key) {
  if (!v.is_string()) fail(key, "expected a string");
  return v.get<std::string>();
}

Vector read_reals(const json& v, const std::string& key) {
  if (!v.is_array()) fail(key, "expected an array of numbers");
  Vector out;
  for (std::size_t i = 0; i < v.size(); ++i)
    out.push_back(read_real(v[i], key + "[" + std::to_string(i) + "]"));
  return out;
}

CsvSource parse_csv(const json& j, const std::filesystem::path& base_dir) {
  check_object(j, "csv");
  reject_unknown(j, "csv", {"path", "period_length", "target_columns"});
  CsvSource src;
  if (!j.contains("path")) fail("csv.path", "required when a csv source is given");
  if (!j.contains("period_length")) fail("csv.period_length", "required when a csv source is given");
  src.path = read_string(j.at("path"), "csv.path");
  if (src.path.is_relative() && !base_dir.empty()) src.path = base_dir / src.path;
  src.period_length = read_count(j.at("period_length"), "csv.period_length");
  if (src.period_length == 0) fail("csv.period_length", "must be >= 1");
  if (j.contains("target_columns")) {
    const auto& cols = j.at("target_columns");
    if (!cols.is_array() || cols.empty()) fail("csv.target_columns", "expected a non-empty array");
    src.target_columns.clear();
    for (const auto& c : cols) src.target_columns.push_back(read_string(c, "csv.target_columns"));
  }
  return src;
}

SyntheticSource parse_synthetic(const json& j) {
  check_object(j, "synthetic");
  reject_unknown(j, "synthetic",
                 {"preset", "seed", "periods", "samples_per_period", "input_dim", "target_dim",
                  "noise_std", "shifts"});
  SyntheticSource src;
  if (j.contains("preset")) {
    src.preset = read_string(j.at("preset"), "synthetic.preset");
    try {
      src.stream = stream_preset(src.preset, 0);
    } catch (const std::out_of_range&) {
      std::string list;
      for (const auto& p : stream_preset_names()) list += (list.empty() ? "" : ", ") + p;
      fail("synthetic.preset", "unknown preset '" + src.preset + "' (available: " + list + ")");
    }
  }
  auto& s = src.stream;
  if (j.contains("seed")) src.seed = read_seed(j.at("seed"), "synthetic.seed");
  if (j.contains("periods")) s.periods = read_count(j.at("periods"), "synthetic.periods");
  if (j.contains("samples_per_period"))
    s.samples_per_period = read_count(j.at("samples_per_period"), "synthetic.samples_per_period");
  if (j.contains("input_dim")) s.input_dim = read_count(j.at("input_dim"), "synthetic.input_dim");
  if (j.contains("target_dim")) s.target_dim = read_count(j.at("target_dim"), "synthetic.target_dim");
  if (j.contains("noise_std")) s.noise_std = read_real(j.at("noise_std"), "synthetic.noise_std");
  if (j.contains("shifts")) {
    const auto& arr = j.at("shifts");
    if (!arr.is_array()) fail("synthetic.shifts", "expected an array");
    s.shift_schedule.clear();
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const auto path = "synthetic.shifts[" + std::to_string(i) + "]";
      check_object(arr[i], path);
      reject_unknown(arr[i], path, {"period", "mean_offset", "scale"});
      ShiftEvent e;
      if (!arr[i].contains("period")) fail(path + ".period", "required");
      e.period = read_count(arr[i].at("period"), path + ".period");
      if (arr[i].contains("mean_offset"))
        e.mean_offset = read_reals(arr[i].at("mean_offset"), path + ".mean_offset");
      if (arr[i].contains("scale")) e.scale = read_real(arr[i].at("scale"), path + ".scale");
      s.shift_schedule.push_back(std::move(e));
    }
  }
  try {
    validate_stream_config(s);
  } catch (const std::invalid_argument& e) {
    fail("synthetic", e.what());
  }
  return src;
}

void parse_train(const json& j, TrainConfig& t) {
  check_object(j, "train");
  reject_unknown(j, "train", {"learning_rate", "epochs", "batch_size", "optimizer", "hidden_dim"});
  if (j.contains("learning_rate")) t.learning_rate = read_real(j.at("learning_rate"), "train.learning_rate");
  if (j.contains("epochs")) t.epochs = read_count(j.at("epochs"), "train.epochs");
  if (j.contains("batch_size")) t.batch_size = read_count(j.at("batch_size"), "train.batch_size");
  if (j.contains("hidden_dim")) t.hidden_dim = read_count(j.at("hidden_dim"), "train.hidden_dim");
  if (j.contains("optimizer")) {
    const auto name = read_string(j.at("optimizer"), "train.optimizer");
    if (name == "adam") t.optimizer = OptimizerKind::kAdam;
    else if (name == "sgd") t.optimizer = OptimizerKind::kGradientDescent;
    else fail("train.optimizer", "expected \"adam\" or \"sgd\", got \"" + name + "\"");
  }
  if (!(t.learning_rate > 0.0)) fail("train.learning_rate", "must be > 0");
  if (t.epochs == 0) fail("train.epochs", "must be >= 1");
  if (t.batch_size == 0) fail("train.batch_size", "must be >= 1");
  if (t.hidden_dim == 0) fail("train.hidden_dim", "must be >= 1");
}

void parse_loss_weights(const json& j, LossWeights& w) {
  check_object(j, "loss_weights");
  reject_unknown(j, "loss_weights", {"alpha", "beta", "xi", "delta"});
  auto read = [&](const char* key, double& dst) {
    if (!j.contains(key)) return;
    const auto path = join("loss_weights", key);
    dst = read_real(j.at(key), path);
    if (!(dst >= 0.0)) fail(path, "must be >= 0");
  };
  read("alpha", w.alpha);
  read("beta", w.beta);
  read("xi", w.xi);
  read("delta", w.delta);
}

}  // namespace

ExperimentConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
  check_object(doc, "");
  reject_unknown(doc, "",
                 {"csv", "synthetic", "methods", "memory_budget", "loss_weights", "train",
                  "future_fraction", "seeds", "output_dir", "jobs", "projection"});
  ExperimentConfig c;

  if (doc.contains("csv") && doc.contains("synthetic"))
    fail("csv", "give exactly one data source: 'csv' or 'synthetic'");
  if (doc.contains("csv")) c.data = parse_csv(doc.at("csv"), base_dir);
  if (doc.contains("synthetic")) c.data = parse_synthetic(doc.at("synthetic"));

  if (doc.contains("methods")) {
    const auto& arr = doc.at("methods");
    if (!arr.is_array() || arr.empty()) fail("methods", "expected a non-empty array of method names");
    c.methods.clear();
    for (const auto& v : arr) {
      const auto name = read_string(v, "methods");
      const auto kind = parse_method(name);
      if (!kind) fail("methods", "unknown method '" + name + "'");
      if (std::find(c.methods.begin(), c.methods.end(), *kind) != c.methods.end())
        fail("methods", "method '" + name + "' listed twice");
      c.methods.push_back(*kind);
    }
  }
  if (doc.contains("memory_budget")) {
    c.memory_budget = read_count(doc.at("memory_budget"), "memory_budget");
    if (c.memory_budget == 0) fail("memory_budget", "must be >= 1");
  }
  if (doc.contains("loss_weights")) parse_loss_weights(doc.at("loss_weights"), c.train.loss_weights);
  if (doc.contains("train")) parse_train(doc.at("train"), c.train);
  if (doc.contains("future_fraction")) {
    c.future_fraction = read_real(doc.at("future_fraction"), "future_fraction");
    if (!(c.future_fraction > 0.0 && c.future_fraction <= 1.0))
      fail("future_fraction", "must lie in (0, 1]");
  }
  if (doc.contains("seeds")) {
    const auto& arr = doc.at("seeds");
    if (!arr.is_array() || arr.empty()) fail("seeds", "expected a non-empty array of integers");
    c.seeds.clear();
    for (const auto& v : arr) c.seeds.push_back(read_seed(v, "seeds"));
  }
  if (doc.contains("output_dir")) c.output_dir = read_string(doc.at("output_dir"), "output_dir");
  if (doc.contains("jobs")) {
    c.jobs = read_count(doc.at("jobs"), "jobs");
    if (c.jobs == 0) fail("jobs", "must be >= 1");
  }
  if (doc.contains("projection")) {
    if (!doc.at("projection").is_boolean()) fail("projection", "expected true or false");
    c.projection = doc.at("projection").get<bool>();
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot read config file '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("<file>", "config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_config(doc, path.parent_path());
}

nlohmann::ordered_json to_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  if (const auto* csv = std::get_if<CsvSource>(&c.data)) {
    j["csv"] = {{"path", csv->path.string()},
                {"period_length", csv->period_length},
                {"target_columns", csv->target_columns}};
  } else {
    const auto& syn = std::get<SyntheticSource>(c.data);
    nlohmann::ordered_json s;
    s["preset"] = syn.preset;
    if (syn.seed) s["seed"] = *syn.seed;
    s["periods"] = syn.stream.periods;
    s["samples_per_period"] = syn.stream.samples_per_period;
    s["input_dim"] = syn.stream.input_dim;
    s["target_dim"] = syn.stream.target_dim;
    s["noise_std"] = syn.stream.noise_std;
    auto shifts = nlohmann::ordered_json::array();
    for (const auto& e : syn.stream.shift_schedule)
      shifts.push_back({{"period", e.period}, {"mean_offset", e.mean_offset}, {"scale", e.scale}});
    s["shifts"] = std::move(shifts);
    j["synthetic"] = std::move(s);
  }
  auto methods = nlohmann::ordered_json::array();
  for (auto m : c.methods) methods.push_back(method_name(m));
  j["methods"] = std::move(methods);
  j["memory_budget"] = c.memory_budget;
  const auto& w = c.train.loss_weights;
  j["loss_weights"] = {{"alpha", w.alpha}, {"beta", w.beta}, {"xi", w.xi}, {"delta", w.delta}};
  j["train"] = {{"learning_rate", c.train.learning_rate},
                {"epochs", c.train.epochs},
                {"batch_size", c.train.batch_size},
                {"optimizer", c.train.optimizer == OptimizerKind::kAdam ? "adam" : "sgd"},
                {"hidden_dim", c.train.hidden_dim}};
  j["future_fraction"] = c.future_fraction;
  j["seeds"] = c.seeds;
  j["output_dir"] = c.output_dir.string();
  j["jobs"] = c.jobs;
  j["projection"] = c.projection;
  return j;
}

}  // namespace dmshm::cli
