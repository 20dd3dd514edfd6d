// Copyright 2026 The promptcl Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PROMPTCL_CONFIG_HPP_
#define PROMPTCL_CONFIG_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"
#include "promptcl/corpus.hpp"
#include "promptcl/model.hpp"
#include "promptcl/pool.hpp"

namespace promptcl {

struct StreamConfig {
  std::string source = "synthetic";  // synthetic | jsonl
  std::string manifest;              // jsonl manifest path
  StreamRecipe recipe;

  friend bool operator==(const StreamConfig&, const StreamConfig&) = default;
};

struct ModelConfig {
  std::size_t vocab_cap = 5000;
  std::size_t dim = 16;
  BackboneInit init;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct SelectionConfig {
  Strategy strategy = Strategy::gradient;
  double alpha = 0.5;
  ScoringContext scoring_context = ScoringContext::full_pool;
  std::optional<std::size_t> budget = 5;

  friend bool operator==(const SelectionConfig&, const SelectionConfig&) = default;
};

struct SamplingConfig {
  bool enabled = true;
  std::size_t k = 20;
  std::size_t clusters = 8;
  std::size_t max_iters = 100;
  double tol = 1e-4;

  friend bool operator==(const SamplingConfig&, const SamplingConfig&) = default;
};

struct DecodingConfig {
  bool constrained = true;
  bool union_labels = false;
  bool write_predictions = false;

  friend bool operator==(const DecodingConfig&, const DecodingConfig&) = default;
};

struct TaskIdConfig {
  bool enabled = true;
  std::string provider = "stub";  // stub | http | none
  std::string url;
  int retries = 2;
  int backoff_ms = 1000;
  int timeout_ms = 10000;
  std::string on_failure = "halt";  // halt | identity

  friend bool operator==(const TaskIdConfig&, const TaskIdConfig&) = default;
};

struct MetricsConfig {
  double forgotten_epsilon = 0.0;
  std::size_t bytes_per_value = 4;

  friend bool operator==(const MetricsConfig&, const MetricsConfig&) = default;
};

struct RunSection {
  std::uint64_t seed = 0;
  std::string out_dir = "runs/default";
  bool write_snapshot = true;

  friend bool operator==(const RunSection&, const RunSection&) = default;
};

struct RunConfig {
  StreamConfig stream;
  ModelConfig model;
  TrainConfig training;
  SelectionConfig selection;
  SamplingConfig sampling;
  DecodingConfig decoding;
  TaskIdConfig taskid;
  MetricsConfig metrics;
  RunSection run;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

// Fifteen tasks cycling through the five synthetic families; two of them
// carry numeric labels on top of the always-numeric choice tasks.
StreamRecipe default_stream_recipe();
RunConfig default_config();

nlohmann::json config_to_json(const RunConfig& cfg);
// Missing keys take defaults; unknown keys and bad values raise ConfigError.
RunConfig config_from_json(const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& path);
void validate_config(const RunConfig& cfg);

// Plain-text listing of every key with its default.
std::string config_reference();

}  // namespace promptcl

#endif  // PROMPTCL_CONFIG_HPP_
