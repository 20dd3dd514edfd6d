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

#ifndef PROMPTCL_HARNESS_HPP_
#define PROMPTCL_HARNESS_HPP_

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "promptcl/config.hpp"
#include "promptcl/corpus.hpp"
#include "promptcl/decoding.hpp"
#include "promptcl/model.hpp"
#include "promptcl/pool.hpp"
#include "promptcl/taskid.hpp"

namespace promptcl {

// R(j, i): accuracy on task i after training through task j. Cells may be unset.
class AccuracyMatrix {
 public:
  AccuracyMatrix() = default;
  explicit AccuracyMatrix(std::size_t n) : n_(n), values_(n * n, 0.0), set_(n * n, 0) {}

  std::size_t size() const { return n_; }
  void set(std::size_t j, std::size_t i, double v);
  bool has(std::size_t j, std::size_t i) const { return set_.at(j * n_ + i) != 0; }
  double at(std::size_t j, std::size_t i) const;
  AccuracyMatrix truncated(std::size_t n) const;

  friend bool operator==(const AccuracyMatrix&, const AccuracyMatrix&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> values_;
  std::vector<char> set_;
};

struct MetricValue {
  double value = 0.0;
  bool defined = false;
};

MetricValue bwt(const AccuracyMatrix& R);
// label_counts[i] = |L_i|; the baseline for task i is 1 / |L_i|.
MetricValue fwt(const AccuracyMatrix& R, std::span<const std::size_t> label_counts);
std::size_t forgotten_count(const AccuracyMatrix& R, double epsilon = 0.0);
double average_final_accuracy(const AccuracyMatrix& R);

struct ModeMetrics {
  MetricValue bwt;
  MetricValue fwt;
  std::size_t forgotten = 0;
  double average_final = 0.0;
};

struct TaskRecord {
  std::string name;
  std::string identified_type;
  std::string identification;  // rules | fallback | identity
  std::vector<std::string> raw_labels;
  std::vector<std::string> remapped_labels;
  std::size_t train_examples = 0;
  std::size_t representatives = 0;
  std::size_t fill_representatives = 0;
  std::vector<double> epoch_losses;
};

struct ScoreRound {
  std::string task;
  ScoreTable table;
  Partition partition;
  std::size_t pool_before = 0;
  std::size_t pool_after = 0;  // after compression, before the new prompt
};

struct PredictionRow {
  std::size_t checkpoint = 0;
  std::string task;
  std::size_t example = 0;
  std::string gold;
  std::string unconstrained;
  std::string constrained;
  std::string mode;
};

struct DecodingTally {
  std::size_t constrained_predictions = 0;
  std::size_t in_label_set = 0;
  std::size_t unconstrained_predictions = 0;
  std::size_t unconstrained_off_label = 0;
  // Examples the unconstrained decoder got right and the constrained one did not.
  std::size_t dominance_violations = 0;
};

struct RunReport {
  nlohmann::json config;
  std::uint64_t seed = 0;
  std::string order_tag;
  bool partial = false;
  std::string error;
  std::vector<TaskRecord> tasks;
  AccuracyMatrix task_aware;
  AccuracyMatrix task_agnostic;
  ModeMetrics aware_metrics;
  ModeMetrics agnostic_metrics;
  std::vector<std::size_t> pool_sizes;
  MemoryReport memory;
  std::vector<ScoreRound> rounds;
  DecodingTally decoding;
  std::vector<PredictionRow> predictions;
  PromptPool final_pool;
};

struct EvalResult {
  double accuracy = 0.0;
  std::vector<Prediction> predictions;
  DecodingTally tally;
};

// Scores test examples with the prompts prepended. The scored output is the
// constrained label when constrained is set, the raw greedy text otherwise.
EvalResult evaluate_task(const FrozenBackbone& bb, std::span<const RealMatrix* const> prompts,
                         const Dataset& test, const LabelTrie& trie, const Vocabulary& vocab,
                         bool constrained, bool parallel);

// Internal state of a run, exposed for standalone re-evaluation.
struct RunArtifacts {
  Vocabulary vocab;
  FrozenBackbone backbone;
  std::vector<StreamTask> tasks;  // remapped and tokenized
  std::vector<LabelTrie> tries;
};

struct HarnessOptions {
  bool parallel = parallel_enabled();
  // Replaces the provider named in the config (tests, CLI --provider-url).
  RemapperProvider* provider = nullptr;
  RunArtifacts* artifacts = nullptr;
};

TaskStream load_stream(const RunConfig& cfg, const std::filesystem::path& base_dir = {});

RunReport run_stream(const TaskStream& stream, const RunConfig& cfg,
                     const HarnessOptions& options = {});

nlohmann::json report_to_json(const RunReport& report);
std::string matrix_csv(const AccuracyMatrix& R, const std::vector<std::string>& names);
void write_run_outputs(const RunReport& report, const std::filesystem::path& dir,
                       bool write_snapshot = true);

// Quotes a CSV field when it holds a comma, quote or line break.
std::string csv_field(const std::string& text);

}  // namespace promptcl

#endif  // PROMPTCL_HARNESS_HPP_
