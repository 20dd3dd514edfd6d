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

#ifndef PROMPTCL_POOL_HPP_
#define PROMPTCL_POOL_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "promptcl/model.hpp"

namespace promptcl {

struct ScoreTable {
  std::vector<double> g;
  double mean = 0.0;
  double stddev = 0.0;  // population
  double tau = 0.0;
  double alpha = 0.0;
};

ScoreTable make_score_table(std::vector<double> g, double alpha);

// Scores every pool prompt against data and appends g_j to its history.
ScoreTable score_pool(const FrozenBackbone& bb, PromptPool& pool, const Dataset& data, double alpha,
                      ScoringContext ctx, bool parallel = false);

struct Partition {
  std::vector<std::size_t> high;
  std::vector<std::size_t> low;
};

// g > tau and g == tau go high; g < tau goes low.
Partition partition_pool(const ScoreTable& scores);

// g_j / sum(g); uniform when the sum is below 1e-12.
std::vector<double> aggregation_weights(std::span<const double> g_low);

std::optional<Prompt> aggregate_low(const PromptPool& pool, const Partition& part,
                                    const ScoreTable& scores);

// High prompts in order, then the aggregate when the low set is non-empty.
PromptPool compress(const PromptPool& pool, const Partition& part, const ScoreTable& scores);
PromptPool compress_and_append(const PromptPool& pool, const Partition& part,
                               const ScoreTable& scores, Prompt new_prompt);

enum class Strategy { gradient, fifo, random, keep_all };
std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& text);

struct StrategyInputs {
  std::optional<std::size_t> budget;
  const ScoreTable* scores = nullptr;
  std::uint64_t seed = 0;
};

// gradient compresses by scores; fifo/random evict down to the budget;
// keep_all returns the pool untouched.
PromptPool apply_strategy(Strategy s, PromptPool pool, const StrategyInputs& in);

struct MemoryReport {
  std::size_t prompts = 0;
  std::size_t bytes_per_prompt = 0;
  std::size_t total_bytes = 0;
  double total_kb = 0.0;  // 1 KB = 1024 bytes
  std::size_t reference_prompts = 0;
  std::size_t reference_bytes = 0;
  double reduction = 0.0;  // 1 - total / reference; 0 with no reference
};

MemoryReport memory_report(std::size_t prompts, std::size_t bytes_per_value, std::size_t l,
                           std::size_t d, std::size_t reference_prompts = 0);

inline constexpr int kSnapshotVersion = 1;

void snapshot_save(const PromptPool& pool, const std::filesystem::path& path);
PromptPool snapshot_load(const std::filesystem::path& path);

void write_scores_csv(const std::filesystem::path& path,
                      const std::vector<std::pair<std::string, ScoreTable>>& rounds);

}  // namespace promptcl

#endif  // PROMPTCL_POOL_HPP_
