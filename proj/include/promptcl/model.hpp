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

#ifndef PROMPTCL_MODEL_HPP_
#define PROMPTCL_MODEL_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "promptcl/corpus.hpp"
#include "promptcl/kernel.hpp"

namespace promptcl {

// Standard deviations of the seeded Gaussian init. A non-positive hidden_std
// selects d^-1/2.
struct BackboneInit {
  double embed_std = 1.0;
  double hidden_std = 0.0;
  double output_std = 1.0;

  friend bool operator==(const BackboneInit&, const BackboneInit&) = default;
};

struct FrozenBackbone {
  RealMatrix E;   // V×d token embeddings
  RealMatrix W1;  // d×d
  RealMatrix W2;  // d×d
  RealMatrix b;   // 1×d
  RealMatrix W3;  // V×d
  std::uint64_t seed = 0;

  std::size_t vocab_size() const { return E.rows(); }
  std::size_t dim() const { return E.cols(); }

  friend bool operator==(const FrozenBackbone&, const FrozenBackbone&) = default;
};

FrozenBackbone make_backbone(std::size_t vocab_size, std::size_t dim, std::uint64_t seed,
                             const BackboneInit& init = {});

enum class PromptKind { trained, aggregated };
std::string to_string(PromptKind kind);
PromptKind prompt_kind_from_string(const std::string& text);

struct Prompt {
  // Tasks whose knowledge the prompt carries; one entry unless aggregated.
  std::vector<std::string> tasks;
  RealMatrix matrix;
  PromptKind kind = PromptKind::trained;

  bool holds(const std::string& task) const;
  friend bool operator==(const Prompt&, const Prompt&) = default;
};

struct PoolEntry {
  Prompt prompt;
  std::vector<double> score_history;

  friend bool operator==(const PoolEntry&, const PoolEntry&) = default;
};

class PromptPool {
 public:
  std::vector<PoolEntry> entries;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
  const Prompt& prompt(std::size_t i) const { return entries.at(i).prompt; }
  void append(Prompt p) { entries.push_back({std::move(p), {}}); }
  std::vector<const RealMatrix*> matrices() const;
  std::optional<std::size_t> find_task(const std::string& task) const;

  friend bool operator==(const PromptPool&, const PromptPool&) = default;
};

// Pure inference path. Prompt rows are prepended in the given order.
RealMatrix assemble_values(const FrozenBackbone& bb, std::span<const RealMatrix* const> prompts,
                           std::span<const TokenId> tokens);
std::vector<double> encode(const FrozenBackbone& bb, std::span<const RealMatrix* const> prompts,
                           std::span<const TokenId> tokens);
std::vector<double> step_logits(const FrozenBackbone& bb, std::span<const double> h,
                                TokenId previous);

// Teacher-forced logits for every gold label token of the example.
std::vector<std::vector<double>> forward(const FrozenBackbone& bb, const PromptPool& pool,
                                         const Prompt* new_prompt, const LabeledExample& ex);

// Backbone weights registered on a tape as non-differentiable references.
struct BackboneVars {
  Tape::Var E, W1, W2, b, W3, zero_d, zero_v;
};
BackboneVars bind_backbone(Tape& tape, const FrozenBackbone& bb);

// Summed token cross-entropy of one example; prompt_vars are l×d rows in order.
Tape::Var example_loss(Tape& tape, const BackboneVars& vars, std::span<const Tape::Var> prompt_vars,
                       const LabeledExample& ex);

struct TrainConfig {
  std::size_t prompt_length = 10;
  std::size_t epochs = 10;
  std::size_t batch_size = 8;
  double learning_rate = 0.5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double init_scale = 0.5;
  std::uint64_t seed = 0;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct TrainResult {
  Prompt prompt;
  std::vector<double> epoch_losses;  // mean example loss per epoch
};

RealMatrix init_prompt(std::size_t length, std::size_t dim, double scale, std::uint64_t seed);

TrainResult train_prompt(const FrozenBackbone& bb, const PromptPool& pool, const TaskSpec& task,
                         const Dataset& data, const TrainConfig& cfg);

enum class ScoringContext { full_pool, solo };
std::string to_string(ScoringContext ctx);
ScoringContext scoring_context_from_string(const std::string& text);

// Frobenius norm of d loss / d prompt j for each example, in data order.
std::vector<double> example_gradient_norms(const FrozenBackbone& bb, const PromptPool& pool,
                                           std::size_t prompt_index, const Dataset& data,
                                           ScoringContext ctx, bool parallel);
double prompt_gradient_norm(const FrozenBackbone& bb, const PromptPool& pool,
                            std::size_t prompt_index, const Dataset& data,
                            ScoringContext ctx = ScoringContext::full_pool, bool parallel = false);
// g for every pool prompt; the full-pool context shares one backward per example.
std::vector<double> pool_gradient_norms(const FrozenBackbone& bb, const PromptPool& pool,
                                        const Dataset& data, ScoringContext ctx, bool parallel);

}  // namespace promptcl

#endif  // PROMPTCL_MODEL_HPP_
