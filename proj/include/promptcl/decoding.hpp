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

#ifndef PROMPTCL_DECODING_HPP_
#define PROMPTCL_DECODING_HPP_

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "promptcl/corpus.hpp"
#include "promptcl/model.hpp"

namespace promptcl {

class LabelTrie {
 public:
  struct Node {
    std::map<TokenId, std::size_t> children;
    bool terminal = false;
    std::string label;  // set on terminal nodes
    std::size_t depth = 0;
  };

  // Throws DecodingError naming any label that is empty or maps to UNK.
  static LabelTrie build(std::span<const std::string> labels, const Vocabulary& vocab);

  std::size_t root() const { return 0; }
  const Node& node(std::size_t i) const { return nodes_.at(i); }
  std::size_t node_count() const { return nodes_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }
  bool contains(const std::string& label) const;
  std::size_t max_label_length() const { return max_len_; }
  // Labels that are a strict prefix of another label.
  const std::vector<std::string>& prefix_labels() const { return prefix_labels_; }

  // Children of the node plus EOS when it is terminal, ascending.
  std::vector<TokenId> allowed(std::size_t node) const;
  std::optional<std::size_t> child(std::size_t node, TokenId token) const;
  std::string smallest_reachable(std::size_t node) const;

 private:
  std::vector<Node> nodes_;
  std::vector<std::string> labels_;  // sorted, unique
  std::vector<std::string> prefix_labels_;
  std::size_t max_len_ = 0;
};

// Probabilities over the vocabulary restricted to the allowed ids; disallowed
// entries are exactly 0. Allowed ids must be ascending and unique.
std::vector<double> masked_step(std::span<const double> logits, std::span<const TokenId> allowed);

struct DecodeResult {
  std::string label;
  std::vector<TokenId> tokens;  // emitted tokens, EOS excluded
  bool hit_max_steps = false;
};

DecodeResult constrained_greedy(const FrozenBackbone& bb, std::span<const double> h,
                                const LabelTrie& trie, std::size_t max_steps = 0);
DecodeResult unconstrained_greedy(const FrozenBackbone& bb, std::span<const double> h,
                                  const Vocabulary& vocab, std::size_t max_steps);

enum class InferenceMode { task_aware, task_agnostic };
std::string to_string(InferenceMode m);

struct Prediction {
  std::string constrained;
  std::string unconstrained;
};

// Decodes with the given prompt rows prepended; the trie's max label length + 1
// bounds both decoders.
Prediction predict_with_prompts(const FrozenBackbone& bb, std::span<const RealMatrix* const> prompts,
                                const LabeledExample& ex, const LabelTrie& trie,
                                const Vocabulary& vocab);

Prediction predict(InferenceMode mode, const FrozenBackbone& bb, const PromptPool& pool,
                   const Prompt* prompt_of_task, const LabeledExample& ex, const LabelTrie& trie,
                   const Vocabulary& vocab);

}  // namespace promptcl

#endif  // PROMPTCL_DECODING_HPP_
