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

#include "promptcl/decoding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace promptcl {

LabelTrie LabelTrie::build(std::span<const std::string> labels, const Vocabulary& vocab) {
  LabelTrie trie;
  trie.nodes_.emplace_back();
  std::set<std::string> unique;
  for (const auto& l : labels) unique.insert(normalize_text(l));
  if (unique.empty()) throw DecodingError("label trie needs at least one label");
  for (const auto& label : unique) {
    const std::vector<TokenId> ids = vocab.encode(label);
    if (ids.empty()) throw DecodingError("label '" + label + "' has no tokens");
    for (TokenId t : ids) {
      if (t == kUnkId) throw DecodingError("label '" + label + "' contains an out-of-vocabulary word");
    }
    std::size_t at = 0;
    for (TokenId t : ids) {
      auto it = trie.nodes_[at].children.find(t);
      if (it == trie.nodes_[at].children.end()) {
        Node n;
        n.depth = trie.nodes_[at].depth + 1;
        trie.nodes_.push_back(std::move(n));
        it = trie.nodes_[at].children.emplace(t, trie.nodes_.size() - 1).first;
      }
      at = it->second;
    }
    trie.nodes_[at].terminal = true;
    trie.nodes_[at].label = label;
    trie.labels_.push_back(label);
    trie.max_len_ = std::max(trie.max_len_, ids.size());
  }
  for (const auto& n : trie.nodes_) {
    if (n.terminal && !n.children.empty()) trie.prefix_labels_.push_back(n.label);
  }
  std::sort(trie.prefix_labels_.begin(), trie.prefix_labels_.end());
  return trie;
}

bool LabelTrie::contains(const std::string& label) const {
  return std::binary_search(labels_.begin(), labels_.end(), label);
}

std::vector<TokenId> LabelTrie::allowed(std::size_t node) const {
  const Node& n = nodes_.at(node);
  std::vector<TokenId> out;
  if (n.terminal) out.push_back(kEosId);
  for (const auto& [tok, _] : n.children) out.push_back(tok);
  std::sort(out.begin(), out.end());
  return out;
}

std::optional<std::size_t> LabelTrie::child(std::size_t node, TokenId token) const {
  const auto& ch = nodes_.at(node).children;
  auto it = ch.find(token);
  if (it == ch.end()) return std::nullopt;
  return it->second;
}

std::string LabelTrie::smallest_reachable(std::size_t node) const {
  std::string best;
  std::vector<std::size_t> stack{node};
  while (!stack.empty()) {
    const std::size_t at = stack.back();
    stack.pop_back();
    const Node& n = nodes_[at];
    if (n.terminal && (best.empty() || n.label < best)) best = n.label;
    for (const auto& [_, next] : n.children) stack.push_back(next);
  }
  return best;
}

std::vector<double> masked_step(std::span<const double> logits, std::span<const TokenId> allowed) {
  if (allowed.empty()) throw DecodingError("decoding mask is empty");
  std::vector<double> out(logits.size(), 0.0);
  double top = -std::numeric_limits<double>::infinity();
  for (TokenId t : allowed) {
    if (t >= logits.size()) throw DecodingError("mask names a token outside the vocabulary");
    top = std::max(top, logits[t]);
  }
  // Same arithmetic as softmax() so a full mask reproduces it bit for bit.
  double total = 0.0;
  for (TokenId t : allowed) {
    out[t] = std::exp(logits[t] - top);
    total += out[t];
  }
  for (TokenId t : allowed) out[t] /= total;
  return out;
}

namespace {

TokenId argmax_allowed(std::span<const double> probs, std::span<const TokenId> allowed) {
  TokenId best = allowed[0];
  for (TokenId t : allowed) {
    if (probs[t] > probs[best]) best = t;
  }
  return best;
}

}  // namespace

DecodeResult constrained_greedy(const FrozenBackbone& bb, std::span<const double> h,
                                const LabelTrie& trie, std::size_t max_steps) {
  if (trie.labels().empty()) throw DecodingError("empty label trie");
  if (max_steps == 0) max_steps = trie.max_label_length() + 1;
  DecodeResult r;
  std::size_t at = trie.root();
  std::string deepest;
  TokenId prev = kBosId;
  for (std::size_t step = 0; step < max_steps; ++step) {
    const std::vector<TokenId> allowed = trie.allowed(at);
    const std::vector<double> probs = masked_step(step_logits(bb, h, prev), allowed);
    const TokenId pick = argmax_allowed(probs, allowed);
    if (pick == kEosId) {
      r.label = trie.node(at).label;
      return r;
    }
    r.tokens.push_back(pick);
    at = *trie.child(at, pick);
    if (trie.node(at).terminal) deepest = trie.node(at).label;
    prev = pick;
  }
  r.hit_max_steps = true;
  r.label = !deepest.empty() ? deepest : trie.smallest_reachable(at);
  return r;
}

DecodeResult unconstrained_greedy(const FrozenBackbone& bb, std::span<const double> h,
                                  const Vocabulary& vocab, std::size_t max_steps) {
  DecodeResult r;
  TokenId prev = kBosId;
  for (std::size_t step = 0; step < max_steps; ++step) {
    const std::vector<double> probs = softmax(step_logits(bb, h, prev));
    const auto pick = static_cast<TokenId>(
        std::max_element(probs.begin(), probs.end()) - probs.begin());
    if (pick == kEosId) {
      r.label = vocab.decode(r.tokens, false);
      return r;
    }
    r.tokens.push_back(pick);
    prev = pick;
  }
  r.hit_max_steps = true;
  r.label = vocab.decode(r.tokens, false);
  return r;
}

std::string to_string(InferenceMode m) {
  return m == InferenceMode::task_aware ? "task_aware" : "task_agnostic";
}

Prediction predict_with_prompts(const FrozenBackbone& bb, std::span<const RealMatrix* const> prompts,
                                const LabeledExample& ex, const LabelTrie& trie,
                                const Vocabulary& vocab) {
  const std::vector<double> h = encode(bb, prompts, ex.token_ids);
  const std::size_t steps = trie.max_label_length() + 1;
  return {constrained_greedy(bb, h, trie, steps).label,
          unconstrained_greedy(bb, h, vocab, steps).label};
}

Prediction predict(InferenceMode mode, const FrozenBackbone& bb, const PromptPool& pool,
                   const Prompt* prompt_of_task, const LabeledExample& ex, const LabelTrie& trie,
                   const Vocabulary& vocab) {
  if (mode == InferenceMode::task_aware) {
    if (prompt_of_task == nullptr) throw InputError("task-aware prediction needs the task's prompt");
    const RealMatrix* own[1] = {&prompt_of_task->matrix};
    return predict_with_prompts(bb, own, ex, trie, vocab);
  }
  return predict_with_prompts(bb, pool.matrices(), ex, trie, vocab);
}

}  // namespace promptcl
