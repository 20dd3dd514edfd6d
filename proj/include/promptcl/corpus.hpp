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

#ifndef PROMPTCL_CORPUS_HPP_
#define PROMPTCL_CORPUS_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "promptcl/common.hpp"

namespace promptcl {

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kBosId = 1;
inline constexpr TokenId kEosId = 2;
inline constexpr TokenId kUnkId = 3;
inline constexpr std::size_t kReservedTokens = 4;
inline constexpr std::string_view kSeparatorToken = "<sep>";

// Word-level lowercased vocabulary. Ids 0..3 are PAD, BOS, EOS, UNK.
class Vocabulary {
 public:
  Vocabulary();

  std::size_t size() const { return tokens_.size(); }
  bool contains(std::string_view token) const;
  TokenId id(std::string_view token) const;  // UNK when absent
  const std::string& token(TokenId id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<TokenId> encode(std::string_view text) const;
  // Joins tokens with single spaces; reserved ids are skipped when requested.
  std::string decode(std::span<const TokenId> ids, bool skip_reserved = true) const;

  // Appends a token; returns its id. Existing tokens keep their id.
  TokenId add(std::string token);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

// Tokens are ranked by frequency, then lexicographically. Required tokens are
// always present and take ids right after the reserved block, in sorted order.
Vocabulary build_vocab(std::span<const std::string> corpora, std::size_t cap,
                       std::span<const std::string> required = {});

// Lowercases and collapses runs of whitespace to single spaces.
std::string normalize_text(std::string_view text);

struct LabeledExample {
  // Named text segments in schema order.
  std::vector<std::pair<std::string, std::string>> fields;
  std::string label;
  // Label before remapping; equal to label until apply_remap runs.
  std::string original_label;
  std::vector<TokenId> token_ids;
  std::vector<TokenId> label_ids;

  // Field texts joined in schema order with the separator token.
  std::string joined_text() const;
};

struct TaskSpec {
  std::string name;
  std::vector<std::string> fields;
  std::vector<std::string> raw_labels;  // sorted, unique
  std::string identified_type = "unknown";
  // Aligned with raw_labels once task identification has run.
  std::vector<std::string> remapped_labels;

  const std::string& remapped(std::string_view raw) const;
};

struct Dataset {
  std::vector<LabeledExample> examples;

  std::size_t size() const { return examples.size(); }
  bool empty() const { return examples.empty(); }
  // Distinct gold labels in sorted order.
  std::vector<std::string> labels() const;
};

struct StreamTask {
  TaskSpec spec;
  Dataset train;
  Dataset test;
};

struct TaskStream {
  std::string order_tag;
  std::vector<StreamTask> tasks;
};

void tokenize_dataset(const Vocabulary& vocab, Dataset& data);
// Fills label_ids from the (possibly remapped) gold label strings.
void encode_labels(const Vocabulary& vocab, Dataset& data);

// Synthetic task families.
struct TaskRecipe {
  std::string family;  // sentiment | topic | boolean-qa | nli | choice
  std::string name;    // empty: "<family>-<position>"
  bool numeric_labels = false;
  std::size_t classes = 2;
  // Reuse the signal-token sets (and label rotation) of an earlier task, by
  // position, instead of drawing fresh ones.
  std::optional<std::size_t> share_signal_with;

  friend bool operator==(const TaskRecipe&, const TaskRecipe&) = default;
};

struct StreamRecipe {
  std::string order_tag = "synthetic";
  std::vector<TaskRecipe> tasks;
  std::size_t train_per_task = 200;
  std::size_t test_per_task = 100;
  std::size_t signal_words_per_class = 2;
  std::size_t noise_words = 150;
  std::size_t min_length = 4;
  std::size_t max_length = 6;
  std::size_t min_signal = 2;
  std::size_t max_signal = 4;
  // Probability that an example carries any signal token at all.
  double signal_rate = 0.97;

  friend bool operator==(const StreamRecipe&, const StreamRecipe&) = default;
};

const std::vector<std::string>& synthetic_families();
// Labels a family emits for a given class count, before any remapping.
std::vector<std::string> family_labels(const TaskRecipe& task, std::size_t position);
// Words that mark a family's inputs; the offline remapper keys on these.
const std::vector<std::string>& family_cue_words(std::string_view family);

TaskStream generate_synthetic_stream(std::uint64_t seed, const StreamRecipe& recipe);

// Signal tokens of one class of a task; exposed for calibration tests.
std::vector<std::string> signal_words(std::size_t task_position, std::size_t class_index,
                                      std::size_t count);

struct IngestedTask {
  TaskSpec spec;
  Dataset data;
};
IngestedTask ingest_jsonl(const std::filesystem::path& path,
                          std::span<const std::string> schema,
                          const std::string& label_field);

}  // namespace promptcl

#endif  // PROMPTCL_CORPUS_HPP_
