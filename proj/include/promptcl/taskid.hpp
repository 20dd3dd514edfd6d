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

#ifndef PROMPTCL_TASKID_HPP_
#define PROMPTCL_TASKID_HPP_

#include <chrono>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "promptcl/corpus.hpp"

namespace promptcl {

struct TaskTemplate {
  std::string type;
  std::vector<std::string> canonical_labels;
  // Returns true when the field names fit this task category.
  bool (*schema_fits)(const std::vector<std::string>& fields);
  // Raw label sets (sorted) this template rewrites, with their targets aligned.
  std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>> absorbs;
};

// Fixed registry order: sentiment, boolean-qa, nli, paraphrase, choice, topic.
const std::vector<TaskTemplate>& template_registry();

struct RemapResult {
  std::string task_type;
  std::map<std::string, std::string> label_map;
  std::string provider;  // "rules" | "fallback" | "identity"

  friend bool operator==(const RemapResult&, const RemapResult&) = default;
};

std::optional<RemapResult> identify_by_rules(const TaskSpec& task, const LabeledExample& sample);

// Throws ProtocolError unless the map is a bijection over exactly raw_labels
// onto distinct non-empty labels.
void validate_remap(const RemapResult& remap, const std::vector<std::string>& raw_labels);

class RemapperProvider {
 public:
  virtual ~RemapperProvider() = default;
  virtual RemapResult remap(const std::string& text, const std::vector<std::string>& labels) = 0;
};

// Offline fallback: picks the category whose cue words occur most often in
// the sample text, then assigns canonical labels to the raw labels in
// numeric (else lexicographic) order.
class KeywordStubProvider : public RemapperProvider {
 public:
  RemapResult remap(const std::string& text, const std::vector<std::string>& labels) override;

  static const std::vector<std::pair<std::string, std::vector<std::string>>>& keyword_table();
  static const std::vector<std::string>& canonical_order(const std::string& type,
                                                         std::size_t count);
};

// JSON over HTTP: POST {"text", "labels"} -> {"task_type", "label_map"}.
class HttpRemapperProvider : public RemapperProvider {
 public:
  explicit HttpRemapperProvider(std::string url, int retries = 2,
                                std::chrono::milliseconds backoff = std::chrono::seconds(1),
                                std::chrono::milliseconds timeout = std::chrono::seconds(10));
  RemapResult remap(const std::string& text, const std::vector<std::string>& labels) override;
  int attempts_made() const { return attempts_; }

 private:
  std::string base_;
  std::string path_;
  int retries_;
  std::chrono::milliseconds backoff_;
  std::chrono::milliseconds timeout_;
  int attempts_ = 0;
};

RemapResult identity_remap(const TaskSpec& task);

// Rules first, then the provider. A null provider means no fallback.
RemapResult identify_with_fallback(const TaskSpec& task, const LabeledExample& sample,
                                   RemapperProvider* provider);

class TaskIdentifier {
 public:
  explicit TaskIdentifier(RemapperProvider* provider) : provider_(provider) {}

  RemapResult identify(const TaskSpec& task, const LabeledExample& sample);
  std::size_t provider_calls() const;

 private:
  RemapperProvider* provider_;
  mutable std::mutex mu_;
  std::map<std::string, RemapResult> cache_;
  std::size_t calls_ = 0;
};

// Rewrites gold labels, keeps the originals, and fills task.remapped_labels.
void apply_remap(TaskSpec& task, Dataset& data, const RemapResult& remap);

}  // namespace promptcl

#endif  // PROMPTCL_TASKID_HPP_
