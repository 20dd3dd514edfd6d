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

#include "promptcl/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

namespace promptcl {

Vocabulary::Vocabulary() {
  for (const char* t : {"<pad>", "<bos>", "<eos>", "<unk>"}) add(t);
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.contains(std::string(token));
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id >= tokens_.size()) throw InputError("token id " + std::to_string(id) + " out of range");
  return tokens_[id];
}

TokenId Vocabulary::add(std::string token) {
  auto it = index_.find(token);
  if (it != index_.end()) return it->second;
  const auto id = static_cast<TokenId>(tokens_.size());
  index_.emplace(token, id);
  tokens_.push_back(std::move(token));
  return id;
}

std::vector<TokenId> Vocabulary::encode(std::string_view text) const {
  std::vector<TokenId> ids;
  for (const auto& word : split_whitespace(to_lower(text))) ids.push_back(id(word));
  return ids;
}

std::string Vocabulary::decode(std::span<const TokenId> ids, bool skip_reserved) const {
  std::string out;
  for (TokenId t : ids) {
    if (skip_reserved && t < kReservedTokens) continue;
    if (!out.empty()) out += ' ';
    out += token(t);
  }
  return out;
}

Vocabulary build_vocab(std::span<const std::string> corpora, std::size_t cap,
                       std::span<const std::string> required) {
  if (cap < 16) throw ConfigError("build_vocab: cap must be at least 16");
  std::set<std::string> must;
  for (const auto& r : required) {
    for (auto& w : split_whitespace(to_lower(r))) must.insert(std::move(w));
  }
  if (must.size() + kReservedTokens > cap) {
    throw ConfigError("build_vocab: " + std::to_string(must.size()) +
                      " required tokens do not fit in cap " + std::to_string(cap));
  }
  std::map<std::string, std::size_t> counts;
  for (const auto& text : corpora) {
    for (auto& w : split_whitespace(to_lower(text))) ++counts[std::move(w)];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  Vocabulary vocab;
  for (const auto& w : must) vocab.add(w);
  for (const auto& [word, count] : ranked) {
    if (vocab.size() >= cap) break;
    vocab.add(word);
  }
  return vocab;
}

std::string normalize_text(std::string_view text) {
  std::string out;
  for (const auto& w : split_whitespace(to_lower(text))) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

std::string LabeledExample::joined_text() const {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) {
      out += ' ';
      out += kSeparatorToken;
    }
    std::string part = normalize_text(fields[i].second);
    if (!part.empty()) {
      if (!out.empty()) out += ' ';
      out += part;
    }
  }
  return out;
}

const std::string& TaskSpec::remapped(std::string_view raw) const {
  for (std::size_t i = 0; i < raw_labels.size(); ++i) {
    if (raw_labels[i] == raw) {
      if (i >= remapped_labels.size()) break;
      return remapped_labels[i];
    }
  }
  throw InputError("task '" + name + "' has no remapping for label '" + std::string(raw) + "'");
}

std::vector<std::string> Dataset::labels() const {
  std::set<std::string> seen;
  for (const auto& ex : examples) seen.insert(ex.label);
  return {seen.begin(), seen.end()};
}

void tokenize_dataset(const Vocabulary& vocab, Dataset& data) {
  for (auto& ex : data.examples) {
    ex.token_ids = vocab.encode(ex.joined_text());
    if (ex.token_ids.empty()) throw InputError("example has no tokens");
  }
}

void encode_labels(const Vocabulary& vocab, Dataset& data) {
  for (auto& ex : data.examples) ex.label_ids = vocab.encode(ex.label);
}

// ---------------------------------------------------------------------------
// Synthetic streams

namespace {

struct FamilyInfo {
  std::string name;
  std::vector<std::string> fields;
  std::size_t signal_field;
  // Field that receives the family cue word; equals signal_field for
  // single-field families.
  std::size_t cue_field;
  std::vector<std::string> labels;  // class order
  std::vector<std::string> cues;
};

const std::vector<FamilyInfo>& family_table() {
  static const std::vector<FamilyInfo> table = {
      {"sentiment", {"text"}, 0, 0, {"negative", "positive"}, {"movie", "film", "acting", "plot"}},
      {"topic", {"text"}, 0, 0, {"world", "sports", "business", "science"},
       {"news", "report", "article", "headline"}},
      {"boolean-qa", {"question", "passage"}, 1, 0, {"false", "true"}, {"is", "does", "did", "can"}},
      {"nli", {"premise", "hypothesis"}, 1, 0, {"entailment", "neutral", "contradiction"},
       {"although", "however", "meanwhile", "therefore"}},
      {"choice", {"premise", "choice1", "choice2", "question"}, 0, 3, {"0", "1"},
       {"cause", "effect"}},
  };
  return table;
}

const FamilyInfo& family_info(std::string_view family) {
  for (const auto& f : family_table()) {
    if (f.name == family) return f;
  }
  throw ConfigError("unknown task family '" + std::string(family) + "'");
}

}  // namespace

const std::vector<std::string>& synthetic_families() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& f : family_table()) out.push_back(f.name);
    return out;
  }();
  return names;
}

const std::vector<std::string>& family_cue_words(std::string_view family) {
  return family_info(family).cues;
}

std::vector<std::string> family_labels(const TaskRecipe& task, std::size_t position) {
  const FamilyInfo& info = family_info(task.family);
  std::vector<std::string> labels;
  if (task.family == "choice") {
    if (task.classes != 2) throw ConfigError("choice tasks have exactly 2 classes");
    return info.labels;
  }
  if (task.classes < 2) throw ConfigError("a task needs at least 2 classes");
  if (task.family == "nli") {
    if (task.classes == 2) {
      labels = {"entailment", "contradiction"};
    } else if (task.classes == 3) {
      labels = info.labels;
    } else {
      throw ConfigError("nli tasks have 2 or 3 classes");
    }
  } else if (task.family == "topic") {
    if (task.classes > info.labels.size()) throw ConfigError("topic tasks have at most 4 classes");
    // Consecutive topic tasks draw different label subsets.
    const std::size_t start = (position * task.classes) % info.labels.size();
    for (std::size_t i = 0; i < task.classes; ++i) {
      labels.push_back(info.labels[(start + i) % info.labels.size()]);
    }
  } else {
    if (task.classes != info.labels.size()) {
      throw ConfigError(task.family + " tasks have exactly " +
                        std::to_string(info.labels.size()) + " classes");
    }
    labels = info.labels;
  }
  if (task.numeric_labels) {
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = std::to_string(i);
  }
  return labels;
}

std::vector<std::string> signal_words(std::size_t task_position, std::size_t class_index,
                                      std::size_t count) {
  std::vector<std::string> words;
  for (std::size_t i = 0; i < count; ++i) {
    words.push_back("t" + std::to_string(task_position) + "c" + std::to_string(class_index) +
                    "w" + std::to_string(i));
  }
  return words;
}

namespace {

std::string noise_word(std::size_t i) { return "n" + std::to_string(i); }

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

LabeledExample make_example(Rng& rng, const StreamRecipe& recipe, const FamilyInfo& info,
                            const std::vector<std::string>& class_signal,
                            const std::string& label) {
  const bool single_field = info.fields.size() == 1;
  const std::size_t length =
      recipe.min_length + rng.index(recipe.max_length - recipe.min_length + 1);
  // Single-field bodies give one slot to the cue word.
  const std::size_t body_slots = single_field ? length - 1 : length;
  std::size_t signal_count = 0;
  if (rng.uniform() < recipe.signal_rate) {
    const std::size_t hi = std::min(recipe.max_signal, body_slots);
    const std::size_t lo = std::min(recipe.min_signal, hi);
    signal_count = lo + rng.index(hi - lo + 1);
  }
  std::vector<std::string> body;
  for (std::size_t i = 0; i < signal_count; ++i) {
    body.push_back(class_signal[rng.index(class_signal.size())]);
  }
  while (body.size() < body_slots) body.push_back(noise_word(rng.index(recipe.noise_words)));
  const std::string cue = info.cues[rng.index(info.cues.size())];
  if (single_field) body.push_back(cue);
  rng.shuffle(body);

  LabeledExample ex;
  for (std::size_t f = 0; f < info.fields.size(); ++f) {
    std::string text;
    if (f == info.signal_field) {
      text = join(body);
    } else if (f == info.cue_field) {
      text = cue;
    } else {
      text = noise_word(rng.index(recipe.noise_words));
    }
    ex.fields.emplace_back(info.fields[f], std::move(text));
  }
  ex.label = label;
  ex.original_label = label;
  return ex;
}

Dataset make_split(Rng& rng, std::size_t count, const StreamRecipe& recipe,
                   const FamilyInfo& info, const std::vector<std::vector<std::string>>& signal,
                   const std::vector<std::string>& labels) {
  Dataset data;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t c = i % labels.size();
    data.examples.push_back(make_example(rng, recipe, info, signal[c], labels[c]));
  }
  rng.shuffle(data.examples);
  return data;
}

}  // namespace

TaskStream generate_synthetic_stream(std::uint64_t seed, const StreamRecipe& recipe) {
  if (recipe.tasks.size() < 2) throw ConfigError("a synthetic stream needs at least 2 tasks");
  if (recipe.min_length < 2 || recipe.max_length < recipe.min_length) {
    throw ConfigError("invalid example length range");
  }
  if (recipe.noise_words == 0) throw ConfigError("noise_words must be positive");
  if (recipe.signal_words_per_class == 0) throw ConfigError("signal_words_per_class must be positive");
  if (!(recipe.signal_rate >= 0.0 && recipe.signal_rate <= 1.0)) {
    throw ConfigError("signal_rate must lie in [0, 1]");
  }
  if (recipe.min_signal == 0 || recipe.max_signal < recipe.min_signal) {
    throw ConfigError("invalid signal count range");
  }

  TaskStream stream;
  stream.order_tag = recipe.order_tag;
  std::set<std::string> names;
  for (std::size_t pos = 0; pos < recipe.tasks.size(); ++pos) {
    const TaskRecipe& tr = recipe.tasks[pos];
    const FamilyInfo& info = family_info(tr.family);
    std::size_t signal_owner = pos;
    if (tr.share_signal_with) {
      if (*tr.share_signal_with >= pos) {
        throw ConfigError("share_signal_with must name an earlier task");
      }
      signal_owner = *tr.share_signal_with;
    }
    // A sharing task also takes the owner's label rotation.
    const std::vector<std::string> labels = family_labels(tr, signal_owner);
    std::vector<std::vector<std::string>> signal;
    for (std::size_t c = 0; c < labels.size(); ++c) {
      signal.push_back(signal_words(signal_owner, c, recipe.signal_words_per_class));
    }

    StreamTask task;
    task.spec.name = tr.name.empty() ? tr.family + "-" + std::to_string(pos + 1) : tr.name;
    if (!names.insert(task.spec.name).second) {
      throw ConfigError("duplicate task name '" + task.spec.name + "'");
    }
    task.spec.fields = info.fields;
    task.spec.raw_labels = labels;
    std::sort(task.spec.raw_labels.begin(), task.spec.raw_labels.end());

    Rng rng(derive_seed(seed, pos));
    task.train = make_split(rng, recipe.train_per_task, recipe, info, signal, labels);
    task.test = make_split(rng, recipe.test_per_task, recipe, info, signal, labels);
    stream.tasks.push_back(std::move(task));
  }
  return stream;
}

// ---------------------------------------------------------------------------
// JSONL ingestion

namespace {

std::string coerce(const nlohmann::json& value) {
  if (value.is_string()) return value.get<std::string>();
  if (value.is_boolean()) return value.get<bool>() ? "true" : "false";
  return value.dump();
}

}  // namespace

IngestedTask ingest_jsonl(const std::filesystem::path& path,
                          std::span<const std::string> schema,
                          const std::string& label_field) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open dataset file " + path.string());
  IngestedTask out;
  out.spec.name = path.stem().string();
  out.spec.fields.assign(schema.begin(), schema.end());
  std::set<std::string> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": malformed JSON");
    }
    if (!record.is_object()) {
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": record is not an object");
    }
    LabeledExample ex;
    for (const auto& field : schema) {
      if (!record.contains(field)) {
        throw InputError(path.string() + ":" + std::to_string(line_no) + ": missing field '" +
                         field + "'");
      }
      ex.fields.emplace_back(field, coerce(record[field]));
    }
    if (!record.contains(label_field)) {
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": missing field '" +
                       label_field + "'");
    }
    ex.label = coerce(record[label_field]);
    ex.original_label = ex.label;
    labels.insert(ex.label);
    out.data.examples.push_back(std::move(ex));
  }
  if (out.data.empty()) throw InputError("dataset file " + path.string() + " is empty");
  if (labels.size() < 2) {
    throw InputError("dataset file " + path.string() + " has fewer than 2 distinct labels");
  }
  out.spec.raw_labels.assign(labels.begin(), labels.end());
  return out;
}

}  // namespace promptcl
