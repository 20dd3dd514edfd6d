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

#include "promptcl/taskid.hpp"

#include <algorithm>
#include <charconv>
#include <set>
#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace promptcl {

namespace {

bool has_field(const std::vector<std::string>& fields, std::string_view name) {
  return std::find(fields.begin(), fields.end(), name) != fields.end();
}

bool has_field_containing(const std::vector<std::string>& fields, std::string_view part) {
  return std::any_of(fields.begin(), fields.end(),
                     [&](const std::string& f) { return f.find(part) != std::string::npos; });
}

}  // namespace

const std::vector<TaskTemplate>& template_registry() {
  static const std::vector<TaskTemplate> registry = {
      {"sentiment",
       {"negative", "positive"},
       [](const std::vector<std::string>& f) { return f.size() == 1; },
       {}},
      {"boolean-qa",
       {"false", "true"},
       [](const std::vector<std::string>& f) {
         return has_field_containing(f, "question") && !has_field(f, "choice1");
       },
       {}},
      {"nli",
       {"entailment", "neutral", "contradiction", "not-entailment"},
       [](const std::vector<std::string>& f) {
         return has_field(f, "premise") && has_field(f, "hypothesis");
       },
       {{{"entailment", "not_entailment"}, {"entailment", "not-entailment"}}}},
      {"paraphrase",
       {"equivalent", "not-equivalent"},
       [](const std::vector<std::string>& f) {
         return has_field(f, "sentence1") && has_field(f, "sentence2");
       },
       {{{"0", "1"}, {"not-equivalent", "equivalent"}}}},
      {"choice",
       {"choice1", "choice2"},
       [](const std::vector<std::string>& f) {
         return has_field(f, "choice1") && has_field(f, "choice2");
       },
       {{{"0", "1"}, {"choice1", "choice2"}}}},
      {"topic",
       {"world", "sports", "business", "science"},
       [](const std::vector<std::string>& f) { return f.size() == 1; },
       {}},
  };
  return registry;
}

std::optional<RemapResult> identify_by_rules(const TaskSpec& task, const LabeledExample&) {
  if (task.raw_labels.empty()) throw InputError("task '" + task.name + "' has no labels");
  std::vector<std::string> raw = task.raw_labels;
  std::sort(raw.begin(), raw.end());
  for (const auto& tpl : template_registry()) {
    if (!tpl.schema_fits(task.fields)) continue;
    const bool descriptive = std::all_of(raw.begin(), raw.end(), [&](const std::string& l) {
      return std::find(tpl.canonical_labels.begin(), tpl.canonical_labels.end(), l) !=
             tpl.canonical_labels.end();
    });
    if (descriptive && raw.size() >= 2) {
      RemapResult r{tpl.type, {}, "rules"};
      for (const auto& l : raw) r.label_map[l] = l;
      return r;
    }
    for (const auto& [from, to] : tpl.absorbs) {
      if (from != raw) continue;
      RemapResult r{tpl.type, {}, "rules"};
      for (std::size_t i = 0; i < from.size(); ++i) r.label_map[from[i]] = to[i];
      return r;
    }
  }
  return std::nullopt;
}

void validate_remap(const RemapResult& remap, const std::vector<std::string>& raw_labels) {
  std::set<std::string> domain(raw_labels.begin(), raw_labels.end());
  std::set<std::string> image;
  for (const auto& [raw, mapped] : remap.label_map) {
    if (!domain.contains(raw)) {
      throw ProtocolError("remap names unknown raw label '" + raw + "'");
    }
    if (normalize_text(mapped).empty()) {
      throw ProtocolError("remap sends '" + raw + "' to an empty label");
    }
    if (!image.insert(mapped).second) {
      throw ProtocolError("remap is not bijective: label '" + mapped + "' used twice");
    }
  }
  for (const auto& raw : domain) {
    if (!remap.label_map.contains(raw)) {
      throw ProtocolError("remap leaves raw label '" + raw + "' unmapped");
    }
  }
}

// --- offline stub ----------------------------------------------------------

const std::vector<std::pair<std::string, std::vector<std::string>>>&
KeywordStubProvider::keyword_table() {
  static const std::vector<std::pair<std::string, std::vector<std::string>>> table = {
      {"sentiment", {"movie", "film", "acting", "plot", "great", "terrible", "boring"}},
      {"boolean-qa", {"is", "does", "did", "can"}},
      {"nli", {"although", "however", "meanwhile", "therefore"}},
      {"paraphrase", {"same", "means", "similarly"}},
      {"choice", {"cause", "effect"}},
      {"topic", {"news", "report", "article", "headline"}},
  };
  return table;
}

const std::vector<std::string>& KeywordStubProvider::canonical_order(const std::string& type,
                                                                     std::size_t count) {
  static const std::map<std::string, std::vector<std::string>> orders = {
      {"sentiment", {"negative", "positive"}},
      {"boolean-qa", {"false", "true"}},
      {"nli", {"entailment", "neutral", "contradiction"}},
      {"paraphrase", {"not-equivalent", "equivalent"}},
      {"choice", {"choice1", "choice2"}},
      {"topic", {"world", "sports", "business", "science"}},
  };
  static const std::vector<std::string> nli_binary = {"entailment", "contradiction"};
  if (type == "nli" && count == 2) return nli_binary;
  auto it = orders.find(type);
  if (it == orders.end()) throw IdentificationError("stub has no label order for '" + type + "'");
  return it->second;
}

namespace {

std::optional<long long> as_integer(const std::string& s) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::vector<std::string> natural_order(std::vector<std::string> labels) {
  const bool numeric = std::all_of(labels.begin(), labels.end(),
                                   [](const std::string& l) { return as_integer(l).has_value(); });
  if (numeric) {
    std::sort(labels.begin(), labels.end(), [](const std::string& a, const std::string& b) {
      return *as_integer(a) < *as_integer(b);
    });
  } else {
    std::sort(labels.begin(), labels.end());
  }
  return labels;
}

}  // namespace

RemapResult KeywordStubProvider::remap(const std::string& text,
                                       const std::vector<std::string>& labels) {
  const std::vector<std::string> words = split_whitespace(to_lower(text));
  std::string best;
  std::size_t best_count = 0;
  for (const auto& [type, cues] : keyword_table()) {
    std::size_t count = 0;
    for (const auto& w : words) count += std::count(cues.begin(), cues.end(), w);
    if (count > best_count) {
      best_count = count;
      best = type;
    }
  }
  if (best.empty()) throw IdentificationError("stub found no cue words in the sample text");
  const auto& canon = canonical_order(best, labels.size());
  if (labels.size() > canon.size()) {
    throw IdentificationError("stub cannot map " + std::to_string(labels.size()) +
                              " labels onto a " + best + " task");
  }
  RemapResult r{best, {}, "fallback"};
  const std::vector<std::string> ordered = natural_order(labels);
  for (std::size_t i = 0; i < ordered.size(); ++i) r.label_map[ordered[i]] = canon[i];
  return r;
}

// --- remote provider -------------------------------------------------------

HttpRemapperProvider::HttpRemapperProvider(std::string url, int retries,
                                           std::chrono::milliseconds backoff,
                                           std::chrono::milliseconds timeout)
    : retries_(retries), backoff_(backoff), timeout_(timeout) {
  if (retries < 0) throw ConfigError("retry count must be non-negative");
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw ConfigError("provider url needs a scheme: " + url);
  const auto slash = url.find('/', scheme + 3);
  base_ = url.substr(0, slash);
  path_ = slash == std::string::npos ? "/" : url.substr(slash);
}

RemapResult HttpRemapperProvider::remap(const std::string& text,
                                        const std::vector<std::string>& labels) {
  const std::string body = nlohmann::json{{"text", text}, {"labels", labels}}.dump();
  std::string last_error;
  attempts_ = 0;
  for (int attempt = 0; attempt <= retries_; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(backoff_);
    ++attempts_;
    httplib::Client client(base_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    auto res = client.Post(path_, body, "application/json");
    if (!res) {
      last_error = "request failed: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      last_error = "HTTP status " + std::to_string(res->status);
      continue;
    }
    nlohmann::json reply = nlohmann::json::parse(res->body, nullptr, false);
    if (reply.is_discarded() || !reply.is_object() || !reply.contains("task_type") ||
        !reply["task_type"].is_string() || !reply.contains("label_map") ||
        !reply["label_map"].is_object()) {
      last_error = "malformed response";
      continue;
    }
    RemapResult r{reply["task_type"].get<std::string>(), {}, "fallback"};
    bool ok = true;
    for (const auto& [raw, mapped] : reply["label_map"].items()) {
      if (!mapped.is_string()) {
        ok = false;
        break;
      }
      r.label_map[raw] = mapped.get<std::string>();
    }
    if (!ok) {
      last_error = "malformed response";
      continue;
    }
    return r;
  }
  throw IdentificationError("remapper at " + base_ + path_ + " failed after " +
                            std::to_string(attempts_) + " attempts: " + last_error);
}

// --- identification --------------------------------------------------------

RemapResult identity_remap(const TaskSpec& task) {
  RemapResult r{"unknown", {}, "identity"};
  for (const auto& l : task.raw_labels) r.label_map[l] = l;
  return r;
}

RemapResult identify_with_fallback(const TaskSpec& task, const LabeledExample& sample,
                                   RemapperProvider* provider) {
  if (auto hit = identify_by_rules(task, sample)) return *hit;
  if (provider == nullptr) {
    throw IdentificationError("no template matches task '" + task.name +
                              "' and no fallback provider is configured");
  }
  RemapResult r = provider->remap(sample.joined_text(), task.raw_labels);
  r.provider = "fallback";
  validate_remap(r, task.raw_labels);
  return r;
}

RemapResult TaskIdentifier::identify(const TaskSpec& task, const LabeledExample& sample) {
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = cache_.find(task.name);
    if (it != cache_.end()) return it->second;
  }
  RemapResult r;
  if (auto hit = identify_by_rules(task, sample)) {
    r = *hit;
  } else {
    {
      std::lock_guard<std::mutex> lock(mu_);
      ++calls_;
    }
    r = identify_with_fallback(task, sample, provider_);
  }
  std::lock_guard<std::mutex> lock(mu_);
  return cache_.emplace(task.name, std::move(r)).first->second;
}

std::size_t TaskIdentifier::provider_calls() const {
  std::lock_guard<std::mutex> lock(mu_);
  return calls_;
}

void apply_remap(TaskSpec& task, Dataset& data, const RemapResult& remap) {
  for (auto& ex : data.examples) {
    if (ex.original_label.empty()) ex.original_label = ex.label;
    auto it = remap.label_map.find(ex.original_label);
    if (it == remap.label_map.end()) {
      throw InputError("label '" + ex.original_label + "' is outside the remap of task '" +
                       task.name + "'");
    }
  }
  std::vector<std::string> remapped;
  for (const auto& raw : task.raw_labels) {
    auto it = remap.label_map.find(raw);
    if (it == remap.label_map.end()) {
      throw InputError("label '" + raw + "' is outside the remap of task '" + task.name + "'");
    }
    remapped.push_back(normalize_text(it->second));
  }
  for (auto& ex : data.examples) ex.label = normalize_text(remap.label_map.at(ex.original_label));
  task.remapped_labels = std::move(remapped);
  task.identified_type = remap.task_type;
}

}  // namespace promptcl
