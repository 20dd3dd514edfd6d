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

#include "promptcl/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <type_traits>

namespace promptcl {

StreamRecipe default_stream_recipe() {
  StreamRecipe r;
  r.order_tag = "synthetic-15";
  const char* cycle[] = {"sentiment", "topic", "boolean-qa", "nli", "choice"};
  for (std::size_t i = 0; i < 15; ++i) {
    TaskRecipe t;
    t.family = cycle[i % 5];
    t.numeric_labels = (i == 5 || i == 11);
    r.tasks.push_back(t);
  }
  return r;
}

RunConfig default_config() {
  RunConfig cfg;
  cfg.stream.recipe = default_stream_recipe();
  return cfg;
}

nlohmann::json config_to_json(const RunConfig& cfg) {
  using nlohmann::json;
  json tasks = json::array();
  for (const auto& t : cfg.stream.recipe.tasks) {
    tasks.push_back({{"family", t.family},
                     {"name", t.name},
                     {"numeric_labels", t.numeric_labels},
                     {"classes", t.classes},
                     {"share_signal_with",
                      t.share_signal_with ? json(*t.share_signal_with) : json(nullptr)}});
  }
  const StreamRecipe& r = cfg.stream.recipe;
  return {
      {"stream",
       {{"source", cfg.stream.source},
        {"manifest", cfg.stream.manifest},
        {"order_tag", r.order_tag},
        {"tasks", tasks},
        {"train_per_task", r.train_per_task},
        {"test_per_task", r.test_per_task},
        {"signal_words_per_class", r.signal_words_per_class},
        {"noise_words", r.noise_words},
        {"min_length", r.min_length},
        {"max_length", r.max_length},
        {"min_signal", r.min_signal},
        {"max_signal", r.max_signal},
        {"signal_rate", r.signal_rate}}},
      {"model",
       {{"vocab_cap", cfg.model.vocab_cap},
        {"dim", cfg.model.dim},
        {"embed_std", cfg.model.init.embed_std},
        {"hidden_std", cfg.model.init.hidden_std},
        {"output_std", cfg.model.init.output_std}}},
      {"training",
       {{"prompt_length", cfg.training.prompt_length},
        {"epochs", cfg.training.epochs},
        {"batch_size", cfg.training.batch_size},
        {"learning_rate", cfg.training.learning_rate},
        {"beta1", cfg.training.beta1},
        {"beta2", cfg.training.beta2},
        {"adam_eps", cfg.training.adam_eps},
        {"init_scale", cfg.training.init_scale}}},
      {"selection",
       {{"strategy", to_string(cfg.selection.strategy)},
        {"alpha", cfg.selection.alpha},
        {"scoring_context", to_string(cfg.selection.scoring_context)},
        {"budget", cfg.selection.budget ? json(*cfg.selection.budget) : json(nullptr)}}},
      {"sampling",
       {{"enabled", cfg.sampling.enabled},
        {"k", cfg.sampling.k},
        {"clusters", cfg.sampling.clusters},
        {"max_iters", cfg.sampling.max_iters},
        {"tol", cfg.sampling.tol}}},
      {"decoding",
       {{"constrained", cfg.decoding.constrained},
        {"union_labels", cfg.decoding.union_labels},
        {"write_predictions", cfg.decoding.write_predictions}}},
      {"taskid",
       {{"enabled", cfg.taskid.enabled},
        {"provider", cfg.taskid.provider},
        {"url", cfg.taskid.url},
        {"retries", cfg.taskid.retries},
        {"backoff_ms", cfg.taskid.backoff_ms},
        {"timeout_ms", cfg.taskid.timeout_ms},
        {"on_failure", cfg.taskid.on_failure}}},
      {"metrics",
       {{"forgotten_epsilon", cfg.metrics.forgotten_epsilon},
        {"bytes_per_value", cfg.metrics.bytes_per_value}}},
      {"run",
       {{"seed", cfg.run.seed},
        {"out_dir", cfg.run.out_dir},
        {"write_snapshot", cfg.run.write_snapshot}}},
  };
}

// Seeds are read through the size_t overload.
static_assert(std::is_same_v<std::uint64_t, std::size_t>);

namespace {

bool non_negative_integer(const nlohmann::json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

class Section {
 public:
  Section(const nlohmann::json& doc, std::string name) : doc_(doc), name_(std::move(name)) {
    if (!doc_.is_object()) throw ConfigError("'" + name_ + "' must be an object");
  }

  bool has(const char* key) {
    seen_.insert(key);
    return doc_.contains(key);
  }
  const nlohmann::json& at(const char* key) const { return doc_.at(key); }
  std::string where(const char* key) const { return name_ + "." + key; }

  void read(const char* key, std::size_t& out) {
    if (!has(key)) return;
    const auto& v = doc_.at(key);
    if (!non_negative_integer(v)) throw ConfigError(where(key) + " must be a non-negative integer");
    out = v.get<std::size_t>();
  }
  void read(const char* key, int& out) {
    if (!has(key)) return;
    const auto& v = doc_.at(key);
    if (!v.is_number_integer()) throw ConfigError(where(key) + " must be an integer");
    out = v.get<int>();
  }
  void read(const char* key, double& out) {
    if (!has(key)) return;
    const auto& v = doc_.at(key);
    if (!v.is_number()) throw ConfigError(where(key) + " must be a number");
    out = v.get<double>();
  }
  void read(const char* key, bool& out) {
    if (!has(key)) return;
    const auto& v = doc_.at(key);
    if (!v.is_boolean()) throw ConfigError(where(key) + " must be true or false");
    out = v.get<bool>();
  }
  void read(const char* key, std::string& out) {
    if (!has(key)) return;
    const auto& v = doc_.at(key);
    if (!v.is_string()) throw ConfigError(where(key) + " must be a string");
    out = v.get<std::string>();
  }
  void read(const char* key, std::optional<std::size_t>& out) {
    if (!has(key)) return;
    const auto& v = doc_.at(key);
    if (v.is_null()) {
      out.reset();
      return;
    }
    if (!non_negative_integer(v)) {
      throw ConfigError(where(key) + " must be null or a non-negative integer");
    }
    out = v.get<std::size_t>();
  }

  void finish() const {
    for (const auto& [key, _] : doc_.items()) {
      if (!seen_.contains(key)) throw ConfigError("unknown config key '" + name_ + "." + key + "'");
    }
  }

 private:
  const nlohmann::json& doc_;
  std::string name_;
  std::set<std::string> seen_;
};

void read_tasks(const nlohmann::json& arr, std::vector<TaskRecipe>& out) {
  if (!arr.is_array()) throw ConfigError("stream.tasks must be an array");
  out.clear();
  for (std::size_t i = 0; i < arr.size(); ++i) {
    Section s(arr[i], "stream.tasks[" + std::to_string(i) + "]");
    TaskRecipe t;
    s.read("family", t.family);
    s.read("name", t.name);
    s.read("numeric_labels", t.numeric_labels);
    s.read("classes", t.classes);
    s.read("share_signal_with", t.share_signal_with);
    s.finish();
    if (t.family.empty()) throw ConfigError("stream.tasks[" + std::to_string(i) + "] needs a family");
    out.push_back(t);
  }
}

}  // namespace

RunConfig config_from_json(const nlohmann::json& doc) {
  RunConfig cfg = default_config();
  Section top(doc, "config");
  for (const char* name :
       {"stream", "model", "training", "selection", "sampling", "decoding", "taskid", "metrics", "run"}) {
    if (!top.has(name)) continue;
    const nlohmann::json& j = top.at(name);
    Section s(j, name);
    const std::string sec = name;
    if (sec == "stream") {
      StreamRecipe& r = cfg.stream.recipe;
      s.read("source", cfg.stream.source);
      s.read("manifest", cfg.stream.manifest);
      s.read("order_tag", r.order_tag);
      if (s.has("tasks")) read_tasks(s.at("tasks"), r.tasks);
      s.read("train_per_task", r.train_per_task);
      s.read("test_per_task", r.test_per_task);
      s.read("signal_words_per_class", r.signal_words_per_class);
      s.read("noise_words", r.noise_words);
      s.read("min_length", r.min_length);
      s.read("max_length", r.max_length);
      s.read("min_signal", r.min_signal);
      s.read("max_signal", r.max_signal);
      s.read("signal_rate", r.signal_rate);
    } else if (sec == "model") {
      s.read("vocab_cap", cfg.model.vocab_cap);
      s.read("dim", cfg.model.dim);
      s.read("embed_std", cfg.model.init.embed_std);
      s.read("hidden_std", cfg.model.init.hidden_std);
      s.read("output_std", cfg.model.init.output_std);
    } else if (sec == "training") {
      s.read("prompt_length", cfg.training.prompt_length);
      s.read("epochs", cfg.training.epochs);
      s.read("batch_size", cfg.training.batch_size);
      s.read("learning_rate", cfg.training.learning_rate);
      s.read("beta1", cfg.training.beta1);
      s.read("beta2", cfg.training.beta2);
      s.read("adam_eps", cfg.training.adam_eps);
      s.read("init_scale", cfg.training.init_scale);
    } else if (sec == "selection") {
      std::string strategy = to_string(cfg.selection.strategy);
      std::string ctx = to_string(cfg.selection.scoring_context);
      s.read("strategy", strategy);
      s.read("alpha", cfg.selection.alpha);
      s.read("scoring_context", ctx);
      s.read("budget", cfg.selection.budget);
      cfg.selection.strategy = strategy_from_string(strategy);
      cfg.selection.scoring_context = scoring_context_from_string(ctx);
    } else if (sec == "sampling") {
      s.read("enabled", cfg.sampling.enabled);
      s.read("k", cfg.sampling.k);
      s.read("clusters", cfg.sampling.clusters);
      s.read("max_iters", cfg.sampling.max_iters);
      s.read("tol", cfg.sampling.tol);
    } else if (sec == "decoding") {
      s.read("constrained", cfg.decoding.constrained);
      s.read("union_labels", cfg.decoding.union_labels);
      s.read("write_predictions", cfg.decoding.write_predictions);
    } else if (sec == "taskid") {
      s.read("enabled", cfg.taskid.enabled);
      s.read("provider", cfg.taskid.provider);
      s.read("url", cfg.taskid.url);
      s.read("retries", cfg.taskid.retries);
      s.read("backoff_ms", cfg.taskid.backoff_ms);
      s.read("timeout_ms", cfg.taskid.timeout_ms);
      s.read("on_failure", cfg.taskid.on_failure);
    } else if (sec == "metrics") {
      s.read("forgotten_epsilon", cfg.metrics.forgotten_epsilon);
      s.read("bytes_per_value", cfg.metrics.bytes_per_value);
    } else {
      s.read("seed", cfg.run.seed);
      s.read("out_dir", cfg.run.out_dir);
      s.read("write_snapshot", cfg.run.write_snapshot);
    }
    s.finish();
  }
  top.finish();
  validate_config(cfg);
  return cfg;
}

void validate_config(const RunConfig& cfg) {
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  const StreamRecipe& r = cfg.stream.recipe;
  need(cfg.stream.source == "synthetic" || cfg.stream.source == "jsonl",
       "stream.source must be 'synthetic' or 'jsonl'");
  if (cfg.stream.source == "jsonl") {
    need(!cfg.stream.manifest.empty(), "stream.manifest is required for jsonl streams");
  } else {
    need(r.tasks.size() >= 2, "stream.tasks must list at least 2 tasks");
    for (const auto& t : r.tasks) {
      const auto& fams = synthetic_families();
      need(std::find(fams.begin(), fams.end(), t.family) != fams.end(),
           "unknown task family '" + t.family + "'");
    }
    need(r.train_per_task >= 1 && r.test_per_task >= 1, "per-task split sizes must be positive");
    need(r.min_length >= 2 && r.max_length >= r.min_length, "invalid example length range");
    need(r.min_signal >= 1 && r.max_signal >= r.min_signal, "invalid signal count range");
    need(r.noise_words >= 1 && r.signal_words_per_class >= 1, "word pools must be non-empty");
    need(r.signal_rate >= 0.0 && r.signal_rate <= 1.0, "stream.signal_rate must lie in [0, 1]");
  }
  need(cfg.model.vocab_cap >= 16, "model.vocab_cap must be at least 16");
  need(cfg.model.dim >= 1, "model.dim must be positive");
  need(cfg.model.init.embed_std > 0 && cfg.model.init.output_std > 0 &&
           cfg.model.init.hidden_std >= 0,
       "model init scales must be positive (hidden_std 0 selects d^-1/2)");
  const TrainConfig& t = cfg.training;
  need(t.prompt_length >= 1, "training.prompt_length must be at least 1");
  need(t.epochs >= 1, "training.epochs must be at least 1");
  need(t.batch_size >= 1, "training.batch_size must be at least 1");
  need(t.learning_rate > 0 && std::isfinite(t.learning_rate), "training.learning_rate must be positive");
  need(t.beta1 >= 0 && t.beta1 < 1 && t.beta2 >= 0 && t.beta2 < 1, "Adam betas must lie in [0, 1)");
  need(t.adam_eps > 0, "training.adam_eps must be positive");
  need(t.init_scale >= 0, "training.init_scale must be non-negative");
  need(std::isfinite(cfg.selection.alpha), "selection.alpha must be finite");
  if (cfg.selection.strategy == Strategy::fifo || cfg.selection.strategy == Strategy::random) {
    need(cfg.selection.budget.has_value() && *cfg.selection.budget >= 1,
         "selection.budget must be at least 1 for fifo and random");
  }
  need(cfg.sampling.k >= 1 && cfg.sampling.clusters >= 1, "sampling.k and sampling.clusters must be positive");
  need(cfg.sampling.max_iters >= 1 && cfg.sampling.tol >= 0, "invalid k-means limits");
  need(cfg.taskid.provider == "stub" || cfg.taskid.provider == "http" || cfg.taskid.provider == "none",
       "taskid.provider must be stub, http or none");
  if (cfg.taskid.provider == "http") need(!cfg.taskid.url.empty(), "taskid.url is required for http");
  need(cfg.taskid.retries >= 0 && cfg.taskid.backoff_ms >= 0 && cfg.taskid.timeout_ms > 0,
       "invalid taskid retry settings");
  need(cfg.taskid.on_failure == "halt" || cfg.taskid.on_failure == "identity",
       "taskid.on_failure must be halt or identity");
  need(cfg.metrics.forgotten_epsilon >= 0, "metrics.forgotten_epsilon must be non-negative");
  need(cfg.metrics.bytes_per_value >= 1, "metrics.bytes_per_value must be positive");
  need(!cfg.run.out_dir.empty(), "run.out_dir must not be empty");
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  nlohmann::json doc = nlohmann::json::parse(ss.str(), nullptr, false);
  if (doc.is_discarded()) throw ConfigError("config file " + path.string() + " is not valid JSON");
  return config_from_json(doc);
}

std::string config_reference() {
  static const std::map<std::string, std::string> notes = {
      {"stream.source", "synthetic | jsonl"},
      {"stream.manifest", "jsonl manifest (tasks: name, train, test, schema, label_field)"},
      {"stream.tasks", "synthetic tasks: family, name, numeric_labels, classes, share_signal_with"},
      {"stream.signal_rate", "probability that an example carries signal tokens"},
      {"model.hidden_std", "0 selects d^-1/2 for W1, W2 and b"},
      {"selection.strategy", "gradient | fifo | random | keep_all"},
      {"selection.scoring_context", "full_pool | solo"},
      {"selection.budget", "pool capacity for fifo and random"},
      {"sampling.enabled", "false trains on the whole training split"},
      {"sampling.k", "representatives per class"},
      {"sampling.clusters", "k-means clusters per class (capped at class size)"},
      {"decoding.constrained", "false scores the unconstrained greedy output"},
      {"decoding.union_labels", "decode over every seen task's labels"},
      {"taskid.provider", "stub | http | none"},
      {"taskid.on_failure", "halt | identity"},
      {"metrics.forgotten_epsilon", "drop below just-trained accuracy that counts as forgetting"},
      {"run.seed", "master seed; every other seed derives from it"},
  };
  std::ostringstream out;
  out << "Configuration keys and defaults (JSON file, sections below)\n";
  const nlohmann::json defaults = config_to_json(default_config());
  for (const auto& [section, body] : defaults.items()) {
    out << "\n[" << section << "]\n";
    for (const auto& [key, value] : body.items()) {
      const std::string full = section + "." + key;
      std::string shown = key == "tasks" ? "<" + std::to_string(value.size()) + " tasks>" : value.dump();
      out << "  " << key << " = " << shown;
      if (auto it = notes.find(full); it != notes.end()) out << "    # " << it->second;
      out << '\n';
    }
  }
  return out.str();
}

}  // namespace promptcl
