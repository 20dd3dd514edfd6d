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

#include "promptcl/harness.hpp"

#include <fstream>
#include <memory>
#include <set>
#include <sstream>

#include "promptcl/repselect.hpp"

namespace promptcl {

void AccuracyMatrix::set(std::size_t j, std::size_t i, double v) {
  if (j >= n_ || i >= n_) throw InputError("accuracy cell out of range");
  values_[j * n_ + i] = v;
  set_[j * n_ + i] = 1;
}

double AccuracyMatrix::at(std::size_t j, std::size_t i) const {
  if (!has(j, i)) {
    throw InputError("accuracy cell (" + std::to_string(j) + ", " + std::to_string(i) + ") is unset");
  }
  return values_[j * n_ + i];
}

AccuracyMatrix AccuracyMatrix::truncated(std::size_t n) const {
  AccuracyMatrix out(std::min(n, n_));
  for (std::size_t j = 0; j < out.n_; ++j) {
    for (std::size_t i = 0; i < out.n_; ++i) {
      if (has(j, i)) out.set(j, i, at(j, i));
    }
  }
  return out;
}

MetricValue bwt(const AccuracyMatrix& R) {
  const std::size_t n = R.size();
  if (n < 2) return {};
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) total += R.at(n - 1, i) - R.at(i, i);
  return {total / static_cast<double>(n - 1), true};
}

MetricValue fwt(const AccuracyMatrix& R, std::span<const std::size_t> label_counts) {
  const std::size_t n = R.size();
  if (n < 2) return {};
  if (label_counts.size() < n) throw InputError("fwt needs a label count for every task");
  double total = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    total += R.at(i - 1, i) - 1.0 / static_cast<double>(label_counts[i]);
  }
  return {total / static_cast<double>(n - 1), true};
}

std::size_t forgotten_count(const AccuracyMatrix& R, double epsilon) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < R.size(); ++i) {
    for (std::size_t j = i + 1; j < R.size(); ++j) {
      if (R.has(j, i) && R.has(i, i) && R.at(j, i) < R.at(i, i) - epsilon) ++count;
    }
  }
  return count;
}

double average_final_accuracy(const AccuracyMatrix& R) {
  const std::size_t n = R.size();
  if (n == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += R.at(n - 1, i);
  return total / static_cast<double>(n);
}

EvalResult evaluate_task(const FrozenBackbone& bb, std::span<const RealMatrix* const> prompts,
                         const Dataset& test, const LabelTrie& trie, const Vocabulary& vocab,
                         bool constrained, bool parallel) {
  if (test.empty()) throw InputError("cannot evaluate an empty test split");
  EvalResult r;
  r.predictions.resize(test.size());
  parallel_for(test.size(), parallel, [&](std::size_t i) {
    r.predictions[i] = predict_with_prompts(bb, prompts, test.examples[i], trie, vocab);
  });
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const Prediction& p = r.predictions[i];
    const std::string& gold = test.examples[i].label;
    ++r.tally.constrained_predictions;
    ++r.tally.unconstrained_predictions;
    if (trie.contains(p.constrained)) ++r.tally.in_label_set;
    if (!trie.contains(p.unconstrained)) ++r.tally.unconstrained_off_label;
    if (p.unconstrained == gold && p.constrained != gold) ++r.tally.dominance_violations;
    if ((constrained ? p.constrained : p.unconstrained) == gold) ++correct;
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(test.size());
  return r;
}

namespace {

void add_tally(DecodingTally& into, const DecodingTally& t) {
  into.constrained_predictions += t.constrained_predictions;
  into.in_label_set += t.in_label_set;
  into.unconstrained_predictions += t.unconstrained_predictions;
  into.unconstrained_off_label += t.unconstrained_off_label;
  into.dominance_violations += t.dominance_violations;
}

std::vector<const RealMatrix*> own_prompt(const PromptPool& pool, const std::string& task) {
  if (auto idx = pool.find_task(task)) return {&pool.prompt(*idx).matrix};
  return {};
}

void check_unique_names(const std::vector<StreamTask>& tasks) {
  std::set<std::string> names;
  for (const auto& t : tasks) {
    if (!names.insert(t.spec.name).second) {
      throw InputError("task name '" + t.spec.name + "' appears twice in the stream");
    }
  }
}

}  // namespace

TaskStream load_stream(const RunConfig& cfg, const std::filesystem::path& base_dir) {
  if (cfg.stream.source == "synthetic") {
    return generate_synthetic_stream(derive_seed(cfg.run.seed, "stream"), cfg.stream.recipe);
  }
  std::filesystem::path manifest = cfg.stream.manifest;
  if (manifest.is_relative() && !base_dir.empty()) manifest = base_dir / manifest;
  std::ifstream in(manifest);
  if (!in) throw ConfigError("cannot read stream manifest " + manifest.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const nlohmann::json doc = nlohmann::json::parse(ss.str(), nullptr, false);
  if (doc.is_discarded() || !doc.is_object() || !doc.contains("tasks") || !doc["tasks"].is_array()) {
    throw ConfigError("stream manifest " + manifest.string() + " needs a 'tasks' array");
  }
  const std::filesystem::path root = manifest.parent_path();
  TaskStream stream;
  stream.order_tag = doc.value("order_tag", std::string("jsonl"));
  for (const auto& t : doc["tasks"]) {
    try {
      const auto schema = t.at("schema").get<std::vector<std::string>>();
      const std::string label_field = t.value("label_field", std::string("label"));
      auto resolve = [&](const std::string& p) {
        std::filesystem::path path = p;
        return path.is_relative() ? root / path : path;
      };
      IngestedTask train = ingest_jsonl(resolve(t.at("train").get<std::string>()), schema, label_field);
      IngestedTask test = ingest_jsonl(resolve(t.at("test").get<std::string>()), schema, label_field);
      StreamTask task;
      task.spec = train.spec;
      if (t.contains("name")) task.spec.name = t["name"].get<std::string>();
      std::set<std::string> labels(train.spec.raw_labels.begin(), train.spec.raw_labels.end());
      labels.insert(test.spec.raw_labels.begin(), test.spec.raw_labels.end());
      task.spec.raw_labels.assign(labels.begin(), labels.end());
      task.train = std::move(train.data);
      task.test = std::move(test.data);
      stream.tasks.push_back(std::move(task));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("bad task entry in " + manifest.string() + ": " + e.what());
    }
  }
  check_unique_names(stream.tasks);
  return stream;
}

RunReport run_stream(const TaskStream& stream, const RunConfig& cfg, const HarnessOptions& options) {
  validate_config(cfg);
  if (stream.tasks.empty()) throw InputError("task stream is empty");
  check_unique_names(stream.tasks);
  const std::uint64_t seed = cfg.run.seed;
  const bool parallel = options.parallel;

  RunReport rep;
  rep.config = config_to_json(cfg);
  rep.seed = seed;
  rep.order_tag = stream.order_tag;

  std::unique_ptr<RemapperProvider> owned;
  RemapperProvider* provider = options.provider;
  if (provider == nullptr) {
    if (cfg.taskid.provider == "stub") {
      owned = std::make_unique<KeywordStubProvider>();
    } else if (cfg.taskid.provider == "http") {
      owned = std::make_unique<HttpRemapperProvider>(
          cfg.taskid.url, cfg.taskid.retries, std::chrono::milliseconds(cfg.taskid.backoff_ms),
          std::chrono::milliseconds(cfg.taskid.timeout_ms));
    }
    provider = owned.get();
  }
  TaskIdentifier identifier(provider);

  // Identification runs for every task up front so remapped label words are
  // part of the vocabulary the backbone is sized for.
  std::vector<StreamTask> tasks = stream.tasks;
  std::vector<TaskRecord> records;
  std::size_t limit = tasks.size();
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    StreamTask& task = tasks[t];
    if (task.train.empty() || task.test.empty()) {
      throw InputError("task '" + task.spec.name + "' needs non-empty train and test splits");
    }
    TaskRecord rec;
    rec.name = task.spec.name;
    rec.raw_labels = task.spec.raw_labels;
    rec.train_examples = task.train.size();
    RemapResult remap;
    if (!cfg.taskid.enabled) {
      remap = identity_remap(task.spec);
    } else {
      try {
        remap = identifier.identify(task.spec, task.train.examples.front());
      } catch (const Error& e) {
        if (!dynamic_cast<const IdentificationError*>(&e) && !dynamic_cast<const ProtocolError*>(&e)) {
          throw;
        }
        if (cfg.taskid.on_failure != "identity") {
          limit = t;
          rep.partial = true;
          rep.error = std::string("task identification failed: ") + e.what();
          break;
        }
        remap = identity_remap(task.spec);
      }
    }
    apply_remap(task.spec, task.train, remap);
    apply_remap(task.spec, task.test, remap);
    rec.identified_type = task.spec.identified_type;
    rec.identification = remap.provider;
    rec.remapped_labels = task.spec.remapped_labels;
    records.push_back(std::move(rec));
  }
  tasks.resize(limit);

  std::vector<std::string> corpora;
  std::vector<std::string> required{std::string(kSeparatorToken)};
  for (const auto& task : tasks) {
    for (const auto& ex : task.train.examples) corpora.push_back(ex.joined_text());
    required.insert(required.end(), task.spec.remapped_labels.begin(), task.spec.remapped_labels.end());
  }
  Vocabulary vocab = build_vocab(corpora, cfg.model.vocab_cap, required);
  for (auto& task : tasks) {
    for (Dataset* d : {&task.train, &task.test}) {
      tokenize_dataset(vocab, *d);
      encode_labels(vocab, *d);
    }
  }
  const FrozenBackbone bb =
      make_backbone(vocab.size(), cfg.model.dim, derive_seed(seed, "backbone"), cfg.model.init);

  std::vector<LabelTrie> tries;
  std::vector<LabelTrie> union_tries;
  std::vector<std::string> seen_labels;
  for (const auto& task : tasks) {
    tries.push_back(LabelTrie::build(task.spec.remapped_labels, vocab));
    seen_labels.insert(seen_labels.end(), task.spec.remapped_labels.begin(),
                       task.spec.remapped_labels.end());
    union_tries.push_back(LabelTrie::build(seen_labels, vocab));
  }

  const std::size_t n = tasks.size();
  AccuracyMatrix aware(n);
  AccuracyMatrix agnostic(n);
  PromptPool pool;
  std::size_t completed = 0;
  const bool constrained = cfg.decoding.constrained;

  auto log_predictions = [&](std::size_t checkpoint, const StreamTask& task, const EvalResult& ev,
                             InferenceMode mode) {
    if (!cfg.decoding.write_predictions) return;
    for (std::size_t e = 0; e < ev.predictions.size(); ++e) {
      rep.predictions.push_back({checkpoint, task.spec.name, e, task.test.examples[e].label,
                                 ev.predictions[e].unconstrained, ev.predictions[e].constrained,
                                 to_string(mode)});
    }
  };

  for (std::size_t t = 0; t < n; ++t) {
    StreamTask& task = tasks[t];
    TaskRecord& rec = records[t];
    try {
      Dataset train_data;
      if (cfg.sampling.enabled) {
        BackboneEmbedder embedder(bb);
        RepresentativeSet reps = select_representatives(
            task.train, cfg.sampling.k, cfg.sampling.clusters, embedder,
            derive_seed(seed, "select/" + task.spec.name), parallel, cfg.sampling.max_iters,
            cfg.sampling.tol);
        rec.fill_representatives = static_cast<std::size_t>(
            std::count(reps.filled.begin(), reps.filled.end(), true));
        train_data = std::move(reps.data);
      } else {
        train_data = task.train;
      }
      rec.representatives = train_data.size();

      if (t > 0) {
        const LabelTrie& trie = cfg.decoding.union_labels ? union_tries[t] : tries[t];
        const EvalResult zero = evaluate_task(bb, pool.matrices(), task.test, trie, vocab,
                                              constrained, parallel);
        add_tally(rep.decoding, zero.tally);
        aware.set(t - 1, t, zero.accuracy);
        agnostic.set(t - 1, t, zero.accuracy);
      }

      if (cfg.selection.strategy == Strategy::gradient && !pool.empty()) {
        ScoreRound round;
        round.task = task.spec.name;
        round.pool_before = pool.size();
        round.table = score_pool(bb, pool, train_data, cfg.selection.alpha,
                                 cfg.selection.scoring_context, parallel);
        round.partition = partition_pool(round.table);
        pool = compress(pool, round.partition, round.table);
        round.pool_after = pool.size();
        rep.rounds.push_back(std::move(round));
      }

      TrainConfig tc = cfg.training;
      tc.seed = derive_seed(seed, "train/" + task.spec.name);
      TrainResult trained = train_prompt(bb, pool, task.spec, train_data, tc);
      rec.epoch_losses = trained.epoch_losses;
      pool.append(std::move(trained.prompt));

      if (cfg.selection.strategy == Strategy::fifo || cfg.selection.strategy == Strategy::random) {
        pool = apply_strategy(cfg.selection.strategy, std::move(pool),
                              {cfg.selection.budget, nullptr,
                               derive_seed(seed, "evict/" + std::to_string(t))});
      }

      for (std::size_t i = 0; i <= t; ++i) {
        const LabelTrie& trie = cfg.decoding.union_labels ? union_tries[t] : tries[i];
        const std::vector<const RealMatrix*> mine = own_prompt(pool, tasks[i].spec.name);
        const EvalResult ea = evaluate_task(bb, mine, tasks[i].test, trie, vocab, constrained, parallel);
        const EvalResult eg =
            evaluate_task(bb, pool.matrices(), tasks[i].test, trie, vocab, constrained, parallel);
        aware.set(t, i, ea.accuracy);
        agnostic.set(t, i, eg.accuracy);
        add_tally(rep.decoding, ea.tally);
        add_tally(rep.decoding, eg.tally);
        log_predictions(t, tasks[i], ea, InferenceMode::task_aware);
        log_predictions(t, tasks[i], eg, InferenceMode::task_agnostic);
      }
      rep.pool_sizes.push_back(pool.size());
      completed = t + 1;
    } catch (const TrainingError& e) {
      rep.partial = true;
      rep.error = std::string("training failed: ") + e.what();
      break;
    }
  }

  records.resize(completed);
  rep.tasks = std::move(records);
  rep.task_aware = aware.truncated(completed);
  rep.task_agnostic = agnostic.truncated(completed);
  std::vector<std::size_t> label_counts;
  for (std::size_t i = 0; i < completed; ++i) label_counts.push_back(tasks[i].spec.remapped_labels.size());
  for (auto [R, m] : {std::pair{&rep.task_aware, &rep.aware_metrics},
                      std::pair{&rep.task_agnostic, &rep.agnostic_metrics}}) {
    m->bwt = bwt(*R);
    m->fwt = fwt(*R, label_counts);
    m->forgotten = forgotten_count(*R, cfg.metrics.forgotten_epsilon);
    m->average_final = average_final_accuracy(*R);
  }
  rep.memory = memory_report(pool.size(), cfg.metrics.bytes_per_value, cfg.training.prompt_length,
                             cfg.model.dim, completed);
  rep.final_pool = std::move(pool);

  if (options.artifacts != nullptr) {
    *options.artifacts = RunArtifacts{std::move(vocab), bb, std::move(tasks), std::move(tries)};
  }
  return rep;
}

namespace {

nlohmann::json matrix_json(const AccuracyMatrix& R) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t j = 0; j < R.size(); ++j) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t i = 0; i < R.size(); ++i) {
      row.push_back(R.has(j, i) ? nlohmann::json(R.at(j, i)) : nlohmann::json(nullptr));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::json metric_json(const MetricValue& m) {
  return {{"value", m.value}, {"defined", m.defined}};
}

nlohmann::json mode_json(const ModeMetrics& m) {
  return {{"bwt", metric_json(m.bwt)},
          {"fwt", metric_json(m.fwt)},
          {"forgotten_pairs", m.forgotten},
          {"average_final_accuracy", m.average_final}};
}

}  // namespace

nlohmann::json report_to_json(const RunReport& r) {
  using nlohmann::json;
  json tasks = json::array();
  for (const auto& t : r.tasks) {
    tasks.push_back({{"name", t.name},
                     {"identified_type", t.identified_type},
                     {"identification", t.identification},
                     {"raw_labels", t.raw_labels},
                     {"remapped_labels", t.remapped_labels},
                     {"train_examples", t.train_examples},
                     {"representatives", t.representatives},
                     {"fill_representatives", t.fill_representatives},
                     {"epoch_losses", t.epoch_losses}});
  }
  json rounds = json::array();
  for (const auto& rd : r.rounds) {
    rounds.push_back({{"task", rd.task},
                      {"g", rd.table.g},
                      {"mean", rd.table.mean},
                      {"stddev", rd.table.stddev},
                      {"tau", rd.table.tau},
                      {"alpha", rd.table.alpha},
                      {"high", rd.partition.high},
                      {"low", rd.partition.low},
                      {"pool_before", rd.pool_before},
                      {"pool_after", rd.pool_after}});
  }
  json final_pool = json::array();
  for (const auto& e : r.final_pool.entries) {
    final_pool.push_back({{"tasks", e.prompt.tasks}, {"kind", to_string(e.prompt.kind)}});
  }
  const DecodingTally& d = r.decoding;
  const auto ratio = [](std::size_t a, std::size_t b) {
    return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b);
  };
  return {
      {"config", r.config},
      {"seed", r.seed},
      {"order_tag", r.order_tag},
      {"partial", r.partial},
      {"error", r.error},
      {"tasks", tasks},
      {"accuracy", {{"task_aware", matrix_json(r.task_aware)}, {"task_agnostic", matrix_json(r.task_agnostic)}}},
      {"metrics", {{"task_aware", mode_json(r.aware_metrics)}, {"task_agnostic", mode_json(r.agnostic_metrics)}}},
      {"pool_sizes", r.pool_sizes},
      {"final_pool", final_pool},
      {"memory",
       {{"prompts", r.memory.prompts},
        {"bytes_per_prompt", r.memory.bytes_per_prompt},
        {"total_bytes", r.memory.total_bytes},
        {"total_kb", r.memory.total_kb},
        {"reference_prompts", r.memory.reference_prompts},
        {"reference_bytes", r.memory.reference_bytes},
        {"reduction", r.memory.reduction}}},
      {"score_rounds", rounds},
      {"decoding",
       {{"constrained_predictions", d.constrained_predictions},
        {"in_label_set", d.in_label_set},
        {"containment_rate", ratio(d.in_label_set, d.constrained_predictions)},
        {"unconstrained_predictions", d.unconstrained_predictions},
        {"unconstrained_off_label", d.unconstrained_off_label},
        {"off_label_rate", ratio(d.unconstrained_off_label, d.unconstrained_predictions)},
        {"dominance_violations", d.dominance_violations}}},
  };
}

std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\n\r") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string matrix_csv(const AccuracyMatrix& R, const std::vector<std::string>& names) {
  std::ostringstream out;
  out << "checkpoint";
  for (std::size_t i = 0; i < R.size(); ++i) out << ',' << csv_field(names.at(i));
  out << '\n';
  for (std::size_t j = 0; j < R.size(); ++j) {
    out << csv_field(names.at(j));
    for (std::size_t i = 0; i < R.size(); ++i) {
      out << ',';
      if (R.has(j, i)) out << format_real(R.at(j, i));
    }
    out << '\n';
  }
  return out.str();
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
}

}  // namespace

void write_run_outputs(const RunReport& report, const std::filesystem::path& dir,
                       bool write_snapshot) {
  std::filesystem::create_directories(dir);
  write_text(dir / "results.json", report_to_json(report).dump(2) + "\n");
  std::vector<std::string> names;
  for (const auto& t : report.tasks) names.push_back(t.name);
  write_text(dir / "acc_matrix_task_aware.csv", matrix_csv(report.task_aware, names));
  write_text(dir / "acc_matrix_task_agnostic.csv", matrix_csv(report.task_agnostic, names));
  std::vector<std::pair<std::string, ScoreTable>> rounds;
  for (const auto& r : report.rounds) rounds.emplace_back(r.task, r.table);
  write_scores_csv(dir / "scores.csv", rounds);
  if (!report.predictions.empty()) {
    std::ostringstream out;
    out << "checkpoint,task,example_id,gold,unconstrained,constrained,mode\n";
    for (const auto& p : report.predictions) {
      out << p.checkpoint << ',' << csv_field(p.task) << ',' << p.example << ',' << csv_field(p.gold)
          << ',' << csv_field(p.unconstrained) << ',' << csv_field(p.constrained) << ',' << p.mode
          << '\n';
    }
    write_text(dir / "predictions.csv", out.str());
  }
  if (write_snapshot) snapshot_save(report.final_pool, dir / "pool_snapshot.json");
}

}  // namespace promptcl
