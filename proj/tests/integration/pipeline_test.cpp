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


// End-to-end checks of the library pipeline at the default model size.

#include <doctest.h>

#include <set>

#include "fixtures.hpp"
#include "promptcl/harness.hpp"

using namespace promptcl;

namespace {

RunReport run(const RunConfig& cfg, RunArtifacts* art = nullptr) {
  HarnessOptions opt;
  opt.artifacts = art;
  return run_stream(load_stream(cfg), cfg, opt);
}

}  // namespace

TEST_CASE("a prompt trained on one task alone fits it") {
  // Whole training split, default dimensions, eight seeds per family.
  double total = 0.0;
  std::size_t runs = 0;
  for (const std::string family : {"sentiment", "topic", "boolean-qa", "nli", "choice"}) {
    double fam_total = 0.0;
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
      RunConfig cfg = fixtures::stream_config({family, "sentiment"}, seed);
      cfg.sampling.enabled = false;
      const double acc = run(cfg).task_aware.at(0, 0);
      fam_total += acc;
      total += acc;
      ++runs;
    }
    MESSAGE(family << " mean isolated accuracy " << fam_total / 8.0);
  }
  const double mean = total / static_cast<double>(runs);
  MESSAGE("overall mean isolated accuracy " << mean);
  CHECK(mean >= 0.9);
}

TEST_CASE("keep_all over five tasks") {
  RunConfig cfg = fixtures::stream_config({"sentiment", "topic", "boolean-qa", "nli", "choice"}, 21);
  cfg.selection.strategy = Strategy::keep_all;
  const RunReport r = run(cfg);
  CHECK(r.pool_sizes == std::vector<std::size_t>{1, 2, 3, 4, 5});
  for (std::size_t t = 0; t < 5; ++t) {
    for (std::size_t j = t + 1; j < 5; ++j) CHECK(r.task_aware.at(j, t) == r.task_aware.at(t, t));
  }
  CHECK(r.aware_metrics.forgotten == 0);
  CHECK(r.memory.total_bytes == 5 * 10 * 16 * 4);
}

TEST_CASE("task-aware accuracy after training matches a standalone evaluation") {
  for (std::uint64_t seed : {2u, 3u}) {
    const RunConfig cfg = fixtures::stream_config({"nli", "topic", "sentiment", "choice"}, seed);
    RunArtifacts art;
    const RunReport r = run(cfg, &art);
    const std::size_t last = art.tasks.size() - 1;
    const PromptPool& pool = r.final_pool;
    for (std::size_t t = 0; t <= last; ++t) {
      const auto idx = pool.find_task(art.tasks[t].spec.name);
      if (!idx || pool.prompt(*idx).kind != PromptKind::trained) {
        CHECK(t != last);
        continue;
      }
      const RealMatrix* own[1] = {&pool.prompt(*idx).matrix};
      const EvalResult ev =
          evaluate_task(art.backbone, own, art.tasks[t].test, art.tries[t], art.vocab, true, false);
      CHECK(ev.accuracy == r.task_aware.at(last, t));
      if (t == last) CHECK(ev.accuracy == r.task_aware.at(t, t));
    }
    const EvalResult joint = evaluate_task(art.backbone, pool.matrices(), art.tasks[last].test,
                                           art.tries[last], art.vocab, true, true);
    CHECK(joint.accuracy == r.task_agnostic.at(last, last));
  }
}

TEST_CASE("every constrained prediction is a label of its task") {
  for (std::uint64_t seed : {1u, 2u}) {
    RunConfig cfg = default_config();
    cfg.run.seed = seed;
    RunArtifacts art;
    const RunReport r = run(cfg, &art);
    CHECK(r.decoding.constrained_predictions > 10000);
    CHECK(r.decoding.in_label_set == r.decoding.constrained_predictions);
    bool single_token = true;
    for (const auto& trie : art.tries) single_token = single_token && trie.max_label_length() == 1;
    if (single_token) CHECK(r.decoding.dominance_violations == 0);
    CHECK(r.pool_sizes.size() == 15);
    for (std::size_t t = 1; t < 15; ++t) CHECK(r.pool_sizes[t] <= r.pool_sizes[t - 1] + 1);
  }
}

TEST_CASE("union label decoding stays inside the seen labels") {
  RunConfig cfg = fixtures::stream_config({"sentiment", "topic", "nli"}, 4);
  cfg.decoding.union_labels = true;
  cfg.decoding.write_predictions = true;
  RunArtifacts art;
  const RunReport r = run(cfg, &art);
  std::set<std::string> seen;
  for (const auto& t : art.tasks) seen.insert(t.spec.remapped_labels.begin(), t.spec.remapped_labels.end());
  for (const auto& p : r.predictions) CHECK(seen.contains(p.constrained));
  CHECK(r.decoding.in_label_set <= r.decoding.constrained_predictions);
}

TEST_CASE("decoding off scores the unconstrained output") {
  RunConfig cfg = fixtures::stream_config({"sentiment", "nli"}, 6);
  cfg.decoding.constrained = false;
  cfg.decoding.write_predictions = true;
  const RunReport r = run(cfg);
  std::size_t right = 0, total = 0;
  for (const auto& p : r.predictions) {
    if (p.checkpoint == 1 && p.task == r.tasks[1].name && p.mode == "task_aware") {
      right += p.unconstrained == p.gold;
      ++total;
    }
  }
  REQUIRE(total == 100);
  CHECK(r.task_aware.at(1, 1) == static_cast<double>(right) / 100.0);
}

TEST_CASE("solo scoring context runs and differs from full-pool") {
  RunConfig cfg = fixtures::stream_config({"sentiment", "topic", "nli", "choice"}, 8);
  const RunReport full = run(cfg);
  cfg.selection.scoring_context = ScoringContext::solo;
  const RunReport solo = run(cfg);
  REQUIRE(full.rounds.size() == 3);
  REQUIRE(solo.rounds.size() == 3);
  // First round sees a one-prompt pool, where the two contexts coincide.
  CHECK(full.rounds[0].table.g == solo.rounds[0].table.g);
  CHECK(solo.final_pool.size() >= 1);
}

TEST_CASE("a duplicated task scores lower than a disjoint one") {
  std::size_t wins = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    RunConfig dup = fixtures::stream_config({"topic", "topic"}, seed);
    dup.stream.recipe.tasks[1].share_signal_with = 0;
    RunConfig disjoint = fixtures::stream_config({"topic", "topic"}, seed);
    const double g_dup = run(dup).rounds.at(0).table.g.at(0);
    const double g_dis = run(disjoint).rounds.at(0).table.g.at(0);
    wins += g_dup < g_dis;
  }
  CHECK(wins == 5);
}
