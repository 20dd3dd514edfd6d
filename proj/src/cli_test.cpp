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


#include "promptcl/cli.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

#include "fixtures.hpp"

using namespace promptcl;
using nlohmann::json;

namespace {

json quick_doc(const std::filesystem::path& out) {
  RunConfig cfg = fixtures::stream_config({"sentiment", "topic", "nli"}, 5);
  cfg.stream.recipe.train_per_task = 30;
  cfg.stream.recipe.test_per_task = 12;
  cfg.model.dim = 8;
  cfg.training.prompt_length = 3;
  cfg.training.epochs = 2;
  cfg.sampling.k = 4;
  cfg.sampling.clusters = 2;
  cfg.run.out_dir = out.string();
  return config_to_json(cfg);
}

std::filesystem::path write_config(const std::filesystem::path& dir, const json& doc) {
  const auto path = dir / "config.json";
  std::ofstream(path) << doc.dump(2);
  return path;
}

// Minimal results.json carrying just what the report reads.
void write_results(const std::filesystem::path& dir, const std::vector<std::string>& names,
                   const json& aware, const json& agnostic) {
  json tasks = json::array();
  for (const auto& n : names) tasks.push_back({{"name", n}});
  const json metric = {{"average_final_accuracy", 0.5},
                       {"bwt", {{"value", 0.0}, {"defined", names.size() > 1}}},
                       {"fwt", {{"value", 0.0}, {"defined", names.size() > 1}}},
                       {"forgotten_pairs", 0}};
  const json doc = {{"tasks", tasks},
                    {"accuracy", {{"task_aware", aware}, {"task_agnostic", agnostic}}},
                    {"metrics", {{"task_aware", metric}, {"task_agnostic", metric}}},
                    {"final_pool", json::array()},
                    {"memory", {{"total_kb", 0.0}}}};
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "results.json") << doc.dump();
}

int run_argv(std::vector<std::string> args) {
  args.insert(args.begin(), "promptcl");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return cli_main(static_cast<int>(argv.size()), argv.data());
}

}  // namespace

TEST_CASE("axis parsing") {
  CHECK(parse_axis("strategy").values ==
        std::vector<std::string>{"gradient", "fifo", "random", "keep_all"});
  CHECK(parse_axis("alpha=0,0.5,1").values == std::vector<std::string>{"0", "0.5", "1"});
  CHECK(parse_axis("prompt_length").values.size() == 3);
  CHECK(parse_axis("decoding").values == std::vector<std::string>{"on", "off"});
  CHECK_THROWS_AS(parse_axis("colour"), ConfigError);
  CHECK_THROWS_AS(parse_axis("alpha="), ConfigError);
  CHECK_THROWS_AS(parse_axis("alpha=big"), ConfigError);
  CHECK_THROWS_AS(parse_axis("prompt_length=2.5"), ConfigError);
  CHECK_THROWS_AS(parse_axis("decoding=maybe"), ConfigError);

  RunConfig cfg = default_config();
  apply_axis_value(cfg, "alpha", "1.25");
  CHECK(cfg.selection.alpha == 1.25);
  apply_axis_value(cfg, "gradient_selection", "off");
  CHECK(cfg.selection.strategy == Strategy::keep_all);
  apply_axis_value(cfg, "decoding", "off");
  CHECK_FALSE(cfg.decoding.constrained);
  apply_axis_value(cfg, "prompt_length", "20");
  CHECK(cfg.training.prompt_length == 20);
}

TEST_CASE("run: missing config names the path") {
  std::ostringstream out, err;
  CHECK(cmd_run(RunOptions{"/nonexistent/cfg.json"}, out, err) == kExitConfig);
  CHECK(err.str().find("/nonexistent/cfg.json") != std::string::npos);
}

TEST_CASE("run: invalid config exits 2") {
  const auto dir = fixtures::scratch_dir("cli-invalid");
  json doc = quick_doc(dir / "out");
  doc["training"]["epochs"] = 0;
  std::ostringstream out, err;
  CHECK(cmd_run(RunOptions{write_config(dir, doc)}, out, err) == kExitConfig);
  CHECK(err.str().find("training.epochs") != std::string::npos);
  CHECK_FALSE(std::filesystem::exists(dir / "out"));
}

TEST_CASE("run writes outputs and is repeatable") {
  const auto dir = fixtures::scratch_dir("cli-run");
  const auto cfg_path = write_config(dir, quick_doc(dir / "out"));
  std::ostringstream out, err;
  REQUIRE(cmd_run(RunOptions{cfg_path}, out, err) == kExitOk);
  CHECK(out.str().find("results.json") != std::string::npos);
  const std::string first = fixtures::read_file(dir / "out" / "results.json");
  const json doc = json::parse(first);
  CHECK(doc["tasks"].size() == 3);
  CHECK(config_from_json(doc["config"]) == load_config(cfg_path));
  REQUIRE(cmd_run(RunOptions{cfg_path}, out, err) == kExitOk);
  CHECK(fixtures::read_file(dir / "out" / "results.json") == first);

  RunOptions over{cfg_path, dir / "other", 99};
  REQUIRE(cmd_run(over, out, err) == kExitOk);
  const json other = json::parse(fixtures::read_file(dir / "other" / "results.json"));
  CHECK(other["seed"] == 99);
  CHECK(other["config"]["run"]["out_dir"] == (dir / "other").string());
}

TEST_CASE("run: identification halt exits 1 with a partial report") {
  const auto dir = fixtures::scratch_dir("cli-partial");
  json doc = quick_doc(dir / "out");
  doc["stream"]["tasks"][1]["numeric_labels"] = true;
  doc["taskid"]["provider"] = "none";
  std::ostringstream out, err;
  CHECK(cmd_run(RunOptions{write_config(dir, doc)}, out, err) == kExitRuntime);
  CHECK(err.str().find("partial") != std::string::npos);
  const json res = json::parse(fixtures::read_file(dir / "out" / "results.json"));
  CHECK(res["partial"] == true);
  CHECK(res["tasks"].size() == 1);
}

TEST_CASE("ablate") {
  const auto dir = fixtures::scratch_dir("cli-ablate");
  const auto cfg_path = write_config(dir, quick_doc(dir / "out"));
  std::ostringstream out, err;
  CHECK(cmd_ablate(RunOptions{cfg_path}, {}, out, err) == kExitConfig);
  CHECK(cmd_ablate(RunOptions{cfg_path}, {"wat"}, out, err) == kExitConfig);
  REQUIRE(cmd_ablate(RunOptions{cfg_path}, {"alpha=0,0.5,1"}, out, err) == kExitOk);
  for (const char* cell : {"alpha-0", "alpha-0.5", "alpha-1"}) {
    const json res = json::parse(fixtures::read_file(dir / "out" / cell / "results.json"));
    const double alpha = res["config"]["selection"]["alpha"].get<double>();
    for (const auto& round : res["score_rounds"]) {
      CHECK(round["alpha"] == alpha);
      CHECK(round["tau"].get<double>() ==
            round["mean"].get<double>() + alpha * round["stddev"].get<double>());
    }
  }
  const std::string summary = fixtures::read_file(dir / "out" / "summary.csv");
  CHECK(std::count(summary.begin(), summary.end(), '\n') == 4);
  CHECK(summary.rfind("rank,cell,alpha,", 0) == 0);

  const auto dir2 = fixtures::scratch_dir("cli-ablate2");
  const auto cfg2 = write_config(dir2, quick_doc(dir2 / "out"));
  REQUIRE(cmd_ablate(RunOptions{cfg2}, {"strategy", "decoding"}, out, err) == kExitOk);
  std::size_t subdirs = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir2 / "out")) subdirs += e.is_directory();
  CHECK(subdirs == 8);
  CHECK(std::filesystem::exists(dir2 / "out" / "strategy-keep_all__decoding-off" / "results.json"));
}

TEST_CASE("report: hand-built three-task fixture") {
  const auto dir = fixtures::scratch_dir("cli-report");
  // Dyadic values keep the subtractions exact.
  const json agn = json::array({json::array({0.875, 0.5, nullptr}), json::array({0.625, 0.75, 0.25}),
                                json::array({0.5, 0.875, 0.5})});
  const json aware = json::array({json::array({0.875, 0.5, nullptr}), json::array({0.875, 0.75, 0.25}),
                                  json::array({0.875, 0.75, 0.5})});
  write_results(dir, {"a", "b", "c"}, aware, agn);
  std::ostringstream out, err;
  REQUIRE(cmd_report(dir, out, err) == kExitOk);
  CHECK(fixtures::read_file(dir / "bwt_heatmap.csv") ==
        "checkpoint,a,b,c\n"
        "a,0,,\n"
        "b,0.25,0,\n"
        "c,0.375,-0.125,0\n");
  CHECK(fixtures::read_file(dir / "bwt_heatmap_task_aware.csv") ==
        "checkpoint,a,b,c\na,0,,\nb,0,0,\nc,0,0,0\n");
  CHECK(fixtures::read_file(dir / "bwt_bars.csv") ==
        "task,bwt_task_aware,bwt_task_agnostic\na,0,-0.375\nb,0,0.125\nc,0,0\n");
  CHECK(out.str().find("task_agnostic: avg") != std::string::npos);
}

TEST_CASE("report: single task and missing results") {
  const auto dir = fixtures::scratch_dir("cli-report1");
  write_results(dir, {"only"}, json::array({json::array({0.75})}), json::array({json::array({0.75})}));
  std::ostringstream out, err;
  REQUIRE(cmd_report(dir, out, err) == kExitOk);
  CHECK(fixtures::read_file(dir / "bwt_heatmap.csv") == "checkpoint,only\nonly,0\n");
  CHECK(cmd_report(fixtures::scratch_dir("cli-empty"), out, err) == kExitConfig);
}

TEST_CASE("generate writes a stream that runs as jsonl") {
  const auto dir = fixtures::scratch_dir("cli-generate");
  const auto cfg_path = write_config(dir, quick_doc(dir / "data"));
  std::ostringstream out, err;
  REQUIRE(cmd_generate(RunOptions{cfg_path}, out, err) == kExitOk);
  const json manifest = json::parse(fixtures::read_file(dir / "data" / "manifest.json"));
  CHECK(manifest["tasks"].size() == 3);

  json doc = quick_doc(dir / "out");
  doc["stream"] = {{"source", "jsonl"}, {"manifest", "data/manifest.json"}};
  const auto jsonl_cfg = dir / "jsonl.json";
  std::ofstream(jsonl_cfg) << doc.dump();
  REQUIRE(cmd_run(RunOptions{jsonl_cfg}, out, err) == kExitOk);
  const json res = json::parse(fixtures::read_file(dir / "out" / "results.json"));
  CHECK(res["tasks"].size() == 3);
  CHECK(res["tasks"][0]["name"] == manifest["tasks"][0]["name"]);

  // The jsonl copy trains on the same data as the synthetic run.
  json synth = quick_doc(dir / "synth");
  const auto synth_cfg = dir / "synth.json";
  std::ofstream(synth_cfg) << synth.dump();
  REQUIRE(cmd_run(RunOptions{synth_cfg}, out, err) == kExitOk);
  const json res2 = json::parse(fixtures::read_file(dir / "synth" / "results.json"));
  CHECK(res2["accuracy"] == res["accuracy"]);
}

TEST_CASE("argument handling") {
  CHECK(run_argv({}) == kExitConfig);
  CHECK(run_argv({"bogus"}) == kExitConfig);
  CHECK(run_argv({"run"}) == kExitConfig);
  CHECK(run_argv({"defaults"}) == kExitOk);
  CHECK(run_argv({"--help"}) == kExitOk);
  const auto dir = fixtures::scratch_dir("cli-argv");
  const auto cfg_path = write_config(dir, quick_doc(dir / "ignored"));
  CHECK(run_argv({"run", "--config", cfg_path.string(), "--out", (dir / "o").string(), "--seed", "4"}) ==
        kExitOk);
  CHECK(json::parse(fixtures::read_file(dir / "o" / "results.json"))["seed"] == 4);
  CHECK(run_argv({"report", (dir / "o").string()}) == kExitOk);
  CHECK(std::filesystem::exists(dir / "o" / "bwt_heatmap.csv"));
}
