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


// JSONL manifests with label schemes the remapper has to resolve.

#include <doctest.h>

#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "fixtures.hpp"
#include "promptcl/cli.hpp"

using namespace promptcl;
using nlohmann::json;

namespace {

struct Row {
  json fields;
  std::string label;
};

void write_jsonl(const std::filesystem::path& path, const std::vector<Row>& rows,
                 const std::string& label_field = "label") {
  std::ofstream out(path);
  for (const auto& r : rows) {
    json rec = r.fields;
    rec[label_field] = r.label;
    out << rec.dump() << '\n';
  }
}

// Label-dependent words with a little noise, enough for the prompt to learn.
std::vector<Row> make_rows(promptcl::Rng& rng, std::size_t n, const std::vector<std::string>& labels,
                           const std::vector<std::string>& fields, const std::string& cue) {
  static const std::vector<std::string> filler{"the", "a", "of", "on", "with", "and", "it", "that"};
  std::vector<Row> rows;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % labels.size();
    Row r;
    r.label = labels[c];
    for (std::size_t f = 0; f < fields.size(); ++f) {
      std::string text = f == 0 ? cue : "";
      for (int w = 0; w < 4; ++w) {
        text += (text.empty() ? "" : " ") +
                (rng.uniform() < 0.5 ? "sig" + std::to_string(c) + "x" + std::to_string(rng.index(2))
                                     : filler[rng.index(filler.size())]);
      }
      r.fields[fields[f]] = text;
    }
    rows.push_back(r);
  }
  return rows;
}

struct TaskFiles {
  std::string name;
  std::vector<std::string> schema;
  std::vector<std::string> labels;
  std::string cue;
  std::string label_field = "label";
};

std::filesystem::path write_stream(const std::filesystem::path& dir, const std::vector<TaskFiles>& tasks) {
  promptcl::Rng rng(5);
  json manifest = {{"order_tag", "handmade"}, {"tasks", json::array()}};
  for (const auto& t : tasks) {
    write_jsonl(dir / (t.name + ".train.jsonl"), make_rows(rng, 60, t.labels, t.schema, t.cue), t.label_field);
    write_jsonl(dir / (t.name + ".test.jsonl"), make_rows(rng, 20, t.labels, t.schema, t.cue), t.label_field);
    manifest["tasks"].push_back({{"name", t.name},
                                 {"train", t.name + ".train.jsonl"},
                                 {"test", t.name + ".test.jsonl"},
                                 {"schema", t.schema},
                                 {"label_field", t.label_field}});
  }
  std::ofstream(dir / "manifest.json") << manifest.dump(2);

  RunConfig cfg = default_config();
  cfg.stream.source = "jsonl";
  cfg.stream.manifest = "manifest.json";
  cfg.training.epochs = 4;
  cfg.run.out_dir = (dir / "out").string();
  cfg.run.write_snapshot = false;
  std::ofstream(dir / "config.json") << config_to_json(cfg).dump(2);
  return dir / "config.json";
}

json results(const std::filesystem::path& dir) {
  return json::parse(fixtures::read_file(dir / "out" / "results.json"));
}

const std::vector<TaskFiles> kMixed = {
    {"reviews", {"sentence"}, {"0", "1"}, "a boring film"},
    {"copa", {"premise", "choice1", "choice2", "question"}, {"0", "1"}, "cause"},
    {"rte", {"premise", "hypothesis"}, {"entailment", "not_entailment"}, "however"},
    {"boolq", {"passage", "question"}, {"true", "false"}, "is"},
};

}  // namespace

TEST_CASE("mixed label schemes are identified and remapped") {
  const auto dir = fixtures::scratch_dir("ingest-mixed");
  const auto cfg = write_stream(dir, kMixed);
  std::ostringstream out, err;
  REQUIRE(cmd_run(RunOptions{cfg}, out, err) == kExitOk);
  const json res = results(dir);
  REQUIRE(res["tasks"].size() == 4);
  const auto& t = res["tasks"];
  CHECK(t[0]["identification"] == "fallback");
  CHECK(t[0]["identified_type"] == "sentiment");
  CHECK(t[0]["remapped_labels"] == json::array({"negative", "positive"}));
  CHECK(t[1]["identification"] == "rules");
  CHECK(t[1]["identified_type"] == "choice");
  CHECK(t[1]["remapped_labels"] == json::array({"choice1", "choice2"}));
  CHECK(t[2]["identified_type"] == "nli");
  CHECK(t[2]["remapped_labels"] == json::array({"entailment", "not-entailment"}));
  CHECK(t[3]["identified_type"] == "boolean-qa");
  CHECK(t[3]["raw_labels"] == json::array({"false", "true"}));
  CHECK(res["decoding"]["containment_rate"] == 1.0);
  CHECK(res["order_tag"] == "handmade");
}

TEST_CASE("a custom label field is honoured") {
  const auto dir = fixtures::scratch_dir("ingest-field");
  std::vector<TaskFiles> tasks = {kMixed[0], kMixed[2]};
  tasks[0].label_field = "gold";
  const auto cfg = write_stream(dir, tasks);
  std::ostringstream out, err;
  REQUIRE(cmd_run(RunOptions{cfg}, out, err) == kExitOk);
  CHECK(results(dir)["tasks"][0]["train_examples"] == 60);
}

TEST_CASE("broken input files are reported with their location") {
  const auto dir = fixtures::scratch_dir("ingest-broken");
  const auto cfg = write_stream(dir, {kMixed[0], kMixed[2]});
  {
    std::ofstream f(dir / "rte.train.jsonl", std::ios::app);
    f << "{\"premise\": \"x\", \"label\": \"entailment\"\n";
  }
  std::ostringstream out, err;
  CHECK(cmd_run(RunOptions{cfg}, out, err) == kExitRuntime);
  CHECK(err.str().find("rte.train.jsonl:61") != std::string::npos);

  write_stream(dir, {kMixed[0], kMixed[2]});
  {
    std::ofstream f(dir / "rte.test.jsonl", std::ios::app);
    f << "{\"premise\": \"x\", \"label\": \"entailment\"}\n";
  }
  err.str("");
  CHECK(cmd_run(RunOptions{cfg}, out, err) == kExitRuntime);
  CHECK(err.str().find("hypothesis") != std::string::npos);

  std::ofstream(dir / "manifest.json") << R"({"tasks": [{"name": "x"}]})";
  err.str("");
  CHECK(cmd_run(RunOptions{cfg}, out, err) == kExitConfig);
}

TEST_CASE("a remote remapper resolves labels the rules cannot") {
  httplib::Server server;
  std::atomic<int> hits{0};
  server.Post("/remap", [&](const httplib::Request& req, httplib::Response& res) {
    ++hits;
    const json body = json::parse(req.body);
    json map = json::object();
    for (const auto& l : body["labels"]) map[l.get<std::string>()] = l == "0" ? "negative" : "positive";
    res.set_content(json{{"task_type", "sentiment"}, {"label_map", map}}.dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  const auto dir = fixtures::scratch_dir("ingest-http");
  const auto cfg = write_stream(dir, {kMixed[0], kMixed[1]});
  RunOptions opts{cfg};
  opts.provider_url = "http://127.0.0.1:" + std::to_string(port) + "/remap";
  std::ostringstream out, err;
  const int status = cmd_run(opts, out, err);
  server.stop();
  th.join();
  REQUIRE(status == kExitOk);
  CHECK(hits == 1);
  const json res = results(dir);
  CHECK(res["tasks"][0]["identification"] == "fallback");
  CHECK(res["tasks"][0]["remapped_labels"] == json::array({"negative", "positive"}));
  CHECK(res["config"]["taskid"]["provider"] == "http");
}

TEST_CASE("an unreachable remapper halts the run") {
  int port = 0;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  const auto dir = fixtures::scratch_dir("ingest-down");
  const auto cfg_path = write_stream(dir, {kMixed[1], kMixed[0]});
  RunConfig cfg = load_config(cfg_path);
  cfg.taskid.provider = "http";
  cfg.taskid.url = "http://127.0.0.1:" + std::to_string(port) + "/remap";
  cfg.taskid.retries = 1;
  cfg.taskid.backoff_ms = 1;
  cfg.taskid.timeout_ms = 200;
  std::ofstream(cfg_path) << config_to_json(cfg).dump();
  std::ostringstream out, err;
  CHECK(cmd_run(RunOptions{cfg_path}, out, err) == kExitRuntime);
  const json res = results(dir);
  CHECK(res["partial"] == true);
  CHECK(res["tasks"].size() == 1);
  CHECK(res["error"].get<std::string>().find("2 attempts") != std::string::npos);
}
