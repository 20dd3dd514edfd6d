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

#include "promptcl/pool.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace promptcl {

ScoreTable make_score_table(std::vector<double> g, double alpha) {
  ScoreTable t;
  t.alpha = alpha;
  t.g = std::move(g);
  if (t.g.empty()) return t;
  for (double v : t.g) {
    if (!std::isfinite(v) || v < 0.0) {
      throw TrainingError("gradient score is not a finite non-negative value");
    }
  }
  double total = 0.0;
  for (double v : t.g) total += v;
  const double n = static_cast<double>(t.g.size());
  // An all-equal table must give tau == g exactly, which summation can miss.
  const bool uniform = std::all_of(t.g.begin(), t.g.end(), [&](double v) { return v == t.g[0]; });
  t.mean = uniform ? t.g[0] : total / n;
  double var = 0.0;
  for (double v : t.g) var += (v - t.mean) * (v - t.mean);
  t.stddev = std::sqrt(var / n);
  t.tau = t.mean + alpha * t.stddev;
  return t;
}

ScoreTable score_pool(const FrozenBackbone& bb, PromptPool& pool, const Dataset& data, double alpha,
                      ScoringContext ctx, bool parallel) {
  ScoreTable t = make_score_table(pool_gradient_norms(bb, pool, data, ctx, parallel), alpha);
  for (std::size_t j = 0; j < pool.size(); ++j) pool.entries[j].score_history.push_back(t.g[j]);
  return t;
}

Partition partition_pool(const ScoreTable& scores) {
  Partition p;
  for (std::size_t j = 0; j < scores.g.size(); ++j) {
    (scores.g[j] < scores.tau ? p.low : p.high).push_back(j);
  }
  return p;
}

std::vector<double> aggregation_weights(std::span<const double> g_low) {
  std::vector<double> w(g_low.size());
  double total = 0.0;
  for (double v : g_low) total += v;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = total < 1e-12 ? 1.0 / static_cast<double>(w.size()) : g_low[i] / total;
  }
  return w;
}

std::optional<Prompt> aggregate_low(const PromptPool& pool, const Partition& part,
                                    const ScoreTable& scores) {
  if (part.low.empty()) return std::nullopt;
  std::vector<double> g_low;
  for (std::size_t j : part.low) g_low.push_back(scores.g.at(j));
  const std::vector<double> w = aggregation_weights(g_low);
  const RealMatrix& first = pool.prompt(part.low.front()).matrix;
  Prompt agg;
  agg.kind = PromptKind::aggregated;
  agg.matrix = RealMatrix(first.rows(), first.cols());
  for (std::size_t i = 0; i < part.low.size(); ++i) {
    const Prompt& p = pool.prompt(part.low[i]);
    if (p.matrix.rows() != first.rows() || p.matrix.cols() != first.cols()) {
      throw InputError("cannot aggregate prompts of different shapes");
    }
    for (std::size_t k = 0; k < p.matrix.size(); ++k) agg.matrix.data()[k] += w[i] * p.matrix.data()[k];
    agg.tasks.insert(agg.tasks.end(), p.tasks.begin(), p.tasks.end());
  }
  return agg;
}

PromptPool compress(const PromptPool& pool, const Partition& part, const ScoreTable& scores) {
  PromptPool out;
  for (std::size_t j : part.high) out.entries.push_back(pool.entries.at(j));
  if (auto agg = aggregate_low(pool, part, scores)) out.append(std::move(*agg));
  return out;
}

PromptPool compress_and_append(const PromptPool& pool, const Partition& part,
                               const ScoreTable& scores, Prompt new_prompt) {
  PromptPool out = compress(pool, part, scores);
  out.append(std::move(new_prompt));
  return out;
}

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::gradient: return "gradient";
    case Strategy::fifo: return "fifo";
    case Strategy::random: return "random";
    case Strategy::keep_all: return "keep_all";
  }
  return "gradient";
}

Strategy strategy_from_string(const std::string& text) {
  if (text == "gradient") return Strategy::gradient;
  if (text == "fifo") return Strategy::fifo;
  if (text == "random") return Strategy::random;
  if (text == "keep_all") return Strategy::keep_all;
  throw ConfigError("unknown strategy '" + text + "'");
}

PromptPool apply_strategy(Strategy s, PromptPool pool, const StrategyInputs& in) {
  switch (s) {
    case Strategy::keep_all:
      return pool;
    case Strategy::gradient: {
      if (pool.empty()) return pool;
      if (in.scores == nullptr) throw ConfigError("gradient strategy needs a score table");
      return compress(pool, partition_pool(*in.scores), *in.scores);
    }
    case Strategy::fifo:
    case Strategy::random: {
      if (!in.budget || *in.budget == 0) {
        throw ConfigError(to_string(s) + " strategy needs a budget of at least 1");
      }
      Rng rng(in.seed);
      while (pool.size() > *in.budget) {
        const std::size_t victim = s == Strategy::fifo ? 0 : rng.index(pool.size());
        pool.entries.erase(pool.entries.begin() + static_cast<std::ptrdiff_t>(victim));
      }
      return pool;
    }
  }
  return pool;
}

MemoryReport memory_report(std::size_t prompts, std::size_t bytes_per_value, std::size_t l,
                           std::size_t d, std::size_t reference_prompts) {
  MemoryReport r;
  r.prompts = prompts;
  r.bytes_per_prompt = l * d * bytes_per_value;
  r.total_bytes = prompts * r.bytes_per_prompt;
  r.total_kb = static_cast<double>(r.total_bytes) / 1024.0;
  r.reference_prompts = reference_prompts;
  r.reference_bytes = reference_prompts * r.bytes_per_prompt;
  if (r.reference_bytes > 0) {
    r.reduction = 1.0 - static_cast<double>(r.total_bytes) / static_cast<double>(r.reference_bytes);
  }
  return r;
}

// --- snapshots -------------------------------------------------------------

namespace {

std::string hex_of(double v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(std::bit_cast<std::uint64_t>(v)));
  return buf;
}

double double_of(const std::string& hex) {
  if (hex.size() != 16) throw SnapshotCorruptError("bad value encoding '" + hex + "'");
  std::uint64_t bits = 0;
  for (char c : hex) {
    bits <<= 4;
    if (c >= '0' && c <= '9') bits |= static_cast<std::uint64_t>(c - '0');
    else if (c >= 'a' && c <= 'f') bits |= static_cast<std::uint64_t>(c - 'a' + 10);
    else throw SnapshotCorruptError("bad value encoding '" + hex + "'");
  }
  return std::bit_cast<double>(bits);
}

std::string checksum_of(const nlohmann::json& body) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(body.dump())));
  return buf;
}

}  // namespace

void snapshot_save(const PromptPool& pool, const std::filesystem::path& path) {
  std::size_t l = 0;
  std::size_t d = 0;
  if (!pool.empty()) {
    l = pool.prompt(0).matrix.rows();
    d = pool.prompt(0).matrix.cols();
  }
  nlohmann::json prompts = nlohmann::json::array();
  for (const auto& e : pool.entries) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t r = 0; r < e.prompt.matrix.rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (double v : e.prompt.matrix.row(r)) row.push_back(hex_of(v));
      rows.push_back(std::move(row));
    }
    nlohmann::json history = nlohmann::json::array();
    for (double v : e.score_history) history.push_back(hex_of(v));
    prompts.push_back({{"tasks", e.prompt.tasks},
                       {"kind", to_string(e.prompt.kind)},
                       {"rows", std::move(rows)},
                       {"score_history", std::move(history)}});
  }
  nlohmann::json body = {
      {"header",
       {{"version", kSnapshotVersion}, {"l", l}, {"d", d}, {"value_encoding", "ieee754-binary64-hex"}}},
      {"prompts", std::move(prompts)}};
  const std::string sum = checksum_of(body);
  body["checksum"] = sum;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write snapshot " + path.string());
  out << body.dump(1) << '\n';
}

PromptPool snapshot_load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open snapshot " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  nlohmann::json doc = nlohmann::json::parse(ss.str(), nullptr, false);
  if (doc.is_discarded() || !doc.is_object() || !doc.contains("checksum") ||
      !doc.contains("header") || !doc.contains("prompts")) {
    throw SnapshotCorruptError("snapshot " + path.string() + " is truncated or malformed");
  }
  try {
    const std::string stored = doc["checksum"].get<std::string>();
    doc.erase("checksum");
    if (checksum_of(doc) != stored) {
      throw SnapshotCorruptError("snapshot " + path.string() + " fails its checksum");
    }
    const int version = doc["header"]["version"].get<int>();
    if (version != kSnapshotVersion) {
      throw SnapshotVersionError("snapshot version " + std::to_string(version) +
                                 " is not supported (expected " +
                                 std::to_string(kSnapshotVersion) + ")");
    }
    const std::size_t l = doc["header"]["l"].get<std::size_t>();
    const std::size_t d = doc["header"]["d"].get<std::size_t>();
    PromptPool pool;
    for (const auto& p : doc["prompts"]) {
      PoolEntry e;
      e.prompt.tasks = p["tasks"].get<std::vector<std::string>>();
      e.prompt.kind = prompt_kind_from_string(p["kind"].get<std::string>());
      const auto& rows = p["rows"];
      if (rows.size() != l) throw SnapshotCorruptError("prompt row count differs from header");
      e.prompt.matrix = RealMatrix(l, d);
      for (std::size_t r = 0; r < l; ++r) {
        if (rows[r].size() != d) throw SnapshotCorruptError("prompt width differs from header");
        for (std::size_t c = 0; c < d; ++c) {
          e.prompt.matrix(r, c) = double_of(rows[r][c].get<std::string>());
        }
      }
      for (const auto& v : p["score_history"]) e.score_history.push_back(double_of(v.get<std::string>()));
      pool.entries.push_back(std::move(e));
    }
    return pool;
  } catch (const nlohmann::json::exception& e) {
    throw SnapshotCorruptError("snapshot " + path.string() + " has an invalid layout: " + e.what());
  } catch (const InputError& e) {
    throw SnapshotCorruptError(e.what());
  }
}

void write_scores_csv(const std::filesystem::path& path,
                      const std::vector<std::pair<std::string, ScoreTable>>& rounds) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << "round,task,prompt_index,g,mean,stddev,tau,alpha,side\n";
  for (std::size_t r = 0; r < rounds.size(); ++r) {
    const auto& [task, t] = rounds[r];
    for (std::size_t j = 0; j < t.g.size(); ++j) {
      out << r << ',' << task << ',' << j << ',' << format_real(t.g[j]) << ','
          << format_real(t.mean) << ',' << format_real(t.stddev) << ',' << format_real(t.tau) << ','
          << format_real(t.alpha) << ',' << (t.g[j] < t.tau ? "low" : "high") << '\n';
    }
  }
}

}  // namespace promptcl
