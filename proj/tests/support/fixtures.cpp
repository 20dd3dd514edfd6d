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


#include "fixtures.hpp"

#include <fstream>
#include <sstream>

namespace fixtures {

using namespace promptcl;

oracle::Mat rows_of(const RealMatrix& m) {
  oracle::Mat out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) out[r].assign(m.row(r).begin(), m.row(r).end());
  return out;
}

oracle::Weights weights_of(const FrozenBackbone& bb) {
  return {rows_of(bb.E), rows_of(bb.W1), rows_of(bb.W2), rows_of(bb.W3), rows_of(bb.b)[0]};
}

RealMatrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale) {
  RealMatrix m(rows, cols);
  for (double& x : m.data()) x = scale * rng.normal();
  return m;
}

LabeledExample token_example(std::vector<TokenId> tokens, std::vector<TokenId> label_ids,
                             std::string label) {
  LabeledExample ex;
  ex.token_ids = std::move(tokens);
  ex.label_ids = std::move(label_ids);
  ex.label = label;
  ex.original_label = label;
  return ex;
}

Dataset token_dataset(Rng& rng, std::size_t n, std::size_t vocab,
                      const std::vector<TokenId>& label_tokens, std::size_t max_len) {
  Dataset data;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<TokenId> toks(1 + rng.index(max_len));
    for (TokenId& t : toks) t = static_cast<TokenId>(kReservedTokens + rng.index(vocab - kReservedTokens));
    const TokenId gold = label_tokens[rng.index(label_tokens.size())];
    data.examples.push_back(token_example(std::move(toks), {gold}, std::to_string(gold)));
  }
  return data;
}

PromptPool random_pool(Rng& rng, std::size_t prompts, std::size_t l, std::size_t d, double scale) {
  PromptPool pool;
  for (std::size_t j = 0; j < prompts; ++j) {
    pool.append(Prompt{{"task" + std::to_string(j)}, random_matrix(rng, l, d, scale),
                       PromptKind::trained});
  }
  return pool;
}

RunConfig stream_config(const std::vector<std::string>& families, std::uint64_t seed) {
  RunConfig cfg = default_config();
  cfg.stream.recipe.tasks.clear();
  for (const std::string& f : families) cfg.stream.recipe.tasks.push_back(TaskRecipe{f});
  cfg.run.seed = seed;
  cfg.run.write_snapshot = false;
  return cfg;
}

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("promptcl-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace fixtures
