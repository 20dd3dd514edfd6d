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


// Shared builders for tests: small backbones, token-level datasets, configs.

#ifndef PROMPTCL_TESTS_FIXTURES_HPP_
#define PROMPTCL_TESTS_FIXTURES_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "promptcl/common.hpp"
#include "promptcl/config.hpp"
#include "promptcl/corpus.hpp"
#include "promptcl/kernel.hpp"
#include "promptcl/model.hpp"

namespace fixtures {

oracle::Mat rows_of(const promptcl::RealMatrix& m);
oracle::Weights weights_of(const promptcl::FrozenBackbone& bb);

promptcl::RealMatrix random_matrix(promptcl::Rng& rng, std::size_t rows, std::size_t cols,
                                   double scale = 1.0);

// Example whose inputs and gold label are given directly as token ids.
promptcl::LabeledExample token_example(std::vector<promptcl::TokenId> tokens,
                                       std::vector<promptcl::TokenId> label_ids,
                                       std::string label = {});

// Random inputs over ids [4, vocab); each gold is one of label_tokens.
promptcl::Dataset token_dataset(promptcl::Rng& rng, std::size_t n, std::size_t vocab,
                                const std::vector<promptcl::TokenId>& label_tokens,
                                std::size_t max_len = 5);

promptcl::PromptPool random_pool(promptcl::Rng& rng, std::size_t prompts, std::size_t l,
                                 std::size_t d, double scale = 0.5);

// Synthetic stream over the given families; snapshot writing off.
promptcl::RunConfig stream_config(const std::vector<std::string>& families, std::uint64_t seed);

// Fresh, empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

std::string read_file(const std::filesystem::path& path);

}  // namespace fixtures

#endif  // PROMPTCL_TESTS_FIXTURES_HPP_
