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

#ifndef PROMPTCL_CLI_HPP_
#define PROMPTCL_CLI_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "promptcl/config.hpp"
#include "promptcl/harness.hpp"

namespace promptcl {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitConfig = 2;

struct RunOptions {
  std::filesystem::path config;
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> provider_url;
};

int cmd_run(const RunOptions& opts, std::ostream& out, std::ostream& err);

struct AblationAxis {
  std::string name;
  std::vector<std::string> values;
};

// "strategy", "decoding", "gradient_selection", or "name=v1,v2,...".
AblationAxis parse_axis(const std::string& text);
void apply_axis_value(RunConfig& cfg, const std::string& axis, const std::string& value);

int cmd_ablate(const RunOptions& opts, const std::vector<std::string>& axes, std::ostream& out,
               std::ostream& err);
int cmd_report(const std::filesystem::path& dir, std::ostream& out, std::ostream& err);
int cmd_generate(const RunOptions& opts, std::ostream& out, std::ostream& err);

int cli_main(int argc, char** argv);

}  // namespace promptcl

#endif  // PROMPTCL_CLI_HPP_
