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

#ifndef PROMPTCL_COMMON_HPP_
#define PROMPTCL_COMMON_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace promptcl {

// Error taxonomy. Every failure the library reports is one of these; the CLI
// maps ConfigError to exit code 2 and everything else to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class InputError : public Error {
 public:
  using Error::Error;
};
class ConfigError : public Error {
 public:
  using Error::Error;
};
class TrainingError : public Error {
 public:
  using Error::Error;
};
class IdentificationError : public Error {
 public:
  using Error::Error;
};
class ProtocolError : public Error {
 public:
  using Error::Error;
};
class DecodingError : public Error {
 public:
  using Error::Error;
};
class SnapshotVersionError : public Error {
 public:
  using Error::Error;
};
class SnapshotCorruptError : public Error {
 public:
  using Error::Error;
};

using TokenId = std::uint32_t;

// Seeded generator with platform-independent derived distributions. The
// standard <random> distributions are implementation-defined, which would make
// streams and selections differ between standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  // Uniform integer in [0, n). n must be > 0.
  std::size_t index(std::size_t n);
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = index(i);
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t fnv1a64(std::string_view text);
// Mixes a base seed with a tag so that independent consumers get unrelated
// streams.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag);
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag);

// True unless GRID_NO_PARALLEL=1 is set in the environment.
bool parallel_enabled();

// Runs fn(i) for i in [0, n). With parallel set, work is split over the
// hardware threads, or over GRID_THREADS threads when that variable is set.
// Callers write into index-addressed slots so scheduling never shows.
void parallel_for(std::size_t n, bool parallel,
                  const std::function<void(std::size_t)>& fn);

std::string to_lower(std::string_view text);
std::vector<std::string> split_whitespace(std::string_view text);

// Shortest text that parses back to the same double.
std::string format_real(double value);

}  // namespace promptcl

#endif  // PROMPTCL_COMMON_HPP_
