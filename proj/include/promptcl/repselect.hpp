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

#ifndef PROMPTCL_REPSELECT_HPP_
#define PROMPTCL_REPSELECT_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "promptcl/corpus.hpp"
#include "promptcl/kernel.hpp"
#include "promptcl/model.hpp"

namespace promptcl {

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  // One row per example, in dataset order.
  virtual RealMatrix embed(const Dataset& data) const = 0;
};

// Pooled encoding of the frozen backbone with no prompts attached.
class BackboneEmbedder : public EmbeddingProvider {
 public:
  explicit BackboneEmbedder(const FrozenBackbone& bb) : bb_(bb) {}
  RealMatrix embed(const Dataset& data) const override;

 private:
  const FrozenBackbone& bb_;
};

RealMatrix embed_examples(const Dataset& data, const FrozenBackbone& bb);

struct ClassClusters {
  std::string label;
  RealMatrix centroids;                 // C×d
  std::vector<std::size_t> assignments; // per point
  std::vector<double> similarities;     // cosine to own centroid
  std::size_t iterations = 0;
};

ClassClusters kmeans(const RealMatrix& points, std::size_t clusters, std::uint64_t seed,
                     std::size_t max_iters = 100, double tol = 1e-4);

double cosine_sim(std::span<const double> e, std::span<const double> c);

struct SelectionRecord {
  std::size_t source_index = 0;
  std::string label;
  std::size_t cluster = 0;
  double similarity = 0.0;
  bool selected = false;
  bool fill = false;
};

struct RepresentativeSet {
  Dataset data;  // shuffled selection
  std::vector<std::size_t> source_index;
  std::vector<bool> filled;
  std::vector<ClassClusters> classes;    // sorted by label
  std::vector<SelectionRecord> records;  // every input example, in input order
};

RepresentativeSet select_representatives(const Dataset& data, std::size_t k, std::size_t clusters,
                                         const EmbeddingProvider& embedder, std::uint64_t seed,
                                         bool parallel = false, std::size_t max_iters = 100,
                                         double tol = 1e-4);

void write_selection_csv(const std::filesystem::path& path, const RepresentativeSet& set);

}  // namespace promptcl

#endif  // PROMPTCL_REPSELECT_HPP_
