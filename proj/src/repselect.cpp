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

#include "promptcl/repselect.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>

namespace promptcl {

RealMatrix BackboneEmbedder::embed(const Dataset& data) const {
  if (data.empty()) throw InputError("cannot embed an empty dataset");
  RealMatrix out(data.size(), bb_.dim());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::vector<double> h = encode(bb_, {}, data.examples[i].token_ids);
    std::copy(h.begin(), h.end(), out.row(i).begin());
  }
  return out;
}

RealMatrix embed_examples(const Dataset& data, const FrozenBackbone& bb) {
  return BackboneEmbedder(bb).embed(data);
}

double cosine_sim(std::span<const double> e, std::span<const double> c) {
  const double ne = std::sqrt(dot(e, e));
  const double nc = std::sqrt(dot(c, c));
  if (ne < 1e-12 || nc < 1e-12) return 0.0;
  return std::clamp(dot(e, c) / (ne * nc), -1.0, 1.0);
}

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double t = a[i] - b[i];
    s += t * t;
  }
  return s;
}

std::size_t nearest(const RealMatrix& centroids, std::span<const double> x) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.rows(); ++c) {
    const double dd = sq_dist(centroids.row(c), x);
    if (dd < best_d) {
      best_d = dd;
      best = c;
    }
  }
  return best;
}

RealMatrix plus_plus_seeds(const RealMatrix& points, std::size_t clusters, Rng& rng) {
  const std::size_t n = points.rows();
  std::vector<std::size_t> chosen{rng.index(n)};
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  while (chosen.size() < clusters) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      dist[i] = std::min(dist[i], sq_dist(points.row(i), points.row(chosen.back())));
      total += dist[i];
    }
    std::size_t pick = n;
    if (total > 0.0) {
      const double r = rng.uniform() * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (dist[i] <= 0.0) continue;
        acc += dist[i];
        pick = i;
        if (acc > r) break;
      }
    } else {
      // All remaining mass is zero: take the lowest unused index.
      for (std::size_t i = 0; i < n && pick == n; ++i) {
        if (std::find(chosen.begin(), chosen.end(), i) == chosen.end()) pick = i;
      }
    }
    chosen.push_back(pick);
  }
  RealMatrix centroids(clusters, points.cols());
  for (std::size_t c = 0; c < clusters; ++c) {
    std::copy(points.row(chosen[c]).begin(), points.row(chosen[c]).end(),
              centroids.row(c).begin());
  }
  return centroids;
}

}  // namespace

ClassClusters kmeans(const RealMatrix& points, std::size_t clusters, std::uint64_t seed,
                     std::size_t max_iters, double tol) {
  if (points.rows() == 0) throw InputError("kmeans: no points");
  if (clusters == 0) throw InputError("kmeans: need at least one cluster");
  const std::size_t n = points.rows();
  const std::size_t d = points.cols();
  const std::size_t C = std::min(clusters, n);
  Rng rng(seed);

  ClassClusters out;
  out.centroids = plus_plus_seeds(points, C, rng);
  out.assignments.assign(n, 0);

  for (std::size_t iter = 0; iter < max_iters; ++iter) {
    for (std::size_t i = 0; i < n; ++i) out.assignments[i] = nearest(out.centroids, points.row(i));
    RealMatrix next(C, d);
    std::vector<std::size_t> counts(C, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t a = out.assignments[i];
      ++counts[a];
      for (std::size_t c = 0; c < d; ++c) next(a, c) += points(i, c);
    }
    std::vector<bool> taken(n, false);
    for (std::size_t k = 0; k < C; ++k) {
      if (counts[k] > 0) {
        const double inv = 1.0 / static_cast<double>(counts[k]);
        for (double& v : next.row(k)) v *= inv;
        continue;
      }
      std::size_t far = n;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (taken[i]) continue;
        const double dd = sq_dist(points.row(i), out.centroids.row(out.assignments[i]));
        if (dd > far_d) {
          far_d = dd;
          far = i;
        }
      }
      taken[far] = true;
      std::copy(points.row(far).begin(), points.row(far).end(), next.row(k).begin());
    }
    double shift = 0.0;
    for (std::size_t k = 0; k < C; ++k) {
      shift = std::max(shift, std::sqrt(sq_dist(next.row(k), out.centroids.row(k))));
    }
    out.centroids = std::move(next);
    out.iterations = iter + 1;
    if (shift < tol) break;
  }

  out.similarities.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.assignments[i] = nearest(out.centroids, points.row(i));
    out.similarities[i] = cosine_sim(points.row(i), out.centroids.row(out.assignments[i]));
  }
  return out;
}

namespace {

struct ClassPick {
  std::vector<std::size_t> chosen;  // indices into the class member list
  std::vector<bool> fill;
};

ClassPick pick_class(const ClassClusters& cl, std::size_t k, std::uint64_t class_seed) {
  const std::size_t n = cl.assignments.size();
  const std::size_t C = cl.centroids.rows();
  const std::size_t target = std::min(k, n);
  const std::size_t quota = (k + C - 1) / C;

  std::vector<std::vector<std::size_t>> ranked(C);
  for (std::size_t i = 0; i < n; ++i) ranked[cl.assignments[i]].push_back(i);
  for (auto& members : ranked) {
    std::stable_sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
      return cl.similarities[a] > cl.similarities[b];
    });
  }

  ClassPick pick;
  std::vector<bool> used(n, false);
  // Rank-major sweep so a k cap trims every cluster evenly.
  for (std::size_t rank = 0; rank < quota && pick.chosen.size() < target; ++rank) {
    for (std::size_t c = 0; c < C && pick.chosen.size() < target; ++c) {
      if (rank >= ranked[c].size()) continue;
      pick.chosen.push_back(ranked[c][rank]);
      pick.fill.push_back(false);
      used[ranked[c][rank]] = true;
    }
  }
  if (pick.chosen.size() < target) {
    std::vector<std::size_t> rest;
    for (std::size_t i = 0; i < n; ++i) {
      if (!used[i]) rest.push_back(i);
    }
    Rng rng(derive_seed(class_seed, "fill"));
    rng.shuffle(rest);
    for (std::size_t i = 0; pick.chosen.size() < target; ++i) {
      pick.chosen.push_back(rest[i]);
      pick.fill.push_back(true);
    }
  }
  return pick;
}

}  // namespace

RepresentativeSet select_representatives(const Dataset& data, std::size_t k, std::size_t clusters,
                                         const EmbeddingProvider& embedder, std::uint64_t seed,
                                         bool parallel, std::size_t max_iters, double tol) {
  if (data.empty()) throw InputError("representative selection on an empty dataset");
  if (k == 0 || clusters == 0) throw ConfigError("k and the cluster count must be positive");
  const RealMatrix emb = embedder.embed(data);
  if (emb.rows() != data.size()) throw InputError("embedding provider returned the wrong row count");

  std::map<std::string, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < data.size(); ++i) by_label[data.examples[i].label].push_back(i);
  std::vector<std::pair<std::string, std::vector<std::size_t>>> groups(by_label.begin(),
                                                                       by_label.end());

  RepresentativeSet out;
  out.classes.resize(groups.size());
  std::vector<ClassPick> picks(groups.size());
  parallel_for(groups.size(), parallel, [&](std::size_t g) {
    const auto& [label, members] = groups[g];
    RealMatrix pts(members.size(), emb.cols());
    for (std::size_t i = 0; i < members.size(); ++i) {
      std::copy(emb.row(members[i]).begin(), emb.row(members[i]).end(), pts.row(i).begin());
    }
    const std::uint64_t class_seed = derive_seed(seed, label);
    out.classes[g] = kmeans(pts, clusters, class_seed, max_iters, tol);
    out.classes[g].label = label;
    picks[g] = pick_class(out.classes[g], k, class_seed);
  });

  out.records.resize(data.size());
  std::vector<std::size_t> order;
  std::vector<bool> fill;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& members = groups[g].second;
    for (std::size_t i = 0; i < members.size(); ++i) {
      SelectionRecord& r = out.records[members[i]];
      r.source_index = members[i];
      r.label = groups[g].first;
      r.cluster = out.classes[g].assignments[i];
      r.similarity = out.classes[g].similarities[i];
    }
    for (std::size_t j = 0; j < picks[g].chosen.size(); ++j) {
      const std::size_t src = members[picks[g].chosen[j]];
      out.records[src].selected = true;
      out.records[src].fill = picks[g].fill[j];
      order.push_back(src);
      fill.push_back(picks[g].fill[j]);
    }
  }

  std::vector<std::size_t> perm(order.size());
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(derive_seed(seed, "shuffle"));
  rng.shuffle(perm);
  for (std::size_t p : perm) {
    out.data.examples.push_back(data.examples[order[p]]);
    out.source_index.push_back(order[p]);
    out.filled.push_back(fill[p]);
  }
  return out;
}

void write_selection_csv(const std::filesystem::path& path, const RepresentativeSet& set) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << "example_id,label,cluster,similarity,selected,fill\n";
  for (const auto& r : set.records) {
    out << r.source_index << ',' << r.label << ',' << r.cluster << ',' << format_real(r.similarity)
        << ',' << (r.selected ? 1 : 0) << ',' << (r.fill ? 1 : 0) << '\n';
  }
}

}  // namespace promptcl
