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


#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace oracle {

Vec pooled(const Weights& w, const std::vector<Mat>& prompts, const std::vector<unsigned>& tokens) {
  const std::size_t d = w.E[0].size();
  Mat rows;
  for (const Mat& p : prompts) rows.insert(rows.end(), p.begin(), p.end());
  Vec q(d, 0.0);
  for (unsigned t : tokens) {
    rows.push_back(w.E[t]);
    for (std::size_t c = 0; c < d; ++c) q[c] += w.E[t][c];
  }
  for (double& x : q) x /= static_cast<double>(tokens.size());

  Vec s(rows.size());
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < d; ++c) acc += q[c] * rows[i][c];
    s[i] = acc / std::sqrt(static_cast<double>(d));
    top = std::max(top, s[i]);
  }
  double z = 0.0;
  for (double& x : s) {
    x = std::exp(x - top);
    z += x;
  }
  Vec h(d, 0.0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < d; ++c) h[c] += (s[i] / z) * rows[i][c];
  }
  return h;
}

Vec logits(const Weights& w, const Vec& h, unsigned previous) {
  const std::size_t d = h.size();
  Vec u(d);
  for (std::size_t r = 0; r < d; ++r) {
    double acc = w.b[r];
    for (std::size_t c = 0; c < d; ++c) acc += w.W1[r][c] * h[c] + w.W2[r][c] * w.E[previous][c];
    u[r] = std::tanh(acc);
  }
  Vec out(w.W3.size());
  for (std::size_t v = 0; v < w.W3.size(); ++v) {
    double acc = 0.0;
    for (std::size_t c = 0; c < d; ++c) acc += w.W3[v][c] * u[c];
    out[v] = acc;
  }
  return out;
}

double sequence_loss(const Weights& w, const std::vector<Mat>& prompts,
                     const std::vector<unsigned>& tokens, const std::vector<unsigned>& gold,
                     unsigned bos) {
  const Vec h = pooled(w, prompts, tokens);
  unsigned prev = bos;
  double loss = 0.0;
  for (unsigned y : gold) {
    const Vec z = logits(w, h, prev);
    const double top = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double x : z) sum += std::exp(x - top);
    loss += top + std::log(sum) - z[y];
    prev = y;
  }
  return loss;
}

Scores brute_scores(const Vec& g, double alpha) {
  Scores s;
  const auto [lo, hi] = std::minmax_element(g.begin(), g.end());
  if (*lo == *hi) {
    s.mean = s.tau = *lo;
    for (std::size_t j = 0; j < g.size(); ++j) s.high.push_back(j);
    return s;
  }
  long double sum = 0.0L;
  for (double x : g) sum += x;
  const long double mean = sum / static_cast<long double>(g.size());
  long double sq = 0.0L;
  for (double x : g) sq += (x - mean) * (x - mean);
  s.mean = static_cast<double>(mean);
  s.stddev = static_cast<double>(std::sqrt(sq / static_cast<long double>(g.size())));
  s.tau = static_cast<double>(mean + alpha * std::sqrt(sq / static_cast<long double>(g.size())));
  long double low_sum = 0.0L;
  for (std::size_t j = 0; j < g.size(); ++j) {
    if (g[j] < s.tau) {
      s.low.push_back(j);
      low_sum += g[j];
    } else {
      s.high.push_back(j);
    }
  }
  for (std::size_t j : s.low) {
    s.low_weights.push_back(low_sum < 1e-12L ? 1.0 / static_cast<double>(s.low.size())
                                             : static_cast<double>(g[j] / low_sum));
  }
  return s;
}

double cosine(const Vec& a, const Vec& b) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (std::sqrt(aa) < 1e-12 || std::sqrt(bb) < 1e-12) return 0.0;
  return ab / (std::sqrt(aa) * std::sqrt(bb));
}

Vec mean_of(const Mat& points, const std::vector<std::size_t>& members) {
  Vec m(points[0].size(), 0.0);
  for (std::size_t i : members) {
    for (std::size_t c = 0; c < m.size(); ++c) m[c] += points[i][c];
  }
  for (double& x : m) x /= static_cast<double>(members.size());
  return m;
}

BestSplit best_two_partition(const Mat& points) {
  const std::size_t n = points.size();
  BestSplit best{std::numeric_limits<double>::infinity(), 0};
  // Point 0 stays in group 0, so every split is visited once.
  for (unsigned long mask = 1; mask < (1UL << (n - 1)); ++mask) {
    std::vector<std::size_t> a{0}, b;
    for (std::size_t i = 1; i < n; ++i) ((mask >> (i - 1)) & 1UL ? b : a).push_back(i);
    double sse = 0.0;
    for (const auto* group : {&a, &b}) {
      const Vec m = mean_of(points, *group);
      for (std::size_t i : *group) {
        for (std::size_t c = 0; c < m.size(); ++c) sse += (points[i][c] - m[c]) * (points[i][c] - m[c]);
      }
    }
    if (sse < best.sse) best = {sse, mask << 1};
  }
  return best;
}

}  // namespace oracle
