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

#include "promptcl/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace promptcl {

RealMatrix::RealMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw InputError("RealMatrix: data length " + std::to_string(data_.size()) +
                     " does not match " + std::to_string(rows_) + "x" +
                     std::to_string(cols_));
  }
}

RealMatrix::RealMatrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw InputError("RealMatrix: ragged initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

RealMatrix RealMatrix::identity(std::size_t n) {
  RealMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

RealMatrix RealMatrix::row_vector(std::span<const double> values) {
  return RealMatrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

bool RealMatrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double RealMatrix::frobenius_norm() const {
  double acc = 0.0;
  for (double v : data_) acc += v * v;
  return std::sqrt(acc);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

RealMatrix embed_lookup(const RealMatrix& table, std::span<const TokenId> token_ids) {
  RealMatrix out(token_ids.size(), table.cols());
  for (std::size_t t = 0; t < token_ids.size(); ++t) {
    if (token_ids[t] >= table.rows()) {
      throw InputError("embed_lookup: token id " + std::to_string(token_ids[t]) +
                       " out of range for table with " + std::to_string(table.rows()) +
                       " rows");
    }
    auto src = table.row(token_ids[t]);
    std::copy(src.begin(), src.end(), out.row(t).begin());
  }
  return out;
}

PoolResult attention_pool(std::span<const double> query, const RealMatrix& values) {
  if (values.rows() == 0) throw InputError("attention_pool: empty values");
  if (query.size() != values.cols()) {
    throw InputError("attention_pool: query length " + std::to_string(query.size()) +
                     " != values.cols " + std::to_string(values.cols()));
  }
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(values.cols()));
  std::vector<double> scores(values.rows());
  for (std::size_t i = 0; i < values.rows(); ++i) {
    scores[i] = dot(query, values.row(i)) * inv_sqrt;
  }
  PoolResult result;
  result.weights = softmax(scores);
  result.pooled.assign(values.cols(), 0.0);
  for (std::size_t i = 0; i < values.rows(); ++i) {
    const double w = result.weights[i];
    auto v = values.row(i);
    for (std::size_t c = 0; c < values.cols(); ++c) result.pooled[c] += w * v[c];
  }
  return result;
}

std::vector<double> affine(const RealMatrix& weights, std::span<const double> x,
                           std::span<const double> bias) {
  if (weights.cols() != x.size() || weights.rows() != bias.size()) {
    throw InputError("affine: shape mismatch (W " + std::to_string(weights.rows()) + "x" +
                     std::to_string(weights.cols()) + ", x " + std::to_string(x.size()) +
                     ", b " + std::to_string(bias.size()) + ")");
  }
  std::vector<double> out(weights.rows());
  for (std::size_t r = 0; r < weights.rows(); ++r) out[r] = dot(weights.row(r), x) + bias[r];
  return out;
}

std::vector<double> tanh_elem(std::span<const double> x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::tanh(x[i]);
  return out;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - top);
    total += out[i];
  }
  for (double& p : out) p /= total;
  return out;
}

XentResult softmax_xent(std::span<const double> logits, std::size_t gold) {
  if (gold >= logits.size()) {
    throw InputError("softmax_xent: gold index " + std::to_string(gold) +
                     " out of range for " + std::to_string(logits.size()) + " logits");
  }
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double z : logits) total += std::exp(z - top);
  XentResult result;
  result.probs = softmax(logits);
  result.loss = std::log(total) - (logits[gold] - top);
  return result;
}

// ---------------------------------------------------------------------------
// Tape

Tape::Var Tape::push(RealMatrix value, bool requires_grad,
                     std::function<void(Tape&)> backward) {
  Node node;
  node.owned = std::move(value);
  node.requires_grad = requires_grad;
  if (requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

Tape::Var Tape::constant_ref(const RealMatrix& value) {
  Node node;
  node.ref = &value;
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

Tape::Var Tape::constant(RealMatrix value) { return push(std::move(value), false, {}); }

Tape::Var Tape::variable(RealMatrix value) { return push(std::move(value), true, {}); }

const RealMatrix& Tape::value(Var v) const {
  const Node& node = nodes_.at(v.id);
  return node.ref != nullptr ? *node.ref : node.owned;
}

const RealMatrix& Tape::grad(Var v) const { return nodes_.at(v.id).grad; }

const std::vector<double>& Tape::attention_weights(Var pooled) const {
  return nodes_.at(pooled.id).aux;
}

RealMatrix& Tape::grad_slot(std::size_t id) { return nodes_[id].grad; }

Tape::Var Tape::embed_lookup(Var table, std::span<const TokenId> token_ids) {
  std::vector<TokenId> ids(token_ids.begin(), token_ids.end());
  RealMatrix out = promptcl::embed_lookup(value(table), ids);
  const std::size_t self = nodes_.size();
  return push(std::move(out), requires_grad(table), [table, ids, self](Tape& t) {
    const RealMatrix& g = t.nodes_[self].grad;
    RealMatrix& dt = t.grad_slot(table.id);
    for (std::size_t r = 0; r < ids.size(); ++r) {
      auto src = g.row(r);
      auto dst = dt.row(ids[r]);
      for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
    }
  });
}

Tape::Var Tape::concat_rows(std::span<const Var> parts) {
  std::size_t rows = 0;
  std::size_t cols = parts.empty() ? 0 : value(parts.front()).cols();
  bool needs = false;
  for (Var p : parts) {
    const RealMatrix& m = value(p);
    if (m.cols() != cols) throw InputError("concat_rows: column mismatch");
    rows += m.rows();
    needs = needs || requires_grad(p);
  }
  RealMatrix out(rows, cols);
  std::size_t offset = 0;
  for (Var p : parts) {
    const RealMatrix& m = value(p);
    std::copy(m.data().begin(), m.data().end(), out.data().begin() + offset * cols);
    offset += m.rows();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  const std::size_t self = nodes_.size();
  return push(std::move(out), needs, [inputs, self](Tape& t) {
    const RealMatrix& g = t.nodes_[self].grad;
    std::size_t offset = 0;
    for (Var p : inputs) {
      const std::size_t n = t.value(p).size();
      if (t.requires_grad(p)) {
        RealMatrix& dp = t.grad_slot(p.id);
        for (std::size_t i = 0; i < n; ++i) dp.data()[i] += g.data()[offset + i];
      }
      offset += n;
    }
  });
}

Tape::Var Tape::mean_rows(Var x) {
  const RealMatrix& m = value(x);
  if (m.rows() == 0) throw InputError("mean_rows: empty input");
  RealMatrix out(1, m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) out(0, c) += m(r, c);
  }
  const double inv = 1.0 / static_cast<double>(m.rows());
  for (double& v : out.data()) v *= inv;
  const std::size_t self = nodes_.size();
  return push(std::move(out), requires_grad(x), [x, self, inv](Tape& t) {
    const RealMatrix& g = t.nodes_[self].grad;
    RealMatrix& dx = t.grad_slot(x.id);
    for (std::size_t r = 0; r < dx.rows(); ++r) {
      for (std::size_t c = 0; c < dx.cols(); ++c) dx(r, c) += g(0, c) * inv;
    }
  });
}

Tape::Var Tape::attention_pool(Var query, Var values) {
  const RealMatrix& q = value(query);
  const RealMatrix& v = value(values);
  if (q.rows() != 1) throw InputError("attention_pool: query must be a single row");
  PoolResult pr = promptcl::attention_pool(q.row(0), v);
  const std::size_t self = nodes_.size();
  Var out = push(RealMatrix::row_vector(pr.pooled),
                 requires_grad(query) || requires_grad(values), [query, values, self](Tape& t) {
                   const RealMatrix& g = t.nodes_[self].grad;
                   const std::vector<double>& w = t.nodes_[self].aux;
                   const RealMatrix& qv = t.value(query);
                   const RealMatrix& vals = t.value(values);
                   const std::size_t n = vals.rows();
                   const std::size_t cols = vals.cols();
                   const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(cols));
                   std::vector<double> dw(n);
                   double weighted = 0.0;
                   for (std::size_t i = 0; i < n; ++i) {
                     dw[i] = dot(g.row(0), vals.row(i));
                     weighted += w[i] * dw[i];
                   }
                   std::vector<double> ds(n);
                   for (std::size_t i = 0; i < n; ++i) ds[i] = w[i] * (dw[i] - weighted);
                   if (t.requires_grad(values)) {
                     RealMatrix& dv = t.grad_slot(values.id);
                     for (std::size_t i = 0; i < n; ++i) {
                       for (std::size_t c = 0; c < cols; ++c) {
                         dv(i, c) += w[i] * g(0, c) + ds[i] * qv(0, c) * inv_sqrt;
                       }
                     }
                   }
                   if (t.requires_grad(query)) {
                     RealMatrix& dq = t.grad_slot(query.id);
                     for (std::size_t i = 0; i < n; ++i) {
                       for (std::size_t c = 0; c < cols; ++c) {
                         dq(0, c) += ds[i] * vals(i, c) * inv_sqrt;
                       }
                     }
                   }
                 });
  nodes_[out.id].aux = std::move(pr.weights);
  return out;
}

Tape::Var Tape::affine(Var weights, Var x, Var bias) {
  const RealMatrix& w = value(weights);
  const RealMatrix& xv = value(x);
  const RealMatrix& bv = value(bias);
  if (xv.rows() != 1 || bv.rows() != 1) throw InputError("affine: x and b must be rows");
  std::vector<double> y = promptcl::affine(w, xv.row(0), bv.row(0));
  const std::size_t self = nodes_.size();
  bool needs = requires_grad(weights) || requires_grad(x) || requires_grad(bias);
  return push(RealMatrix::row_vector(y), needs, [weights, x, bias, self](Tape& t) {
    const RealMatrix& g = t.nodes_[self].grad;
    const RealMatrix& wv = t.value(weights);
    const RealMatrix& xin = t.value(x);
    if (t.requires_grad(weights)) {
      RealMatrix& dw = t.grad_slot(weights.id);
      for (std::size_t r = 0; r < wv.rows(); ++r) {
        for (std::size_t c = 0; c < wv.cols(); ++c) dw(r, c) += g(0, r) * xin(0, c);
      }
    }
    if (t.requires_grad(x)) {
      RealMatrix& dx = t.grad_slot(x.id);
      for (std::size_t r = 0; r < wv.rows(); ++r) {
        const double gr = g(0, r);
        for (std::size_t c = 0; c < wv.cols(); ++c) dx(0, c) += wv(r, c) * gr;
      }
    }
    if (t.requires_grad(bias)) {
      RealMatrix& db = t.grad_slot(bias.id);
      for (std::size_t r = 0; r < wv.rows(); ++r) db(0, r) += g(0, r);
    }
  });
}

Tape::Var Tape::add(Var a, Var b) {
  const RealMatrix& av = value(a);
  const RealMatrix& bv = value(b);
  if (av.rows() != bv.rows() || av.cols() != bv.cols()) throw InputError("add: shape mismatch");
  RealMatrix out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += bv.data()[i];
  const std::size_t self = nodes_.size();
  return push(std::move(out), requires_grad(a) || requires_grad(b), [a, b, self](Tape& t) {
    const RealMatrix& g = t.nodes_[self].grad;
    for (Var in : {a, b}) {
      if (!t.requires_grad(in)) continue;
      RealMatrix& d = t.grad_slot(in.id);
      for (std::size_t i = 0; i < d.size(); ++i) d.data()[i] += g.data()[i];
    }
  });
}

Tape::Var Tape::tanh(Var x) {
  const RealMatrix& xv = value(x);
  RealMatrix out(xv.rows(), xv.cols(), tanh_elem(xv.data()));
  const std::size_t self = nodes_.size();
  return push(std::move(out), requires_grad(x), [x, self](Tape& t) {
    const RealMatrix& g = t.nodes_[self].grad;
    const RealMatrix& y = t.nodes_[self].owned;
    RealMatrix& dx = t.grad_slot(x.id);
    for (std::size_t i = 0; i < dx.size(); ++i) {
      dx.data()[i] += g.data()[i] * (1.0 - y.data()[i] * y.data()[i]);
    }
  });
}

Tape::Var Tape::softmax_xent(Var logits, std::size_t gold) {
  const RealMatrix& z = value(logits);
  if (z.rows() != 1) throw InputError("softmax_xent: logits must be a single row");
  XentResult xr = promptcl::softmax_xent(z.row(0), gold);
  const std::size_t self = nodes_.size();
  Var out = push(RealMatrix(1, 1, xr.loss), requires_grad(logits), [logits, gold, self](Tape& t) {
    const double g = t.nodes_[self].grad(0, 0);
    const std::vector<double>& probs = t.nodes_[self].aux;
    RealMatrix& dz = t.grad_slot(logits.id);
    for (std::size_t i = 0; i < probs.size(); ++i) {
      dz(0, i) += g * (probs[i] - (i == gold ? 1.0 : 0.0));
    }
  });
  nodes_[out.id].aux = std::move(xr.probs);
  return out;
}

Tape::Var Tape::sum(std::span<const Var> scalars) {
  double total = 0.0;
  bool needs = false;
  for (Var s : scalars) {
    total += value(s)(0, 0);
    needs = needs || requires_grad(s);
  }
  std::vector<Var> inputs(scalars.begin(), scalars.end());
  const std::size_t self = nodes_.size();
  return push(RealMatrix(1, 1, total), needs, [inputs, self](Tape& t) {
    const double g = t.nodes_[self].grad(0, 0);
    for (Var s : inputs) {
      if (t.requires_grad(s)) t.grad_slot(s.id)(0, 0) += g;
    }
  });
}

Tape::Var Tape::scale(Var x, double factor) {
  RealMatrix out = value(x);
  for (double& v : out.data()) v *= factor;
  const std::size_t self = nodes_.size();
  return push(std::move(out), requires_grad(x), [x, factor, self](Tape& t) {
    const RealMatrix& g = t.nodes_[self].grad;
    RealMatrix& dx = t.grad_slot(x.id);
    for (std::size_t i = 0; i < dx.size(); ++i) dx.data()[i] += g.data()[i] * factor;
  });
}

Tape::Var Tape::sum_all(Var x) {
  double total = 0.0;
  for (double v : value(x).data()) total += v;
  const std::size_t self = nodes_.size();
  return push(RealMatrix(1, 1, total), requires_grad(x), [x, self](Tape& t) {
    const double g = t.nodes_[self].grad(0, 0);
    RealMatrix& dx = t.grad_slot(x.id);
    for (double& v : dx.data()) v += g;
  });
}

Tape::Var Tape::sum_squares(Var x) {
  double total = 0.0;
  for (double v : value(x).data()) total += v * v;
  const std::size_t self = nodes_.size();
  return push(RealMatrix(1, 1, total), requires_grad(x), [x, self](Tape& t) {
    const double g = t.nodes_[self].grad(0, 0);
    const RealMatrix& xv = t.value(x);
    RealMatrix& dx = t.grad_slot(x.id);
    for (std::size_t i = 0; i < dx.size(); ++i) dx.data()[i] += 2.0 * g * xv.data()[i];
  });
}

void Tape::backward(Var root) {
  const RealMatrix& r = value(root);
  if (r.rows() != 1 || r.cols() != 1) throw InputError("backward: root must be a scalar");
  visited_.clear();
  for (std::size_t i = 0; i <= root.id; ++i) {
    Node& node = nodes_[i];
    if (node.requires_grad) {
      const RealMatrix& v = node.ref != nullptr ? *node.ref : node.owned;
      node.grad = RealMatrix(v.rows(), v.cols());
    }
  }
  if (!nodes_[root.id].requires_grad) return;
  nodes_[root.id].grad(0, 0) = 1.0;
  for (std::size_t i = root.id + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.requires_grad || !node.backward) continue;
    node.backward(*this);
    visited_.push_back(i);
  }
}

double grad_check(const TapeFunction& f, const RealMatrix& point, double eps) {
  if (!(eps > 0.0)) throw InputError("grad_check: eps must be positive");
  Tape tape;
  Tape::Var x = tape.variable(point);
  Tape::Var root = f(tape, x);
  tape.backward(root);
  const RealMatrix analytic = tape.grad(x);

  auto evaluate = [&](const RealMatrix& at) {
    Tape t;
    Tape::Var v = t.variable(at);
    return t.value(f(t, v))(0, 0);
  };

  double worst = 0.0;
  RealMatrix probe = point;
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double original = probe.data()[i];
    probe.data()[i] = original + eps;
    const double up = evaluate(probe);
    probe.data()[i] = original - eps;
    const double down = evaluate(probe);
    probe.data()[i] = original;
    const double numeric = (up - down) / (2.0 * eps);
    const double a = analytic.data()[i];
    const double err = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace promptcl
