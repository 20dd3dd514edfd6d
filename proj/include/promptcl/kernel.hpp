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

#ifndef PROMPTCL_KERNEL_HPP_
#define PROMPTCL_KERNEL_HPP_

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

#include "promptcl/common.hpp"

namespace promptcl {

// Dense row-major matrix of doubles. Vectors travel as 1×n matrices inside
// the tape and as std::vector<double> in the pure API.
class RealMatrix {
 public:
  RealMatrix() = default;
  RealMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  RealMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  RealMatrix(std::initializer_list<std::initializer_list<double>> rows);

  static RealMatrix identity(std::size_t n);
  static RealMatrix row_vector(std::span<const double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool all_finite() const;
  double frobenius_norm() const;

  friend bool operator==(const RealMatrix& a, const RealMatrix& b) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

double dot(std::span<const double> a, std::span<const double> b);

// Pure forward operations.
RealMatrix embed_lookup(const RealMatrix& table, std::span<const TokenId> token_ids);

struct PoolResult {
  std::vector<double> pooled;
  std::vector<double> weights;
};
PoolResult attention_pool(std::span<const double> query, const RealMatrix& values);

std::vector<double> affine(const RealMatrix& weights, std::span<const double> x,
                           std::span<const double> bias);
std::vector<double> tanh_elem(std::span<const double> x);

// Max-subtracted softmax.
std::vector<double> softmax(std::span<const double> logits);

struct XentResult {
  double loss = 0.0;
  std::vector<double> probs;
};
XentResult softmax_xent(std::span<const double> logits, std::size_t gold);

// Reverse-mode tape over the operations above. Nodes are appended in forward
// order; backward() walks them in exactly the reverse order and accumulates
// gradients additively. A tape is single-use and not thread-safe.
class Tape {
 public:
  struct Var {
    std::size_t id = 0;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Non-owning reference to a value that receives no gradient. The referenced
  // matrix must outlive the tape.
  Var constant_ref(const RealMatrix& value);
  Var constant(RealMatrix value);
  // Owned leaf that records a gradient.
  Var variable(RealMatrix value);

  Var embed_lookup(Var table, std::span<const TokenId> token_ids);
  Var concat_rows(std::span<const Var> parts);
  Var mean_rows(Var x);
  // Returns the pooled 1×cols row; the attention weights are kept on the node.
  Var attention_pool(Var query, Var values);
  Var affine(Var weights, Var x, Var bias);
  Var add(Var a, Var b);
  Var tanh(Var x);
  Var softmax_xent(Var logits, std::size_t gold);
  Var sum(std::span<const Var> scalars);
  Var scale(Var x, double factor);
  Var sum_all(Var x);
  Var sum_squares(Var x);

  const RealMatrix& value(Var v) const;
  // Gradient of the last backward() root; zero matrix if none reached v.
  const RealMatrix& grad(Var v) const;
  const std::vector<double>& attention_weights(Var pooled) const;
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

  void backward(Var root);
  // Node ids whose backward rule ran during the last backward(), in visit order.
  const std::vector<std::size_t>& last_backward_order() const { return visited_; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    RealMatrix owned;
    const RealMatrix* ref = nullptr;
    RealMatrix grad;
    bool requires_grad = false;
    std::vector<double> aux;
    std::function<void(Tape&)> backward;
  };

  Var push(RealMatrix value, bool requires_grad, std::function<void(Tape&)> backward);
  RealMatrix& grad_slot(std::size_t id);

  std::vector<Node> nodes_;
  std::vector<std::size_t> visited_;
};

// Central-difference check of the tape gradient of f at point. Returns the
// maximum over entries of |a - n| / max(1e-8, |a| + |n|).
using TapeFunction = std::function<Tape::Var(Tape&, Tape::Var)>;
double grad_check(const TapeFunction& f, const RealMatrix& point, double eps);

}  // namespace promptcl

#endif  // PROMPTCL_KERNEL_HPP_
