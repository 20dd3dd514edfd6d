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

#include "promptcl/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace promptcl {

namespace {

RealMatrix gaussian(std::size_t rows, std::size_t cols, double stddev, std::uint64_t seed) {
  Rng rng(seed);
  RealMatrix m(rows, cols);
  for (double& v : m.data()) v = stddev * rng.normal();
  return m;
}

}  // namespace

FrozenBackbone make_backbone(std::size_t vocab_size, std::size_t dim, std::uint64_t seed,
                             const BackboneInit& init) {
  if (vocab_size <= kReservedTokens || dim == 0) {
    throw ConfigError("backbone needs a vocabulary beyond the reserved tokens and d >= 1");
  }
  const double hidden =
      init.hidden_std > 0.0 ? init.hidden_std : std::pow(static_cast<double>(dim), -0.5);
  FrozenBackbone bb;
  bb.seed = seed;
  bb.E = gaussian(vocab_size, dim, init.embed_std, derive_seed(seed, "E"));
  bb.W1 = gaussian(dim, dim, hidden, derive_seed(seed, "W1"));
  bb.W2 = gaussian(dim, dim, hidden, derive_seed(seed, "W2"));
  bb.b = gaussian(1, dim, hidden, derive_seed(seed, "b"));
  bb.W3 = gaussian(vocab_size, dim, init.output_std, derive_seed(seed, "W3"));
  return bb;
}

std::string to_string(PromptKind kind) {
  return kind == PromptKind::trained ? "trained" : "aggregated";
}

PromptKind prompt_kind_from_string(const std::string& text) {
  if (text == "trained") return PromptKind::trained;
  if (text == "aggregated") return PromptKind::aggregated;
  throw InputError("unknown prompt kind '" + text + "'");
}

bool Prompt::holds(const std::string& task) const {
  return std::find(tasks.begin(), tasks.end(), task) != tasks.end();
}

std::vector<const RealMatrix*> PromptPool::matrices() const {
  std::vector<const RealMatrix*> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(&e.prompt.matrix);
  return out;
}

std::optional<std::size_t> PromptPool::find_task(const std::string& task) const {
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].prompt.holds(task)) return i;
  }
  return std::nullopt;
}

RealMatrix assemble_values(const FrozenBackbone& bb, std::span<const RealMatrix* const> prompts,
                           std::span<const TokenId> tokens) {
  const std::size_t d = bb.dim();
  std::size_t rows = tokens.size();
  for (const RealMatrix* p : prompts) {
    if (p->cols() != d) throw InputError("prompt width does not match the backbone");
    rows += p->rows();
  }
  RealMatrix values(rows, d);
  auto out = values.data().begin();
  for (const RealMatrix* p : prompts) out = std::copy(p->data().begin(), p->data().end(), out);
  const RealMatrix x = embed_lookup(bb.E, tokens);
  std::copy(x.data().begin(), x.data().end(), out);
  return values;
}

std::vector<double> encode(const FrozenBackbone& bb, std::span<const RealMatrix* const> prompts,
                           std::span<const TokenId> tokens) {
  if (tokens.empty()) throw InputError("example has no input tokens");
  const RealMatrix values = assemble_values(bb, prompts, tokens);
  const std::size_t d = bb.dim();
  const std::size_t first = values.rows() - tokens.size();
  // Same accumulation order as Tape::mean_rows.
  std::vector<double> query(d, 0.0);
  for (std::size_t r = first; r < values.rows(); ++r) {
    for (std::size_t c = 0; c < d; ++c) query[c] += values(r, c);
  }
  const double inv = 1.0 / static_cast<double>(tokens.size());
  for (double& v : query) v *= inv;
  return attention_pool(query, values).pooled;
}

std::vector<double> step_logits(const FrozenBackbone& bb, std::span<const double> h,
                                TokenId previous) {
  if (previous >= bb.vocab_size()) throw InputError("previous token out of range");
  const std::vector<double> zero_d(bb.dim(), 0.0);
  const std::vector<double> zero_v(bb.vocab_size(), 0.0);
  std::vector<double> s = affine(bb.W1, h, bb.b.row(0));
  const std::vector<double> a2 = affine(bb.W2, bb.E.row(previous), zero_d);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] += a2[i];
  return affine(bb.W3, tanh_elem(s), zero_v);
}

std::vector<std::vector<double>> forward(const FrozenBackbone& bb, const PromptPool& pool,
                                         const Prompt* new_prompt, const LabeledExample& ex) {
  std::vector<const RealMatrix*> prompts = pool.matrices();
  if (new_prompt != nullptr) prompts.push_back(&new_prompt->matrix);
  const std::vector<double> h = encode(bb, prompts, ex.token_ids);
  std::vector<std::vector<double>> logits;
  TokenId prev = kBosId;
  for (TokenId y : ex.label_ids) {
    logits.push_back(step_logits(bb, h, prev));
    prev = y;
  }
  return logits;
}

BackboneVars bind_backbone(Tape& tape, const FrozenBackbone& bb) {
  BackboneVars v;
  v.E = tape.constant_ref(bb.E);
  v.W1 = tape.constant_ref(bb.W1);
  v.W2 = tape.constant_ref(bb.W2);
  v.b = tape.constant_ref(bb.b);
  v.W3 = tape.constant_ref(bb.W3);
  v.zero_d = tape.constant(RealMatrix(1, bb.dim()));
  v.zero_v = tape.constant(RealMatrix(1, bb.vocab_size()));
  return v;
}

Tape::Var example_loss(Tape& tape, const BackboneVars& vars, std::span<const Tape::Var> prompt_vars,
                       const LabeledExample& ex) {
  if (ex.token_ids.empty()) throw InputError("example has no input tokens");
  if (ex.label_ids.empty()) throw InputError("example label '" + ex.label + "' has no tokens");
  std::vector<Tape::Var> parts(prompt_vars.begin(), prompt_vars.end());
  const Tape::Var x = tape.embed_lookup(vars.E, ex.token_ids);
  parts.push_back(x);
  const Tape::Var values = tape.concat_rows(parts);
  const Tape::Var h = tape.attention_pool(tape.mean_rows(x), values);
  const Tape::Var a1 = tape.affine(vars.W1, h, vars.b);
  std::vector<Tape::Var> losses;
  TokenId prev = kBosId;
  for (TokenId y : ex.label_ids) {
    const TokenId step_prev[1] = {prev};
    const Tape::Var e = tape.embed_lookup(vars.E, step_prev);
    const Tape::Var u = tape.tanh(tape.add(a1, tape.affine(vars.W2, e, vars.zero_d)));
    losses.push_back(tape.softmax_xent(tape.affine(vars.W3, u, vars.zero_v), y));
    prev = y;
  }
  return tape.sum(losses);
}

RealMatrix init_prompt(std::size_t length, std::size_t dim, double scale, std::uint64_t seed) {
  return gaussian(length, dim, scale / std::sqrt(static_cast<double>(dim)), seed);
}

TrainResult train_prompt(const FrozenBackbone& bb, const PromptPool& pool, const TaskSpec& task,
                         const Dataset& data, const TrainConfig& cfg) {
  if (cfg.prompt_length == 0 || cfg.epochs == 0 || cfg.batch_size == 0) {
    throw ConfigError("prompt length, epochs and batch size must be positive");
  }
  if (!(cfg.learning_rate >= 0.0)) throw ConfigError("learning rate must be non-negative");
  if (data.empty()) throw InputError("no training data for task '" + task.name + "'");

  const std::size_t d = bb.dim();
  RealMatrix p = init_prompt(cfg.prompt_length, d, cfg.init_scale, derive_seed(cfg.seed, "prompt"));
  RealMatrix m1(p.rows(), d);
  RealMatrix m2(p.rows(), d);
  std::size_t step = 0;

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  TrainResult result;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng(derive_seed(cfg.seed, epoch));
    rng.shuffle(order);
    double epoch_total = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      Tape tape;
      const BackboneVars vars = bind_backbone(tape, bb);
      std::vector<Tape::Var> prompts;
      for (const auto& e : pool.entries) prompts.push_back(tape.constant_ref(e.prompt.matrix));
      const Tape::Var pv = tape.variable(p);
      prompts.push_back(pv);

      std::vector<Tape::Var> losses;
      for (std::size_t i = start; i < end; ++i) {
        losses.push_back(example_loss(tape, vars, prompts, data.examples[order[i]]));
      }
      const double count = static_cast<double>(end - start);
      const Tape::Var batch_loss = tape.scale(tape.sum(losses), 1.0 / count);
      const double loss = tape.value(batch_loss)(0, 0);
      if (!std::isfinite(loss)) {
        throw TrainingError("non-finite loss in task '" + task.name + "', epoch " +
                            std::to_string(epoch) + ", batch " + std::to_string(batch_index));
      }
      epoch_total += loss * count;
      tape.backward(batch_loss);
      const RealMatrix& g = tape.grad(pv);

      ++step;
      const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double gi = g.data()[i];
        double& a = m1.data()[i];
        double& b = m2.data()[i];
        a = cfg.beta1 * a + (1.0 - cfg.beta1) * gi;
        b = cfg.beta2 * b + (1.0 - cfg.beta2) * gi * gi;
        p.data()[i] -= cfg.learning_rate * (a / c1) / (std::sqrt(b / c2) + cfg.adam_eps);
      }
    }
    result.epoch_losses.push_back(epoch_total / static_cast<double>(data.size()));
  }
  if (!p.all_finite()) throw TrainingError("prompt for task '" + task.name + "' diverged");
  result.prompt = Prompt{{task.name}, std::move(p), PromptKind::trained};
  return result;
}

std::string to_string(ScoringContext ctx) {
  return ctx == ScoringContext::full_pool ? "full_pool" : "solo";
}

ScoringContext scoring_context_from_string(const std::string& text) {
  if (text == "full_pool") return ScoringContext::full_pool;
  if (text == "solo") return ScoringContext::solo;
  throw ConfigError("unknown scoring context '" + text + "'");
}

namespace {

// Per-example gradient norms for the listed prompt indices.
std::vector<std::vector<double>> gradient_norms(const FrozenBackbone& bb, const PromptPool& pool,
                                                std::span<const std::size_t> targets,
                                                const Dataset& data, bool solo, bool parallel) {
  std::vector<std::vector<double>> norms(targets.size(), std::vector<double>(data.size()));
  parallel_for(data.size(), parallel, [&](std::size_t i) {
    Tape tape;
    const BackboneVars vars = bind_backbone(tape, bb);
    std::vector<Tape::Var> prompts;
    std::vector<Tape::Var> tracked(targets.size());
    if (solo) {
      prompts.push_back(tape.variable(pool.prompt(targets[0]).matrix));
      tracked[0] = prompts[0];
    } else {
      for (std::size_t k = 0; k < pool.size(); ++k) {
        auto hit = std::find(targets.begin(), targets.end(), k);
        if (hit != targets.end()) {
          prompts.push_back(tape.variable(pool.prompt(k).matrix));
          tracked[static_cast<std::size_t>(hit - targets.begin())] = prompts.back();
        } else {
          prompts.push_back(tape.constant_ref(pool.prompt(k).matrix));
        }
      }
    }
    const Tape::Var loss = example_loss(tape, vars, prompts, data.examples[i]);
    tape.backward(loss);
    for (std::size_t t = 0; t < targets.size(); ++t) {
      norms[t][i] = tape.grad(tracked[t]).frobenius_norm();
    }
  });
  return norms;
}

double mean_in_order(const std::vector<double>& v) {
  double total = 0.0;
  for (double x : v) total += x;
  return total / static_cast<double>(v.size());
}

}  // namespace

std::vector<double> example_gradient_norms(const FrozenBackbone& bb, const PromptPool& pool,
                                           std::size_t prompt_index, const Dataset& data,
                                           ScoringContext ctx, bool parallel) {
  if (prompt_index >= pool.size()) throw InputError("prompt index out of range");
  if (data.empty()) throw InputError("gradient scoring needs data");
  const std::size_t target[1] = {prompt_index};
  return std::move(
      gradient_norms(bb, pool, target, data, ctx == ScoringContext::solo, parallel)[0]);
}

double prompt_gradient_norm(const FrozenBackbone& bb, const PromptPool& pool,
                            std::size_t prompt_index, const Dataset& data, ScoringContext ctx,
                            bool parallel) {
  return mean_in_order(example_gradient_norms(bb, pool, prompt_index, data, ctx, parallel));
}

std::vector<double> pool_gradient_norms(const FrozenBackbone& bb, const PromptPool& pool,
                                        const Dataset& data, ScoringContext ctx, bool parallel) {
  if (pool.empty()) throw InputError("cannot score an empty pool");
  if (data.empty()) throw InputError("gradient scoring needs data");
  std::vector<double> g;
  if (ctx == ScoringContext::solo) {
    for (std::size_t j = 0; j < pool.size(); ++j) {
      g.push_back(prompt_gradient_norm(bb, pool, j, data, ctx, parallel));
    }
    return g;
  }
  std::vector<std::size_t> all(pool.size());
  std::iota(all.begin(), all.end(), 0);
  for (const auto& norms : gradient_norms(bb, pool, all, data, false, parallel)) {
    g.push_back(mean_in_order(norms));
  }
  return g;
}

}  // namespace promptcl
