/*
 * Licensed to the Apache Software Foundation (ASF) under one
 * or more contributor license agreements.  See the NOTICE file
 * distributed with this work for additional information
 * regarding copyright ownership.  The ASF licenses this file
 * to you under the Apache License, Version 2.0 (the
 * "License"); you may not use this file except in compliance
 * with the License.  You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing,
 * software distributed under the License is distributed on an
 * "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
 * KIND, either express or implied.  See the License for the
 * specific language governing permissions and limitations
 * under the License.
 */

/*!
 * \file beta_model.cc
 */
#include "kgc/beta_model.h"

#include <algorithm>
#include <bit>
#include <boost/math/special_functions/digamma.hpp>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "kgc/error.h"
#include "kgc/json.h"
#include "kgc/random.h"

namespace kgc {

namespace {

Tensor<double> uniform_tensor(Rng& rng, Shape shape, double lo, double hi) {
  Tensor<double> t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = uniform_real(rng, lo, hi);
  return t;
}

Tensor<double> layer(Rng& rng, Shape shape, int64_t fan_in) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  return uniform_tensor(rng, std::move(shape), -bound, bound);
}

using A = TemplateArg;
constexpr auto kIn = TemplateArg::Kind::kInput;
constexpr auto kW = TemplateArg::Kind::kWeight;
constexpr auto kStep = TemplateArg::Kind::kStep;
constexpr auto kEachIn = TemplateArg::Kind::kEachInput;
constexpr auto kEachStep = TemplateArg::Kind::kEachStep;

struct NamedTensor {
  const char* name;
  Tensor<double> ModelParams::*field;
};

constexpr NamedTensor kTensors[] = {
    {"entity", &ModelParams::entity}, {"w1", &ModelParams::w1},   {"b1", &ModelParams::b1},
    {"w2", &ModelParams::w2},         {"b2", &ModelParams::b2},   {"w3", &ModelParams::w3},
    {"b3", &ModelParams::b3},         {"wa1", &ModelParams::wa1}, {"ba1", &ModelParams::ba1},
    {"wa2", &ModelParams::wa2},       {"ba2", &ModelParams::ba2},
};

constexpr char kMagic[8] = {'K', 'G', 'C', 'M', 'O', 'D', 'E', 'L'};

}  // namespace

ModelParams init_model(const KnowledgeGraph& g, int64_t d, int64_t h, uint64_t seed) {
  if (d < 1 || h < 1) throw DomainError("model dimensions must be at least 1 (d=" + std::to_string(d) + ", h=" + std::to_string(h) + ")");
  ModelParams p;
  p.d = d;
  p.h = h;
  p.seed = seed;
  p.num_entities = static_cast<int32_t>(g.num_entities());
  p.num_relations = static_cast<int32_t>(g.num_relations());
  const int64_t R = p.num_relations, w = 2 * d;
  Rng rng(seed);
  p.entity = uniform_tensor(rng, {p.num_entities, w}, 0.05, 1.0);
  p.w1 = layer(rng, {R, w, h}, w);
  p.b1 = layer(rng, {R, h}, w);
  p.w2 = layer(rng, {R, h, h}, h);
  p.b2 = layer(rng, {R, h}, h);
  p.w3 = layer(rng, {R, h, w}, h);
  p.b3 = layer(rng, {R, w}, h);
  p.wa1 = layer(rng, {w, h}, w);
  p.ba1 = layer(rng, {h}, w);
  p.wa2 = layer(rng, {h, w}, h);
  p.ba2 = layer(rng, {w}, h);
  return p;
}

PatternTemplate projection_template(const ModelParams& p, bool clamp) {
  const int64_t R = p.num_relations, w = 2 * p.d, h = p.h;
  PatternTemplate t;
  t.fol_kind = OpKind::kProject;
  t.arity = 1;
  t.embedding_width = w;
  t.weights = {{"w1", {R, w, h}}, {"b1", {R, h}}, {"w2", {R, h, h}}, {"b2", {R, h}}, {"w3", {R, h, w}}, {"b3", {R, w}}};
  t.steps = {
      {OpKind::kMatMul, {A{kIn, 0}, A{kW, 0}}, false, true},
      {OpKind::kAdd, {A{kStep, 0}, A{kW, 1}}, false, true},
      {OpKind::kRelu, {A{kStep, 1}}},
      {OpKind::kMatMul, {A{kStep, 2}, A{kW, 2}}, false, true},
      {OpKind::kAdd, {A{kStep, 3}, A{kW, 3}}, false, true},
      {OpKind::kRelu, {A{kStep, 4}}},
      {OpKind::kMatMul, {A{kStep, 5}, A{kW, 4}}, false, true},
      {OpKind::kAdd, {A{kStep, 6}, A{kW, 5}}, false, true},
      {OpKind::kSoftmax, {A{kStep, 7}}},
  };
  if (clamp) t.steps.push_back({OpKind::kClampMin, {A{kStep, 8}}, false, false, kEpsMin});
  return t;
}

PatternTemplate intersection_template(const ModelParams& p) {
  const int64_t w = 2 * p.d, h = p.h;
  PatternTemplate t;
  t.fol_kind = OpKind::kAnd;
  t.arity = 0;
  t.embedding_width = w;
  t.weights = {{"wa1", {w, h}}, {"ba1", {h}}, {"wa2", {h, w}}, {"ba2", {w}}};
  t.steps = {
      {OpKind::kMatMul, {A{kIn, 0}, A{kW, 0}}, true},
      {OpKind::kAdd, {A{kStep, 0}, A{kW, 1}}, true},
      {OpKind::kRelu, {A{kStep, 1}}, true},
      {OpKind::kMatMul, {A{kStep, 2}, A{kW, 2}}, true},
      {OpKind::kAdd, {A{kStep, 3}, A{kW, 3}}, true},
      {OpKind::kSoftmax, {A{kEachStep, 4}}},
      {OpKind::kWeightedSum, {A{kStep, 5}, A{kEachIn, 0}}},
  };
  return t;
}

PatternTemplate negation_template(const ModelParams& p) {
  PatternTemplate t;
  t.fol_kind = OpKind::kNot;
  t.arity = 1;
  t.embedding_width = 2 * p.d;
  t.steps = {
      {OpKind::kReciprocal, {A{kIn, 0}}},
      {OpKind::kClampMin, {A{kStep, 0}}, false, false, kEpsMin},
  };
  return t;
}

PatternTemplate union_template(const ModelParams& p) {
  PatternTemplate t;
  t.fol_kind = OpKind::kOr;
  t.arity = 0;
  t.embedding_width = 2 * p.d;
  t.steps = {{OpKind::kStack, {A{kEachIn, 0}}}};
  return t;
}

TemplateLibrary templates(const ModelParams& p, bool clamp_projection) {
  TemplateLibrary lib;
  lib.add(OpKind::kProject, projection_template(p, clamp_projection));
  lib.add(OpKind::kAnd, intersection_template(p));
  lib.add(OpKind::kNot, negation_template(p));
  lib.add(OpKind::kOr, union_template(p));
  return lib;
}

template <typename T>
Bindings<T> bind_batch(const ModelParams& p, std::span<const GroundedQuery> batch) {
  if (batch.empty()) throw BindingError("cannot bind an empty batch");
  const QueryStructure& s = batch[0].structure;
  const auto B = static_cast<int64_t>(batch.size());
  const int64_t w = 2 * p.d;
  Bindings<T> out;
  auto cast = [](const Tensor<double>& t) {
    std::vector<T> v(t.values().begin(), t.values().end());
    return Tensor<T>(t.shape(), std::move(v));
  };
  const std::pair<const char*, const Tensor<double>*> weights[] = {
      {"project.w1", &p.w1}, {"project.b1", &p.b1}, {"project.w2", &p.w2}, {"project.b2", &p.b2},
      {"project.w3", &p.w3}, {"project.b3", &p.b3}, {"and.wa1", &p.wa1},   {"and.ba1", &p.ba1},
      {"and.wa2", &p.wa2},   {"and.ba2", &p.ba2},
  };
  for (const auto& [name, t] : weights) out.values.emplace(name, cast(*t));
  for (int a = 0; a < s.num_anchors(); ++a) {
    Tensor<T> anchor({B, w});
    for (int64_t r = 0; r < B; ++r) {
      const EntityId e = batch[r].anchors.at(a);
      if (e < 0 || e >= p.num_entities) throw BindingError("anchor entity " + std::to_string(e) + " outside the model");
      std::copy(p.entity.row(e), p.entity.row(e) + w, anchor.row(r));
    }
    out.values.emplace("anchor" + std::to_string(a), std::move(anchor));
  }
  for (size_t e = 0; e < s.edges.size(); ++e) {
    std::vector<int32_t> sel(B);
    for (int64_t r = 0; r < B; ++r) {
      if (batch[r].structure != s) throw BindingError("batch mixes query shapes");
      sel[r] = batch[r].rels.at(e);
      if (sel[r] < 0 || sel[r] >= p.num_relations) throw BindingError("relation " + std::to_string(sel[r]) + " outside the model");
    }
    out.selectors.emplace(static_cast<int32_t>(e), std::move(sel));
  }
  return out;
}

template Bindings<float> bind_batch<float>(const ModelParams&, std::span<const GroundedQuery>);
template Bindings<double> bind_batch<double>(const ModelParams&, std::span<const GroundedQuery>);

double log_beta(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
    throw DomainError("log_beta needs positive finite parameters (got " + std::to_string(a) + ", " + std::to_string(b) + ")");
  }
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

double digamma(double x) { return boost::math::digamma(x); }

double kl_beta(double a1, double b1, double a2, double b2) {
  return log_beta(a2, b2) - log_beta(a1, b1) + (a1 - a2) * digamma(a1) + (b1 - b2) * digamma(b1) +
         (a2 - a1 + b2 - b1) * digamma(a1 + b1);
}

double kl_beta(const BetaEmbedding& p, const BetaEmbedding& q) {
  if (p.alpha.size() != q.alpha.size() || p.beta.size() != q.beta.size() || p.alpha.size() != p.beta.size()) {
    throw ShapeError("kl_beta: embedding widths differ (" + std::to_string(p.alpha.size()) + " vs " +
                     std::to_string(q.alpha.size()) + ")");
  }
  double sum = 0.0;
  for (size_t i = 0; i < p.alpha.size(); ++i) sum += kl_beta(p.alpha[i], p.beta[i], q.alpha[i], q.beta[i]);
  return sum;
}

BetaEmbedding entity_embedding(const ModelParams& p, EntityId e) {
  if (e < 0 || e >= p.num_entities) throw BoundsError("entity " + std::to_string(e) + " outside the model");
  const double* row = p.entity.row(e);
  return {std::vector<double>(row, row + p.d), std::vector<double>(row + p.d, row + 2 * p.d)};
}

template <typename T>
std::vector<BetaEmbedding> clause_embeddings(const Tensor<T>& answer, int64_t row) {
  const Shape& s = answer.shape();
  if (s.size() < 2 || s.size() > 3 || s.back() % 2 != 0) throw ShapeError("answer tensor " + shape_str(s) + " is not [B,2d] or [B,C,2d]");
  if (row < 0 || row >= s[0]) throw BoundsError("answer row " + std::to_string(row) + " out of range");
  const int64_t w = s.back(), d = w / 2, clauses = s.size() == 3 ? s[1] : 1;
  std::vector<BetaEmbedding> out;
  const T* base = answer.row(row);
  for (int64_t c = 0; c < clauses; ++c) {
    const T* x = base + c * w;
    out.push_back({std::vector<double>(x, x + d), std::vector<double>(x + d, x + w)});
  }
  return out;
}

template std::vector<BetaEmbedding> clause_embeddings<float>(const Tensor<float>&, int64_t);
template std::vector<BetaEmbedding> clause_embeddings<double>(const Tensor<double>&, int64_t);

Scorer::Scorer(const ModelParams& p) : d_(p.d), n_(p.num_entities) {
  const auto total = static_cast<size_t>(n_ * d_);
  a_.resize(total);
  b_.resize(total);
  lnb_.resize(total);
  psi_a_.resize(total);
  psi_b_.resize(total);
  psi_ab_.resize(total);
  for (int32_t e = 0; e < n_; ++e) {
    const double* row = p.entity.row(e);
    for (int64_t i = 0; i < d_; ++i) {
      const size_t k = static_cast<size_t>(e * d_ + i);
      a_[k] = row[i];
      b_[k] = row[d_ + i];
      lnb_[k] = log_beta(a_[k], b_[k]);
      psi_a_[k] = digamma(a_[k]);
      psi_b_[k] = digamma(b_[k]);
      psi_ab_[k] = digamma(a_[k] + b_[k]);
    }
  }
}

std::vector<double> Scorer::scores(const std::vector<BetaEmbedding>& clauses) const {
  if (clauses.empty()) throw DomainError("scoring needs at least one clause embedding");
  std::vector<double> best(n_, std::numeric_limits<double>::infinity());
  for (const BetaEmbedding& q : clauses) {
    if (static_cast<int64_t>(q.alpha.size()) != d_ || static_cast<int64_t>(q.beta.size()) != d_) {
      throw ShapeError("clause embedding width " + std::to_string(q.alpha.size()) + " does not match model d=" + std::to_string(d_));
    }
    std::vector<double> lnq(d_);
    for (int64_t i = 0; i < d_; ++i) lnq[i] = log_beta(q.alpha[i], q.beta[i]);
    for (int32_t e = 0; e < n_; ++e) {
      double kl = 0.0;
      for (int64_t i = 0; i < d_; ++i) {
        const size_t k = static_cast<size_t>(e * d_ + i);
        kl += lnq[i] - lnb_[k] + (a_[k] - q.alpha[i]) * psi_a_[k] + (b_[k] - q.beta[i]) * psi_b_[k] +
              (q.alpha[i] - a_[k] + q.beta[i] - b_[k]) * psi_ab_[k];
      }
      best[e] = std::min(best[e], kl);
    }
  }
  return best;
}

std::vector<EntityId> Scorer::rank(const std::vector<BetaEmbedding>& clauses) const {
  const auto s = scores(clauses);
  std::vector<EntityId> order(n_);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](EntityId x, EntityId y) { return s[x] < s[y]; });
  return order;
}

std::vector<EntityId> score_and_rank(const std::vector<BetaEmbedding>& clauses, const ModelParams& p) {
  return Scorer(p).rank(clauses);
}

int64_t best_rank(std::span<const EntityId> ranking, std::span<const EntityId> answers) {
  if (answers.empty()) throw DomainError("query has an empty answer set");
  for (size_t i = 0; i < ranking.size(); ++i) {
    if (std::find(answers.begin(), answers.end(), ranking[i]) != answers.end()) return static_cast<int64_t>(i + 1);
  }
  throw DomainError("no answer entity appears in the ranking");
}

double mrr(const std::vector<std::vector<EntityId>>& rankings, const std::vector<std::vector<EntityId>>& answers) {
  if (rankings.size() != answers.size()) throw UsageError("mrr: rankings and answers differ in length");
  if (rankings.empty()) return 0.0;
  double sum = 0.0;
  for (size_t q = 0; q < rankings.size(); ++q) sum += 1.0 / static_cast<double>(best_rank(rankings[q], answers[q]));
  return sum / static_cast<double>(rankings.size());
}

void save_model(const ModelParams& p, const std::filesystem::path& path) {
  static_assert(std::endian::native == std::endian::little, "model files are little-endian");
  Json header = {{"format", "kgc-beta-model"}, {"version", 1},          {"d", p.d},
                 {"h", p.h},                   {"seed", p.seed},        {"num_entities", p.num_entities},
                 {"num_relations", p.num_relations}};
  Json tensors = Json::array();
  int64_t offset = 0;
  for (const auto& nt : kTensors) {
    const Tensor<double>& t = p.*nt.field;
    tensors.push_back({{"name", nt.name}, {"shape", t.shape()}, {"offset", offset}});
    offset += t.size();
  }
  header["tensors"] = tensors;
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IOError("cannot write model file " + path.string());
  const uint64_t len = text.size();
  out.write(kMagic, sizeof(kMagic));
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& nt : kTensors) {
    const Tensor<double>& t = p.*nt.field;
    out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.bytes()));
  }
  if (!out) throw IOError("failed writing model file " + path.string());
}

ModelParams load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IOError("cannot open model file " + path.string());
  char magic[8];
  uint64_t len = 0;
  in.read(magic, sizeof(magic));
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0 || len > (1u << 24)) {
    throw ParseError(path.string() + ": not a model file");
  }
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  Json header;
  try {
    header = Json::parse(text);
  } catch (const Json::exception& e) {
    throw ParseError(path.string() + ": bad model header: " + e.what());
  }
  ModelParams p;
  try {
    p.d = header.at("d");
    p.h = header.at("h");
    p.seed = header.at("seed");
    p.num_entities = header.at("num_entities");
    p.num_relations = header.at("num_relations");
    const Json& tensors = header.at("tensors");
    if (tensors.size() != std::size(kTensors)) throw ParseError(path.string() + ": unexpected tensor count");
    for (size_t i = 0; i < std::size(kTensors); ++i) {
      if (tensors[i].at("name") != kTensors[i].name) throw ParseError(path.string() + ": unexpected tensor order");
      Tensor<double> t(tensors[i].at("shape").get<Shape>());
      in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.bytes()));
      p.*kTensors[i].field = std::move(t);
    }
  } catch (const Json::exception& e) {
    throw ParseError(path.string() + ": bad model header: " + e.what());
  }
  if (!in) throw ParseError(path.string() + ": truncated model file");
  return p;
}

}  // namespace kgc
