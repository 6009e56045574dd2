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
 * \file kgc/beta_model.h
 * \brief Beta-distribution query embeddings: parameters, operator templates, batch binding, KL
 *  scoring, ranking and MRR.
 *
 * An embedding of width d is stored as one row of 2d values, the d alphas followed by the d betas.
 */
#ifndef KGC_BETA_MODEL_H_
#define KGC_BETA_MODEL_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "kgc/engine.h"
#include "kgc/kg_store.h"
#include "kgc/pattern.h"
#include "kgc/query.h"
#include "kgc/tensor.h"

namespace kgc {

/*! \brief Lower bound applied to every produced Beta parameter. */
inline constexpr double kEpsMin = 1e-6;

struct ModelParams {
  int64_t d = 0;
  int64_t h = 0;
  uint64_t seed = 0;
  int32_t num_entities = 0;
  int32_t num_relations = 0;
  /*! \brief [entities, 2d]. */
  Tensor<double> entity;
  /*! \brief Projection MLP, one slab per relation: [R,2d,h] [R,h] [R,h,h] [R,h] [R,h,2d] [R,2d]. */
  Tensor<double> w1, b1, w2, b2, w3, b3;
  /*! \brief Shared intersection attention: [2d,h] [h] [h,2d] [2d]. */
  Tensor<double> wa1, ba1, wa2, ba2;

  bool operator==(const ModelParams&) const = default;
};

/*!
 * \brief Seeded parameters: entity parameters uniform in [0.05, 1], weights uniform in
 *  +-1/sqrt(fan_in).
 * \throws DomainError if d or h is below 1.
 */
ModelParams init_model(const KnowledgeGraph& g, int64_t d, int64_t h, uint64_t seed);

/*! \brief Projection: three relation-selected affine layers, softmax, and optionally clamp_min. */
PatternTemplate projection_template(const ModelParams& p, bool clamp = true);
/*! \brief Intersection: per-branch attention logits, softmax across branches, weighted sum. */
PatternTemplate intersection_template(const ModelParams& p);
/*! \brief Negation: reciprocal of every parameter, then clamp_min. */
PatternTemplate negation_template(const ModelParams& p);
/*! \brief Union: the clause embeddings stacked into one [B, clauses, 2d] answer. */
PatternTemplate union_template(const ModelParams& p);

/*! \brief The model's library. `clamp_projection = false` gives the bare nine-step projection. */
TemplateLibrary templates(const ModelParams& p, bool clamp_projection = true);

/*! \brief Bind weights, anchors and relation selectors for a batch of same-shape queries. */
template <typename T>
Bindings<T> bind_batch(const ModelParams& p, std::span<const GroundedQuery> batch);

/*! \brief ln B(a, b). \throws DomainError unless both are positive and finite. */
double log_beta(double a, double b);
double digamma(double x);
/*! \brief KL(Beta(a1,b1) || Beta(a2,b2)). */
double kl_beta(double a1, double b1, double a2, double b2);

struct BetaEmbedding {
  std::vector<double> alpha;
  std::vector<double> beta;
  bool operator==(const BetaEmbedding&) const = default;
};

/*! \brief Sum over dimensions. \throws ShapeError on mismatched widths. */
double kl_beta(const BetaEmbedding& p, const BetaEmbedding& q);

BetaEmbedding entity_embedding(const ModelParams& p, EntityId e);

/*! \brief Clause embeddings of batch row `row` of an answer tensor ([B,2d] or [B,clauses,2d]). */
template <typename T>
std::vector<BetaEmbedding> clause_embeddings(const Tensor<T>& answer, int64_t row);

/*! \brief Entity-side digamma terms are cached so each score costs only arithmetic. */
class Scorer {
 public:
  explicit Scorer(const ModelParams& p);
  /*! \brief score(e) = min over clauses of KL(entity e || clause). */
  std::vector<double> scores(const std::vector<BetaEmbedding>& clauses) const;
  /*! \brief Entities by ascending score, ties by index. */
  std::vector<EntityId> rank(const std::vector<BetaEmbedding>& clauses) const;

 private:
  int64_t d_;
  int32_t n_;
  std::vector<double> a_, b_, lnb_, psi_a_, psi_b_, psi_ab_;
};

std::vector<EntityId> score_and_rank(const std::vector<BetaEmbedding>& clauses, const ModelParams& p);

/*! \brief 1-based position of the best-ranked answer. \throws DomainError for an empty answer set. */
int64_t best_rank(std::span<const EntityId> ranking, std::span<const EntityId> answers);

/*! \brief Unfiltered mean reciprocal rank. */
double mrr(const std::vector<std::vector<EntityId>>& rankings, const std::vector<std::vector<EntityId>>& answers);

/*! \brief Flat little-endian doubles preceded by a JSON header describing the tensors. */
void save_model(const ModelParams& p, const std::filesystem::path& path);
ModelParams load_model(const std::filesystem::path& path);

}  // namespace kgc

#endif  // KGC_BETA_MODEL_H_
