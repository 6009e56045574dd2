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
 * \file kgc/query.h
 * \brief Query shapes, grounded queries, disjunctive normal form and query generation.
 *
 * Slots are numbered anchors first, then bound variables, then the answer variable last. The
 * relation slot of an edge is its position in `QueryStructure::edges`, so `GroundedQuery::rels[k]`
 * grounds edge k.
 */
#ifndef KGC_QUERY_H_
#define KGC_QUERY_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kgc/json.h"
#include "kgc/kg_store.h"

namespace kgc {

enum class SlotKind { kAnchor, kBound, kAnswer };
enum class JoinKind { kNone, kIntersection, kUnion };

struct Slot {
  SlotKind kind;
  JoinKind join = JoinKind::kNone;
  bool operator==(const Slot&) const = default;
};

struct QueryEdge {
  int src;
  int dst;
  bool negated = false;
  bool operator==(const QueryEdge&) const = default;
};

struct QueryStructure {
  std::string tag;
  std::vector<Slot> slots;
  std::vector<QueryEdge> edges;

  int num_anchors() const;
  int num_bound() const;
  int answer_slot() const;
  /*! \brief Incoming edge indices of `slot`, ascending. */
  std::vector<int> incoming(int slot) const;
  /*! \brief Slot ids ordered so every edge goes from an earlier to a later slot. */
  std::vector<int> slot_order() const;
  bool operator==(const QueryStructure&) const = default;
};

/*! \brief The 14 shape tags in benchmark order. */
inline constexpr std::array<std::string_view, 14> kAllTags = {
    "1p", "2p", "3p", "2i", "3i", "pi", "ip", "2u", "up", "2in", "3in", "inp", "pin", "pni"};

/*! \brief Canonical shape for a tag. Throws StructureError listing valid tags otherwise. */
QueryStructure structure_of(std::string_view tag);

/*!
 * \brief Check the structural invariants: one answer, DAG rooted at anchors, joins on multi-input
 *  slots only, negation only on intersection inputs that also have a positive input.
 * \throws StructureError describing the first violation.
 */
void validate_structure(const QueryStructure& s);

Json structure_to_json(const QueryStructure& s);
QueryStructure structure_from_json(const Json& j);

struct GroundedQuery {
  QueryStructure structure;
  std::vector<EntityId> anchors;
  std::vector<RelationId> rels;
  /*! \brief Optional ground-truth answers (sorted) carried through query files. */
  std::optional<std::vector<EntityId>> answers;
  /*! \brief Unknown JSON fields, preserved on rewrite. */
  Json extra = Json::object();
};

/*! \brief Validate a grounded query, and its indices against `g` when given. */
void validate_query(const GroundedQuery& q, const KnowledgeGraph* g = nullptr);

/*! \brief Literal r(src, dst) or its negation. `src_entity` is set iff the source is an anchor. */
struct Literal {
  RelationId rel;
  int edge;
  int src_slot;
  EntityId src_entity;
  int dst_slot;
  bool negated;
  bool operator==(const Literal&) const = default;
};

using Clause = std::vector<Literal>;

struct DnfQuery {
  std::vector<Clause> clauses;
  int answer_slot;
};

/*! \brief Distribute unions outward. Literals inside a clause are in dependency order. */
DnfQuery to_dnf(const GroundedQuery& q);

/*!
 * \brief Generate `n` queries of shape `tag` with nonempty answers, deterministically.
 *
 * Sampling is answers-first: a target entity is drawn and edges are walked backwards.
 * \throws GenerationError if a query cannot be realised within `max_retries` attempts.
 */
std::vector<GroundedQuery> generate_queries(const KnowledgeGraph& g, std::string_view tag,
                                            size_t n, uint64_t seed, int max_retries = 1000);

Json query_to_json(const GroundedQuery& q);
GroundedQuery query_from_json(const Json& j);
void write_queries(const std::filesystem::path& path, const std::vector<GroundedQuery>& qs);
std::vector<GroundedQuery> read_queries(const std::filesystem::path& path);

}  // namespace kgc

#endif  // KGC_QUERY_H_
