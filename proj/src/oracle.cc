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
 * \file oracle.cc
 */
#include "kgc/oracle.h"

#include <map>

#include "kgc/error.h"

namespace kgc {
namespace {

using EntitySet = std::vector<char>;

EntitySet project(const KnowledgeGraph& g, const EntitySet& frontier, RelationId rel) {
  EntitySet out(g.num_entities(), 0);
  for (size_t e = 0; e < frontier.size(); ++e) {
    if (!frontier[e]) continue;
    for (EntityId t : g.neighbors(static_cast<EntityId>(e), rel)) out[t] = 1;
  }
  return out;
}

void complement(EntitySet& s) {
  for (auto& x : s) x = !x;
}

std::vector<EntityId> to_sorted(const EntitySet& s) {
  std::vector<EntityId> out;
  for (size_t e = 0; e < s.size(); ++e) {
    if (s[e]) out.push_back(static_cast<EntityId>(e));
  }
  return out;
}

EntitySet singleton(const KnowledgeGraph& g, EntityId e) {
  EntitySet s(g.num_entities(), 0);
  s.at(e) = 1;
  return s;
}

}  // namespace

std::vector<EntityId> answer_oracle(const KnowledgeGraph& g, const GroundedQuery& q) {
  validate_query(q, &g);
  const QueryStructure& s = q.structure;
  std::vector<EntitySet> value(s.slots.size());
  for (int slot : s.slot_order()) {
    if (s.slots[slot].kind == SlotKind::kAnchor) {
      value[slot] = singleton(g, q.anchors[slot]);
      continue;
    }
    const bool is_union = s.slots[slot].join == JoinKind::kUnion;
    EntitySet acc;
    for (int e : s.incoming(slot)) {
      EntitySet branch = project(g, value[s.edges[e].src], q.rels[e]);
      if (s.edges[e].negated) complement(branch);
      if (acc.empty()) {
        acc = std::move(branch);
        continue;
      }
      for (size_t i = 0; i < acc.size(); ++i) acc[i] = is_union ? (acc[i] | branch[i]) : (acc[i] & branch[i]);
    }
    value[slot] = std::move(acc);
  }
  return to_sorted(value[s.answer_slot()]);
}

std::vector<EntityId> answer_oracle(const KnowledgeGraph& g, const DnfQuery& q) {
  if (q.clauses.empty()) throw StructureError("DNF query has no clauses");
  EntitySet result(g.num_entities(), 0);
  for (const Clause& clause : q.clauses) {
    std::map<int, EntitySet> value;
    for (const Literal& lit : clause) {
      EntitySet frontier;
      if (lit.src_entity >= 0) {
        frontier = singleton(g, lit.src_entity);
      } else {
        auto it = value.find(lit.src_slot);
        if (it == value.end()) throw StructureError("clause literal uses an unbound variable");
        frontier = it->second;
      }
      EntitySet branch = project(g, frontier, lit.rel);
      if (lit.negated) complement(branch);
      auto [it, fresh] = value.try_emplace(lit.dst_slot, std::move(branch));
      if (!fresh) {
        for (size_t i = 0; i < it->second.size(); ++i) it->second[i] &= branch[i];
      }
    }
    auto it = value.find(q.answer_slot);
    if (it == value.end()) throw StructureError("clause does not bind the answer variable");
    for (size_t i = 0; i < result.size(); ++i) result[i] |= it->second[i];
  }
  return to_sorted(result);
}

}  // namespace kgc
