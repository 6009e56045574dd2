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

// Brute-force set evaluation over all entity pairs, used as an independent answer reference.

#ifndef KGC_TESTS_NAIVE_EVAL_H_
#define KGC_TESTS_NAIVE_EVAL_H_

#include <vector>

#include "kgc/kg_store.h"
#include "kgc/query.h"

namespace kgc::testing {

inline std::vector<EntityId> naive_answers(const KnowledgeGraph& g, const GroundedQuery& q) {
  const auto& s = q.structure;
  const int n = static_cast<int>(g.num_entities());
  std::vector<std::vector<char>> member(s.slots.size());
  int anchor = 0;
  for (int slot = 0; slot < static_cast<int>(s.slots.size()); ++slot) {
    if (s.slots[slot].kind == SlotKind::kAnchor) {
      member[slot].assign(n, 0);
      member[slot][q.anchors[anchor++]] = 1;
    }
  }
  for (int slot : s.slot_order()) {
    if (s.slots[slot].kind == SlotKind::kAnchor) continue;
    std::vector<int> in;
    for (int e = 0; e < static_cast<int>(s.edges.size()); ++e)
      if (s.edges[e].dst == slot) in.push_back(e);
    member[slot].assign(n, 0);
    for (EntityId y = 0; y < n; ++y) {
      bool any = false, all = true;
      for (int e : in) {
        bool holds = false;
        for (EntityId x = 0; x < n && !holds; ++x)
          holds = member[s.edges[e].src][x] && g.contains({x, q.rels[e], y});
        if (s.edges[e].negated) holds = !holds;
        any = any || holds;
        all = all && holds;
      }
      member[slot][y] = s.slots[slot].join == JoinKind::kUnion ? any : all;
    }
  }
  std::vector<EntityId> out;
  for (EntityId y = 0; y < n; ++y)
    if (member[s.answer_slot()][y]) out.push_back(y);
  return out;
}

}  // namespace kgc::testing

#endif  // KGC_TESTS_NAIVE_EVAL_H_
