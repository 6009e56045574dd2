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
 * \file capture.cc
 */
#include "kgc/capture.h"

#include <map>

#include "kgc/error.h"

namespace kgc {
namespace {

struct Branch {
  NodeId src;
  RelationId rel;
  int edge;
  bool negated;
};

// Emit the ops computing `target` from its incoming branches. A single positive branch writes the
// target directly; otherwise every branch gets its own intermediate and a join op combines them.
void emit_slot(ComputationGraph& g, const std::vector<Branch>& branches, JoinKind join,
               ValueRole role, const std::string& name, const std::string& branch_prefix,
               NodeId* out) {
  if (branches.size() == 1 && !branches[0].negated) {
    const Branch& b = branches[0];
    NodeId op = g.add_op(OpKind::kProject, {b.rel, b.edge, 0.0});
    NodeId v = g.add_value(role, name, {kBatch});
    g.add_edge(b.src, op);
    g.add_edge(op, v);
    *out = v;
    return;
  }
  if (branches.size() < 2 || join == JoinKind::kNone) {
    throw StructureError("slot '" + name + "' needs a combinator for its branches");
  }
  std::vector<NodeId> inputs;
  for (const Branch& b : branches) {
    NodeId op = g.add_op(OpKind::kProject, {b.rel, b.edge, 0.0});
    NodeId v = g.add_value(ValueRole::kIntermediate, branch_prefix + "e" + std::to_string(b.edge), {kBatch});
    g.add_edge(b.src, op);
    g.add_edge(op, v);
    if (b.negated) {
      NodeId neg = g.add_op(OpKind::kNot);
      NodeId nv = g.add_value(ValueRole::kIntermediate, branch_prefix + "e" + std::to_string(b.edge) + ".not", {kBatch});
      g.add_edge(v, neg);
      g.add_edge(neg, nv);
      v = nv;
    }
    inputs.push_back(v);
  }
  NodeId j = g.add_op(join == JoinKind::kUnion ? OpKind::kOr : OpKind::kAnd);
  NodeId v = g.add_value(role, name, {kBatch});
  for (NodeId in : inputs) g.add_edge(in, j);
  g.add_edge(j, v);
  *out = v;
}

std::string slot_name(int slot) { return "v" + std::to_string(slot); }

}  // namespace

ComputationGraph capture(const GroundedQuery& q) {
  validate_query(q);
  const QueryStructure& s = q.structure;
  ComputationGraph g(GraphLevel::kFol);
  std::vector<NodeId> node(s.slots.size(), -1);
  for (int i = 0; i < s.num_anchors(); ++i) node[i] = g.add_value(ValueRole::kAnchor, "anchor" + std::to_string(i), {kBatch});
  for (int slot : s.slot_order()) {
    const Slot& sl = s.slots[slot];
    if (sl.kind == SlotKind::kAnchor) continue;
    std::vector<Branch> branches;
    for (int e : s.incoming(slot)) branches.push_back({node[s.edges[e].src], q.rels[e], e, s.edges[e].negated});
    const bool answer = sl.kind == SlotKind::kAnswer;
    emit_slot(g, branches, sl.join, answer ? ValueRole::kAnswer : ValueRole::kBound,
              answer ? "answer" : slot_name(slot), "", &node[slot]);
  }
  return g;
}

ComputationGraph capture_dnf(const DnfQuery& q, int num_anchors) {
  if (q.clauses.empty()) throw StructureError("DNF query has no clauses");
  ComputationGraph g(GraphLevel::kFol);
  std::vector<NodeId> anchors;
  for (int i = 0; i < num_anchors; ++i) anchors.push_back(g.add_value(ValueRole::kAnchor, "anchor" + std::to_string(i), {kBatch}));
  const bool multi = q.clauses.size() > 1;
  std::vector<NodeId> clause_out;
  for (size_t c = 0; c < q.clauses.size(); ++c) {
    const Clause& clause = q.clauses[c];
    const std::string prefix = multi ? "c" + std::to_string(c) + "." : "";
    // Group literals by target, in order of first appearance (dependency order).
    std::vector<int> order;
    std::map<int, std::vector<const Literal*>> by_target;
    for (const Literal& lit : clause) {
      if (!by_target.count(lit.dst_slot)) order.push_back(lit.dst_slot);
      by_target[lit.dst_slot].push_back(&lit);
    }
    std::map<int, NodeId> var;
    for (int target : order) {
      const auto& lits = by_target[target];
      std::vector<Branch> branches;
      for (const Literal* lit : lits) {
        NodeId src;
        if (lit->src_entity >= 0) {
          if (lit->src_slot < 0 || lit->src_slot >= num_anchors) throw StructureError("literal source is not an anchor slot");
          src = anchors[lit->src_slot];
        } else {
          auto it = var.find(lit->src_slot);
          if (it == var.end()) throw StructureError("clause literal uses a variable before it is bound");
          src = it->second;
        }
        branches.push_back({src, lit->rel, lit->edge, lit->negated});
      }
      const bool is_answer = target == q.answer_slot;
      ValueRole role = is_answer ? (multi ? ValueRole::kIntermediate : ValueRole::kAnswer) : ValueRole::kBound;
      std::string name = is_answer ? prefix + "answer" : prefix + slot_name(target);
      emit_slot(g, branches, JoinKind::kIntersection, role, name, prefix, &var[target]);
    }
    auto it = var.find(q.answer_slot);
    if (it == var.end()) throw StructureError("clause does not bind the answer variable");
    clause_out.push_back(it->second);
  }
  if (multi) {
    NodeId j = g.add_op(OpKind::kOr);
    NodeId v = g.add_value(ValueRole::kAnswer, "answer", {kBatch});
    for (NodeId in : clause_out) g.add_edge(in, j);
    g.add_edge(j, v);
  }
  return g;
}

}  // namespace kgc
