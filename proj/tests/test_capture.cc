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

#include <doctest.h>

#include <algorithm>

#include "kgc/capture.h"
#include "kgc/error.h"

using namespace kgc;

namespace {

GroundedQuery make(const std::string& tag) {
  GroundedQuery q;
  q.structure = structure_of(tag);
  q.anchors.assign(q.structure.num_anchors(), 0);
  q.rels.resize(q.structure.edges.size());
  for (size_t e = 0; e < q.rels.size(); ++e) q.rels[e] = static_cast<RelationId>(e + 1);
  return q;
}

int count_kind(const ComputationGraph& g, OpKind k) {
  return static_cast<int>(std::count_if(g.ops().begin(), g.ops().end(), [&](const OpNode& o) { return o.kind == k; }));
}

}  // namespace

TEST_CASE("capture maps each construct to one op") {
  struct Expect {
    const char* tag;
    int project, conj, disj, neg;
  };
  for (auto e : {Expect{"1p", 1, 0, 0, 0}, Expect{"3p", 3, 0, 0, 0}, Expect{"3i", 3, 1, 0, 0},
                 Expect{"ip", 3, 1, 0, 0}, Expect{"up", 3, 0, 1, 0}, Expect{"pni", 3, 1, 0, 1}}) {
    CAPTURE(e.tag);
    ComputationGraph g = capture(make(e.tag));
    CHECK(g.level() == GraphLevel::kFol);
    CHECK(validate(g).empty());
    CHECK(count_kind(g, OpKind::kProject) == e.project);
    CHECK(count_kind(g, OpKind::kAnd) == e.conj);
    CHECK(count_kind(g, OpKind::kOr) == e.disj);
    CHECK(count_kind(g, OpKind::kNot) == e.neg);
  }
}

TEST_CASE("projection ops carry relation and edge") {
  ComputationGraph g = capture(make("2p"));
  auto order = topo_order(g);
  REQUIRE(order.size() == 2);
  CHECK(g.op(order[0]).attrs.relation == 1);
  CHECK(g.op(order[0]).attrs.edge == 0);
  CHECK(g.op(order[1]).attrs.relation == 2);
  CHECK(g.op(order[1]).attrs.edge == 1);
  CHECK(g.value(g.answer()).name == "answer");
}

TEST_CASE("executable form pushes unions to the root") {
  ComputationGraph up = capture_executable(make("up"));
  CHECK(validate(up).empty());
  CHECK(count_kind(up, OpKind::kProject) == 4);
  CHECK(count_kind(up, OpKind::kOr) == 1);
  NodeId answer = up.answer();
  CHECK(up.op(*up.producer(answer)).kind == OpKind::kOr);

  ComputationGraph pi = capture_executable(make("pi"));
  ComputationGraph plain = capture(make("pi"));
  CHECK(graph_to_json(pi)["ops"] == graph_to_json(plain)["ops"]);
}

TEST_CASE("graph json round trip and dot output") {
  ComputationGraph g = capture_executable(make("3in"));
  Json j = graph_to_json(g);
  ComputationGraph back = graph_from_json(j);
  CHECK(graph_to_json(back) == j);
  std::string dot = graph_to_dot(g, "q");
  CHECK(dot.find("digraph q") != std::string::npos);
  CHECK(dot.find("not") != std::string::npos);
}

TEST_CASE("validate reports broken graphs") {
  SUBCASE("value to value edge") {
    ComputationGraph g;
    NodeId a = g.add_value(ValueRole::kAnchor, "a");
    NodeId b = g.add_value(ValueRole::kAnswer, "b");
    g.add_edge(a, b);
    CHECK_FALSE(validate(g).empty());
  }
  SUBCASE("cycle") {
    ComputationGraph g;
    NodeId a = g.add_value(ValueRole::kAnchor, "a");
    NodeId op1 = g.add_op(OpKind::kProject);
    NodeId v = g.add_value(ValueRole::kIntermediate, "v");
    NodeId op2 = g.add_op(OpKind::kAnd);
    NodeId ans = g.add_value(ValueRole::kAnswer, "ans");
    g.add_edge(a, op1);
    g.add_edge(op1, v);
    g.add_edge(v, op2);
    g.add_edge(ans, op1);
    g.add_edge(op2, ans);
    CHECK_FALSE(validate(g).empty());
    CHECK_THROWS_AS(topo_order(g), IntegrityError);
  }
  SUBCASE("primitive op in a FOL graph") {
    ComputationGraph g;
    NodeId a = g.add_value(ValueRole::kAnchor, "a");
    NodeId op = g.add_op(OpKind::kRelu);
    NodeId ans = g.add_value(ValueRole::kAnswer, "ans");
    g.add_edge(a, op);
    g.add_edge(op, ans);
    CHECK_FALSE(validate(g).empty());
  }
  SUBCASE("two answers") {
    ComputationGraph g;
    NodeId a = g.add_value(ValueRole::kAnchor, "a");
    NodeId op = g.add_op(OpKind::kProject);
    g.add_edge(a, op);
    g.add_edge(op, g.add_value(ValueRole::kAnswer, "x"));
    g.add_value(ValueRole::kAnswer, "y");
    CHECK_FALSE(validate(g).empty());
  }
}

TEST_CASE("shape inference") {
  std::vector<Shape> mm{{kBatch, 4}, {4, 3}};
  CHECK(infer_shape(OpKind::kMatMul, mm, {}) == Shape{kBatch, 3});
  std::vector<Shape> bad{{kBatch, 4}, {5, 3}};
  CHECK_THROWS_AS(infer_shape(OpKind::kMatMul, bad, {}), ShapeError);
  CHECK(row_elements({kBatch, 2, 8}) == 16);
  CHECK(is_batched({kBatch, 2}));
  CHECK_FALSE(is_batched({2, 2}));
}
