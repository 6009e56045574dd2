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

#include <filesystem>

#include "kgc/error.h"
#include "kgc/oracle.h"
#include "kgc/query.h"
#include "naive_eval.h"

using namespace kgc;

namespace {

KnowledgeGraph chain() {
  // a -r-> b -r-> c, a -s-> c, d isolated.
  return KnowledgeGraph(Vocabulary({"a", "b", "c", "d"}), Vocabulary({"r", "s"}),
                        {{0, 0, 1}, {1, 0, 2}, {0, 1, 2}});
}

GroundedQuery make(const std::string& tag, std::vector<EntityId> anchors, std::vector<RelationId> rels) {
  GroundedQuery q;
  q.structure = structure_of(tag);
  q.anchors = std::move(anchors);
  q.rels = std::move(rels);
  return q;
}

}  // namespace

TEST_CASE("every tag has a valid canonical shape") {
  for (auto tag : kAllTags) {
    QueryStructure s = structure_of(tag);
    CHECK_NOTHROW(validate_structure(s));
    CHECK(s.slots[s.answer_slot()].kind == SlotKind::kAnswer);
    CHECK(structure_from_json(structure_to_json(s)) == s);
  }
  CHECK(structure_of("3in").num_anchors() == 3);
  CHECK(structure_of("pni").num_bound() == 1);
  CHECK_THROWS_AS(structure_of("4p"), StructureError);
}

TEST_CASE("structural violations are reported") {
  QueryStructure s = structure_of("2i");
  SUBCASE("negation without a positive input") {
    s.edges[0].negated = true;
    s.edges[1].negated = true;
  }
  SUBCASE("join on a single-input slot") {
    s = structure_of("1p");
    s.slots[1].join = JoinKind::kIntersection;
  }
  SUBCASE("negated union input") {
    s = structure_of("2u");
    s.edges[1].negated = true;
  }
  SUBCASE("cycle") {
    s = structure_of("2p");
    s.edges.push_back({2, 1});
  }
  CHECK_THROWS_AS(validate_structure(s), StructureError);
}

TEST_CASE("oracle on a hand-built graph") {
  KnowledgeGraph g = chain();
  CHECK(answer_oracle(g, make("1p", {0}, {0})) == std::vector<EntityId>{1});
  CHECK(answer_oracle(g, make("2p", {0}, {0, 0})) == std::vector<EntityId>{2});
  CHECK(answer_oracle(g, make("2i", {1, 0}, {0, 1})) == std::vector<EntityId>{2});
  CHECK(answer_oracle(g, make("2u", {0, 1}, {0, 0})) == std::vector<EntityId>{1, 2});
  // Complement of {c} intersected with {b}.
  CHECK(answer_oracle(g, make("2in", {0, 0}, {0, 1})) == std::vector<EntityId>{1});
  CHECK(answer_oracle(g, make("2in", {0, 0}, {1, 1})).empty());
}

TEST_CASE("dnf of unions") {
  GroundedQuery up = make("up", {0, 1}, {0, 0, 1});
  DnfQuery dnf = to_dnf(up);
  REQUIRE(dnf.clauses.size() == 2);
  CHECK(dnf.clauses[0].size() == 2);
  CHECK(dnf.clauses[0][0].edge == 0);
  CHECK(dnf.clauses[0][1].edge == 2);
  CHECK(dnf.clauses[1][0].edge == 1);
  CHECK(dnf.clauses[0][0].src_entity == 0);
  CHECK(dnf.clauses[1][0].src_entity == 1);
  CHECK(to_dnf(make("2u", {0, 1}, {0, 0})).clauses.size() == 2);
  CHECK(to_dnf(make("pi", {0, 1}, {0, 0, 0})).clauses.size() == 1);
}

TEST_CASE("generated queries have answers and agree with brute force") {
  KnowledgeGraph g = synthetic_graph({});
  for (auto tag : kAllTags) {
    auto qs = generate_queries(g, tag, 5, 11);
    REQUIRE(qs.size() == 5);
    for (const auto& q : qs) {
      CHECK_NOTHROW(validate_query(q, &g));
      REQUIRE(q.answers.has_value());
      CHECK_FALSE(q.answers->empty());
      CHECK(*q.answers == answer_oracle(g, q));
      CHECK(answer_oracle(g, q) == testing::naive_answers(g, q));
      CHECK(answer_oracle(g, to_dnf(q)) == answer_oracle(g, q));
    }
  }
}

TEST_CASE("generation is deterministic per seed") {
  KnowledgeGraph g = synthetic_graph({});
  auto a = generate_queries(g, "pi", 10, 3);
  auto b = generate_queries(g, "pi", 10, 3);
  auto c = generate_queries(g, "pi", 10, 4);
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].anchors == b[i].anchors);
    CHECK(a[i].rels == b[i].rels);
  }
  bool differs = false;
  for (size_t i = 0; i < a.size(); ++i) differs = differs || a[i].anchors != c[i].anchors || a[i].rels != c[i].rels;
  CHECK(differs);
}

TEST_CASE("generation fails on a graph that cannot host the shape") {
  KnowledgeGraph empty(Vocabulary({"a"}), Vocabulary({"r"}), {});
  CHECK_THROWS_AS(generate_queries(empty, "1p", 1, 1), GenerationError);
}

TEST_CASE("query files round trip and keep unknown fields") {
  KnowledgeGraph g = synthetic_graph({});
  auto qs = generate_queries(g, "3in", 4, 9);
  qs[0].extra["note"] = "kept";
  auto path = std::filesystem::temp_directory_path() / "kgc_query_roundtrip.jsonl";
  write_queries(path, qs);
  auto back = read_queries(path);
  REQUIRE(back.size() == qs.size());
  for (size_t i = 0; i < qs.size(); ++i) {
    CHECK(back[i].structure == qs[i].structure);
    CHECK(back[i].anchors == qs[i].anchors);
    CHECK(back[i].rels == qs[i].rels);
    CHECK(back[i].answers == qs[i].answers);
  }
  CHECK(back[0].extra["note"] == "kept");
  CHECK(query_to_json(back[0]) == query_to_json(qs[0]));
  CHECK_THROWS_AS(query_from_json(Json::parse(R"({"anchors": "x"})")), ParseError);
}

TEST_CASE("index validation against a graph") {
  KnowledgeGraph g = chain();
  CHECK_THROWS_AS(validate_query(make("1p", {9}, {0}), &g), BoundsError);
  CHECK_THROWS_AS(validate_query(make("1p", {0}, {5}), &g), BoundsError);
  CHECK_THROWS_AS(validate_query(make("2p", {0}, {0}), &g), StructureError);
}
