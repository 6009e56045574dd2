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

#include "kgc/beta_model.h"
#include "kgc/capture.h"
#include "kgc/error.h"
#include "kgc/pattern.h"

using namespace kgc;

namespace {

struct Fixture {
  KnowledgeGraph kg = synthetic_graph({});
  ModelParams params = init_model(kg, 4, 8, 1);
  TemplateLibrary lib = templates(params);
  TemplateLibrary core = templates(params, false);

  ComputationGraph fol(const std::string& tag) {
    return capture_executable(generate_queries(kg, tag, 1, 5)[0]);
  }
};

PatternTemplate scale_template() {
  PatternTemplate t;
  t.fol_kind = OpKind::kNot;
  t.arity = 1;
  t.embedding_width = 4;
  t.weights = {{"k", {4}}};
  t.steps = {{OpKind::kAdd, {{TemplateArg::Kind::kInput, 0}, {TemplateArg::Kind::kWeight, 0}}}};
  return t;
}

}  // namespace

TEST_CASE_FIXTURE(Fixture, "step counts") {
  CHECK(lib.find(OpKind::kProject)->step_count(1) == 10);
  CHECK(core.find(OpKind::kProject)->step_count(1) == 9);
  const PatternTemplate* conj = lib.find(OpKind::kAnd);
  CHECK(conj->step_count(2) == 12);
  CHECK(conj->step_count(3) == 17);
  CHECK(lib.find(OpKind::kNot)->step_count(1) == 2);
  CHECK(lib.find(OpKind::kOr)->step_count(2) == 1);
  CHECK_THROWS_AS(instantiate(*conj, 1), TemplateError);
}

TEST_CASE_FIXTURE(Fixture, "instantiated variadic template wires replicas") {
  auto steps = instantiate(*lib.find(OpKind::kAnd), 2);
  REQUIRE(steps.size() == 12);
  // Second replica's first matmul reads input 1; its add reads its own matmul.
  CHECK(steps[5].args[0].kind == TemplateArg::Kind::kInput);
  CHECK(steps[5].args[0].index == 1);
  CHECK(steps[6].args[0].index == 5);
  // Shared softmax gathers the last step of each replica.
  REQUIRE(steps[10].args.size() == 2);
  CHECK(steps[10].args[0].index == 4);
  CHECK(steps[10].args[1].index == 9);
  CHECK(steps[11].args.size() == 3);
}

TEST_CASE_FIXTURE(Fixture, "primitive counts after expansion") {
  struct Expect {
    const char* tag;
    size_t core_ops, ops, modules;
  };
  for (auto e : {Expect{"1p", 9, 10, 1}, Expect{"2p", 18, 20, 2}, Expect{"2i", 30, 32, 3},
                 Expect{"2in", 32, 34, 4}, Expect{"2u", 19, 21, 3}}) {
    CAPTURE(e.tag);
    auto g = fol(e.tag);
    CHECK(expand(g, core).graph.ops().size() == e.core_ops);
    ModularizedGraph m = expand(g, lib);
    CHECK(m.graph.level() == GraphLevel::kPrimitive);
    CHECK(validate(m.graph).empty());
    CHECK(m.graph.ops().size() == e.ops);
    CHECK(m.modules.size() == e.modules);
  }
}

TEST_CASE_FIXTURE(Fixture, "module dag follows the query") {
  ModularizedGraph m = expand(fol("pi"), lib);
  REQUIRE(m.modules.size() == 4);
  int conj = -1;
  for (const auto& mod : m.modules)
    if (mod.kind == ModuleKind::kAnd) conj = mod.id;
  REQUIRE(conj >= 0);
  CHECK(m.module_preds(conj).size() == 2);
  CHECK(m.module_succs(conj).empty());
  CHECK(m.module_dag.size() == 3);
}

TEST_CASE_FIXTURE(Fixture, "recognition recovers the expansion modules") {
  for (auto tag : kAllTags) {
    CAPTURE(tag);
    ModularizedGraph expanded = expand(fol(std::string(tag)), lib);
    ModularizedGraph found = recognize(expanded.graph, lib);
    REQUIRE(found.modules.size() == expanded.modules.size());
    for (size_t i = 0; i < found.modules.size(); ++i) {
      CHECK(found.modules[i].kind == expanded.modules[i].kind);
      CHECK(found.modules[i].ops == expanded.modules[i].ops);
    }
    CHECK(found.module_dag == expanded.module_dag);
  }
}

TEST_CASE_FIXTURE(Fixture, "longest match wins and leftovers stay opaque") {
  // Recognising the clamped expansion with the nine-step library leaves each clamp_min unmatched.
  ModularizedGraph expanded = expand(fol("2p"), lib);
  ModularizedGraph found = recognize(expanded.graph, core);
  int opaque = 0, project = 0;
  for (const auto& mod : found.modules) {
    opaque += mod.kind == ModuleKind::kOpaque;
    project += mod.kind == ModuleKind::kProject;
  }
  CHECK(project == 2);
  CHECK(opaque == 2);
}

TEST_CASE_FIXTURE(Fixture, "missing template fails expansion") {
  TemplateLibrary partial;
  partial.add(OpKind::kProject, projection_template(params));
  CHECK_NOTHROW(expand(fol("3p"), partial));
  CHECK_THROWS_AS(expand(fol("2i"), partial), ExpansionError);
  CHECK_THROWS_AS(expand(expand(fol("1p"), lib).graph, lib), ExpansionError);
}

TEST_CASE("template validation") {
  CHECK_NOTHROW(validate_template(scale_template()));
  SUBCASE("undeclared weight") {
    auto t = scale_template();
    t.weights.clear();
    CHECK_THROWS_AS(validate_template(t), TemplateError);
  }
  SUBCASE("FOL step") {
    auto t = scale_template();
    t.steps[0].kind = OpKind::kAnd;
    CHECK_THROWS_AS(validate_template(t), TemplateError);
  }
  SUBCASE("forward reference") {
    auto t = scale_template();
    t.steps.push_back({OpKind::kRelu, {{TemplateArg::Kind::kStep, 3}}});
    CHECK_THROWS_AS(validate_template(t), TemplateError);
  }
  SUBCASE("dangling step") {
    auto t = scale_template();
    t.steps.push_back({OpKind::kRelu, {{TemplateArg::Kind::kInput, 0}}});
    CHECK_THROWS_AS(validate_template(t), TemplateError);
  }
  SUBCASE("per-input block on a fixed-arity template") {
    auto t = scale_template();
    t.steps[0].per_input = true;
    CHECK_THROWS_AS(validate_template(t), TemplateError);
  }
}

TEST_CASE("functional registration") {
  TemplateLibrary lib = register_template({}, "not", scale_template());
  CHECK(lib.find(OpKind::kNot) != nullptr);
  CHECK_THROWS_AS(register_template(lib, "matmul", scale_template()), TemplateError);
  CHECK_THROWS_AS(register_template(lib, "xor", scale_template()), TemplateError);
  Json j = library_to_json(lib);
  CHECK(j.size() == 1);
}

TEST_CASE_FIXTURE(Fixture, "matching order puts longer templates first") {
  auto order = lib.matching_order();
  REQUIRE(order.size() == 4);
  CHECK(order[0]->fol_kind == OpKind::kAnd);
  CHECK(order[1]->fol_kind == OpKind::kProject);
  CHECK(order[3]->fol_kind == OpKind::kOr);
}
