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

#include <set>

#include "kgc/beta_model.h"
#include "kgc/capture.h"
#include "kgc/compiler.h"
#include "kgc/error.h"
#include "kgc/fuser.h"

using namespace kgc;

namespace {

struct Fixture {
  KnowledgeGraph kg = synthetic_graph({});
  ModelParams params = init_model(kg, 4, 8, 1);
  TemplateLibrary lib = templates(params);

  ModularizedGraph modular(const std::string& tag) {
    return expand(capture_executable(generate_queries(kg, tag, 1, 5)[0]), lib);
  }
};

// Two step results may share columns only when one is consumed in place by the other.
void check_plan(const FunctionSpec& fn) {
  const auto& steps = fn.steps;
  const auto& plan = fn.plan;
  const auto n = static_cast<int32_t>(steps.size());
  std::vector<int32_t> last(n);
  for (int32_t i = 0; i < n; ++i) {
    last[i] = i;
    for (const auto& a : steps[i].args)
      if (a.kind == StepArg::Kind::kLocal) last[a.index] = std::max(last[a.index], i);
  }
  last[n - 1] = n;
  const int64_t out_width = row_elements(steps[n - 1].shape);
  CHECK(plan.in_output[n - 1]);
  CHECK(plan.offset[n - 1] == 0);
  for (int32_t i = 0; i < n; ++i) {
    const int64_t wi = row_elements(steps[i].shape);
    CHECK(plan.offset[i] + wi <= (plan.in_output[i] ? out_width : plan.scratch_width));
    for (int32_t j = i + 1; j < n; ++j) {
      if (plan.in_output[i] != plan.in_output[j] || last[i] < j) continue;
      const int64_t wj = row_elements(steps[j].shape);
      const bool overlap = plan.offset[i] < plan.offset[j] + wj && plan.offset[j] < plan.offset[i] + wi;
      if (!overlap) continue;
      const auto& a0 = steps[j].args.at(0);
      const bool inplace = a0.kind == StepArg::Kind::kLocal && a0.index == i && last[i] == j &&
                           plan.offset[i] == plan.offset[j] && wi == wj;
      CAPTURE(i);
      CAPTURE(j);
      CHECK(inplace);
    }
  }
}

}  // namespace

TEST_CASE_FIXTURE(Fixture, "strategies by shape") {
  auto all = [](const std::map<int32_t, FusionStrategy>& s, FusionStrategy want) {
    for (const auto& [id, st] : s)
      if (st != want) return false;
    return true;
  };
  CHECK(all(determine_strategies(modular("1p")), FusionStrategy::kHorizontal));
  CHECK(all(determine_strategies(modular("3p")), FusionStrategy::kHorizontal));
  CHECK(all(determine_strategies(modular("2i")), FusionStrategy::kVertical));
  CHECK(all(determine_strategies(modular("2u")), FusionStrategy::kVertical));
  auto pi = determine_strategies(modular("pi"));
  int hybrid = 0;
  for (const auto& [id, st] : pi) hybrid += st == FusionStrategy::kHybrid;
  CHECK(hybrid == 1);
}

TEST_CASE_FIXTURE(Fixture, "every shape collapses into one convex group") {
  for (auto tag : kAllTags) {
    CAPTURE(tag);
    ModularizedGraph m = modular(std::string(tag));
    auto groups = collect_groups(m, determine_strategies(m));
    REQUIRE(groups.size() == 1);
    CHECK(groups[0].modules.size() == m.modules.size());
    CHECK(groups[0].outputs.size() == 1);
    CHECK(is_convex(m, std::set<int32_t>(groups[0].modules.begin(), groups[0].modules.end())));
    ComputationGraph f = fuse(m, groups);
    CHECK(f.level() == GraphLevel::kFused);
    CHECK(validate(f).empty());
    REQUIRE(f.ops().size() == 1);
    const FunctionSpec* fn = f.function(f.ops()[0].id);
    REQUIRE(fn != nullptr);
    CHECK(fn->steps.size() == m.graph.ops().size());
    check_plan(*fn);
  }
}

TEST_CASE_FIXTURE(Fixture, "hybrid groups absorb their neighbours") {
  ModularizedGraph m = modular("pi");
  auto groups = collect_groups(m, determine_strategies(m));
  REQUIRE(groups.size() == 1);
  CHECK(groups[0].strategy == FusionStrategy::kHybrid);
  CHECK(groups[0].absorbed);
}

TEST_CASE_FIXTURE(Fixture, "hand-made partitions") {
  ModularizedGraph m = modular("pi");
  REQUIRE(m.modules.size() == 4);
  int32_t conj = -1;
  for (const auto& mod : m.modules)
    if (mod.kind == ModuleKind::kAnd) conj = mod.id;
  auto in = m.module_preds(conj);
  REQUIRE(in.size() == 2);
  const int32_t mid = m.module_preds(in[0]).empty() ? in[1] : in[0];
  const int32_t side = mid == in[0] ? in[1] : in[0];
  const int32_t head = m.module_preds(mid).at(0);

  auto group = [](std::vector<int32_t> mods) {
    FusionGroup g;
    g.modules = std::move(mods);
    g.strategy = FusionStrategy::kHorizontal;
    return g;
  };
  SUBCASE("convex chain plus singletons") {
    ComputationGraph f = fuse(m, {group({head, mid}), group({side}), group({conj})});
    CHECK(validate(f).empty());
    CHECK(f.ops().size() == 3);
    for (const auto& op : f.ops()) check_plan(*f.function(op.id));
  }
  SUBCASE("path leaving and re-entering") {
    CHECK_FALSE(is_convex(m, {head, conj}));
    CHECK_THROWS_AS(fuse(m, {group({head, conj}), group({mid}), group({side})}), FusionError);
  }
  SUBCASE("two outputs") {
    CHECK(is_convex(m, {head, side}));
    CHECK_THROWS_AS(fuse(m, {group({head, side}), group({mid}), group({conj})}), IntegrityError);
  }
  SUBCASE("not a partition") {
    CHECK_THROWS_AS(fuse(m, {group({head, mid}), group({conj})}), FusionError);
    CHECK_THROWS_AS(fuse(m, {group({head, mid}), group({mid, side}), group({conj})}), FusionError);
  }
}

TEST_CASE("scratch planner reuses dead buffers") {
  // x -> relu -> add(.., x?) chains: a straight in-place chain needs no scratch at all.
  std::vector<FunctionStep> chain;
  chain.push_back({OpKind::kRelu, {{StepArg::Kind::kInput, 0}}, {}, {kBatch, 8}});
  chain.push_back({OpKind::kRelu, {{StepArg::Kind::kLocal, 0}}, {}, {kBatch, 8}});
  chain.push_back({OpKind::kClampMin, {{StepArg::Kind::kLocal, 1}}, {}, {kBatch, 8}});
  ScratchPlan p = plan_scratch(chain);
  CHECK(p.scratch_width == 0);
  CHECK(p.in_output == std::vector<char>{1, 1, 1});

  // A wide temporary cannot live in a narrow output row.
  std::vector<FunctionStep> wide;
  wide.push_back({OpKind::kMatMul, {{StepArg::Kind::kInput, 0}, {StepArg::Kind::kInput, 1}}, {}, {kBatch, 16}});
  wide.push_back({OpKind::kMatMul, {{StepArg::Kind::kLocal, 0}, {StepArg::Kind::kInput, 2}}, {}, {kBatch, 4}});
  p = plan_scratch(wide);
  CHECK(p.scratch_width == 16);
  CHECK_FALSE(p.in_output[0]);
  CHECK_THROWS_AS(plan_scratch({}), FusionError);
}

TEST_CASE_FIXTURE(Fixture, "compile_query and fusion report") {
  auto q = generate_queries(kg, "3in", 1, 2)[0];
  CompiledQuery c = compile_query(q, lib);
  CHECK(c.fol.ops().size() == 5);
  CHECK(c.modular.graph.ops().size() == 49);
  CHECK(c.fused.ops().size() == 1);
  Json r = fusion_report(c.modular, c.strategies, c.groups, c.fused);
  CHECK(r.is_object());
  CHECK(graph_from_json(graph_to_json(c.fused)).ops().size() == 1);
}
