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
 * \file kgc/fuser.h
 * \brief Operator fuser: per-module fusion strategies, convex fusion groups, and the rewrite of a
 *  modularized primitive graph into a fused graph with one operator per group.
 */
#ifndef KGC_FUSER_H_
#define KGC_FUSER_H_

#include <cstdint>
#include <map>
#include <set>
#include <vector>

#include "kgc/graph.h"
#include "kgc/json.h"
#include "kgc/pattern.h"

namespace kgc {

enum class FusionStrategy { kHorizontal, kVertical, kHybrid };
const char* to_string(FusionStrategy s);

/*!
 * \brief Strategy of every module.
 *
 * A module_dag edge u->v is vertical when v joins several branches (an and/or module, or in-degree
 * of at least two) and horizontal otherwise. Modules touching only horizontal edges (or none) are
 * Horizontal, only vertical edges Vertical, both Hybrid.
 */
std::map<int32_t, FusionStrategy> determine_strategies(const ModularizedGraph& m);

struct FusionGroup {
  std::vector<int32_t> modules;
  FusionStrategy strategy;
  /*! \brief True when a Hybrid group took in neighbouring groups. */
  bool absorbed = false;
  /*! \brief Boundary values, in first-use order / production order. */
  std::vector<NodeId> inputs;
  std::vector<NodeId> outputs;
};

/*! \brief True if no module_dag path leaves `group` and re-enters it. */
bool is_convex(const ModularizedGraph& m, const std::set<int32_t>& group);

/*!
 * \brief Partition modules into maximal convex, weakly connected groups.
 *
 * Like-strategy neighbours are merged first, visiting modules in topological order and preferring
 * the group of the lowest-id predecessor. Groups holding a Hybrid module then absorb adjacent groups
 * while the union stays convex with a single output, until nothing changes.
 */
std::vector<FusionGroup> collect_groups(const ModularizedGraph& m, const std::map<int32_t, FusionStrategy>& strategies);

/*!
 * \brief Rewrite into a fused-level graph: one fused op per group, internal values removed.
 * \throws FusionError for a non-convex group or groups that do not partition the modules.
 * \throws IntegrityError when a group has other than one boundary output.
 */
ComputationGraph fuse(const ModularizedGraph& m, const std::vector<FusionGroup>& groups);

/*! \brief Place the per-row results of a fused function in scratch or in the output row. */
ScratchPlan plan_scratch(const std::vector<FunctionStep>& steps);

Json fusion_report(const ModularizedGraph& m, const std::map<int32_t, FusionStrategy>& strategies,
                   const std::vector<FusionGroup>& groups, const ComputationGraph& fused);

}  // namespace kgc

#endif  // KGC_FUSER_H_
