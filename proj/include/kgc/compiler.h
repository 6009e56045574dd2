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
 * \file kgc/compiler.h
 * \brief End-to-end compilation of one query shape: capture, expansion, strategy, grouping, fusion.
 */
#ifndef KGC_COMPILER_H_
#define KGC_COMPILER_H_

#include <map>
#include <vector>

#include "kgc/capture.h"
#include "kgc/fuser.h"
#include "kgc/pattern.h"
#include "kgc/query.h"

namespace kgc {

struct CompiledQuery {
  ComputationGraph fol{GraphLevel::kFol};
  /*! \brief Primitive graph with its module partition (the unfused executable). */
  ModularizedGraph modular;
  std::map<int32_t, FusionStrategy> strategies;
  std::vector<FusionGroup> groups;
  /*! \brief Fused executable. */
  ComputationGraph fused{GraphLevel::kFused};
};

/*! \brief Compile the executable (DNF) form of `q` through `lib`. */
CompiledQuery compile_query(const GroundedQuery& q, const TemplateLibrary& lib);

/*! \brief Compile a FOL-level graph through `lib`. */
CompiledQuery compile_graph(const ComputationGraph& fol, const TemplateLibrary& lib);

}  // namespace kgc

#endif  // KGC_COMPILER_H_
