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
 * \file compiler.cc
 */
#include "kgc/compiler.h"

namespace kgc {

CompiledQuery compile_graph(const ComputationGraph& fol, const TemplateLibrary& lib) {
  CompiledQuery c;
  c.fol = fol;
  c.modular = expand(fol, lib);
  c.strategies = determine_strategies(c.modular);
  c.groups = collect_groups(c.modular, c.strategies);
  c.fused = fuse(c.modular, c.groups);
  return c;
}

CompiledQuery compile_query(const GroundedQuery& q, const TemplateLibrary& lib) {
  return compile_graph(capture_executable(q), lib);
}

}  // namespace kgc
