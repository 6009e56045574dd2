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
 * \file kgc/capture.h
 * \brief Graph capturer: grounded FOL queries to FOL-level computation graphs.
 */
#ifndef KGC_CAPTURE_H_
#define KGC_CAPTURE_H_

#include "kgc/graph.h"
#include "kgc/query.h"

namespace kgc {

/*!
 * \brief Map a grounded query onto the IR one construct at a time.
 *
 * Anchors and variables become value nodes; each relation edge becomes a `project` op carrying
 * its relation and edge slot; a negated edge adds a `not` op; a slot joining several edges gets an
 * `and` / `or` op.
 */
ComputationGraph capture(const GroundedQuery& q);

/*!
 * \brief Capture a query in disjunctive normal form: one sub-graph per clause, and a terminal `or`
 *  over the clause results when there is more than one clause.
 *
 * This is the executable form: unions only occur at the root. For queries without union it is
 * identical to capture(q).
 */
ComputationGraph capture_dnf(const DnfQuery& q, int num_anchors);

inline ComputationGraph capture_executable(const GroundedQuery& q) {
  return capture_dnf(to_dnf(q), q.structure.num_anchors());
}

}  // namespace kgc

#endif  // KGC_CAPTURE_H_
