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
 * \file kgc/oracle.h
 * \brief Exact set-semantics answers over a knowledge graph.
 *
 * Negation is the complement against the full entity set and is only legal as an input of an
 * intersection.
 */
#ifndef KGC_ORACLE_H_
#define KGC_ORACLE_H_

#include <vector>

#include "kgc/kg_store.h"
#include "kgc/query.h"

namespace kgc {

/*! \brief Sorted answer set of `q`. Throws StructureError on invalid structure. */
std::vector<EntityId> answer_oracle(const KnowledgeGraph& g, const GroundedQuery& q);

/*! \brief Sorted answer set of a DNF query: union of the clause answers. */
std::vector<EntityId> answer_oracle(const KnowledgeGraph& g, const DnfQuery& q);

}  // namespace kgc

#endif  // KGC_ORACLE_H_
