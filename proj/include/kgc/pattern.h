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
 * \file kgc/pattern.h
 * \brief Pattern recognizer: per-model templates that realise FOL operators as primitive-op
 *  sub-graphs, expansion of FOL graphs through them, and recovery of the FOL modules from a
 *  primitive graph by anchored structural matching.
 */
#ifndef KGC_PATTERN_H_
#define KGC_PATTERN_H_

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kgc/graph.h"
#include "kgc/json.h"

namespace kgc {

/*!
 * \brief Reference from a template step to its operand.
 *
 * kInput is embedding input `index` (in a per-input step: the replica's own input, index 0).
 * kStep is step `index`; inside a per-input block it refers to the same replica.
 * kEachInput / kEachStep expand to all inputs / to step `index` of every replica, in input order.
 */
struct TemplateArg {
  enum class Kind { kInput, kWeight, kStep, kEachInput, kEachStep } kind;
  int32_t index = 0;
};

struct TemplateStep {
  OpKind kind;
  std::vector<TemplateArg> args;
  /*! \brief Replicated once per embedding input (variadic templates only, leading block). */
  bool per_input = false;
  /*! \brief Weights are picked per row by the relation of the FOL op's query edge. */
  bool selects_relation = false;
  double scalar = 0.0;
};

struct WeightDecl {
  std::string name;
  Shape shape;
};

struct PatternTemplate {
  OpKind fol_kind;
  /*! \brief Number of embedding inputs; 0 means variadic (two or more). */
  int32_t arity = 1;
  /*! \brief Per-row width of every embedding input. */
  int64_t embedding_width = 0;
  std::vector<WeightDecl> weights;
  std::vector<TemplateStep> steps;

  /*! \brief Number of primitive ops for `n` inputs. */
  size_t step_count(int32_t n) const;
  /*! \brief Step count used for longest-match ordering (arity 2 for variadic templates). */
  size_t nominal_step_count() const { return step_count(arity == 0 ? 2 : arity); }
};

/*! \brief A concrete step of a template instantiated for a given number of inputs. */
struct InstantiatedStep {
  OpKind kind;
  /*! \brief Operand refs: {kInput, i}, {kWeight, w} or {kStep, flat step index}. */
  std::vector<TemplateArg> args;
  bool selects_relation;
  double scalar;
};

/*! \throws TemplateError when n is not a legal input count. */
std::vector<InstantiatedStep> instantiate(const PatternTemplate& t, int32_t n);

/*! \throws TemplateError describing the first broken template invariant. */
void validate_template(const PatternTemplate& t);

class TemplateLibrary {
 public:
  /*! \brief Add or replace the template for `fol_kind`. Throws TemplateError if invalid. */
  void add(OpKind fol_kind, PatternTemplate t);
  const PatternTemplate* find(OpKind fol_kind) const;
  const std::map<OpKind, PatternTemplate>& templates() const { return templates_; }
  /*! \brief Templates in matching order: more steps first, ties by kind name. */
  std::vector<const PatternTemplate*> matching_order() const;

 private:
  std::map<OpKind, PatternTemplate> templates_;
};

/*! \brief Functional registration; `fol_kind` must name project, and, or or not. */
TemplateLibrary register_template(TemplateLibrary lib, std::string_view fol_kind, PatternTemplate t);

Json template_to_json(const PatternTemplate& t);
Json library_to_json(const TemplateLibrary& lib);

enum class ModuleKind { kProject, kAnd, kOr, kNot, kOpaque };
const char* to_string(ModuleKind k);
ModuleKind module_kind_of(OpKind fol_kind);

struct ModuleInfo {
  int32_t id;
  ModuleKind kind;
  /*! \brief Member primitive ops, ascending. */
  std::vector<NodeId> ops;
};

/*! \brief Primitive graph partitioned into FOL-operator modules. */
struct ModularizedGraph {
  ComputationGraph graph{GraphLevel::kPrimitive};
  std::map<NodeId, int32_t> module_of;
  std::vector<ModuleInfo> modules;
  /*! \brief Quotient edges (producer module, consumer module), sorted, unique. */
  std::vector<std::pair<int32_t, int32_t>> module_dag;

  std::vector<int32_t> module_preds(int32_t m) const;
  std::vector<int32_t> module_succs(int32_t m) const;
};

/*!
 * \brief Replace every FOL op with its template instantiation.
 * \throws ExpansionError for a missing template or an invalid input graph.
 */
ModularizedGraph expand(const ComputationGraph& g, const TemplateLibrary& lib);

/*!
 * \brief Recover modules from a primitive graph: greedy longest-match over reverse topological
 *  order, anchored at each template's terminal op. Unmatched ops become opaque singletons.
 */
ModularizedGraph recognize(const ComputationGraph& g, const TemplateLibrary& lib);

/*! \brief Rebuild module numbering (by smallest member op id) and the quotient DAG. */
void finalize_modules(ModularizedGraph& m);

Json modules_to_json(const ModularizedGraph& m);

}  // namespace kgc

#endif  // KGC_PATTERN_H_
