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
 * \file kgc/graph.h
 * \brief Bipartite computation-graph IR shared by the FOL, primitive and fused levels.
 *
 * Value nodes and operator nodes share one dense id space assigned in creation order. The inputs
 * of an operator are its incoming edges in insertion order; every operator has exactly one output
 * value node. Batched values carry `kBatch` as their leading dimension.
 */
#ifndef KGC_GRAPH_H_
#define KGC_GRAPH_H_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kgc/json.h"

namespace kgc {

using NodeId = int32_t;
using Shape = std::vector<int64_t>;

/*! \brief Placeholder for the batch dimension in value-node shapes. */
inline constexpr int64_t kBatch = -1;

enum class ValueRole { kAnchor, kBound, kAnswer, kIntermediate, kWeight };

enum class OpKind {
  // FOL level
  kProject,
  kAnd,
  kOr,
  kNot,
  // primitive level
  kMatMul,
  kAdd,
  kRelu,
  kSoftmax,
  kReciprocal,
  kWeightedSum,
  kClampMin,
  kStack,
  // fused level
  kFused,
};

enum class GraphLevel { kFol, kPrimitive, kFused };

const char* to_string(ValueRole role);
const char* to_string(OpKind kind);
const char* to_string(GraphLevel level);
ValueRole value_role_from_string(std::string_view s);
OpKind op_kind_from_string(std::string_view s);
GraphLevel graph_level_from_string(std::string_view s);

bool is_fol_kind(OpKind k);
bool is_primitive_kind(OpKind k);
/*! \brief Elementwise kinds whose output may overwrite their first input. */
bool is_inplace_kind(OpKind k);

/*!
 * \brief Operator attributes.
 *
 * `edge` names the query edge whose relation selects per-row weights (-1: shared weights);
 * `relation` is the relation of a single grounded query; `scalar` is the clamp threshold.
 */
struct OpAttrs {
  int32_t relation = -1;
  int32_t edge = -1;
  double scalar = 0.0;
  bool operator==(const OpAttrs&) const = default;
};

/*!
 * \brief Output shape of a primitive op from its input shapes. Batched shapes lead with kBatch.
 * \throws ShapeError naming the op and the offending dims.
 */
Shape infer_shape(OpKind kind, std::span<const Shape> inputs, const OpAttrs& attrs);

/*! \brief Elements per batch row of a batched shape, or total elements otherwise. */
int64_t row_elements(const Shape& s);
bool is_batched(const Shape& s);
std::string shape_str(const Shape& s);

struct ValueNode {
  NodeId id;
  ValueRole role;
  std::string name;
  Shape shape;
};

struct OpNode {
  NodeId id;
  OpKind kind;
  OpAttrs attrs;
};

/*! \brief Argument of a function step: an operator input or the result of an earlier step. */
struct StepArg {
  enum class Kind { kInput, kLocal } kind;
  int32_t index;
  bool operator==(const StepArg&) const = default;
};

struct FunctionStep {
  OpKind kind;
  std::vector<StepArg> args;
  OpAttrs attrs;
  Shape shape;
  /*! \brief Primitive op this step was merged from (-1 if none). */
  NodeId origin = -1;
  int32_t module = -1;
};

/*!
 * \brief Scratch placement of a fused function's step results, per batch row.
 *
 * Step i's result lives in the output buffer (`in_output[i]`) or at column `offset[i]` of a
 * scratch buffer `scratch_width` elements wide. The last step always writes the output.
 */
struct ScratchPlan {
  std::vector<int64_t> offset;
  std::vector<char> in_output;
  int64_t scratch_width = 0;
};

/*! \brief Ordered primitive steps implementing one operator node. */
struct FunctionSpec {
  std::vector<FunctionStep> steps;
  int32_t num_inputs = 0;
  /*! \brief Member modules, for fused operators. */
  std::vector<int32_t> modules;
  std::string strategy;
  ScratchPlan plan;
};

class ComputationGraph {
 public:
  explicit ComputationGraph(GraphLevel level = GraphLevel::kFol) : level_(level) {}

  GraphLevel level() const { return level_; }
  void set_level(GraphLevel level) { level_ = level; }

  NodeId add_value(ValueRole role, std::string name, Shape shape = {});
  NodeId add_op(OpKind kind, OpAttrs attrs = {});
  /*! \brief Append an edge. No structural checks beyond id existence; see validate(). */
  void add_edge(NodeId from, NodeId to);
  void set_function(NodeId op, FunctionSpec fn);

  size_t num_nodes() const { return index_.size(); }
  const std::vector<ValueNode>& values() const { return values_; }
  const std::vector<OpNode>& ops() const { return ops_; }
  const std::vector<std::pair<NodeId, NodeId>>& edges() const { return edges_; }
  const std::map<NodeId, FunctionSpec>& functions() const { return functions_; }

  bool contains(NodeId id) const { return id >= 0 && static_cast<size_t>(id) < index_.size(); }
  bool is_op(NodeId id) const;
  bool is_value(NodeId id) const { return contains(id) && !is_op(id); }
  const ValueNode& value(NodeId id) const;
  const OpNode& op(NodeId id) const;
  ValueNode& mutable_value(NodeId id);
  const FunctionSpec* function(NodeId op) const;

  const std::vector<NodeId>& preds(NodeId id) const { return in_[id]; }
  const std::vector<NodeId>& succs(NodeId id) const { return out_[id]; }
  /*! \brief Output value of an op (first successor). Throws IntegrityError if none. */
  NodeId op_output(NodeId op) const;
  /*! \brief Producer op of a value, if any. */
  std::optional<NodeId> producer(NodeId value) const;
  /*! \brief The unique answer value node. Throws IntegrityError otherwise. */
  NodeId answer() const;
  std::optional<NodeId> find_value(std::string_view name) const;

 private:
  struct Ref {
    bool is_op;
    int32_t pos;
  };
  GraphLevel level_;
  std::vector<ValueNode> values_;
  std::vector<OpNode> ops_;
  std::vector<std::pair<NodeId, NodeId>> edges_;
  std::map<NodeId, FunctionSpec> functions_;
  std::vector<Ref> index_;
  std::vector<std::vector<NodeId>> in_, out_;
};

struct Violation {
  std::string kind;
  std::vector<NodeId> nodes;
  std::string message;
};

using ValidationReport = std::vector<Violation>;

/*!
 * \brief Check bipartiteness, acyclicity, op arity (>=1 input, exactly 1 output value), a single
 *  answer node and level/kind agreement. Violations are returned, never thrown.
 */
ValidationReport validate(const ComputationGraph& g);
std::string format_report(const ValidationReport& report);

/*!
 * \brief Operators in dependency order, ties broken by ascending node id.
 * \throws IntegrityError on a cycle.
 */
std::vector<NodeId> topo_order(const ComputationGraph& g);

inline constexpr int kGraphSchemaVersion = 1;

Json graph_to_json(const ComputationGraph& g);
ComputationGraph graph_from_json(const Json& j);
std::string graph_to_dot(const ComputationGraph& g, std::string_view name = "G");

}  // namespace kgc

#endif  // KGC_GRAPH_H_
