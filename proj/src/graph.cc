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
 * \file graph.cc
 */
#include "kgc/graph.h"

#include <algorithm>
#include <queue>
#include <set>
#include <sstream>

#include "kgc/error.h"

namespace kgc {

namespace {

constexpr std::pair<ValueRole, const char*> kRoleNames[] = {
    {ValueRole::kAnchor, "anchor"},         {ValueRole::kBound, "bound"},
    {ValueRole::kAnswer, "answer"},         {ValueRole::kIntermediate, "intermediate"},
    {ValueRole::kWeight, "weight"},
};

constexpr std::pair<OpKind, const char*> kOpNames[] = {
    {OpKind::kProject, "project"},       {OpKind::kAnd, "and"},
    {OpKind::kOr, "or"},                 {OpKind::kNot, "not"},
    {OpKind::kMatMul, "matmul"},         {OpKind::kAdd, "add"},
    {OpKind::kRelu, "relu"},             {OpKind::kSoftmax, "softmax"},
    {OpKind::kReciprocal, "reciprocal"}, {OpKind::kWeightedSum, "weighted_sum"},
    {OpKind::kClampMin, "clamp_min"},    {OpKind::kStack, "stack"},
    {OpKind::kFused, "fused"},
};

constexpr std::pair<GraphLevel, const char*> kLevelNames[] = {
    {GraphLevel::kFol, "fol"}, {GraphLevel::kPrimitive, "primitive"}, {GraphLevel::kFused, "fused"}};

template <typename E, size_t N>
const char* lookup_name(const std::pair<E, const char*> (&table)[N], E e) {
  for (const auto& [k, name] : table) {
    if (k == e) return name;
  }
  return "?";
}

template <typename E, size_t N>
E lookup_enum(const std::pair<E, const char*> (&table)[N], std::string_view s, const char* what) {
  for (const auto& [k, name] : table) {
    if (s == name) return k;
  }
  throw ParseError(std::string("unknown ") + what + " '" + std::string(s) + "'");
}

std::string dims_str(std::span<const Shape> shapes) {
  std::string out;
  for (const auto& s : shapes) {
    if (!out.empty()) out += ", ";
    out += shape_str(s);
  }
  return out;
}

}  // namespace

const char* to_string(ValueRole role) { return lookup_name(kRoleNames, role); }
const char* to_string(OpKind kind) { return lookup_name(kOpNames, kind); }
const char* to_string(GraphLevel level) { return lookup_name(kLevelNames, level); }
ValueRole value_role_from_string(std::string_view s) { return lookup_enum(kRoleNames, s, "value role"); }
OpKind op_kind_from_string(std::string_view s) { return lookup_enum(kOpNames, s, "op kind"); }
GraphLevel graph_level_from_string(std::string_view s) { return lookup_enum(kLevelNames, s, "graph level"); }

bool is_fol_kind(OpKind k) {
  return k == OpKind::kProject || k == OpKind::kAnd || k == OpKind::kOr || k == OpKind::kNot;
}

bool is_primitive_kind(OpKind k) { return !is_fol_kind(k) && k != OpKind::kFused; }

bool is_inplace_kind(OpKind k) {
  return k == OpKind::kAdd || k == OpKind::kRelu || k == OpKind::kReciprocal || k == OpKind::kClampMin;
}

bool is_batched(const Shape& s) { return !s.empty() && s[0] == kBatch; }

int64_t row_elements(const Shape& s) {
  int64_t n = 1;
  for (size_t i = is_batched(s) ? 1 : 0; i < s.size(); ++i) n *= s[i];
  return n;
}

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ", ";
    out += s[i] == kBatch ? std::string("B") : std::to_string(s[i]);
  }
  return out + "]";
}

Shape infer_shape(OpKind kind, std::span<const Shape> in, const OpAttrs& attrs) {
  auto fail = [&](const std::string& why) -> ShapeError {
    return ShapeError(std::string(to_string(kind)) + ": " + why + " (inputs " + dims_str(in) + ")");
  };
  auto need = [&](size_t lo, size_t hi) {
    if (in.size() < lo || in.size() > hi) throw fail("wrong number of inputs");
  };
  auto need_rows = [&](const Shape& s) {
    if (s.size() != 2) throw fail("expected a [batch, n] operand");
  };
  switch (kind) {
    case OpKind::kMatMul: {
      need(2, 2);
      need_rows(in[0]);
      const Shape& w = in[1];
      if (w.size() == 2 && attrs.edge < 0) {
        if (w[0] != in[0][1]) throw fail("inner dimensions differ");
        return {in[0][0], w[1]};
      }
      if (w.size() == 3 && attrs.edge >= 0) {
        if (w[1] != in[0][1]) throw fail("inner dimensions differ");
        return {in[0][0], w[2]};
      }
      throw fail("weight must be [k, n], or [relations, k, n] with a relation selector");
    }
    case OpKind::kAdd: {
      need(2, 2);
      const Shape& x = in[0];
      const Shape& y = in[1];
      if (x.empty()) throw fail("scalar operand");
      if (y == x && attrs.edge < 0) return x;
      if (y.size() == 1 && y[0] == x.back() && attrs.edge < 0) return x;
      if (y.size() == 2 && x.size() == 2 && attrs.edge >= 0 && y[1] == x[1]) return x;
      throw fail("operands are not broadcast-compatible");
    }
    case OpKind::kRelu:
    case OpKind::kReciprocal:
    case OpKind::kClampMin:
      need(1, 1);
      if (in[0].empty()) throw fail("scalar operand");
      return in[0];
    case OpKind::kSoftmax: {
      need(1, 64);
      if (in.size() == 1) {
        if (in[0].empty() || in[0].size() > 3) throw fail("rank must be 1..3");
        return in[0];
      }
      for (const auto& s : in) {
        need_rows(s);
        if (s != in[0]) throw fail("branch operands differ in shape");
      }
      return {in[0][0], in[0][1], static_cast<int64_t>(in.size())};
    }
    case OpKind::kWeightedSum: {
      need(2, 65);
      const Shape& w = in[0];
      const auto k = static_cast<int64_t>(in.size() - 1);
      if (w.size() != 3 || w[2] != k) throw fail("weights must be [batch, n, branches]");
      for (size_t i = 1; i < in.size(); ++i) {
        if (in[i] != Shape{w[0], w[1]}) throw fail("branch operand does not match weights");
      }
      return {w[0], w[1]};
    }
    case OpKind::kStack: {
      need(1, 64);
      for (const auto& s : in) {
        need_rows(s);
        if (s != in[0]) throw fail("stacked operands differ in shape");
      }
      return {in[0][0], static_cast<int64_t>(in.size()), in[0][1]};
    }
    default:
      throw fail("not a primitive kind");
  }
}

NodeId ComputationGraph::add_value(ValueRole role, std::string name, Shape shape) {
  const auto id = static_cast<NodeId>(index_.size());
  index_.push_back({false, static_cast<int32_t>(values_.size())});
  values_.push_back({id, role, std::move(name), std::move(shape)});
  in_.emplace_back();
  out_.emplace_back();
  return id;
}

NodeId ComputationGraph::add_op(OpKind kind, OpAttrs attrs) {
  const auto id = static_cast<NodeId>(index_.size());
  index_.push_back({true, static_cast<int32_t>(ops_.size())});
  ops_.push_back({id, kind, attrs});
  in_.emplace_back();
  out_.emplace_back();
  return id;
}

void ComputationGraph::add_edge(NodeId from, NodeId to) {
  if (!contains(from) || !contains(to)) {
    throw IntegrityError("edge (" + std::to_string(from) + ", " + std::to_string(to) +
                         ") references an unknown node");
  }
  edges_.emplace_back(from, to);
  out_[from].push_back(to);
  in_[to].push_back(from);
}

void ComputationGraph::set_function(NodeId op, FunctionSpec fn) {
  if (!is_op(op)) throw IntegrityError("function attached to non-op node " + std::to_string(op));
  functions_[op] = std::move(fn);
}

bool ComputationGraph::is_op(NodeId id) const { return contains(id) && index_[id].is_op; }

const ValueNode& ComputationGraph::value(NodeId id) const {
  if (!is_value(id)) throw IntegrityError("node " + std::to_string(id) + " is not a value node");
  return values_[index_[id].pos];
}

ValueNode& ComputationGraph::mutable_value(NodeId id) {
  if (!is_value(id)) throw IntegrityError("node " + std::to_string(id) + " is not a value node");
  return values_[index_[id].pos];
}

const OpNode& ComputationGraph::op(NodeId id) const {
  if (!is_op(id)) throw IntegrityError("node " + std::to_string(id) + " is not an op node");
  return ops_[index_[id].pos];
}

const FunctionSpec* ComputationGraph::function(NodeId op) const {
  auto it = functions_.find(op);
  return it == functions_.end() ? nullptr : &it->second;
}

NodeId ComputationGraph::op_output(NodeId op) const {
  if (!is_op(op) || out_[op].empty()) {
    throw IntegrityError("op " + std::to_string(op) + " has no output value");
  }
  return out_[op].front();
}

std::optional<NodeId> ComputationGraph::producer(NodeId value) const {
  for (NodeId p : in_.at(value)) {
    if (is_op(p)) return p;
  }
  return std::nullopt;
}

NodeId ComputationGraph::answer() const {
  std::optional<NodeId> found;
  for (const auto& v : values_) {
    if (v.role != ValueRole::kAnswer) continue;
    if (found) throw IntegrityError("graph has more than one answer node");
    found = v.id;
  }
  if (!found) throw IntegrityError("graph has no answer node");
  return *found;
}

std::optional<NodeId> ComputationGraph::find_value(std::string_view name) const {
  for (const auto& v : values_) {
    if (v.name == name) return v.id;
  }
  return std::nullopt;
}

ValidationReport validate(const ComputationGraph& g) {
  ValidationReport report;
  for (const auto& [from, to] : g.edges()) {
    if (g.is_op(from) == g.is_op(to)) {
      report.push_back({"bipartite",
                        {from, to},
                        "edge (" + std::to_string(from) + ", " + std::to_string(to) + ") joins two " +
                            (g.is_op(from) ? "op" : "value") + " nodes"});
    }
  }
  for (const auto& op : g.ops()) {
    int value_inputs = 0, value_outputs = 0;
    for (NodeId p : g.preds(op.id)) value_inputs += g.is_value(p);
    for (NodeId s : g.succs(op.id)) value_outputs += g.is_value(s);
    if (value_inputs < 1) {
      report.push_back({"op-arity", {op.id}, "op " + std::to_string(op.id) + " has no input value"});
    }
    if (value_outputs != 1) {
      report.push_back({"op-arity",
                        {op.id},
                        "op " + std::to_string(op.id) + " has " + std::to_string(value_outputs) +
                            " output values, expected 1"});
    }
    const bool kind_ok = g.level() == GraphLevel::kFol         ? is_fol_kind(op.kind)
                         : g.level() == GraphLevel::kPrimitive ? is_primitive_kind(op.kind)
                                                               : op.kind == OpKind::kFused;
    if (!kind_ok) {
      report.push_back({"level",
                        {op.id},
                        std::string("op kind '") + to_string(op.kind) + "' not allowed at " +
                            to_string(g.level()) + " level"});
    }
    if (op.kind == OpKind::kFused && g.function(op.id) == nullptr) {
      report.push_back({"function", {op.id}, "fused op " + std::to_string(op.id) + " has no function"});
    }
  }
  for (const auto& v : g.values()) {
    int producers = 0;
    for (NodeId p : g.preds(v.id)) producers += g.is_op(p);
    if (producers > 1) {
      report.push_back({"single-producer",
                        {v.id},
                        "value " + std::to_string(v.id) + " has " + std::to_string(producers) + " producers"});
    }
  }
  std::vector<NodeId> answers;
  for (const auto& v : g.values()) {
    if (v.role == ValueRole::kAnswer) answers.push_back(v.id);
  }
  if (answers.size() != 1) {
    report.push_back({"answer", answers,
                      "expected exactly one answer node, found " + std::to_string(answers.size())});
  }
  // Acyclicity over all nodes (Kahn).
  const size_t n = g.num_nodes();
  std::vector<int> indeg(n, 0);
  for (const auto& e : g.edges()) ++indeg[e.second];
  std::vector<NodeId> stack;
  for (size_t i = 0; i < n; ++i) {
    if (indeg[i] == 0) stack.push_back(static_cast<NodeId>(i));
  }
  size_t seen = 0;
  while (!stack.empty()) {
    NodeId u = stack.back();
    stack.pop_back();
    ++seen;
    for (NodeId v : g.succs(u)) {
      if (--indeg[v] == 0) stack.push_back(v);
    }
  }
  if (seen != n) {
    std::vector<NodeId> cyclic;
    for (size_t i = 0; i < n; ++i) {
      if (indeg[i] > 0) cyclic.push_back(static_cast<NodeId>(i));
    }
    report.push_back({"acyclic", cyclic, "graph contains a cycle through " + std::to_string(cyclic.size()) + " nodes"});
  }
  return report;
}

std::string format_report(const ValidationReport& report) {
  std::ostringstream os;
  for (const auto& v : report) {
    os << v.kind << ": " << v.message << " [nodes";
    for (NodeId id : v.nodes) os << ' ' << id;
    os << "]\n";
  }
  return os.str();
}

std::vector<NodeId> topo_order(const ComputationGraph& g) {
  const size_t n = g.num_nodes();
  std::vector<int> indeg(n, 0);
  for (const auto& e : g.edges()) ++indeg[e.second];
  std::priority_queue<NodeId, std::vector<NodeId>, std::greater<>> ready;
  for (size_t i = 0; i < n; ++i) {
    if (indeg[i] == 0) ready.push(static_cast<NodeId>(i));
  }
  std::vector<NodeId> order;
  size_t seen = 0;
  while (!ready.empty()) {
    NodeId u = ready.top();
    ready.pop();
    ++seen;
    if (g.is_op(u)) order.push_back(u);
    for (NodeId v : g.succs(u)) {
      if (--indeg[v] == 0) ready.push(v);
    }
  }
  if (seen != n) throw IntegrityError("topo_order: graph contains a cycle");
  return order;
}

namespace {

Json attrs_to_json(const OpAttrs& a) {
  Json j = Json::object();
  if (a.relation >= 0) j["relation"] = a.relation;
  if (a.edge >= 0) j["edge"] = a.edge;
  if (a.scalar != 0.0) j["scalar"] = a.scalar;
  return j;
}

OpAttrs attrs_from_json(const Json& j) {
  return {j.value("relation", -1), j.value("edge", -1), j.value("scalar", 0.0)};
}

Json shape_to_json(const Shape& s) {
  Json j = Json::array();
  for (int64_t d : s) {
    if (d == kBatch) {
      j.push_back("B");
    } else {
      j.push_back(d);
    }
  }
  return j;
}

Shape shape_from_json(const Json& j) {
  Shape s;
  for (const auto& d : j) s.push_back(d.is_string() ? kBatch : d.get<int64_t>());
  return s;
}

}  // namespace

Json graph_to_json(const ComputationGraph& g) {
  Json values = Json::array(), ops = Json::array(), edges = Json::array(), functions = Json::array();
  for (const auto& v : g.values()) {
    values.push_back({{"id", v.id}, {"role", to_string(v.role)}, {"name", v.name}, {"shape", shape_to_json(v.shape)}});
  }
  for (const auto& o : g.ops()) {
    ops.push_back({{"id", o.id}, {"kind", to_string(o.kind)}, {"attrs", attrs_to_json(o.attrs)}});
  }
  for (const auto& [a, b] : g.edges()) edges.push_back(Json::array({a, b}));
  for (const auto& [id, fn] : g.functions()) {
    Json steps = Json::array();
    for (const auto& st : fn.steps) {
      Json args = Json::array();
      for (const auto& a : st.args) {
        args.push_back({{a.kind == StepArg::Kind::kInput ? "input" : "local", a.index}});
      }
      steps.push_back({{"kind", to_string(st.kind)},
                       {"args", args},
                       {"attrs", attrs_to_json(st.attrs)},
                       {"shape", shape_to_json(st.shape)},
                       {"origin", st.origin},
                       {"module", st.module}});
    }
    Json plan = {{"scratch_width", fn.plan.scratch_width},
                 {"offset", fn.plan.offset},
                 {"in_output", Json::array()}};
    for (char c : fn.plan.in_output) plan["in_output"].push_back(c != 0);
    functions.push_back({{"op", id},
                         {"num_inputs", fn.num_inputs},
                         {"modules", fn.modules},
                         {"strategy", fn.strategy},
                         {"steps", steps},
                         {"scratch", plan}});
  }
  return Json{{"schema_version", kGraphSchemaVersion},
              {"level", to_string(g.level())},
              {"values", values},
              {"ops", ops},
              {"edges", edges},
              {"functions", functions}};
}

ComputationGraph graph_from_json(const Json& j) {
  try {
    if (j.at("schema_version").get<int>() != kGraphSchemaVersion) {
      throw ParseError("unsupported graph schema version");
    }
    ComputationGraph g(graph_level_from_string(j.at("level").get<std::string>()));
    // Nodes must be re-created in id order to keep ids stable.
    std::map<NodeId, const Json*> nodes;
    for (const auto& v : j.at("values")) nodes[v.at("id").get<NodeId>()] = &v;
    for (const auto& o : j.at("ops")) nodes[o.at("id").get<NodeId>()] = &o;
    NodeId expect = 0;
    for (const auto& [id, node] : nodes) {
      if (id != expect++) throw ParseError("graph node ids are not dense");
      if (node->contains("role")) {
        g.add_value(value_role_from_string(node->at("role").get<std::string>()),
                    node->at("name").get<std::string>(), shape_from_json(node->at("shape")));
      } else {
        g.add_op(op_kind_from_string(node->at("kind").get<std::string>()), attrs_from_json(node->at("attrs")));
      }
    }
    for (const auto& e : j.at("edges")) g.add_edge(e.at(0).get<NodeId>(), e.at(1).get<NodeId>());
    for (const auto& f : j.at("functions")) {
      FunctionSpec fn;
      fn.num_inputs = f.at("num_inputs").get<int32_t>();
      fn.modules = f.at("modules").get<std::vector<int32_t>>();
      fn.strategy = f.at("strategy").get<std::string>();
      for (const auto& st : f.at("steps")) {
        FunctionStep step;
        step.kind = op_kind_from_string(st.at("kind").get<std::string>());
        for (const auto& a : st.at("args")) {
          if (a.contains("input")) {
            step.args.push_back({StepArg::Kind::kInput, a.at("input").get<int32_t>()});
          } else {
            step.args.push_back({StepArg::Kind::kLocal, a.at("local").get<int32_t>()});
          }
        }
        step.attrs = attrs_from_json(st.at("attrs"));
        step.shape = shape_from_json(st.at("shape"));
        step.origin = st.at("origin").get<NodeId>();
        step.module = st.at("module").get<int32_t>();
        fn.steps.push_back(std::move(step));
      }
      const auto& plan = f.at("scratch");
      fn.plan.scratch_width = plan.at("scratch_width").get<int64_t>();
      fn.plan.offset = plan.at("offset").get<std::vector<int64_t>>();
      for (const auto& b : plan.at("in_output")) fn.plan.in_output.push_back(b.get<bool>() ? 1 : 0);
      g.set_function(f.at("op").get<NodeId>(), std::move(fn));
    }
    return g;
  } catch (const Json::exception& ex) {
    throw ParseError(std::string("malformed graph JSON: ") + ex.what());
  }
}

std::string graph_to_dot(const ComputationGraph& g, std::string_view name) {
  std::ostringstream os;
  os << "digraph " << name << " {\n  rankdir=TB;\n";
  for (const auto& v : g.values()) {
    const char* color = v.role == ValueRole::kWeight   ? "lightgrey"
                        : v.role == ValueRole::kAnswer ? "gold"
                        : v.role == ValueRole::kAnchor ? "lightblue"
                                                       : "white";
    os << "  n" << v.id << " [shape=ellipse, style=filled, fillcolor=" << color << ", label=\"" << v.name
       << "\\n" << shape_str(v.shape) << "\"];\n";
  }
  for (const auto& o : g.ops()) {
    os << "  n" << o.id << " [shape=box, label=\"" << to_string(o.kind);
    if (o.attrs.relation >= 0) os << " r" << o.attrs.relation;
    if (o.attrs.edge >= 0) os << " e" << o.attrs.edge;
    if (const FunctionSpec* fn = g.function(o.id); fn && o.kind == OpKind::kFused) {
      os << "\\n" << fn->steps.size() << " steps, " << fn->strategy;
    }
    os << "\"];\n";
  }
  for (const auto& [a, b] : g.edges()) os << "  n" << a << " -> n" << b << ";\n";
  os << "}\n";
  return os.str();
}

}  // namespace kgc
