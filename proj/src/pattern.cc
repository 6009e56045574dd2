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
 * \file pattern.cc
 */
#include "kgc/pattern.h"

#include <algorithm>
#include <functional>
#include <set>

#include "kgc/error.h"

namespace kgc {

namespace {

size_t per_input_count(const PatternTemplate& t) {
  return static_cast<size_t>(std::count_if(t.steps.begin(), t.steps.end(),
                                           [](const TemplateStep& s) { return s.per_input; }));
}

std::string kind_label(const PatternTemplate& t) { return to_string(t.fol_kind); }

// Shapes of every instantiated step for n inputs of the template's embedding width.
std::vector<Shape> infer_step_shapes(const PatternTemplate& t, const std::vector<InstantiatedStep>& steps) {
  std::vector<Shape> shapes;
  for (const auto& st : steps) {
    std::vector<Shape> in;
    for (const auto& a : st.args) {
      switch (a.kind) {
        case TemplateArg::Kind::kInput:
          in.push_back({kBatch, t.embedding_width});
          break;
        case TemplateArg::Kind::kWeight:
          in.push_back(t.weights[a.index].shape);
          break;
        default:
          in.push_back(shapes[a.index]);
      }
    }
    OpAttrs attrs;
    attrs.edge = st.selects_relation ? 0 : -1;
    shapes.push_back(infer_shape(st.kind, in, attrs));
  }
  return shapes;
}

}  // namespace

size_t PatternTemplate::step_count(int32_t n) const {
  const size_t p = per_input_count(*this);
  return p * static_cast<size_t>(n) + (steps.size() - p);
}

std::vector<InstantiatedStep> instantiate(const PatternTemplate& t, int32_t n) {
  if (t.arity == 0 ? n < 2 : n != t.arity) {
    throw TemplateError("template '" + kind_label(t) + "' cannot take " + std::to_string(n) + " inputs");
  }
  const auto p = static_cast<int32_t>(per_input_count(t));
  using K = TemplateArg::Kind;
  auto flat_shared = [&](int32_t j) { return n * p + (j - p); };
  std::vector<InstantiatedStep> out;
  auto bad = [&](const std::string& why) { return TemplateError("template '" + kind_label(t) + "': " + why); };
  for (int32_t r = 0; r < n && p > 0; ++r) {
    for (int32_t j = 0; j < p; ++j) {
      const TemplateStep& st = t.steps[j];
      InstantiatedStep is{st.kind, {}, st.selects_relation, st.scalar};
      for (const auto& a : st.args) {
        switch (a.kind) {
          case K::kInput:
            is.args.push_back({K::kInput, r});
            break;
          case K::kWeight:
            is.args.push_back(a);
            break;
          case K::kStep:
            if (a.index >= j) throw bad("step refers forward");
            is.args.push_back({K::kStep, r * p + a.index});
            break;
          default:
            throw bad("per-input step cannot use all-branch operands");
        }
      }
      out.push_back(std::move(is));
    }
  }
  for (int32_t j = p; j < static_cast<int32_t>(t.steps.size()); ++j) {
    const TemplateStep& st = t.steps[j];
    InstantiatedStep is{st.kind, {}, st.selects_relation, st.scalar};
    for (const auto& a : st.args) {
      switch (a.kind) {
        case K::kInput:
          if (a.index < 0 || a.index >= n) throw bad("input index out of range");
          is.args.push_back(a);
          break;
        case K::kWeight:
          is.args.push_back(a);
          break;
        case K::kStep:
          if (a.index < p || a.index >= j) throw bad("shared step must refer to an earlier shared step");
          is.args.push_back({K::kStep, flat_shared(a.index)});
          break;
        case K::kEachInput:
          for (int32_t r = 0; r < n; ++r) is.args.push_back({K::kInput, r});
          break;
        case K::kEachStep:
          if (a.index < 0 || a.index >= p) throw bad("all-branch operand must name a per-input step");
          for (int32_t r = 0; r < n; ++r) is.args.push_back({K::kStep, r * p + a.index});
          break;
      }
    }
    out.push_back(std::move(is));
  }
  return out;
}

void validate_template(const PatternTemplate& t) {
  auto bad = [&](const std::string& why) { return TemplateError("template '" + kind_label(t) + "': " + why); };
  if (!is_fol_kind(t.fol_kind)) throw TemplateError(std::string("'") + to_string(t.fol_kind) + "' is not a FOL operator kind");
  if (t.arity < 0) throw bad("negative arity");
  if (t.embedding_width <= 0) throw bad("embedding width must be positive");
  if (t.steps.empty()) throw bad("no steps");
  for (const auto& w : t.weights) {
    if (w.shape.empty()) throw bad("weight '" + w.name + "' has no declared shape");
  }
  bool block_done = false;
  for (size_t j = 0; j < t.steps.size(); ++j) {
    const auto& st = t.steps[j];
    if (!is_primitive_kind(st.kind)) throw bad(std::string("step kind '") + to_string(st.kind) + "' is not primitive");
    if (st.per_input && t.arity != 0) throw bad("per-input steps require a variadic template");
    if (st.per_input && block_done) throw bad("per-input steps must form a leading block");
    if (!st.per_input) block_done = true;
    if (st.args.empty()) throw bad("step " + std::to_string(j) + " has no operands");
    for (const auto& a : st.args) {
      if (a.kind == TemplateArg::Kind::kWeight && (a.index < 0 || static_cast<size_t>(a.index) >= t.weights.size())) {
        throw bad("step " + std::to_string(j) + " references an undeclared weight");
      }
    }
  }
  if (t.steps.back().per_input) throw bad("the terminal step cannot be per-input");
  std::vector<int32_t> counts = t.arity == 0 ? std::vector<int32_t>{2, 3} : std::vector<int32_t>{t.arity};
  for (int32_t n : counts) {
    auto steps = instantiate(t, n);
    std::vector<char> input_used(n, 0), consumed(steps.size(), 0);
    for (const auto& st : steps) {
      for (const auto& a : st.args) {
        if (a.kind == TemplateArg::Kind::kInput) input_used[a.index] = 1;
        if (a.kind == TemplateArg::Kind::kStep) consumed[a.index] = 1;
      }
    }
    for (int32_t i = 0; i < n; ++i) {
      if (!input_used[i]) throw bad("input " + std::to_string(i) + " is never used");
    }
    for (size_t s = 0; s + 1 < steps.size(); ++s) {
      if (!consumed[s]) throw bad("step " + std::to_string(s) + " is not consumed; a template has a single output");
    }
    try {
      infer_step_shapes(t, steps);
    } catch (const ShapeError& e) {
      throw bad(std::string("shape check failed: ") + e.what());
    }
  }
}

void TemplateLibrary::add(OpKind fol_kind, PatternTemplate t) {
  if (!is_fol_kind(fol_kind)) throw TemplateError(std::string("'") + to_string(fol_kind) + "' is not a FOL operator kind");
  if (t.fol_kind != fol_kind) throw TemplateError("template kind does not match its registration key");
  validate_template(t);
  templates_[fol_kind] = std::move(t);
}

const PatternTemplate* TemplateLibrary::find(OpKind fol_kind) const {
  auto it = templates_.find(fol_kind);
  return it == templates_.end() ? nullptr : &it->second;
}

std::vector<const PatternTemplate*> TemplateLibrary::matching_order() const {
  std::vector<const PatternTemplate*> out;
  for (const auto& [k, t] : templates_) out.push_back(&t);
  std::sort(out.begin(), out.end(), [](const PatternTemplate* a, const PatternTemplate* b) {
    if (a->nominal_step_count() != b->nominal_step_count()) return a->nominal_step_count() > b->nominal_step_count();
    return std::string_view(to_string(a->fol_kind)) < std::string_view(to_string(b->fol_kind));
  });
  return out;
}

TemplateLibrary register_template(TemplateLibrary lib, std::string_view fol_kind, PatternTemplate t) {
  OpKind kind;
  try {
    kind = op_kind_from_string(fol_kind);
  } catch (const ParseError&) {
    throw TemplateError("unknown FOL operator kind '" + std::string(fol_kind) + "'");
  }
  lib.add(kind, std::move(t));
  return lib;
}

Json template_to_json(const PatternTemplate& t) {
  static const char* kArgNames[] = {"input", "weight", "step", "each_input", "each_step"};
  Json weights = Json::array(), steps = Json::array();
  for (const auto& w : t.weights) weights.push_back({{"name", w.name}, {"shape", w.shape}});
  for (const auto& st : t.steps) {
    Json args = Json::array();
    for (const auto& a : st.args) args.push_back({{kArgNames[static_cast<int>(a.kind)], a.index}});
    Json j = {{"kind", to_string(st.kind)}, {"args", args}};
    if (st.per_input) j["per_input"] = true;
    if (st.selects_relation) j["selects_relation"] = true;
    if (st.scalar != 0.0) j["scalar"] = st.scalar;
    steps.push_back(std::move(j));
  }
  return Json{{"fol_kind", to_string(t.fol_kind)},
              {"arity", t.arity == 0 ? Json("variadic") : Json(t.arity)},
              {"embedding_width", t.embedding_width},
              {"nominal_steps", t.nominal_step_count()},
              {"weights", weights},
              {"steps", steps}};
}

Json library_to_json(const TemplateLibrary& lib) {
  Json out = Json::array();
  for (const PatternTemplate* t : lib.matching_order()) out.push_back(template_to_json(*t));
  return out;
}

const char* to_string(ModuleKind k) {
  switch (k) {
    case ModuleKind::kProject:
      return "project";
    case ModuleKind::kAnd:
      return "and";
    case ModuleKind::kOr:
      return "or";
    case ModuleKind::kNot:
      return "not";
    case ModuleKind::kOpaque:
      return "opaque";
  }
  return "?";
}

ModuleKind module_kind_of(OpKind k) {
  switch (k) {
    case OpKind::kProject:
      return ModuleKind::kProject;
    case OpKind::kAnd:
      return ModuleKind::kAnd;
    case OpKind::kOr:
      return ModuleKind::kOr;
    case OpKind::kNot:
      return ModuleKind::kNot;
    default:
      return ModuleKind::kOpaque;
  }
}

std::vector<int32_t> ModularizedGraph::module_preds(int32_t m) const {
  std::vector<int32_t> out;
  for (const auto& [a, b] : module_dag) {
    if (b == m) out.push_back(a);
  }
  return out;
}

std::vector<int32_t> ModularizedGraph::module_succs(int32_t m) const {
  std::vector<int32_t> out;
  for (const auto& [a, b] : module_dag) {
    if (a == m) out.push_back(b);
  }
  return out;
}

void finalize_modules(ModularizedGraph& m) {
  std::map<int32_t, std::vector<NodeId>> members;
  for (const auto& [op, mod] : m.module_of) members[mod].push_back(op);
  std::map<int32_t, ModuleKind> kinds;
  for (const auto& info : m.modules) kinds[info.id] = info.kind;
  std::vector<std::pair<NodeId, int32_t>> by_min;
  for (auto& [mod, ops] : members) {
    std::sort(ops.begin(), ops.end());
    by_min.emplace_back(ops.front(), mod);
  }
  std::sort(by_min.begin(), by_min.end());
  std::map<int32_t, int32_t> renumber;
  std::vector<ModuleInfo> modules;
  for (const auto& [first, old] : by_min) {
    const auto id = static_cast<int32_t>(modules.size());
    renumber[old] = id;
    modules.push_back({id, kinds.count(old) ? kinds[old] : ModuleKind::kOpaque, members[old]});
  }
  for (auto& [op, mod] : m.module_of) mod = renumber[mod];
  m.modules = std::move(modules);
  std::set<std::pair<int32_t, int32_t>> dag;
  const ComputationGraph& g = m.graph;
  for (const auto& [op, mod] : m.module_of) {
    for (NodeId v : g.preds(op)) {
      if (!g.is_value(v)) continue;
      if (auto p = g.producer(v)) {
        auto it = m.module_of.find(*p);
        if (it != m.module_of.end() && it->second != mod) dag.emplace(it->second, mod);
      }
    }
  }
  m.module_dag.assign(dag.begin(), dag.end());
}

ModularizedGraph expand(const ComputationGraph& g, const TemplateLibrary& lib) {
  if (g.level() != GraphLevel::kFol) throw ExpansionError("expand expects a FOL-level graph");
  if (auto report = validate(g); !report.empty()) {
    throw ExpansionError("input graph is invalid:\n" + format_report(report));
  }
  ModularizedGraph m;
  ComputationGraph& out = m.graph;
  std::map<NodeId, NodeId> value_map;
  for (const auto& v : g.values()) {
    Shape shape = v.shape;
    value_map[v.id] = out.add_value(v.role, v.name, shape);
  }
  std::map<std::string, NodeId> weight_nodes;
  int32_t module = 0;
  for (NodeId fol_op : topo_order(g)) {
    const OpNode& op = g.op(fol_op);
    const PatternTemplate* t = lib.find(op.kind);
    if (t == nullptr) throw ExpansionError(std::string("no template registered for '") + to_string(op.kind) + "'");
    std::vector<NodeId> inputs;
    for (NodeId p : g.preds(fol_op)) inputs.push_back(value_map.at(p));
    const auto n = static_cast<int32_t>(inputs.size());
    std::vector<InstantiatedStep> steps;
    try {
      steps = instantiate(*t, n);
    } catch (const TemplateError& e) {
      throw ExpansionError(std::string("cannot expand '") + to_string(op.kind) + "' op " + std::to_string(fol_op) + ": " + e.what());
    }
    for (NodeId in : inputs) {
      ValueNode& iv = out.mutable_value(in);
      if (iv.shape.size() <= 1) iv.shape = {kBatch, t->embedding_width};
    }
    std::vector<NodeId> step_out(steps.size(), -1);
    for (size_t s = 0; s < steps.size(); ++s) {
      const InstantiatedStep& st = steps[s];
      OpAttrs attrs;
      if (st.selects_relation) {
        attrs.relation = op.attrs.relation;
        attrs.edge = op.attrs.edge;
      }
      attrs.scalar = st.scalar;
      std::vector<NodeId> args;
      std::vector<Shape> shapes;
      for (const auto& a : st.args) {
        NodeId v = -1;
        switch (a.kind) {
          case TemplateArg::Kind::kInput:
            v = inputs[a.index];
            break;
          case TemplateArg::Kind::kStep:
            v = step_out[a.index];
            break;
          case TemplateArg::Kind::kWeight: {
            const WeightDecl& w = t->weights[a.index];
            const std::string key = std::string(to_string(t->fol_kind)) + "." + w.name;
            auto it = weight_nodes.find(key);
            if (it == weight_nodes.end()) it = weight_nodes.emplace(key, out.add_value(ValueRole::kWeight, key, w.shape)).first;
            v = it->second;
            break;
          }
          default:
            throw ExpansionError("unexpanded template operand");
        }
        args.push_back(v);
        shapes.push_back(out.value(v).shape);
      }
      if (st.selects_relation && attrs.edge < 0) {
        throw ExpansionError("relation-selecting step needs a project op with an edge slot");
      }
      Shape shape = infer_shape(st.kind, shapes, attrs);
      NodeId prim = out.add_op(st.kind, attrs);
      for (NodeId a : args) out.add_edge(a, prim);
      NodeId result;
      if (s + 1 == steps.size()) {
        result = value_map.at(g.op_output(fol_op));
        out.mutable_value(result).shape = shape;
      } else {
        result = out.add_value(ValueRole::kIntermediate, "m" + std::to_string(module) + ".t" + std::to_string(s + 1), shape);
      }
      out.add_edge(prim, result);
      step_out[s] = result;
      m.module_of[prim] = module;
    }
    m.modules.push_back({module, module_kind_of(op.kind), {}});
    ++module;
  }
  out.set_level(GraphLevel::kPrimitive);
  finalize_modules(m);
  return m;
}

namespace {

class TemplateMatcher {
 public:
  TemplateMatcher(const ComputationGraph& g, const std::set<NodeId>& assigned) : g_(g), assigned_(assigned) {}

  // Returns the matched ops (empty on failure).
  std::vector<NodeId> match(const PatternTemplate& t, NodeId terminal) {
    const auto argc = static_cast<int32_t>(value_inputs(terminal).size());
    int32_t n = t.arity;
    if (t.arity == 0) {
      // The terminal step's operand count is affine in the input count.
      const auto a2 = static_cast<int32_t>(instantiate(t, 2).back().args.size());
      const auto a3 = static_cast<int32_t>(instantiate(t, 3).back().args.size());
      const int32_t per = a3 - a2;
      if (per <= 0) return {};
      if ((argc - a2) % per != 0) return {};
      n = 2 + (argc - a2) / per;
      if (n < 2) return {};
    }
    steps_ = instantiate(t, n);
    step_op_.assign(steps_.size(), -1);
    input_value_.assign(n, -1);
    weight_value_.assign(t.weights.size(), -1);
    op_step_.clear();
    edge_ = -2;
    if (!bind(static_cast<int32_t>(steps_.size()) - 1, terminal)) return {};
    std::set<NodeId> ops(step_op_.begin(), step_op_.end());
    if (ops.count(-1)) return {};
    // Internal values must not escape; inputs must come from outside.
    for (size_t s = 0; s + 1 < steps_.size(); ++s) {
      NodeId v = g_.op_output(step_op_[s]);
      if (g_.value(v).role == ValueRole::kAnswer) return {};
      for (NodeId c : g_.succs(v)) {
        if (!ops.count(c)) return {};
      }
    }
    for (NodeId v : input_value_) {
      if (auto p = g_.producer(v); p && ops.count(*p)) return {};
    }
    return {ops.begin(), ops.end()};
  }

 private:
  std::vector<NodeId> value_inputs(NodeId op) const {
    std::vector<NodeId> in;
    for (NodeId p : g_.preds(op)) {
      if (g_.is_value(p)) in.push_back(p);
    }
    return in;
  }

  bool bind(int32_t s, NodeId op) {
    if (step_op_[s] != -1) return step_op_[s] == op;
    if (op_step_.count(op) || assigned_.count(op)) return false;
    const InstantiatedStep& st = steps_[s];
    const OpNode& node = g_.op(op);
    if (node.kind != st.kind || node.attrs.scalar != st.scalar) return false;
    if (st.selects_relation != (node.attrs.edge >= 0)) return false;
    if (st.selects_relation) {
      if (edge_ == -2) edge_ = node.attrs.edge;
      if (edge_ != node.attrs.edge) return false;
    }
    const auto in = value_inputs(op);
    if (in.size() != st.args.size()) return false;
    step_op_[s] = op;
    op_step_[op] = s;
    for (size_t k = 0; k < st.args.size(); ++k) {
      const TemplateArg& a = st.args[k];
      const NodeId v = in[k];
      switch (a.kind) {
        case TemplateArg::Kind::kInput:
          if (input_value_[a.index] == -1) input_value_[a.index] = v;
          if (input_value_[a.index] != v) return false;
          break;
        case TemplateArg::Kind::kWeight:
          if (g_.value(v).role != ValueRole::kWeight) return false;
          if (weight_value_[a.index] == -1) weight_value_[a.index] = v;
          if (weight_value_[a.index] != v) return false;
          break;
        case TemplateArg::Kind::kStep: {
          auto p = g_.producer(v);
          if (!p || !bind(a.index, *p)) return false;
          break;
        }
        default:
          return false;
      }
    }
    return true;
  }

  const ComputationGraph& g_;
  const std::set<NodeId>& assigned_;
  std::vector<InstantiatedStep> steps_;
  std::vector<NodeId> step_op_;
  std::vector<NodeId> input_value_;
  std::vector<NodeId> weight_value_;
  std::map<NodeId, int32_t> op_step_;
  int32_t edge_ = -2;
};

}  // namespace

ModularizedGraph recognize(const ComputationGraph& g, const TemplateLibrary& lib) {
  ModularizedGraph m;
  m.graph = g;
  std::set<NodeId> assigned;
  const auto order = topo_order(g);
  const auto templates = lib.matching_order();
  int32_t next = 0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const NodeId op = *it;
    if (assigned.count(op)) continue;
    for (const PatternTemplate* t : templates) {
      if (t->steps.back().kind != g.op(op).kind) continue;
      TemplateMatcher matcher(g, assigned);
      auto ops = matcher.match(*t, op);
      if (ops.empty()) continue;
      for (NodeId o : ops) {
        assigned.insert(o);
        m.module_of[o] = next;
      }
      m.modules.push_back({next, module_kind_of(t->fol_kind), {}});
      ++next;
      break;
    }
  }
  for (NodeId op : order) {
    if (assigned.count(op)) continue;
    m.module_of[op] = next;
    m.modules.push_back({next, ModuleKind::kOpaque, {}});
    ++next;
  }
  finalize_modules(m);
  return m;
}

Json modules_to_json(const ModularizedGraph& m) {
  Json modules = Json::array(), dag = Json::array();
  for (const auto& info : m.modules) {
    modules.push_back({{"id", info.id}, {"kind", to_string(info.kind)}, {"ops", info.ops}});
  }
  for (const auto& [a, b] : m.module_dag) dag.push_back(Json::array({a, b}));
  return Json{{"modules", modules}, {"module_dag", dag}};
}

}  // namespace kgc
