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
 * \file fuser.cc
 */
#include "kgc/fuser.h"

#include <algorithm>
#include <numeric>
#include <queue>
#include <tuple>

#include "kgc/error.h"

namespace kgc {

const char* to_string(FusionStrategy s) {
  switch (s) {
    case FusionStrategy::kHorizontal:
      return "horizontal";
    case FusionStrategy::kVertical:
      return "vertical";
    case FusionStrategy::kHybrid:
      return "hybrid";
  }
  return "?";
}

namespace {

int32_t num_modules(const ModularizedGraph& m) { return static_cast<int32_t>(m.modules.size()); }

std::vector<std::vector<int32_t>> adjacency(const ModularizedGraph& m, bool forward) {
  std::vector<std::vector<int32_t>> adj(m.modules.size());
  for (const auto& [a, b] : m.module_dag) {
    if (forward) {
      adj[a].push_back(b);
    } else {
      adj[b].push_back(a);
    }
  }
  for (auto& v : adj) std::sort(v.begin(), v.end());
  return adj;
}

std::vector<int32_t> module_topo(const ModularizedGraph& m) {
  const auto succ = adjacency(m, true);
  std::vector<int> indeg(m.modules.size(), 0);
  for (const auto& e : m.module_dag) ++indeg[e.second];
  std::priority_queue<int32_t, std::vector<int32_t>, std::greater<>> ready;
  for (int32_t i = 0; i < num_modules(m); ++i) {
    if (indeg[i] == 0) ready.push(i);
  }
  std::vector<int32_t> order;
  while (!ready.empty()) {
    int32_t u = ready.top();
    ready.pop();
    order.push_back(u);
    for (int32_t v : succ[u]) {
      if (--indeg[v] == 0) ready.push(v);
    }
  }
  if (order.size() != m.modules.size()) throw IntegrityError("module graph contains a cycle");
  return order;
}

std::set<NodeId> ops_of(const ModularizedGraph& m, const std::set<int32_t>& group) {
  std::set<NodeId> ops;
  for (int32_t id : group) ops.insert(m.modules[id].ops.begin(), m.modules[id].ops.end());
  return ops;
}

// Boundary values of a set of primitive ops, in topological op order.
void boundary(const ModularizedGraph& m, const std::set<NodeId>& ops, const std::vector<NodeId>& topo,
              std::vector<NodeId>* inputs, std::vector<NodeId>* outputs) {
  const ComputationGraph& g = m.graph;
  std::set<NodeId> seen;
  for (NodeId op : topo) {
    if (!ops.count(op)) continue;
    for (NodeId v : g.preds(op)) {
      if (!g.is_value(v)) continue;
      auto p = g.producer(v);
      if (p && ops.count(*p)) continue;
      if (seen.insert(v).second) inputs->push_back(v);
    }
    const NodeId out = g.op_output(op);
    bool external = g.value(out).role == ValueRole::kAnswer;
    for (NodeId c : g.succs(out)) external = external || !ops.count(c);
    if (external) outputs->push_back(out);
  }
}

class GroupBuilder {
 public:
  explicit GroupBuilder(const ModularizedGraph& m) : m_(m), topo_(topo_order(m.graph)), group_of_(m.modules.size(), -1) {}

  int32_t create(int32_t module) {
    groups_.push_back({module});
    group_of_[module] = static_cast<int32_t>(groups_.size() - 1);
    return group_of_[module];
  }

  bool fusable(const std::set<int32_t>& s) const {
    if (!is_convex(m_, s)) return false;
    std::vector<NodeId> in, out;
    boundary(m_, ops_of(m_, s), topo_, &in, &out);
    return out.size() == 1;
  }

  bool try_merge(int32_t into, int32_t from) {
    if (into == from || groups_[from].empty()) return false;
    std::set<int32_t> u = groups_[into];
    u.insert(groups_[from].begin(), groups_[from].end());
    if (!fusable(u)) return false;
    for (int32_t id : groups_[from]) group_of_[id] = into;
    groups_[into] = std::move(u);
    groups_[from].clear();
    return true;
  }

  bool try_add(int32_t group, int32_t module) {
    std::set<int32_t> u = groups_[group];
    u.insert(module);
    if (!fusable(u)) return false;
    groups_[group] = std::move(u);
    group_of_[module] = group;
    return true;
  }

  int32_t group_of(int32_t module) const { return group_of_[module]; }
  std::vector<std::set<int32_t>>& groups() { return groups_; }
  const std::vector<NodeId>& topo() const { return topo_; }

 private:
  const ModularizedGraph& m_;
  std::vector<NodeId> topo_;
  std::vector<int32_t> group_of_;
  std::vector<std::set<int32_t>> groups_;
};

}  // namespace

std::map<int32_t, FusionStrategy> determine_strategies(const ModularizedGraph& m) {
  const auto preds = adjacency(m, false);
  std::vector<char> has_h(m.modules.size(), 0), has_v(m.modules.size(), 0);
  for (const auto& [u, v] : m.module_dag) {
    const ModuleKind k = m.modules[v].kind;
    const bool vertical = k == ModuleKind::kAnd || k == ModuleKind::kOr || preds[v].size() >= 2;
    (vertical ? has_v : has_h)[u] = 1;
    (vertical ? has_v : has_h)[v] = 1;
  }
  std::map<int32_t, FusionStrategy> out;
  for (int32_t i = 0; i < num_modules(m); ++i) {
    out[i] = has_h[i] && has_v[i] ? FusionStrategy::kHybrid
             : has_v[i]           ? FusionStrategy::kVertical
                                  : FusionStrategy::kHorizontal;
  }
  return out;
}

bool is_convex(const ModularizedGraph& m, const std::set<int32_t>& group) {
  const auto succ = adjacency(m, true);
  // Walk from the group's outside successors; reaching the group again means a path re-enters.
  std::vector<char> seen(m.modules.size(), 0);
  std::vector<int32_t> stack;
  for (int32_t u : group) {
    for (int32_t v : succ[u]) {
      if (!group.count(v) && !seen[v]) {
        seen[v] = 1;
        stack.push_back(v);
      }
    }
  }
  while (!stack.empty()) {
    int32_t u = stack.back();
    stack.pop_back();
    for (int32_t v : succ[u]) {
      if (group.count(v)) return false;
      if (!seen[v]) {
        seen[v] = 1;
        stack.push_back(v);
      }
    }
  }
  return true;
}

std::vector<FusionGroup> collect_groups(const ModularizedGraph& m, const std::map<int32_t, FusionStrategy>& strategies) {
  const auto preds = adjacency(m, false);
  const auto succs = adjacency(m, true);
  auto strategy = [&](int32_t id) {
    auto it = strategies.find(id);
    if (it == strategies.end()) throw FusionError("no strategy for module " + std::to_string(id));
    return it->second;
  };
  GroupBuilder b(m);
  for (int32_t u : module_topo(m)) {
    std::vector<int32_t> candidates;
    for (int32_t p : preds[u]) {
      if (strategy(p) != strategy(u)) continue;
      const int32_t gid = b.group_of(p);
      if (std::find(candidates.begin(), candidates.end(), gid) == candidates.end()) candidates.push_back(gid);
    }
    int32_t home = -1;
    for (int32_t gid : candidates) {
      if (b.try_add(gid, u)) {
        home = gid;
        break;
      }
    }
    if (home < 0) {
      b.create(u);
      continue;
    }
    for (int32_t gid : candidates) b.try_merge(home, gid);
  }
  std::set<int32_t> absorbed;
  for (bool changed = true; changed;) {
    changed = false;
    std::vector<int32_t> order;
    for (int32_t gid = 0; gid < static_cast<int32_t>(b.groups().size()); ++gid) {
      if (!b.groups()[gid].empty()) order.push_back(gid);
    }
    std::sort(order.begin(), order.end(), [&](int32_t x, int32_t y) { return *b.groups()[x].begin() < *b.groups()[y].begin(); });
    for (int32_t gid : order) {
      const auto& members = b.groups()[gid];
      const bool hybrid = std::any_of(members.begin(), members.end(), [&](int32_t id) { return strategy(id) == FusionStrategy::kHybrid; });
      if (!hybrid) continue;
      std::vector<int32_t> neighbours;
      for (const auto* adj : {&preds, &succs}) {
        std::vector<int32_t> side;
        for (int32_t id : members) {
          for (int32_t n : (*adj)[id]) {
            if (!members.count(n)) side.push_back(n);
          }
        }
        std::sort(side.begin(), side.end());
        for (int32_t n : side) neighbours.push_back(b.group_of(n));
      }
      for (int32_t other : neighbours) {
        if (b.try_merge(gid, other)) {
          absorbed.insert(gid);
          changed = true;
          break;
        }
      }
      if (changed) break;
    }
  }
  std::vector<FusionGroup> out;
  for (int32_t gid = 0; gid < static_cast<int32_t>(b.groups().size()); ++gid) {
    const auto& members = b.groups()[gid];
    if (members.empty()) continue;
    FusionGroup fg;
    fg.modules.assign(members.begin(), members.end());
    fg.strategy = strategy(fg.modules.front());
    for (int32_t id : fg.modules) {
      if (strategy(id) == FusionStrategy::kHybrid) fg.strategy = FusionStrategy::kHybrid;
    }
    fg.absorbed = absorbed.count(gid) > 0;
    boundary(m, ops_of(m, members), b.topo(), &fg.inputs, &fg.outputs);
    out.push_back(std::move(fg));
  }
  std::sort(out.begin(), out.end(), [](const FusionGroup& x, const FusionGroup& y) { return x.modules.front() < y.modules.front(); });
  return out;
}

ScratchPlan plan_scratch(const std::vector<FunctionStep>& steps) {
  const auto n = static_cast<int32_t>(steps.size());
  if (n == 0) throw FusionError("fused function has no steps");
  std::vector<int64_t> width(n);
  std::vector<int32_t> last(n);
  for (int32_t i = 0; i < n; ++i) {
    if (!is_batched(steps[i].shape)) throw FusionError("fused step " + std::to_string(i) + " has an unbatched result");
    width[i] = row_elements(steps[i].shape);
    last[i] = i;
    for (const StepArg& a : steps[i].args) {
      if (a.kind == StepArg::Kind::kLocal) last[a.index] = std::max(last[a.index], i);
    }
  }
  last[n - 1] = n;
  // Chains of in-place steps share one buffer.
  std::vector<int32_t> buf(n);
  std::iota(buf.begin(), buf.end(), 0);
  for (int32_t i = 0; i < n; ++i) {
    const auto& st = steps[i];
    const bool inplace = is_inplace_kind(st.kind) || (st.kind == OpKind::kSoftmax && st.args.size() == 1);
    if (!inplace || st.args[0].kind != StepArg::Kind::kLocal) continue;
    const int32_t j = st.args[0].index;
    const bool reused = std::count(st.args.begin(), st.args.end(), st.args[0]) > 1;
    if (last[j] == i && width[j] == width[i] && !reused) buf[i] = buf[j];
  }
  struct Buffer {
    int32_t id;
    int64_t width;
    int32_t def, end;
    int64_t offset = 0;
    bool in_output = false;
  };
  std::map<int32_t, Buffer> buffers;
  for (int32_t i = 0; i < n; ++i) {
    auto [it, inserted] = buffers.try_emplace(buf[i], Buffer{buf[i], width[i], i, last[i]});
    if (!inserted) it->second.end = std::max(it->second.end, last[i]);
  }
  const int32_t out_buf = buf[n - 1];
  const int64_t out_width = width[n - 1];
  auto first_fit = [](const std::vector<const Buffer*>& placed, const Buffer& b) {
    std::vector<std::pair<int64_t, int64_t>> busy;
    for (const Buffer* p : placed) {
      if (p->def <= b.end && b.def <= p->end) busy.emplace_back(p->offset, p->offset + p->width);
    }
    std::sort(busy.begin(), busy.end());
    int64_t off = 0;
    for (const auto& [lo, hi] : busy) {
      if (off + b.width <= lo) break;
      off = std::max(off, hi);
    }
    return off;
  };
  // Place buffers in `order`: into the output row when they fit beside what is already there,
  // otherwise at the lowest free scratch offset. Returns the scratch width used.
  auto place = [&](std::map<int32_t, Buffer>& bufs, const std::vector<int32_t>& order) {
    Buffer& ob = bufs.at(out_buf);
    ob.in_output = true;
    ob.offset = 0;
    std::vector<const Buffer*> in_output{&ob}, in_scratch;
    int64_t scratch_width = 0;
    for (int32_t id : order) {
      Buffer& b = bufs.at(id);
      const int64_t off = first_fit(in_output, b);
      if (off + b.width <= out_width) {
        b.offset = off;
        b.in_output = true;
        in_output.push_back(&b);
        continue;
      }
      b.offset = first_fit(in_scratch, b);
      b.in_output = false;
      in_scratch.push_back(&b);
      scratch_width = std::max(scratch_width, b.offset + b.width);
    }
    return scratch_width;
  };
  std::vector<int32_t> ids;
  for (const auto& [id, b] : buffers) {
    if (id != out_buf) ids.push_back(id);
  }
  // Candidate orders: latest-ending first (anchored on the output), earliest-defined first, and
  // largest first. The plan with the narrowest scratch wins; ties keep the earlier candidate.
  std::vector<std::vector<int32_t>> orders(3, ids);
  std::sort(orders[0].begin(), orders[0].end(), [&](int32_t x, int32_t y) {
    const Buffer &bx = buffers.at(x), &by = buffers.at(y);
    return std::tie(by.end, by.def, by.width, x) < std::tie(bx.end, bx.def, bx.width, y);
  });
  std::sort(orders[1].begin(), orders[1].end(), [&](int32_t x, int32_t y) {
    const Buffer &bx = buffers.at(x), &by = buffers.at(y);
    return std::tie(bx.def, by.width, x) < std::tie(by.def, bx.width, y);
  });
  std::sort(orders[2].begin(), orders[2].end(), [&](int32_t x, int32_t y) {
    const Buffer &bx = buffers.at(x), &by = buffers.at(y);
    if (bx.width != by.width) return bx.width > by.width;
    if (bx.end - bx.def != by.end - by.def) return bx.end - bx.def > by.end - by.def;
    return bx.def < by.def;
  });
  std::map<int32_t, Buffer> best;
  int64_t scratch_width = -1;
  for (const auto& order : orders) {
    auto trial = buffers;
    const int64_t w = place(trial, order);
    if (scratch_width < 0 || w < scratch_width) {
      scratch_width = w;
      best = std::move(trial);
    }
  }
  buffers = std::move(best);
  ScratchPlan plan;
  plan.scratch_width = scratch_width;
  for (int32_t i = 0; i < n; ++i) {
    const Buffer& b = buffers.at(buf[i]);
    plan.offset.push_back(b.offset);
    plan.in_output.push_back(b.in_output ? 1 : 0);
  }
  return plan;
}

ComputationGraph fuse(const ModularizedGraph& m, const std::vector<FusionGroup>& groups) {
  const ComputationGraph& g = m.graph;
  std::vector<int32_t> owner(m.modules.size(), -1);
  for (size_t gi = 0; gi < groups.size(); ++gi) {
    if (groups[gi].modules.empty()) throw FusionError("fusion group " + std::to_string(gi) + " is empty");
    for (int32_t id : groups[gi].modules) {
      if (id < 0 || id >= num_modules(m)) throw FusionError("fusion group names unknown module " + std::to_string(id));
      if (owner[id] >= 0) throw FusionError("module " + std::to_string(id) + " is in two fusion groups");
      owner[id] = static_cast<int32_t>(gi);
    }
  }
  for (size_t id = 0; id < owner.size(); ++id) {
    if (owner[id] < 0) throw FusionError("module " + std::to_string(id) + " is in no fusion group");
  }
  const auto topo = topo_order(g);
  std::map<NodeId, size_t> topo_pos;
  for (size_t i = 0; i < topo.size(); ++i) topo_pos[topo[i]] = i;

  struct Plan {
    std::vector<NodeId> ops, inputs, outputs;
  };
  std::vector<Plan> plans(groups.size());
  std::set<NodeId> internal;
  for (size_t gi = 0; gi < groups.size(); ++gi) {
    const std::set<int32_t> members(groups[gi].modules.begin(), groups[gi].modules.end());
    if (!is_convex(m, members)) throw FusionError("fusion group " + std::to_string(gi) + " is not convex");
    const auto ops = ops_of(m, members);
    Plan& p = plans[gi];
    boundary(m, ops, topo, &p.inputs, &p.outputs);
    if (p.outputs.size() != 1) {
      throw IntegrityError("fusion group " + std::to_string(gi) + " has " + std::to_string(p.outputs.size()) +
                           " boundary outputs, expected 1");
    }
    p.ops.assign(ops.begin(), ops.end());
    std::sort(p.ops.begin(), p.ops.end(), [&](NodeId a, NodeId b) { return topo_pos.at(a) < topo_pos.at(b); });
    for (NodeId op : p.ops) {
      const NodeId v = g.op_output(op);
      if (v != p.outputs[0]) internal.insert(v);
    }
  }
  ComputationGraph out(GraphLevel::kFused);
  std::map<NodeId, NodeId> remap;
  for (const auto& v : g.values()) {
    if (!internal.count(v.id)) remap[v.id] = out.add_value(v.role, v.name, v.shape);
  }
  for (size_t gi = 0; gi < groups.size(); ++gi) {
    const Plan& p = plans[gi];
    FunctionSpec fn;
    fn.num_inputs = static_cast<int32_t>(p.inputs.size());
    fn.modules = groups[gi].modules;
    fn.strategy = to_string(groups[gi].strategy);
    std::map<NodeId, int32_t> local;
    for (NodeId op : p.ops) {
      FunctionStep st;
      st.kind = g.op(op).kind;
      st.attrs = g.op(op).attrs;
      st.origin = op;
      st.module = m.module_of.at(op);
      for (NodeId v : g.preds(op)) {
        if (!g.is_value(v)) continue;
        if (auto it = local.find(v); it != local.end()) {
          st.args.push_back({StepArg::Kind::kLocal, it->second});
        } else {
          const auto pos = std::find(p.inputs.begin(), p.inputs.end(), v) - p.inputs.begin();
          st.args.push_back({StepArg::Kind::kInput, static_cast<int32_t>(pos)});
        }
      }
      const NodeId v = g.op_output(op);
      st.shape = g.value(v).shape;
      local[v] = static_cast<int32_t>(fn.steps.size());
      fn.steps.push_back(std::move(st));
    }
    if (g.op_output(p.ops.back()) != p.outputs[0]) {
      throw IntegrityError("fusion group " + std::to_string(gi) + " does not end at its output");
    }
    fn.plan = plan_scratch(fn.steps);
    const NodeId fop = out.add_op(OpKind::kFused);
    for (NodeId v : p.inputs) out.add_edge(remap.at(v), fop);
    out.add_edge(fop, remap.at(p.outputs[0]));
    out.set_function(fop, std::move(fn));
  }
  if (auto report = validate(out); !report.empty()) {
    throw IntegrityError("fused graph is invalid:\n" + format_report(report));
  }
  return out;
}

Json fusion_report(const ModularizedGraph& m, const std::map<int32_t, FusionStrategy>& strategies,
                   const std::vector<FusionGroup>& groups, const ComputationGraph& fused) {
  Json mods = Json::array();
  for (const auto& info : m.modules) {
    mods.push_back({{"id", info.id},
                    {"kind", to_string(info.kind)},
                    {"ops", info.ops.size()},
                    {"strategy", to_string(strategies.at(info.id))}});
  }
  Json gs = Json::array();
  size_t gi = 0;
  for (const auto& op : fused.ops()) {
    const FunctionSpec* fn = fused.function(op.id);
    const FusionGroup& grp = groups.at(gi++);
    gs.push_back({{"fused_op", op.id},
                  {"modules", grp.modules},
                  {"strategy", to_string(grp.strategy)},
                  {"hybrid_absorbed_neighbours", grp.absorbed},
                  {"steps", fn ? fn->steps.size() : 0},
                  {"scratch_width", fn ? fn->plan.scratch_width : 0}});
  }
  return Json{{"primitive_ops", m.graph.ops().size()},
              {"fused_ops", fused.ops().size()},
              {"modules", mods},
              {"groups", gs}};
}

}  // namespace kgc
