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
 * \file engine.cc
 */
#include "kgc/engine.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>

#include "kgc/error.h"

namespace kgc {

const char* to_string(ExecMode m) { return m == ExecMode::kFused ? "fused" : "unfused"; }

ExecMode exec_mode_from_string(std::string_view s) {
  if (s == "fused") return ExecMode::kFused;
  if (s == "unfused") return ExecMode::kUnfused;
  throw UsageError("unknown execution mode '" + std::string(s) + "' (expected fused or unfused)");
}

Json ExecutionStats::to_json() const {
  return Json{{"kernel_launches", kernel_launches},
              {"interm_bytes", interm_bytes},
              {"peak_bytes", peak_bytes},
              {"wall_ns", wall_ns},
              {"nonfinite", nonfinite}};
}

namespace {

// Per-row weight slabs dominate the working set, so tiles are sized near L2 rather than L1.
constexpr int64_t kTileBytes = 1 << 20;

Shape concrete(const Shape& s, int64_t batch) {
  Shape out = s;
  if (is_batched(out)) out[0] = batch;
  return out;
}

// Split [0, rows) into `threads` contiguous chunks and run `body(r0, r1)` on each.
template <typename F>
void parallel_rows(int64_t rows, int threads, F&& body) {
  if (threads <= 1 || rows < 2 * threads) {
    body(int64_t{0}, rows);
    return;
  }
  std::vector<std::thread> pool;
  const int64_t chunk = (rows + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const int64_t r0 = t * chunk, r1 = std::min(rows, r0 + chunk);
    if (r0 >= r1) break;
    pool.emplace_back([&body, r0, r1] { body(r0, r1); });
  }
  for (auto& th : pool) th.join();
}

struct Prepared {
  int64_t batch = 0;
  std::vector<NodeId> order;
  std::vector<Shape> shape;
  std::vector<int64_t> last_use;
};

template <typename T>
Prepared prepare(const ComputationGraph& g, const Bindings<T>& in, ExecMode mode) {
  const GraphLevel want = mode == ExecMode::kFused ? GraphLevel::kFused : GraphLevel::kPrimitive;
  if (g.level() != want) {
    throw UsageError(std::string(to_string(mode)) + " execution needs a " + to_string(want) + "-level graph, got " +
                     to_string(g.level()));
  }
  if (auto report = validate(g); !report.empty()) throw IntegrityError("cannot execute invalid graph:\n" + format_report(report));
  Prepared p;
  p.batch = -1;
  for (const auto& v : g.values()) {
    if (g.producer(v.id) || !is_batched(v.shape)) continue;
    auto it = in.values.find(v.name);
    if (it == in.values.end()) throw BindingError("unbound input '" + v.name + "'");
    if (it->second.rank() < 1) throw BindingError("input '" + v.name + "' is a scalar");
    if (p.batch < 0) p.batch = it->second.shape()[0];
    if (it->second.shape()[0] != p.batch) throw BindingError("input '" + v.name + "' disagrees on batch size");
  }
  if (p.batch < 0) throw BindingError("no batched input is bound");
  p.shape.resize(g.num_nodes());
  p.last_use.assign(g.num_nodes(), -1);
  for (const auto& v : g.values()) {
    p.shape[v.id] = concrete(v.shape, p.batch);
    if (g.producer(v.id)) continue;
    auto it = in.values.find(v.name);
    if (it == in.values.end()) throw BindingError("unbound input '" + v.name + "'");
    if (it->second.shape() != p.shape[v.id]) {
      throw BindingError("input '" + v.name + "' has shape " + shape_str(it->second.shape()) + ", expected " +
                         shape_str(p.shape[v.id]));
    }
  }
  p.order = topo_order(g);
  for (size_t i = 0; i < p.order.size(); ++i) {
    for (NodeId v : g.preds(p.order[i])) p.last_use[v] = static_cast<int64_t>(i);
  }
  return p;
}

template <typename T>
const int32_t* selector_for(const Bindings<T>& in, const OpAttrs& attrs, const Shape& weight, int64_t batch) {
  auto it = in.selectors.find(attrs.edge);
  if (it == in.selectors.end()) throw BindingError("no relation selector bound for query edge " + std::to_string(attrs.edge));
  if (static_cast<int64_t>(it->second.size()) != batch) {
    throw BindingError("relation selector for edge " + std::to_string(attrs.edge) + " has " +
                       std::to_string(it->second.size()) + " rows, batch is " + std::to_string(batch));
  }
  for (int32_t r : it->second) {
    if (r < 0 || r >= weight[0]) throw BindingError("relation " + std::to_string(r) + " out of range for edge " + std::to_string(attrs.edge));
  }
  return it->second.data();
}

template <typename T>
int64_t count_nonfinite(const Tensor<T>& t) {
  return std::count_if(t.values().begin(), t.values().end(), [](T x) { return !std::isfinite(x); });
}

template <typename T>
ExecResult<T> run_unfused(const ComputationGraph& g, const Bindings<T>& in, const ExecOptions& opts) {
  Prepared p = prepare(g, in, ExecMode::kUnfused);
  const int64_t B = p.batch;
  const NodeId answer = g.answer();
  std::vector<KernelCall<T>> calls;
  std::vector<std::vector<NodeId>> args(p.order.size());
  for (size_t i = 0; i < p.order.size(); ++i) {
    const NodeId op = p.order[i];
    std::vector<Shape> shapes;
    for (NodeId v : g.preds(op)) {
      args[i].push_back(v);
      shapes.push_back(p.shape[v]);
    }
    KernelCall<T> c = plan_kernel<T>(g.op(op).kind, shapes, g.op(op).attrs);
    if (c.slab > 0) c.selector = selector_for(in, g.op(op).attrs, shapes[1], B);
    calls.push_back(std::move(c));
  }
  std::vector<const T*> ptr(g.num_nodes(), nullptr);
  for (const auto& [name, t] : in.values) {
    if (auto id = g.find_value(name)) ptr[*id] = t.data();
  }
  std::vector<Tensor<T>> owned(g.num_nodes());
  ExecResult<T> res;
  ExecutionStats& st = res.stats;
  int64_t live = 0;
  const auto t0 = std::chrono::steady_clock::now();
  for (size_t i = 0; i < p.order.size(); ++i) {
    const NodeId op = p.order[i];
    const NodeId out = g.op_output(op);
    owned[out] = Tensor<T>(p.shape[out]);
    ptr[out] = owned[out].data();
    const int64_t bytes = owned[out].bytes();
    live += bytes;
    st.peak_bytes = std::max(st.peak_bytes, live);
    if (out != answer) st.interm_bytes += bytes;
    KernelCall<T>& c = calls[i];
    for (size_t a = 0; a < args[i].size(); ++a) c.args[a].data = ptr[args[i][a]];
    c.out = owned[out].data();
    parallel_rows(B, opts.threads, [&c](int64_t r0, int64_t r1) { run_rows(c, r0, r1); });
    ++st.kernel_launches;
    for (NodeId v : args[i]) {
      if (p.last_use[v] == static_cast<int64_t>(i) && g.producer(v) && v != answer && owned[v].size() > 0) {
        live -= owned[v].bytes();
        owned[v] = Tensor<T>();
      }
    }
  }
  st.wall_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - t0).count();
  st.nonfinite = count_nonfinite(owned[answer]);
  res.outputs.emplace(g.value(answer).name, std::move(owned[answer]));
  return res;
}

template <typename T>
ExecResult<T> run_fused(const ComputationGraph& g, const Bindings<T>& in, const ExecOptions& opts) {
  Prepared p = prepare(g, in, ExecMode::kFused);
  const int64_t B = p.batch;
  const NodeId answer = g.answer();
  struct OpPlan {
    const FunctionSpec* fn;
    std::vector<NodeId> inputs;
    NodeId out;
    std::vector<KernelCall<T>> calls;
    int64_t out_width, tile;
  };
  std::vector<OpPlan> plans;
  for (NodeId op : p.order) {
    OpPlan pl;
    pl.fn = g.function(op);
    if (pl.fn == nullptr) throw IntegrityError("fused op " + std::to_string(op) + " has no function");
    for (NodeId v : g.preds(op)) pl.inputs.push_back(v);
    if (static_cast<int32_t>(pl.inputs.size()) != pl.fn->num_inputs) {
      throw IntegrityError("fused op " + std::to_string(op) + " input count disagrees with its function");
    }
    pl.out = g.op_output(op);
    pl.out_width = row_elements(g.value(pl.out).shape);
    int64_t row_bytes = (pl.out_width + pl.fn->plan.scratch_width) * static_cast<int64_t>(sizeof(T));
    for (const FunctionStep& s : pl.fn->steps) {
      std::vector<Shape> shapes;
      for (const StepArg& a : s.args) {
        shapes.push_back(a.kind == StepArg::Kind::kInput ? p.shape[pl.inputs[a.index]] : concrete(pl.fn->steps[a.index].shape, B));
      }
      KernelCall<T> c = plan_kernel<T>(s.kind, shapes, s.attrs);
      if (c.slab > 0) c.selector = selector_for(in, s.attrs, shapes[1], B);
      pl.calls.push_back(std::move(c));
    }
    for (NodeId v : pl.inputs) {
      if (is_batched(g.value(v).shape)) row_bytes += row_elements(g.value(v).shape) * static_cast<int64_t>(sizeof(T));
    }
    pl.tile = opts.tile_rows > 0 ? opts.tile_rows : std::max<int64_t>(1, kTileBytes / std::max<int64_t>(1, row_bytes));
    plans.push_back(std::move(pl));
  }
  std::vector<const T*> ptr(g.num_nodes(), nullptr);
  for (const auto& [name, t] : in.values) {
    if (auto id = g.find_value(name)) ptr[*id] = t.data();
  }
  std::vector<Tensor<T>> owned(g.num_nodes());
  ExecResult<T> res;
  ExecutionStats& st = res.stats;
  int64_t live = 0;
  const auto t0 = std::chrono::steady_clock::now();
  for (size_t i = 0; i < plans.size(); ++i) {
    OpPlan& pl = plans[i];
    const ScratchPlan& sp = pl.fn->plan;
    owned[pl.out] = Tensor<T>(p.shape[pl.out]);
    T* out = owned[pl.out].data();
    ptr[pl.out] = out;
    std::vector<T> scratch(static_cast<size_t>(B * sp.scratch_width));
    const int64_t out_bytes = owned[pl.out].bytes();
    const int64_t scratch_bytes = static_cast<int64_t>(scratch.size() * sizeof(T));
    live += out_bytes + scratch_bytes;
    st.peak_bytes = std::max(st.peak_bytes, live);
    if (pl.out != answer) st.interm_bytes += out_bytes;
    for (size_t s = 0; s < pl.calls.size(); ++s) {
      KernelCall<T>& c = pl.calls[s];
      const FunctionStep& step = pl.fn->steps[s];
      for (size_t a = 0; a < step.args.size(); ++a) {
        const StepArg& arg = step.args[a];
        if (arg.kind == StepArg::Kind::kInput) {
          c.args[a].data = ptr[pl.inputs[arg.index]];
        } else if (sp.in_output[arg.index]) {
          c.args[a].data = out + sp.offset[arg.index];
          c.args[a].stride = pl.out_width;
        } else {
          c.args[a].data = scratch.data() + sp.offset[arg.index];
          c.args[a].stride = sp.scratch_width;
        }
      }
      if (sp.in_output[s]) {
        c.out = out + sp.offset[s];
        c.out_stride = pl.out_width;
      } else {
        c.out = scratch.data() + sp.offset[s];
        c.out_stride = sp.scratch_width;
      }
    }
    parallel_rows(B, opts.threads, [&pl](int64_t c0, int64_t c1) {
      for (int64_t r0 = c0; r0 < c1; r0 += pl.tile) {
        const int64_t r1 = std::min(c1, r0 + pl.tile);
        for (const auto& c : pl.calls) run_rows(c, r0, r1);
      }
    });
    ++st.kernel_launches;
    std::vector<T>().swap(scratch);
    live -= scratch_bytes;
    for (NodeId v : pl.inputs) {
      if (p.last_use[v] == static_cast<int64_t>(i) && g.producer(v) && v != answer && owned[v].size() > 0) {
        live -= owned[v].bytes();
        owned[v] = Tensor<T>();
      }
    }
  }
  st.wall_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - t0).count();
  st.nonfinite = count_nonfinite(owned[answer]);
  res.outputs.emplace(g.value(answer).name, std::move(owned[answer]));
  return res;
}

}  // namespace

template <typename T>
ExecResult<T> execute(const ComputationGraph& g, const Bindings<T>& inputs, ExecMode mode, const ExecOptions& opts) {
  if (opts.threads < 1) throw UsageError("threads must be at least 1");
  return mode == ExecMode::kFused ? run_fused(g, inputs, opts) : run_unfused(g, inputs, opts);
}

template ExecResult<float> execute<float>(const ComputationGraph&, const Bindings<float>&, ExecMode, const ExecOptions&);
template ExecResult<double> execute<double>(const ComputationGraph&, const Bindings<double>&, ExecMode, const ExecOptions&);

}  // namespace kgc
