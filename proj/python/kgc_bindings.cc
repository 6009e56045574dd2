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
 * \file kgc_bindings.cc
 * \brief Python bindings: graphs, query generation, compilation, dual-mode execution and benchmarks.
 */

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <string>
#include <vector>

#include "kgc/bench.h"
#include "kgc/beta_model.h"
#include "kgc/compiler.h"
#include "kgc/engine.h"
#include "kgc/error.h"
#include "kgc/oracle.h"

namespace py = pybind11;
using namespace kgc;

namespace {

py::object to_py(const Json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

struct Model {
  ModelParams params;
  TemplateLibrary lib;
};

py::dict stats_dict(const ExecutionStats& s) {
  py::dict d;
  d["kernel_launches"] = s.kernel_launches;
  d["interm_bytes"] = s.interm_bytes;
  d["peak_bytes"] = s.peak_bytes;
  d["wall_ns"] = s.wall_ns;
  d["nonfinite"] = s.nonfinite;
  return d;
}

template <typename T>
py::dict run(const CompiledQuery& c, const Model& m, const std::vector<GroundedQuery>& qs, ExecMode mode,
             const ExecOptions& opts) {
  if (qs.empty()) throw UsageError("execute needs at least one query");
  auto bind = bind_batch<T>(m.params, qs);
  const ComputationGraph& g = mode == ExecMode::kFused ? c.fused : c.modular.graph;
  ExecResult<T> r;
  {
    py::gil_scoped_release release;
    r = execute<T>(g, bind, mode, opts);
  }
  const Tensor<T>& a = r.answer();
  std::vector<py::ssize_t> shape(a.shape().begin(), a.shape().end());
  py::array_t<T> arr(shape);
  std::copy(a.data(), a.data() + a.size(), arr.mutable_data());
  py::dict out;
  out["answer"] = arr;
  out["stats"] = stats_dict(r.stats);
  return out;
}

}  // namespace

PYBIND11_MODULE(_kgfuse, mod) {
  mod.doc() = "Operator-fusing compiler and runtime for knowledge-graph query embeddings";
  static py::exception<Error> error(mod, "KGCError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error, e.what());
    }
  });

  mod.attr("SHAPES") = std::vector<std::string>(kAllTags.begin(), kAllTags.end());

  py::class_<KnowledgeGraph>(mod, "KnowledgeGraph")
      .def_property_readonly("num_entities", &KnowledgeGraph::num_entities)
      .def_property_readonly("num_relations", &KnowledgeGraph::num_relations)
      .def_property_readonly("num_triples", [](const KnowledgeGraph& g) { return g.triples().size(); })
      .def("triples", [](const KnowledgeGraph& g) {
        std::vector<std::tuple<int, int, int>> out;
        for (const Triple& t : g.triples()) out.emplace_back(t.head, t.rel, t.tail);
        return out;
      })
      .def("save", [](const KnowledgeGraph& g, const std::filesystem::path& dir) { save_dataset(g, dir); });

  mod.def("synthetic_graph", [](int32_t entities, int32_t relations, int32_t triples, uint64_t seed) {
    return synthetic_graph({entities, relations, triples, seed});
  }, py::arg("entities") = 100, py::arg("relations") = 20, py::arg("triples") = 2000, py::arg("seed") = 42);
  mod.def("load_dataset", &load_dataset, py::arg("path"));

  py::class_<GroundedQuery>(mod, "Query")
      .def_property_readonly("shape", [](const GroundedQuery& q) { return q.structure.tag; })
      .def_readonly("anchors", &GroundedQuery::anchors)
      .def_readonly("rels", &GroundedQuery::rels)
      .def_readonly("answers", &GroundedQuery::answers)
      .def("to_json", [](const GroundedQuery& q) { return query_to_json(q).dump(); })
      .def_static("from_json", [](const std::string& s) { return query_from_json(Json::parse(s)); })
      .def("__repr__", [](const GroundedQuery& q) { return "<Query " + query_to_json(q).dump() + ">"; });

  mod.def("generate_queries", &generate_queries, py::arg("graph"), py::arg("shape"), py::arg("count"),
          py::arg("seed") = 42, py::arg("max_retries") = 1000);
  mod.def("oracle_answers", [](const KnowledgeGraph& g, const GroundedQuery& q) { return answer_oracle(g, q); });

  py::class_<Model>(mod, "Model")
      .def(py::init([](const KnowledgeGraph& g, int64_t d, int64_t h, uint64_t seed) {
             Model m{init_model(g, d, h, seed), {}};
             m.lib = templates(m.params);
             return m;
           }),
           py::arg("graph"), py::arg("d") = 32, py::arg("h") = 64, py::arg("seed") = 42)
      .def_property_readonly("d", [](const Model& m) { return m.params.d; })
      .def_property_readonly("h", [](const Model& m) { return m.params.h; })
      .def("templates", [](const Model& m) { return to_py(library_to_json(m.lib)); })
      .def("rank", [](const Model& m, py::array_t<double, py::array::c_style | py::array::forcecast> row) {
        if (row.ndim() < 1 || row.ndim() > 2) throw ShapeError("rank expects a [2d] or [clauses, 2d] array");
        Shape s{1};
        for (py::ssize_t i = 0; i < row.ndim(); ++i) s.push_back(row.shape(i));
        Tensor<double> t(s, std::vector<double>(row.data(), row.data() + row.size()));
        return Scorer(m.params).rank(clause_embeddings(t, 0));
      })
      .def("save", [](const Model& m, const std::filesystem::path& p) { save_model(m.params, p); });

  py::class_<CompiledQuery>(mod, "CompiledQuery")
      .def_property_readonly("fol_ops", [](const CompiledQuery& c) { return c.fol.ops().size(); })
      .def_property_readonly("primitive_ops", [](const CompiledQuery& c) { return c.modular.graph.ops().size(); })
      .def_property_readonly("fused_ops", [](const CompiledQuery& c) { return c.fused.ops().size(); })
      .def_property_readonly("modules", [](const CompiledQuery& c) {
        std::vector<std::string> out;
        for (const auto& m : c.modular.modules) out.push_back(to_string(m.kind));
        return out;
      })
      .def("report", [](const CompiledQuery& c) { return to_py(fusion_report(c.modular, c.strategies, c.groups, c.fused)); })
      .def("dot", [](const CompiledQuery& c, const std::string& level) {
        if (level == "fol") return graph_to_dot(c.fol, "fol");
        if (level == "primitive") return graph_to_dot(c.modular.graph, "primitive");
        if (level == "fused") return graph_to_dot(c.fused, "fused");
        throw UsageError("level must be fol, primitive or fused");
      }, py::arg("level") = "fused");

  mod.def("compile", [](const GroundedQuery& q, const Model& m) { return compile_query(q, m.lib); },
          py::arg("query"), py::arg("model"));

  mod.def("execute", [](const CompiledQuery& c, const Model& m, const std::vector<GroundedQuery>& qs,
                        const std::string& mode, const std::string& dtype, int threads) {
    ExecOptions opts;
    opts.threads = threads;
    const ExecMode em = exec_mode_from_string(mode);
    return dtype_from_string(dtype) == DType::kF32 ? run<float>(c, m, qs, em, opts) : run<double>(c, m, qs, em, opts);
  }, py::arg("compiled"), py::arg("model"), py::arg("queries"), py::arg("mode") = "fused", py::arg("dtype") = "f64",
     py::arg("threads") = 1);

  mod.def("log_beta", &log_beta);
  mod.def("kl_beta", py::overload_cast<double, double, double, double>(&kl_beta));

  mod.def("benchmark", [](const std::vector<std::string>& tasks, const std::vector<int64_t>& batches, int rounds,
                          int64_t d, int64_t h, uint64_t seed, const std::string& dtype,
                          std::optional<std::filesystem::path> out) {
    BenchConfig cfg;
    cfg.tasks = tasks;
    cfg.batches = batches;
    cfg.rounds = rounds;
    cfg.d = d;
    cfg.h = h;
    cfg.seed = seed;
    cfg.dtype = dtype_from_string(dtype);
    cfg.validate();
    BenchReport r;
    {
      py::gil_scoped_release release;
      r = run_benchmark(cfg);
      if (out) emit_report(r, *out);
    }
    py::list rows;
    for (const auto& row : r.rows) {
      py::dict d;
      d["task"] = row.task;
      d["mode"] = to_string(row.mode);
      d["batch"] = row.batch;
      d["launches"] = row.launches;
      d["interm_bytes"] = row.interm_bytes;
      d["peak_bytes"] = row.peak_bytes;
      d["wall_ns_median"] = row.wall_ns_median;
      rows.append(d);
    }
    py::dict res;
    res["rows"] = rows;
    res["avg_speedup"] = r.avg_speedup;
    res["parity_ok"] = r.parity_ok();
    res["errors"] = r.errors;
    return res;
  }, py::arg("tasks"), py::arg("batches") = std::vector<int64_t>{1, 16}, py::arg("rounds") = 1, py::arg("d") = 32,
     py::arg("h") = 64, py::arg("seed") = 42, py::arg("dtype") = "f64", py::arg("out") = py::none());
}
