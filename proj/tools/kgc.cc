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
 * \file kgc.cc
 * \brief Command-line front end: ingest, genq, compile, run, bench, report.
 */
#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>

#include "kgc/bench.h"
#include "kgc/beta_model.h"
#include "kgc/compiler.h"
#include "kgc/error.h"
#include "kgc/kg_store.h"
#include "kgc/query.h"

namespace {

using namespace kgc;

struct Globals {
  uint64_t seed = 42;
  std::string dtype = "f64";
  int threads = 1;
  std::string out;
};

struct DataOptions {
  std::string data;
  int32_t entities = 100;
  int32_t relations = 20;
  int32_t triples = 2000;
  uint64_t graph_seed = 42;

  void add(CLI::App* cmd) {
    cmd->add_option("--data", data, "Dataset directory (train.txt or triples.txt, entities.dict, relations.dict); synthetic graph when omitted");
    cmd->add_option("--num-entities", entities, "Synthetic graph entities")->check(CLI::PositiveNumber);
    cmd->add_option("--num-relations", relations, "Synthetic graph relations")->check(CLI::PositiveNumber);
    cmd->add_option("--num-triples", triples, "Synthetic graph triples")->check(CLI::NonNegativeNumber);
    cmd->add_option("--graph-seed", graph_seed, "Synthetic graph seed");
  }
  SyntheticSpec spec() const { return {entities, relations, triples, graph_seed}; }
  KnowledgeGraph load() const { return data.empty() ? synthetic_graph(spec()) : load_dataset(data); }
};

std::filesystem::path out_dir(const Globals& g, const char* fallback) {
  std::filesystem::path dir = g.out.empty() ? std::filesystem::path(fallback) : std::filesystem::path(g.out);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (!std::filesystem::is_directory(dir)) throw IOError("cannot create output directory " + dir.string());
  return dir;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IOError("cannot write " + path.string());
  out << text;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

template <typename T>
Json run_group(const ModelParams& params, const TemplateLibrary& lib, const std::vector<GroundedQuery>& qs,
               const std::vector<ExecMode>& modes, const ExecOptions& opts) {
  const CompiledQuery c = compile_query(qs.front(), lib);
  const Bindings<T> bind = bind_batch<T>(params, qs);
  const Scorer scorer(params);
  Json out = {{"task", qs.front().structure.tag}, {"queries", qs.size()}};
  for (ExecMode mode : modes) {
    const ExecResult<T> res = execute(mode == ExecMode::kFused ? c.fused : c.modular.graph, bind, mode, opts);
    Json j = res.stats.to_json();
    std::vector<std::vector<EntityId>> rankings, answers;
    bool have_answers = true;
    for (size_t r = 0; r < qs.size(); ++r) {
      rankings.push_back(scorer.rank(clause_embeddings(res.answer(), static_cast<int64_t>(r))));
      if (!qs[r].answers || qs[r].answers->empty()) have_answers = false;
      answers.push_back(qs[r].answers.value_or(std::vector<EntityId>{}));
    }
    j["top1"] = Json::array();
    for (const auto& rk : rankings) j["top1"].push_back(rk.front());
    if (have_answers) j["mrr"] = mrr(rankings, answers);
    out[to_string(mode)] = j;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kgc: compile and execute logical queries over knowledge graphs in fused and unfused form"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Seed for query generation and model initialisation")->envname("KGC_SEED");
  app.add_option("--dtype", g.dtype, "Element type")->check(CLI::IsMember({"f32", "f64"}));
  app.add_option("--threads", g.threads, "Worker threads inside each dispatch")->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "Output directory");

  DataOptions ingest_data;
  std::string triples_file, entity_dict, relation_dict;
  auto* ingest = app.add_subcommand("ingest", "Load and check a triple dataset, optionally saving it to --out");
  ingest_data.add(ingest);
  ingest->add_option("--triples", triples_file, "Triples file (head<TAB>relation<TAB>tail)");
  ingest->add_option("--entity-dict", entity_dict, "Entity vocabulary (index<TAB>name)");
  ingest->add_option("--relation-dict", relation_dict, "Relation vocabulary (index<TAB>name)");

  DataOptions genq_data;
  std::string genq_tasks = "all";
  size_t genq_count = 50;
  auto* genq = app.add_subcommand("genq", "Generate grounded queries with answers as JSONL");
  genq_data.add(genq);
  genq->add_option("--tasks", genq_tasks, "Comma-separated shapes or 'all'");
  genq->add_option("--count", genq_count, "Queries per shape")->check(CLI::PositiveNumber);

  DataOptions compile_data;
  std::string compile_task = "2p", compile_queries;
  int64_t compile_d = 32, compile_h = 64;
  bool dump_templates = false, dump_fused = false;
  auto* compile = app.add_subcommand("compile", "Compile one query shape and write its graphs");
  compile_data.add(compile);
  compile->add_option("--task", compile_task, "Shape to compile (ignored with --queries)");
  compile->add_option("--queries", compile_queries, "Compile the first query of this JSONL file");
  compile->add_option("--dim", compile_d, "Embedding dimension d")->check(CLI::PositiveNumber);
  compile->add_option("--hidden", compile_h, "Hidden width h")->check(CLI::PositiveNumber);
  compile->add_flag("--dump-templates", dump_templates, "Write templates.json");
  compile->add_flag("--dump-fused", dump_fused, "Write DOT and JSON for every level plus fusion_report.json");

  DataOptions run_data;
  std::string run_queries, run_mode = "both", run_model, save_model_path;
  int64_t run_d = 32, run_h = 64;
  auto* run = app.add_subcommand("run", "Execute queries and print counters and MRR as JSON");
  run_data.add(run);
  run->add_option("--queries", run_queries, "JSONL query file")->required();
  run->add_option("--mode", run_mode, "Execution mode")->check(CLI::IsMember({"fused", "unfused", "both"}));
  run->add_option("--model", run_model, "Load model parameters instead of initialising them");
  run->add_option("--save-model", save_model_path, "Save the model parameters used");
  run->add_option("--dim", run_d, "Embedding dimension d")->check(CLI::PositiveNumber);
  run->add_option("--hidden", run_h, "Hidden width h")->check(CLI::PositiveNumber);

  DataOptions bench_data;
  std::string bench_tasks = "all", bench_batches = "1,16,256,1024", bench_modes = "unfused,fused";
  BenchConfig cfg;
  auto* bench = app.add_subcommand("bench", "Benchmark both execution modes and write bench.csv, report.md, memory.csv, mrr.csv");
  bench_data.add(bench);
  bench->add_option("--tasks", bench_tasks, "Comma-separated shapes, 'all', or 'none'");
  bench->add_option("--batches", bench_batches, "Comma-separated batch sizes");
  bench->add_option("--modes", bench_modes, "Comma-separated modes");
  bench->add_option("--rounds", cfg.rounds, "Timed rounds after one warm-up")->check(CLI::PositiveNumber);
  bench->add_option("--dim", cfg.d, "Embedding dimension d")->check(CLI::PositiveNumber);
  bench->add_option("--hidden", cfg.h, "Hidden width h")->check(CLI::PositiveNumber);

  std::string report_in;
  auto* report = app.add_subcommand("report", "Rebuild report.md from bench.csv and mrr.csv");
  report->add_option("--in", report_in, "Directory holding bench.csv")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    const DType dtype = dtype_from_string(g.dtype);
    if (*ingest) {
      KnowledgeGraph kg = !triples_file.empty()
                              ? load_triples(triples_file, entity_dict, relation_dict)
                              : ingest_data.load();
      Json j = {{"entities", kg.num_entities()}, {"relations", kg.num_relations()}, {"triples", kg.triples().size()}};
      if (!g.out.empty()) {
        save_dataset(kg, out_dir(g, "."));
        j["saved_to"] = g.out;
      }
      std::cout << j.dump(2) << '\n';
      return 0;
    }
    if (*genq) {
      const KnowledgeGraph kg = genq_data.load();
      const auto dir = out_dir(g, "queries");
      std::vector<std::string> tags;
      if (genq_tasks == "all") {
        tags.assign(kAllTags.begin(), kAllTags.end());
      } else {
        tags = split_list(genq_tasks);
      }
      Json j = Json::object();
      for (const auto& tag : tags) {
        const auto qs = generate_queries(kg, tag, genq_count, g.seed);
        const auto path = dir / ("queries_" + tag + ".jsonl");
        write_queries(path, qs);
        j[tag] = path.string();
      }
      std::cout << j.dump(2) << '\n';
      return 0;
    }
    if (*compile) {
      const KnowledgeGraph kg = compile_data.load();
      const GroundedQuery q = compile_queries.empty() ? generate_queries(kg, compile_task, 1, g.seed).front()
                                                      : read_queries(compile_queries).at(0);
      const ModelParams params = init_model(kg, compile_d, compile_h, g.seed);
      const TemplateLibrary lib = templates(params);
      const CompiledQuery c = compile_query(q, lib);
      const Json fusion = fusion_report(c.modular, c.strategies, c.groups, c.fused);
      const auto dir = out_dir(g, "compile_out");
      if (dump_templates) write_text(dir / "templates.json", library_to_json(lib).dump(2) + "\n");
      if (dump_fused) {
        write_text(dir / "fol.dot", graph_to_dot(c.fol, "fol"));
        write_text(dir / "fol.json", graph_to_json(c.fol).dump(2) + "\n");
        write_text(dir / "primitive.dot", graph_to_dot(c.modular.graph, "primitive"));
        write_text(dir / "primitive.json", graph_to_json(c.modular.graph).dump(2) + "\n");
        write_text(dir / "modules.json", modules_to_json(c.modular).dump(2) + "\n");
        write_text(dir / "fused.dot", graph_to_dot(c.fused, "fused"));
        write_text(dir / "fused.json", graph_to_json(c.fused).dump(2) + "\n");
        write_text(dir / "fusion_report.json", fusion.dump(2) + "\n");
      }
      std::cout << Json{{"task", q.structure.tag},
                        {"fol_ops", c.fol.ops().size()},
                        {"primitive_ops", c.modular.graph.ops().size()},
                        {"modules", c.modular.modules.size()},
                        {"fused_ops", c.fused.ops().size()},
                        {"groups", fusion["groups"]}}
                       .dump(2)
                << '\n';
      return 0;
    }
    if (*run) {
      const KnowledgeGraph kg = run_data.load();
      const auto qs = read_queries(run_queries);
      if (qs.empty()) throw UsageError("query file " + run_queries + " is empty");
      const ModelParams params = run_model.empty() ? init_model(kg, run_d, run_h, g.seed) : load_model(run_model);
      if (params.num_entities != static_cast<int32_t>(kg.num_entities()) ||
          params.num_relations != static_cast<int32_t>(kg.num_relations())) {
        throw UsageError("model does not match the dataset's entity and relation counts");
      }
      if (!save_model_path.empty()) save_model(params, save_model_path);
      const TemplateLibrary lib = templates(params);
      std::vector<ExecMode> modes;
      if (run_mode != "fused") modes.push_back(ExecMode::kUnfused);
      if (run_mode != "unfused") modes.push_back(ExecMode::kFused);
      ExecOptions opts;
      opts.threads = g.threads;
      std::map<std::string, std::vector<GroundedQuery>> groups;
      std::vector<std::string> order;
      for (const auto& q : qs) {
        validate_query(q, &kg);
        const std::string key = structure_to_json(q.structure).dump();
        if (!groups.count(key)) order.push_back(key);
        groups[key].push_back(q);
      }
      Json out = Json::array();
      for (const auto& key : order) {
        out.push_back(dtype == DType::kF32 ? run_group<float>(params, lib, groups[key], modes, opts)
                                           : run_group<double>(params, lib, groups[key], modes, opts));
      }
      std::cout << out.dump(2) << '\n';
      return 0;
    }
    if (*bench) {
      if (bench_tasks == "all") {
        cfg.tasks.assign(kAllTags.begin(), kAllTags.end());
      } else if (bench_tasks != "none") {
        cfg.tasks = split_list(bench_tasks);
      }
      cfg.batches.clear();
      for (const auto& b : split_list(bench_batches)) {
        try {
          cfg.batches.push_back(std::stoll(b));
        } catch (const std::logic_error&) {
          throw UsageError("bad batch size '" + b + "'");
        }
      }
      cfg.modes.clear();
      for (const auto& m : split_list(bench_modes)) cfg.modes.push_back(exec_mode_from_string(m));
      if (!bench_data.data.empty()) cfg.dataset = bench_data.data;
      cfg.synthetic = bench_data.spec();
      cfg.seed = g.seed;
      cfg.dtype = dtype;
      cfg.threads = g.threads;
      const BenchReport r = run_benchmark(cfg);
      const auto dir = out_dir(g, "bench_out");
      emit_report(r, dir);
      std::cout << report_markdown(r);
      for (const auto& e : r.errors) std::cerr << "error: " << e << '\n';
      if (!r.parity_ok()) return 1;
      return r.errors.empty() ? 0 : 3;
    }
    if (*report) {
      const BenchReport r = read_report(report_in);
      const std::string md = report_markdown(r);
      write_text(out_dir(g, report_in.c_str()) / "report.md", md);
      std::cout << md;
      return 0;
    }
  } catch (const kgc::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
