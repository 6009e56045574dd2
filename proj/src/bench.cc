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
 * \file bench.cc
 */
#include "kgc/bench.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include "kgc/beta_model.h"
#include "kgc/compiler.h"
#include "kgc/error.h"
#include "kgc/query.h"

namespace kgc {

const char* to_string(DType t) { return t == DType::kF32 ? "f32" : "f64"; }

DType dtype_from_string(std::string_view s) {
  if (s == "f32") return DType::kF32;
  if (s == "f64") return DType::kF64;
  throw UsageError("unknown dtype '" + std::string(s) + "' (expected f32 or f64)");
}

void BenchConfig::validate() const {
  for (const auto& t : tasks) structure_of(t);
  for (int64_t b : batches) {
    if (b < 1) throw UsageError("batch sizes must be at least 1");
  }
  if (rounds < 1) throw UsageError("rounds must be at least 1");
  if (d < 1 || h < 1) throw UsageError("model dimensions must be at least 1");
  if (threads < 1) throw UsageError("threads must be at least 1");
  if (modes.empty()) throw UsageError("at least one execution mode is required");
}

bool BenchReport::parity_ok() const {
  return std::all_of(tasks.begin(), tasks.end(), [](const TaskSummary& t) { return t.parity_ok; });
}

namespace {

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

int64_t median(std::vector<int64_t> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2;
}

template <typename T>
double max_rel_error(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) return std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) {
    const double x = a[i], y = b[i];
    const double scale = std::max({std::abs(x), std::abs(y), 1e-300});
    worst = std::max(worst, std::abs(x - y) / scale);
  }
  return worst;
}

template <typename T>
void run_task(const BenchConfig& cfg, const KnowledgeGraph& g, const ModelParams& params, const TemplateLibrary& lib,
              const std::string& tag, BenchReport& report) {
  const int64_t max_batch = *std::max_element(cfg.batches.begin(), cfg.batches.end());
  const auto queries = generate_queries(g, tag, static_cast<size_t>(max_batch), cfg.seed);
  const CompiledQuery compiled = compile_query(queries.front(), lib);
  const double tol = std::is_same_v<T, float> ? 1e-5 : 1e-10;
  const Scorer scorer(params);
  TaskSummary summary;
  summary.task = tag;
  ExecOptions opts;
  opts.threads = cfg.threads;
  for (int64_t batch : cfg.batches) {
    const std::span<const GroundedQuery> rows(queries.data(), static_cast<size_t>(batch));
    const Bindings<T> bind = bind_batch<T>(params, rows);
    std::map<ExecMode, std::vector<int64_t>> times;
    std::map<ExecMode, ExecResult<T>> last;
    for (int round = 0; round <= cfg.rounds; ++round) {
      for (ExecMode mode : cfg.modes) {
        const ComputationGraph& graph = mode == ExecMode::kFused ? compiled.fused : compiled.modular.graph;
        ExecResult<T> res = execute(graph, bind, mode, opts);
        if (round > 0) times[mode].push_back(res.stats.wall_ns);
        if (res.stats.nonfinite > 0) {
          report.errors.push_back(tag + " " + to_string(mode) + " batch " + std::to_string(batch) + ": " +
                                  std::to_string(res.stats.nonfinite) + " non-finite answer values");
        }
        last[mode] = std::move(res);
      }
    }
    for (ExecMode mode : cfg.modes) {
      const auto& ts = times[mode];
      const ExecutionStats& st = last[mode].stats;
      double mean = 0.0;
      for (int64_t t : ts) mean += static_cast<double>(t);
      mean /= static_cast<double>(ts.size());
      report.rows.push_back({report.dataset, report.model, tag, mode, batch, st.kernel_launches, st.interm_bytes,
                             st.peak_bytes, median(ts), mean});
    }
    const bool both = last.count(ExecMode::kFused) && last.count(ExecMode::kUnfused);
    summary.speedup.push_back(both ? static_cast<double>(median(times[ExecMode::kUnfused])) /
                                         static_cast<double>(std::max<int64_t>(1, median(times[ExecMode::kFused])))
                                   : 0.0);
    if (both) {
      const double err = max_rel_error(last[ExecMode::kUnfused].answer(), last[ExecMode::kFused].answer());
      summary.max_rel_error = std::max(summary.max_rel_error, err);
      if (!(err <= tol)) summary.parity_ok = false;
    }
    if (batch != max_batch) continue;
    std::map<ExecMode, std::vector<std::vector<EntityId>>> rankings;
    std::vector<std::vector<EntityId>> answers;
    for (const auto& q : rows) answers.push_back(q.answers.value_or(std::vector<EntityId>{}));
    for (ExecMode mode : cfg.modes) {
      for (int64_t r = 0; r < batch; ++r) rankings[mode].push_back(scorer.rank(clause_embeddings(last[mode].answer(), r)));
    }
    summary.mrr_queries = batch;
    if (rankings.count(ExecMode::kUnfused)) summary.mrr_unfused = mrr(rankings[ExecMode::kUnfused], answers);
    if (rankings.count(ExecMode::kFused)) summary.mrr_fused = mrr(rankings[ExecMode::kFused], answers);
    if (both && rankings[ExecMode::kUnfused] != rankings[ExecMode::kFused]) summary.parity_ok = false;
    if (both && *summary.mrr_unfused != *summary.mrr_fused) summary.parity_ok = false;
  }
  if (!summary.parity_ok) {
    report.errors.push_back(tag + ": fused and unfused results disagree (max relative error " +
                            fmt("%.3g", summary.max_rel_error) + ")");
  }
  report.tasks.push_back(std::move(summary));
}

void finish_summary(BenchReport& r) {
  r.avg_speedup.assign(r.batches.size(), 0.0);
  for (size_t b = 0; b < r.batches.size(); ++b) {
    double log_sum = 0.0;
    size_t n = 0;
    for (const auto& t : r.tasks) {
      if (b < t.speedup.size() && t.speedup[b] > 0.0) {
        log_sum += std::log(t.speedup[b]);
        ++n;
      }
    }
    r.avg_speedup[b] = n == r.tasks.size() && n > 0 ? std::exp(log_sum / static_cast<double>(n)) : 0.0;
  }
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IOError("cannot write " + path.string());
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string csv_safe(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  return s;
}

}  // namespace

BenchReport run_benchmark(const BenchConfig& cfg) {
  cfg.validate();
  BenchReport report;
  KnowledgeGraph g = cfg.dataset ? load_dataset(*cfg.dataset) : synthetic_graph(cfg.synthetic);
  report.dataset = csv_safe(cfg.dataset ? cfg.dataset->filename().string() : "synthetic");
  if (report.dataset.empty()) report.dataset = csv_safe(cfg.dataset->parent_path().filename().string());
  report.batches = cfg.batches;
  const ModelParams params = init_model(g, cfg.d, cfg.h, cfg.seed);
  const TemplateLibrary lib = templates(params);
  for (const auto& tag : cfg.tasks) {
    try {
      if (cfg.dtype == DType::kF32) {
        run_task<float>(cfg, g, params, lib, tag, report);
      } else {
        run_task<double>(cfg, g, params, lib, tag, report);
      }
    } catch (const GenerationError& e) {
      report.errors.push_back(tag + ": " + e.what());
    }
  }
  finish_summary(report);
  return report;
}

std::string report_markdown(const BenchReport& r) {
  std::ostringstream md;
  md << "# Benchmark report\n\nDataset `" << r.dataset << "`, model `" << r.model << "`.\n\n";
  auto header = [&](const char* first) {
    md << "| " << first << " |";
    for (const auto& t : r.tasks) md << ' ' << t.task << " |";
    return;
  };
  md << "## Speedup (unfused median / fused median)\n\n";
  header("batch");
  md << " AVG_speedup |\n|---|";
  for (size_t i = 0; i <= r.tasks.size(); ++i) md << "---|";
  md << '\n';
  for (size_t b = 0; b < r.batches.size(); ++b) {
    md << "| " << r.batches[b] << " |";
    for (const auto& t : r.tasks) md << ' ' << (b < t.speedup.size() && t.speedup[b] > 0 ? fmt("%.2f", t.speedup[b]) : "-") << " |";
    md << ' ' << (b < r.avg_speedup.size() && r.avg_speedup[b] > 0 ? fmt("%.2f", r.avg_speedup[b]) : "-") << " |\n";
  }
  md << "\n## Kernel launches per dispatch\n\n";
  header("mode");
  md << "\n|---|";
  for (size_t i = 0; i < r.tasks.size(); ++i) md << "---|";
  md << '\n';
  for (ExecMode mode : {ExecMode::kUnfused, ExecMode::kFused}) {
    md << "| " << to_string(mode) << " |";
    for (const auto& t : r.tasks) {
      auto it = std::find_if(r.rows.begin(), r.rows.end(), [&](const BenchRow& row) { return row.task == t.task && row.mode == mode; });
      md << ' ' << (it == r.rows.end() ? std::string("-") : std::to_string(it->launches)) << " |";
    }
    md << '\n';
  }
  md << "\n## MRR\n\n";
  header("mode");
  md << "\n|---|";
  for (size_t i = 0; i < r.tasks.size(); ++i) md << "---|";
  md << '\n';
  for (ExecMode mode : {ExecMode::kUnfused, ExecMode::kFused}) {
    md << "| " << to_string(mode) << " |";
    for (const auto& t : r.tasks) {
      const auto& v = mode == ExecMode::kFused ? t.mrr_fused : t.mrr_unfused;
      md << ' ' << (v ? fmt("%.4f", *v) : "-") << " |";
    }
    md << '\n';
  }
  if (!r.errors.empty()) {
    md << "\n## Errors\n\n";
    for (const auto& e : r.errors) md << "- " << e << '\n';
  }
  return md.str();
}

void emit_report(const BenchReport& r, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (!std::filesystem::is_directory(dir)) throw IOError("cannot create output directory " + dir.string());
  {
    auto out = open_out(dir / "bench.csv");
    out << kBenchCsvHeader << '\n';
    for (const auto& row : r.rows) {
      out << row.dataset << ',' << row.model << ',' << row.task << ',' << to_string(row.mode) << ',' << row.batch << ','
          << row.launches << ',' << row.interm_bytes << ',' << row.peak_bytes << ',' << row.wall_ns_median << ','
          << fmt("%.1f", row.wall_ns_mean) << '\n';
    }
  }
  {
    auto out = open_out(dir / "memory.csv");
    out << "dataset,model,task,batch,mode,interm_bytes,peak_bytes\n";
    for (const auto& row : r.rows) {
      out << row.dataset << ',' << row.model << ',' << row.task << ',' << row.batch << ',' << to_string(row.mode) << ','
          << row.interm_bytes << ',' << row.peak_bytes << '\n';
    }
  }
  {
    auto out = open_out(dir / "mrr.csv");
    out << "dataset,model,task,queries,mrr_unfused,mrr_fused,abs_diff\n";
    for (const auto& t : r.tasks) {
      auto num = [](const std::optional<double>& v) { return v ? fmt("%.17g", *v) : std::string(); };
      const std::string diff = t.mrr_unfused && t.mrr_fused ? fmt("%.17g", std::abs(*t.mrr_unfused - *t.mrr_fused)) : "";
      out << r.dataset << ',' << r.model << ',' << t.task << ',' << t.mrr_queries << ',' << num(t.mrr_unfused) << ','
          << num(t.mrr_fused) << ',' << diff << '\n';
    }
  }
  auto out = open_out(dir / "report.md");
  out << report_markdown(r);
  if (!out) throw IOError("failed writing reports to " + dir.string());
}

BenchReport read_report(const std::filesystem::path& dir) {
  std::ifstream in(dir / "bench.csv");
  if (!in) throw IOError("cannot read " + (dir / "bench.csv").string());
  BenchReport r;
  std::string line;
  if (!std::getline(in, line) || line != kBenchCsvHeader) throw ParseError((dir / "bench.csv").string() + ": unexpected header");
  std::map<std::string, size_t> task_index;
  std::map<std::tuple<std::string, int64_t, ExecMode>, int64_t> medians;
  for (int lineno = 2; std::getline(in, line); ++lineno) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 10) throw ParseError((dir / "bench.csv").string() + ":" + std::to_string(lineno) + ": expected 10 fields");
    BenchRow row;
    try {
      row = {f[0], f[1], f[2], exec_mode_from_string(f[3]), std::stoll(f[4]), std::stoll(f[5]), std::stoll(f[6]),
             std::stoll(f[7]), std::stoll(f[8]), std::stod(f[9])};
    } catch (const std::logic_error&) {
      throw ParseError((dir / "bench.csv").string() + ":" + std::to_string(lineno) + ": malformed number");
    }
    r.dataset = row.dataset;
    r.model = row.model;
    if (!task_index.count(row.task)) {
      task_index[row.task] = r.tasks.size();
      TaskSummary t;
      t.task = row.task;
      r.tasks.push_back(std::move(t));
    }
    if (std::find(r.batches.begin(), r.batches.end(), row.batch) == r.batches.end()) r.batches.push_back(row.batch);
    medians[{row.task, row.batch, row.mode}] = row.wall_ns_median;
    r.rows.push_back(row);
  }
  for (auto& t : r.tasks) {
    for (int64_t b : r.batches) {
      auto u = medians.find({t.task, b, ExecMode::kUnfused});
      auto fz = medians.find({t.task, b, ExecMode::kFused});
      t.speedup.push_back(u != medians.end() && fz != medians.end()
                              ? static_cast<double>(u->second) / static_cast<double>(std::max<int64_t>(1, fz->second))
                              : 0.0);
    }
  }
  std::ifstream mrr_in(dir / "mrr.csv");
  if (mrr_in && std::getline(mrr_in, line)) {
    while (std::getline(mrr_in, line)) {
      const auto f = split_csv(line);
      if (f.size() != 7 || !task_index.count(f[2])) continue;
      TaskSummary& t = r.tasks[task_index[f[2]]];
      t.mrr_queries = std::stoll(f[3]);
      if (!f[4].empty()) t.mrr_unfused = std::stod(f[4]);
      if (!f[5].empty()) t.mrr_fused = std::stod(f[5]);
    }
  }
  finish_summary(r);
  return r;
}

}  // namespace kgc
