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
 * \file kgc/bench.h
 * \brief Dual-mode benchmark over query shapes and batch sizes, and its CSV / markdown reports.
 */
#ifndef KGC_BENCH_H_
#define KGC_BENCH_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "kgc/engine.h"
#include "kgc/kg_store.h"

namespace kgc {

enum class DType { kF32, kF64 };
const char* to_string(DType t);
DType dtype_from_string(std::string_view s);

struct BenchConfig {
  /*! \brief Dataset directory; the synthetic graph is used when unset. */
  std::optional<std::filesystem::path> dataset;
  SyntheticSpec synthetic;
  std::vector<std::string> tasks;
  std::vector<int64_t> batches{1, 16, 256, 1024};
  int64_t d = 32;
  int64_t h = 64;
  int rounds = 5;
  std::vector<ExecMode> modes{ExecMode::kUnfused, ExecMode::kFused};
  /*! \brief Seeds query generation and model initialisation. */
  uint64_t seed = 42;
  DType dtype = DType::kF64;
  int threads = 1;

  /*! \throws UsageError naming the first invalid field. */
  void validate() const;
};

/*! \brief One (task, mode, batch) measurement. */
struct BenchRow {
  std::string dataset;
  std::string model;
  std::string task;
  ExecMode mode;
  int64_t batch;
  int64_t launches;
  int64_t interm_bytes;
  int64_t peak_bytes;
  int64_t wall_ns_median;
  double wall_ns_mean;
};

struct TaskSummary {
  std::string task;
  /*! \brief Unfused median over fused median, per batch size (0 when a mode was not run). */
  std::vector<double> speedup;
  std::optional<double> mrr_unfused;
  std::optional<double> mrr_fused;
  int64_t mrr_queries = 0;
  /*! \brief Largest relative difference between the two modes' answers. */
  double max_rel_error = 0.0;
  bool parity_ok = true;
};

struct BenchReport {
  std::string dataset;
  std::string model = "beta";
  std::vector<int64_t> batches;
  std::vector<BenchRow> rows;
  std::vector<TaskSummary> tasks;
  /*! \brief Geometric mean of per-task speedups, per batch size. */
  std::vector<double> avg_speedup;
  std::vector<std::string> errors;

  bool parity_ok() const;
};

/*!
 * \brief Generate queries, compile both modes, execute `rounds` times after a warm-up and collect
 *  counters, median wall time and MRR for every task and batch size.
 *
 * Shapes that cannot be generated on the dataset are reported in `errors` and skipped.
 */
BenchReport run_benchmark(const BenchConfig& cfg);

/*! \brief Write bench.csv, report.md, memory.csv and mrr.csv. \throws IOError. */
void emit_report(const BenchReport& r, const std::filesystem::path& dir);

/*! \brief Rebuild a report (without parity details) from bench.csv and mrr.csv in `dir`. */
BenchReport read_report(const std::filesystem::path& dir);

/*! \brief The markdown summary written to report.md. */
std::string report_markdown(const BenchReport& r);

inline constexpr const char* kBenchCsvHeader =
    "dataset,model,task,mode,batch,launches,interm_bytes,peak_bytes,wall_ns_median,wall_ns_mean";

}  // namespace kgc

#endif  // KGC_BENCH_H_
