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

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "kgc/bench.h"
#include "kgc/error.h"

namespace fs = std::filesystem;
using namespace kgc;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("kgc_bench_" + name);
  fs::remove_all(dir);
  return dir;
}

BenchConfig small() {
  BenchConfig cfg;
  cfg.tasks = {"1p", "2u"};
  cfg.batches = {1, 4};
  cfg.d = 4;
  cfg.h = 8;
  cfg.rounds = 2;
  return cfg;
}

}  // namespace

TEST_CASE("config validation") {
  BenchConfig cfg = small();
  CHECK_NOTHROW(cfg.validate());
  cfg.tasks = {"5p"};
  CHECK_THROWS_AS(cfg.validate(), StructureError);
  cfg = small();
  cfg.batches = {0};
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  cfg = small();
  cfg.rounds = 0;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  cfg = small();
  cfg.modes.clear();
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  CHECK(dtype_from_string("f32") == DType::kF32);
  CHECK_THROWS_AS(dtype_from_string("f16"), UsageError);
}

TEST_CASE("small benchmark") {
  BenchReport r = run_benchmark(small());
  CHECK(r.errors.empty());
  CHECK(r.parity_ok());
  CHECK(r.rows.size() == 2 * 2 * 2);
  REQUIRE(r.tasks.size() == 2);
  for (const auto& t : r.tasks) {
    CHECK(t.parity_ok);
    REQUIRE(t.mrr_unfused.has_value());
    CHECK(*t.mrr_unfused == *t.mrr_fused);
    CHECK(t.max_rel_error == 0.0);
    CHECK(t.speedup.size() == 2);
  }
  for (const auto& row : r.rows) {
    if (row.mode == ExecMode::kFused) {
      CHECK(row.launches == 1);
      CHECK(row.interm_bytes == 0);
    } else {
      CHECK(row.launches == (row.task == "1p" ? 10 : 21));
    }
  }
  CHECK(r.avg_speedup.size() == 2);

  fs::path dir = fresh("small");
  emit_report(r, dir);
  for (auto f : {"bench.csv", "memory.csv", "mrr.csv", "report.md"}) CHECK(fs::exists(dir / f));
  BenchReport back = read_report(dir);
  REQUIRE(back.rows.size() == r.rows.size());
  for (size_t i = 0; i < r.rows.size(); ++i) {
    CHECK(back.rows[i].task == r.rows[i].task);
    CHECK(back.rows[i].mode == r.rows[i].mode);
    CHECK(back.rows[i].launches == r.rows[i].launches);
    CHECK(back.rows[i].peak_bytes == r.rows[i].peak_bytes);
    CHECK(back.rows[i].wall_ns_median == r.rows[i].wall_ns_median);
  }
  CHECK(back.tasks.size() == 2);
  CHECK(back.tasks[0].mrr_unfused == r.tasks[0].mrr_unfused);
  CHECK(report_markdown(r).find("AVG_speedup") != std::string::npos);
}

TEST_CASE("single mode runs have no speedup") {
  BenchConfig cfg = small();
  cfg.tasks = {"1p"};
  cfg.modes = {ExecMode::kFused};
  BenchReport r = run_benchmark(cfg);
  CHECK(r.rows.size() == 2);
  CHECK(r.tasks[0].speedup == std::vector<double>{0.0, 0.0});
}

TEST_CASE("an empty task list writes headers only") {
  BenchConfig cfg = small();
  cfg.tasks.clear();
  BenchReport r = run_benchmark(cfg);
  CHECK(r.rows.empty());
  fs::path dir = fresh("empty");
  emit_report(r, dir);
  CHECK(slurp(dir / "bench.csv") == std::string(kBenchCsvHeader) + "\n");
  CHECK(slurp(dir / "memory.csv") == "dataset,model,task,batch,mode,interm_bytes,peak_bytes\n");
  CHECK(slurp(dir / "mrr.csv") == "dataset,model,task,queries,mrr_unfused,mrr_fused,abs_diff\n");
}

TEST_CASE("reading a malformed report fails") {
  fs::path dir = fresh("bad");
  fs::create_directories(dir);
  std::ofstream(dir / "bench.csv") << "nope\n";
  CHECK_THROWS_AS(read_report(dir), ParseError);
  CHECK_THROWS_AS(read_report(dir / "missing"), IOError);
}
