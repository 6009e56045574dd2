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

#include <cmath>
#include <random>

#include "kgc/beta_model.h"
#include "kgc/compiler.h"
#include "kgc/engine.h"
#include "kgc/error.h"

using namespace kgc;

namespace {

Tensor<double> random_tensor(Shape s, std::mt19937_64& rng, double lo = -1, double hi = 1) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor<double> t(s);
  for (int64_t i = 0; i < t.size(); ++i) t[i] = u(rng);
  return t;
}

double max_rel(const Tensor<double>& a, const std::vector<long double>& ref) {
  REQUIRE(a.size() == static_cast<int64_t>(ref.size()));
  double worst = 0;
  for (int64_t i = 0; i < a.size(); ++i) {
    const long double d = std::fabs(a[i] - ref[i]) / std::max(1e-300L, std::fabs(ref[i]));
    worst = std::max(worst, static_cast<double>(d));
  }
  return worst;
}

struct Compiled {
  KnowledgeGraph kg = synthetic_graph({});
  ModelParams params = init_model(kg, 32, 64, 42);
  TemplateLibrary lib = templates(params);
};

}  // namespace

TEST_CASE("matmul against a long double reference") {
  std::mt19937_64 rng(1);
  for (auto [k, n] : {std::pair<int64_t, int64_t>{3, 5}, {64, 64}, {64, 33}, {17, 96}}) {
    auto x = random_tensor({7, k}, rng);
    auto w = random_tensor({k, n}, rng);
    std::vector<Tensor<double>> in{x, w};
    auto y = run_kernel<double>(OpKind::kMatMul, in);
    std::vector<long double> ref(7 * n, 0);
    for (int r = 0; r < 7; ++r)
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < k; ++i) ref[r * n + j] += static_cast<long double>(x[r * k + i]) * w[i * n + j];
    CHECK(max_rel(y, ref) < 1e-11);
  }
}

TEST_CASE("relation-selected matmul and bias") {
  std::mt19937_64 rng(2);
  auto x = random_tensor({3, 4}, rng);
  auto w = random_tensor({5, 4, 2}, rng);
  auto b = random_tensor({5, 2}, rng);
  std::vector<int32_t> sel{4, 0, 4};
  OpAttrs attrs;
  attrs.edge = 0;
  std::vector<Tensor<double>> in{x, w};
  auto y = run_kernel<double>(OpKind::kMatMul, in, attrs, sel);
  std::vector<Tensor<double>> in2{y, b};
  auto z = run_kernel<double>(OpKind::kAdd, in2, attrs, sel);
  for (int r = 0; r < 3; ++r) {
    for (int j = 0; j < 2; ++j) {
      long double acc = 0;
      for (int i = 0; i < 4; ++i) acc += static_cast<long double>(x[r * 4 + i]) * w[sel[r] * 8 + i * 2 + j];
      CHECK(z[r * 2 + j] == doctest::Approx(static_cast<double>(acc + b[sel[r] * 2 + j])).epsilon(1e-13));
    }
  }
  std::vector<int32_t> bad{0, 9, 0};
  CHECK_THROWS_AS(run_kernel<double>(OpKind::kMatMul, in, attrs, bad), BindingError);
  std::vector<int32_t> short_sel{0};
  CHECK_THROWS_AS(run_kernel<double>(OpKind::kMatMul, in, attrs, short_sel), BindingError);
}

TEST_CASE("elementwise kernels") {
  Tensor<double> x({2, 3}, {-1.0, 0.0, 2.0, 0.5, -0.25, 4.0});
  std::vector<Tensor<double>> in{x};
  CHECK(run_kernel<double>(OpKind::kRelu, in).values() == std::vector<double>{0, 0, 2, 0.5, 0, 4});
  OpAttrs clamp;
  clamp.scalar = 0.1;
  CHECK(run_kernel<double>(OpKind::kClampMin, in, clamp).values() == std::vector<double>{0.1, 0.1, 2, 0.5, 0.1, 4});
  Tensor<double> pos({1, 2}, {4.0, 0.5});
  std::vector<Tensor<double>> pin{pos};
  CHECK(run_kernel<double>(OpKind::kReciprocal, pin).values() == std::vector<double>{0.25, 2.0});
}

TEST_CASE("softmax") {
  Tensor<double> flat({2, 4}, {0, 0, 0, 0, 1, 1, 1, 1});
  std::vector<Tensor<double>> in{flat};
  const auto uniform = run_kernel<double>(OpKind::kSoftmax, in);
  for (double v : uniform.values()) CHECK(v == doctest::Approx(0.25));

  Tensor<double> x({1, 2}, {0.0, std::log(3.0)});
  std::vector<Tensor<double>> one{x};
  auto s = run_kernel<double>(OpKind::kSoftmax, one);
  CHECK(s[0] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(s[1] == doctest::Approx(0.75).epsilon(1e-15));

  // Across branches: [B, features, branches], then a weighted sum.
  Tensor<double> a({1, 2}, {0.0, 5.0});
  Tensor<double> b({1, 2}, {std::log(3.0), 5.0});
  std::vector<Tensor<double>> br{a, b};
  auto w = run_kernel<double>(OpKind::kSoftmax, br);
  CHECK(w.shape() == Shape{1, 2, 2});
  CHECK(w[0] == doctest::Approx(0.25));
  CHECK(w[1] == doctest::Approx(0.75));
  CHECK(w[2] == doctest::Approx(0.5));
  Tensor<double> ea({1, 2}, {4.0, 2.0});
  Tensor<double> eb({1, 2}, {8.0, 6.0});
  std::vector<Tensor<double>> ws{w, ea, eb};
  auto y = run_kernel<double>(OpKind::kWeightedSum, ws);
  CHECK(y[0] == doctest::Approx(7.0));
  CHECK(y[1] == doctest::Approx(4.0));

  std::vector<Tensor<double>> st{ea, eb};
  auto z = run_kernel<double>(OpKind::kStack, st);
  CHECK(z.shape() == Shape{1, 2, 2});
  CHECK(z.values() == std::vector<double>{4, 2, 8, 6});
}

TEST_CASE("shape mismatches are rejected") {
  Tensor<double> x({2, 3});
  Tensor<double> w({4, 2});
  std::vector<Tensor<double>> in{x, w};
  CHECK_THROWS_AS(run_kernel<double>(OpKind::kMatMul, in), ShapeError);
  CHECK_THROWS_AS(shape_elements({2, -3}), ShapeError);
}

TEST_CASE_FIXTURE(Compiled, "both modes agree bit for bit and report counters") {
  for (auto tag : {"2p", "pi", "up", "3in"}) {
    CAPTURE(tag);
    auto qs = generate_queries(kg, tag, 8, 3);
    CompiledQuery c = compile_query(qs[0], lib);
    auto bind = bind_batch<double>(params, qs);
    auto u = execute<double>(c.modular.graph, bind, ExecMode::kUnfused);
    auto f = execute<double>(c.fused, bind, ExecMode::kFused);
    CHECK(u.answer() == f.answer());
    CHECK(u.stats.kernel_launches == static_cast<int64_t>(c.modular.graph.ops().size()));
    CHECK(f.stats.kernel_launches == 1);
    CHECK(u.stats.interm_bytes > 0);
    CHECK(f.stats.interm_bytes == 0);
    CHECK(f.stats.peak_bytes <= u.stats.peak_bytes);
    CHECK(u.stats.nonfinite == 0);

    ExecOptions tiled;
    tiled.tile_rows = 3;
    tiled.threads = 2;
    CHECK(execute<double>(c.fused, bind, ExecMode::kFused, tiled).answer() == f.answer());
    CHECK(execute<double>(c.modular.graph, bind, ExecMode::kUnfused, tiled).answer() == u.answer());
  }
}

TEST_CASE_FIXTURE(Compiled, "single precision runs too") {
  auto qs = generate_queries(kg, "2in", 4, 3);
  CompiledQuery c = compile_query(qs[0], lib);
  auto bind = bind_batch<float>(params, qs);
  auto u = execute<float>(c.modular.graph, bind, ExecMode::kUnfused);
  auto f = execute<float>(c.fused, bind, ExecMode::kFused);
  CHECK(u.answer() == f.answer());
  CHECK(u.stats.interm_bytes * 2 == execute<double>(c.modular.graph, bind_batch<double>(params, qs), ExecMode::kUnfused).stats.interm_bytes);
}

TEST_CASE_FIXTURE(Compiled, "execution errors") {
  auto qs = generate_queries(kg, "1p", 2, 3);
  CompiledQuery c = compile_query(qs[0], lib);
  auto bind = bind_batch<double>(params, qs);
  CHECK_THROWS_AS(execute<double>(c.fused, bind, ExecMode::kUnfused), UsageError);
  CHECK_THROWS_AS(execute<double>(c.modular.graph, bind, ExecMode::kFused), UsageError);
  auto missing = bind;
  missing.values.erase("anchor0");
  CHECK_THROWS_AS(execute<double>(c.fused, missing, ExecMode::kFused), BindingError);
  auto bad = bind;
  bad.selectors.begin()->second[0] = 10000;
  CHECK_THROWS_AS(execute<double>(c.modular.graph, bad, ExecMode::kUnfused), BindingError);
  CHECK_THROWS_AS(execute<double>(c.fused, bad, ExecMode::kFused), BindingError);
  CHECK(exec_mode_from_string("fused") == ExecMode::kFused);
  CHECK_THROWS_AS(exec_mode_from_string("turbo"), UsageError);
}
