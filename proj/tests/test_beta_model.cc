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

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <filesystem>
#include <random>

#include "kgc/beta_model.h"
#include "kgc/error.h"

using namespace kgc;

namespace {

// The integrands take the distance to the nearer endpoint so that 1 - x keeps full precision.
double quad_log_beta(double a, double b) {
  boost::math::quadrature::tanh_sinh<double> q;
  return std::log(q.integrate([&](double x, double xc) {
    return std::pow(x, a - 1) * std::pow(x > 0.5 ? xc : 1 - x, b - 1);
  }, 0.0, 1.0));
}

double quad_kl(double a1, double b1, double a2, double b2) {
  boost::math::quadrature::tanh_sinh<double> q;
  const double lb1 = std::lgamma(a1) + std::lgamma(b1) - std::lgamma(a1 + b1);
  const double lb2 = std::lgamma(a2) + std::lgamma(b2) - std::lgamma(a2 + b2);
  return q.integrate([&](double x, double xc) {
    const double lx = std::log(x), l1x = std::log(x > 0.5 ? xc : 1 - x);
    const double lp = (a1 - 1) * lx + (b1 - 1) * l1x - lb1;
    const double lq = (a2 - 1) * lx + (b2 - 1) * l1x - lb2;
    return std::exp(lp) * (lp - lq);
  }, 0.0, 1.0);
}

}  // namespace

TEST_CASE("closed-form values") {
  CHECK(log_beta(2, 2) == doctest::Approx(std::log(1.0 / 6.0)).epsilon(1e-15));
  CHECK(log_beta(1, 1) == doctest::Approx(0.0));
  CHECK(kl_beta(1, 1, 2, 2) == doctest::Approx(2.0 - std::log(6.0)).epsilon(1e-14));
  CHECK(kl_beta(3, 0.5, 3, 0.5) == 0.0);
  CHECK(digamma(1.0) == doctest::Approx(-0.57721566490153286).epsilon(1e-15));
  CHECK_THROWS_AS(log_beta(0, 1), DomainError);
  CHECK_THROWS_AS(log_beta(1, std::nan("")), DomainError);
}

TEST_CASE("special functions against quadrature") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.1, 10.0);
  for (int i = 0; i < 20; ++i) {
    const double a1 = u(rng), b1 = u(rng), a2 = u(rng), b2 = u(rng);
    CAPTURE(a1);
    CAPTURE(b1);
    CHECK(std::fabs(log_beta(a1, b1) - quad_log_beta(a1, b1)) < 1e-8);
    CHECK(std::fabs(kl_beta(a1, b1, a2, b2) - quad_kl(a1, b1, a2, b2)) < 1e-8);
  }
}

TEST_CASE("embedding KL sums over dimensions") {
  BetaEmbedding p{{1, 2}, {1, 3}};
  BetaEmbedding q{{2, 2}, {2, 3}};
  CHECK(kl_beta(p, q) == doctest::Approx(kl_beta(1, 1, 2, 2)));
  CHECK(kl_beta(p, p) == 0.0);
  CHECK_THROWS_AS(kl_beta(p, BetaEmbedding{{1}, {1}}), ShapeError);
}

TEST_CASE("model initialisation") {
  KnowledgeGraph kg = synthetic_graph({});
  ModelParams p = init_model(kg, 3, 5, 9);
  CHECK(p.entity.shape() == Shape{100, 6});
  CHECK(p.w1.shape() == Shape{20, 6, 5});
  CHECK(p.w3.shape() == Shape{20, 5, 6});
  CHECK(p.wa2.shape() == Shape{5, 6});
  for (double v : p.entity.values()) CHECK((v >= 0.05 && v <= 1.0));
  const double bound = 1.0 / std::sqrt(6.0);
  for (double v : p.w1.values()) CHECK(std::fabs(v) <= bound);
  CHECK(init_model(kg, 3, 5, 9) == p);
  CHECK_FALSE(init_model(kg, 3, 5, 10) == p);
  CHECK_THROWS_AS(init_model(kg, 0, 5, 1), DomainError);
}

TEST_CASE("scores, ranks and mrr") {
  KnowledgeGraph kg = synthetic_graph({});
  ModelParams p = init_model(kg, 4, 4, 3);
  Scorer scorer(p);
  std::vector<BetaEmbedding> clauses{entity_embedding(p, 17), entity_embedding(p, 42)};
  auto s = scorer.scores(clauses);
  REQUIRE(s.size() == 100);
  for (EntityId e : {0, 17, 42, 99}) {
    const double want = std::min(kl_beta(entity_embedding(p, e), clauses[0]), kl_beta(entity_embedding(p, e), clauses[1]));
    CHECK(s[e] == doctest::Approx(want).epsilon(1e-12));
  }
  auto rank = scorer.rank(clauses);
  CHECK(rank[0] == 17);
  CHECK(rank[1] == 42);
  CHECK(score_and_rank(clauses, p) == rank);

  std::vector<EntityId> ranking{5, 3, 9, 1};
  std::vector<EntityId> answers{9, 1};
  CHECK(best_rank(ranking, answers) == 3);
  CHECK_THROWS_AS(best_rank(ranking, std::vector<EntityId>{}), DomainError);
  CHECK(mrr({ranking, ranking}, {{5}, {9}}) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("ties rank by entity index") {
  KnowledgeGraph kg(Vocabulary({"a", "b", "c"}), Vocabulary({"r"}), {{0, 0, 1}});
  ModelParams p = init_model(kg, 2, 2, 1);
  for (int64_t i = 0; i < p.entity.size(); ++i) p.entity[i] = 0.5;
  CHECK(Scorer(p).rank({entity_embedding(p, 2)}) == std::vector<EntityId>{0, 1, 2});
}

TEST_CASE("batch binding and clause extraction") {
  KnowledgeGraph kg = synthetic_graph({});
  ModelParams p = init_model(kg, 2, 3, 1);
  auto qs = generate_queries(kg, "pi", 3, 1);
  auto b = bind_batch<double>(p, qs);
  REQUIRE(b.values.count("anchor1"));
  const auto& a1 = b.values.at("anchor1");
  CHECK(a1.shape() == Shape{3, 4});
  CHECK(std::equal(a1.row(2), a1.row(2) + 4, p.entity.row(qs[2].anchors[1])));
  CHECK(b.values.count("project.w1"));
  CHECK(b.selectors.size() == 3);
  CHECK(b.selectors.at(2) == std::vector<int32_t>{qs[0].rels[2], qs[1].rels[2], qs[2].rels[2]});

  Tensor<double> stacked({1, 2, 4}, {1, 2, 3, 4, 5, 6, 7, 8});
  auto c = clause_embeddings(stacked, 0);
  REQUIRE(c.size() == 2);
  CHECK(c[1].alpha == std::vector<double>{5, 6});
  CHECK(c[1].beta == std::vector<double>{7, 8});
}

TEST_CASE("model files round trip") {
  KnowledgeGraph kg = synthetic_graph({});
  ModelParams p = init_model(kg, 3, 4, 8);
  auto path = std::filesystem::temp_directory_path() / "kgc_model_roundtrip.bin";
  save_model(p, path);
  CHECK(load_model(path) == p);
  CHECK_THROWS_AS(load_model(path.string() + ".missing"), IOError);
}
