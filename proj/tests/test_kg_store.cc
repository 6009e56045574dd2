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
#include <set>

#include "kgc/error.h"
#include "kgc/kg_store.h"

namespace fs = std::filesystem;
using namespace kgc;

namespace {

fs::path temp_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("kgc_kg_store_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

KnowledgeGraph tiny() {
  Vocabulary ents({"a", "b", "c"});
  Vocabulary rels({"r", "s"});
  return KnowledgeGraph(ents, rels, {{0, 0, 1}, {0, 0, 2}, {1, 1, 2}, {0, 0, 1}});
}

}  // namespace

TEST_CASE("vocabulary maps names both ways") {
  Vocabulary v({"x", "y"});
  CHECK(v.size() == 2);
  CHECK(v.find("y") == 1);
  CHECK(v.find("z") == -1);
  CHECK(v.name(0) == "x");
}

TEST_CASE("duplicate triples collapse and adjacency is sorted") {
  KnowledgeGraph g = tiny();
  CHECK(g.triples().size() == 3);
  auto n = g.neighbors(0, 0);
  CHECK(std::vector<EntityId>(n.begin(), n.end()) == std::vector<EntityId>{1, 2});
  CHECK(g.neighbors(2, 1).empty());
  CHECK(g.incoming(2).size() == 2);
  CHECK(g.contains({1, 1, 2}));
  CHECK_FALSE(g.contains({1, 0, 2}));
}

TEST_CASE("out-of-range triples are rejected") {
  CHECK_THROWS_AS(KnowledgeGraph(Vocabulary({"a"}), Vocabulary({"r"}), {{0, 0, 3}}), BoundsError);
  CHECK_THROWS_AS(KnowledgeGraph(Vocabulary({"a"}), Vocabulary({"r"}), {{0, 2, 0}}), BoundsError);
}

TEST_CASE("dataset round trip") {
  KnowledgeGraph g = tiny();
  fs::path dir = temp_dir("roundtrip");
  save_dataset(g, dir);
  CHECK(fs::exists(dir / "train.txt"));
  KnowledgeGraph h = load_dataset(dir);
  CHECK(h.entities().names() == g.entities().names());
  CHECK(h.relations().names() == g.relations().names());
  CHECK(std::vector<Triple>(h.triples().begin(), h.triples().end()) ==
        std::vector<Triple>(g.triples().begin(), g.triples().end()));
}

TEST_CASE("loader errors") {
  fs::path dir = temp_dir("errors");
  write(dir / "e.dict", "0\ta\n1\tb\n");
  write(dir / "r.dict", "0\tr\n");
  SUBCASE("malformed line") {
    write(dir / "t.txt", "a\tr\n");
    CHECK_THROWS_AS(load_triples(dir / "t.txt", dir / "e.dict", dir / "r.dict"), ParseError);
  }
  SUBCASE("unknown name") {
    write(dir / "t.txt", "a\tr\tzz\n");
    CHECK_THROWS_AS(load_triples(dir / "t.txt", dir / "e.dict", dir / "r.dict"), ResolutionError);
  }
  SUBCASE("non-dense vocabulary") {
    write(dir / "bad.dict", "0\ta\n2\tb\n");
    write(dir / "t.txt", "a\tr\ta\n");
    CHECK_THROWS_AS(load_triples(dir / "t.txt", dir / "bad.dict", dir / "r.dict"), IntegrityError);
  }
  SUBCASE("missing dataset files") {
    CHECK_THROWS_AS(load_dataset(dir / "nope"), IOError);
  }
}

TEST_CASE("synthetic graph has the requested size and is seeded") {
  SyntheticSpec spec;
  KnowledgeGraph g = synthetic_graph(spec);
  CHECK(g.num_entities() == 100);
  CHECK(g.num_relations() == 20);
  CHECK(g.triples().size() == 2000);
  KnowledgeGraph h = synthetic_graph(spec);
  CHECK(std::equal(g.triples().begin(), g.triples().end(), h.triples().begin(), h.triples().end()));

  SyntheticSpec dense{3, 1, 100, 7};
  CHECK(synthetic_graph(dense).triples().size() == 9);
}
