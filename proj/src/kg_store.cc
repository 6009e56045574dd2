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
 * \file kg_store.cc
 */
#include "kgc/kg_store.h"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "kgc/error.h"
#include "kgc/random.h"

namespace kgc {

Vocabulary::Vocabulary(std::vector<std::string> names) : names_(std::move(names)) {
  index_.reserve(names_.size());
  for (size_t i = 0; i < names_.size(); ++i) {
    if (!index_.emplace(names_[i], static_cast<int32_t>(i)).second) {
      throw IntegrityError("duplicate vocabulary name '" + names_[i] + "'");
    }
  }
}

const std::string& Vocabulary::name(int32_t index) const {
  if (index < 0 || static_cast<size_t>(index) >= names_.size()) {
    throw BoundsError("vocabulary index " + std::to_string(index) + " out of range [0, " +
                      std::to_string(names_.size()) + ")");
  }
  return names_[index];
}

int32_t Vocabulary::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? -1 : it->second;
}

KnowledgeGraph::KnowledgeGraph(Vocabulary entities, Vocabulary relations,
                               std::vector<Triple> triples)
    : entities_(std::move(entities)), relations_(std::move(relations)), triples_(std::move(triples)) {
  const auto n_ent = static_cast<int64_t>(entities_.size());
  const auto n_rel = static_cast<int64_t>(relations_.size());
  for (const Triple& t : triples_) {
    if (t.head < 0 || t.head >= n_ent || t.tail < 0 || t.tail >= n_ent || t.rel < 0 ||
        t.rel >= n_rel) {
      throw BoundsError("triple (" + std::to_string(t.head) + ", " + std::to_string(t.rel) + ", " +
                        std::to_string(t.tail) + ") outside vocabularies");
    }
  }
  std::sort(triples_.begin(), triples_.end());
  triples_.erase(std::unique(triples_.begin(), triples_.end()), triples_.end());

  // triples_ is sorted by (head, rel, tail), so per-relation tails come out sorted.
  offsets_.assign(n_rel, std::vector<uint32_t>(n_ent + 1, 0));
  tails_.assign(n_rel, {});
  for (const Triple& t : triples_) ++offsets_[t.rel][t.head + 1];
  for (auto& off : offsets_) {
    for (int64_t h = 0; h < n_ent; ++h) off[h + 1] += off[h];
  }
  for (int64_t r = 0; r < n_rel; ++r) tails_[r].resize(offsets_[r][n_ent]);
  std::vector<std::vector<uint32_t>> cursor = offsets_;
  for (const Triple& t : triples_) tails_[t.rel][cursor[t.rel][t.head]++] = t.tail;

  by_tail_ = triples_;
  std::sort(by_tail_.begin(), by_tail_.end(), [](const Triple& a, const Triple& b) {
    return std::tie(a.tail, a.head, a.rel) < std::tie(b.tail, b.head, b.rel);
  });
  by_tail_offsets_.assign(n_ent + 1, 0);
  for (const Triple& t : by_tail_) ++by_tail_offsets_[t.tail + 1];
  for (int64_t e = 0; e < n_ent; ++e) by_tail_offsets_[e + 1] += by_tail_offsets_[e];
}

void KnowledgeGraph::check_entity(EntityId e) const {
  if (e < 0 || static_cast<size_t>(e) >= entities_.size()) {
    throw BoundsError("entity index " + std::to_string(e) + " out of range [0, " +
                      std::to_string(entities_.size()) + ")");
  }
}

void KnowledgeGraph::check_relation(RelationId r) const {
  if (r < 0 || static_cast<size_t>(r) >= relations_.size()) {
    throw BoundsError("relation index " + std::to_string(r) + " out of range [0, " +
                      std::to_string(relations_.size()) + ")");
  }
}

std::span<const EntityId> KnowledgeGraph::neighbors(EntityId source, RelationId rel) const {
  check_entity(source);
  check_relation(rel);
  const auto& off = offsets_[rel];
  return std::span<const EntityId>(tails_[rel]).subspan(off[source], off[source + 1] - off[source]);
}

std::span<const Triple> KnowledgeGraph::incoming(EntityId target) const {
  check_entity(target);
  return std::span<const Triple>(by_tail_).subspan(
      by_tail_offsets_[target], by_tail_offsets_[target + 1] - by_tail_offsets_[target]);
}

bool KnowledgeGraph::contains(const Triple& t) const {
  return std::binary_search(triples_.begin(), triples_.end(), t);
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  size_t start = 0;
  while (true) {
    size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IOError("cannot open " + path.string());
  return in;
}

// Reads "index<TAB>name" lines; blank lines are skipped.
Vocabulary read_vocab(const std::filesystem::path& path) {
  std::ifstream in = open_or_throw(path);
  std::vector<std::pair<int64_t, std::string>> entries;
  std::string line;
  for (size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_tabs(line);
    if (fields.size() != 2 || fields[0].empty()) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) +
                       ": expected 'index<TAB>name'");
    }
    int64_t index = 0;
    size_t used = 0;
    try {
      index = std::stoll(fields[0], &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != fields[0].size() || index < 0) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": bad index '" +
                       fields[0] + "'");
    }
    entries.emplace_back(index, std::move(fields[1]));
  }
  std::sort(entries.begin(), entries.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::string> names;
  names.reserve(entries.size());
  for (size_t i = 0; i < entries.size(); ++i) {
    if (i > 0 && entries[i].first == entries[i - 1].first) {
      throw IntegrityError(path.string() + ": duplicate index " + std::to_string(entries[i].first));
    }
    if (entries[i].first != static_cast<int64_t>(i)) {
      throw IntegrityError(path.string() + ": indices are not dense, missing " + std::to_string(i));
    }
    names.push_back(std::move(entries[i].second));
  }
  return Vocabulary(std::move(names));
}

}  // namespace

KnowledgeGraph load_triples(const std::filesystem::path& triples_path,
                            const std::filesystem::path& entity_vocab_path,
                            const std::filesystem::path& relation_vocab_path) {
  Vocabulary entities = read_vocab(entity_vocab_path);
  Vocabulary relations = read_vocab(relation_vocab_path);
  std::ifstream in = open_or_throw(triples_path);
  std::vector<Triple> triples;
  std::string line;
  for (size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_tabs(line);
    if (fields.size() != 3) {
      throw ParseError(triples_path.string() + ":" + std::to_string(lineno) +
                       ": expected 'head<TAB>relation<TAB>tail'");
    }
    auto resolve = [&](const Vocabulary& vocab, const std::string& token, const char* what) {
      int32_t idx = vocab.find(token);
      if (idx < 0) {
        throw ResolutionError(triples_path.string() + ":" + std::to_string(lineno) + ": unknown " +
                              what + " '" + token + "'");
      }
      return idx;
    };
    triples.push_back({resolve(entities, fields[0], "entity"),
                       resolve(relations, fields[1], "relation"),
                       resolve(entities, fields[2], "entity")});
  }
  return KnowledgeGraph(std::move(entities), std::move(relations), std::move(triples));
}

void save_dataset(const KnowledgeGraph& g, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  auto open = [&](const char* name) {
    std::ofstream out(dir / name);
    if (!out) throw IOError("cannot write " + (dir / name).string());
    return out;
  };
  {
    auto out = open("entities.dict");
    for (size_t i = 0; i < g.num_entities(); ++i) out << i << '\t' << g.entities().names()[i] << '\n';
  }
  {
    auto out = open("relations.dict");
    for (size_t i = 0; i < g.num_relations(); ++i) {
      out << i << '\t' << g.relations().names()[i] << '\n';
    }
  }
  auto out = open("train.txt");
  for (const Triple& t : g.triples()) {
    out << g.entities().name(t.head) << '\t' << g.relations().name(t.rel) << '\t'
        << g.entities().name(t.tail) << '\n';
  }
}

KnowledgeGraph load_dataset(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IOError("dataset directory " + dir.string() + " does not exist");
  std::filesystem::path triples = dir / "train.txt";
  if (!std::filesystem::exists(triples)) triples = dir / "triples.txt";
  for (const auto& f : {triples, dir / "entities.dict", dir / "relations.dict"}) {
    if (!std::filesystem::exists(f)) throw IOError("dataset file " + f.string() + " is missing");
  }
  return load_triples(triples, dir / "entities.dict", dir / "relations.dict");
}

KnowledgeGraph synthetic_graph(const SyntheticSpec& spec) {
  if (spec.entities <= 0 || spec.relations <= 0 || spec.triples < 0) {
    throw UsageError("synthetic graph needs positive entity and relation counts");
  }
  std::vector<std::string> ent, rel;
  for (int32_t i = 0; i < spec.entities; ++i) ent.push_back("e" + std::to_string(i));
  for (int32_t i = 0; i < spec.relations; ++i) rel.push_back("r" + std::to_string(i));
  const uint64_t capacity =
      uint64_t(spec.entities) * uint64_t(spec.relations) * uint64_t(spec.entities);
  const uint64_t target = std::min<uint64_t>(spec.triples, capacity);
  Rng rng(spec.seed);
  std::set<Triple> seen;
  std::vector<Triple> triples;
  while (triples.size() < target) {
    Triple t{static_cast<EntityId>(uniform_index(rng, spec.entities)),
             static_cast<RelationId>(uniform_index(rng, spec.relations)),
             static_cast<EntityId>(uniform_index(rng, spec.entities))};
    if (seen.insert(t).second) triples.push_back(t);
  }
  return KnowledgeGraph(Vocabulary(std::move(ent)), Vocabulary(std::move(rel)), std::move(triples));
}

}  // namespace kgc
