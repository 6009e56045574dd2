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
 * \file kgc/kg_store.h
 * \brief Immutable knowledge graph: vocabularies, triple set and per-relation adjacency.
 */
#ifndef KGC_KG_STORE_H_
#define KGC_KG_STORE_H_

#include <compare>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace kgc {

using EntityId = int32_t;
using RelationId = int32_t;

struct Triple {
  EntityId head;
  RelationId rel;
  EntityId tail;

  auto operator<=>(const Triple&) const = default;
};

/*! \brief Injective name <-> dense index mapping. */
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> names);

  size_t size() const { return names_.size(); }
  const std::string& name(int32_t index) const;
  /*! \return the index of `name`, or -1 when absent. */
  int32_t find(const std::string& name) const;
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, int32_t> index_;
};

class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;
  /*!
   * \brief Build from resolved triples. Duplicates collapse; order does not matter.
   * \throws BoundsError if a triple index is outside its vocabulary.
   */
  KnowledgeGraph(Vocabulary entities, Vocabulary relations, std::vector<Triple> triples);

  size_t num_entities() const { return entities_.size(); }
  size_t num_relations() const { return relations_.size(); }
  const Vocabulary& entities() const { return entities_; }
  const Vocabulary& relations() const { return relations_; }
  /*! \brief Sorted, duplicate-free triple list. */
  std::span<const Triple> triples() const { return triples_; }

  /*! \brief Sorted tails t with (source, rel, t) in the triple set. */
  std::span<const EntityId> neighbors(EntityId source, RelationId rel) const;
  /*! \brief All triples whose tail is `target`, sorted. */
  std::span<const Triple> incoming(EntityId target) const;
  bool contains(const Triple& t) const;

 private:
  void check_entity(EntityId e) const;
  void check_relation(RelationId r) const;

  Vocabulary entities_;
  Vocabulary relations_;
  std::vector<Triple> triples_;
  // CSR per relation: offsets_[r][h]..offsets_[r][h+1] into tails_[r].
  std::vector<std::vector<uint32_t>> offsets_;
  std::vector<std::vector<EntityId>> tails_;
  std::vector<Triple> by_tail_;
  std::vector<uint32_t> by_tail_offsets_;
};

/*!
 * \brief Load a graph from `head<TAB>relation<TAB>tail` triples and `index<TAB>name` vocabularies.
 *
 * Errors: ParseError (with line number) for malformed lines, ResolutionError for names missing
 * from a vocabulary, IntegrityError for duplicate or non-dense vocab indices.
 */
KnowledgeGraph load_triples(const std::filesystem::path& triples_path,
                            const std::filesystem::path& entity_vocab_path,
                            const std::filesystem::path& relation_vocab_path);

/*! \brief Write entities.dict, relations.dict and train.txt into `dir`. */
void save_dataset(const KnowledgeGraph& g, const std::filesystem::path& dir);

/*! \brief Load a dataset directory: train.txt (or triples.txt) plus the two vocabularies. */
KnowledgeGraph load_dataset(const std::filesystem::path& dir);

struct SyntheticSpec {
  int32_t entities = 100;
  int32_t relations = 20;
  int32_t triples = 2000;
  uint64_t seed = 42;
};

/*! \brief Uniform random graph with exactly min(triples, E*R*E) distinct triples. */
KnowledgeGraph synthetic_graph(const SyntheticSpec& spec);

}  // namespace kgc

#endif  // KGC_KG_STORE_H_
