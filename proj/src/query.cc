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
 * \file query.cc
 */
#include "kgc/query.h"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>

#include "kgc/error.h"
#include "kgc/oracle.h"
#include "kgc/random.h"

namespace kgc {

int QueryStructure::num_anchors() const {
  return static_cast<int>(
      std::count_if(slots.begin(), slots.end(), [](const Slot& s) { return s.kind == SlotKind::kAnchor; }));
}

int QueryStructure::num_bound() const {
  return static_cast<int>(
      std::count_if(slots.begin(), slots.end(), [](const Slot& s) { return s.kind == SlotKind::kBound; }));
}

int QueryStructure::answer_slot() const {
  for (size_t i = 0; i < slots.size(); ++i) {
    if (slots[i].kind == SlotKind::kAnswer) return static_cast<int>(i);
  }
  throw StructureError("structure '" + tag + "' has no answer slot");
}

std::vector<int> QueryStructure::incoming(int slot) const {
  std::vector<int> in;
  for (size_t e = 0; e < edges.size(); ++e) {
    if (edges[e].dst == slot) in.push_back(static_cast<int>(e));
  }
  return in;
}

std::vector<int> QueryStructure::slot_order() const {
  const int n = static_cast<int>(slots.size());
  std::vector<int> indeg(n, 0), order;
  for (const auto& e : edges) ++indeg[e.dst];
  std::vector<char> done(n, 0);
  // Kahn's algorithm, smallest ready slot first.
  while (static_cast<int>(order.size()) < n) {
    int next = -1;
    for (int s = 0; s < n; ++s) {
      if (!done[s] && indeg[s] == 0) {
        next = s;
        break;
      }
    }
    if (next < 0) throw StructureError("structure '" + tag + "' has a cycle");
    done[next] = 1;
    order.push_back(next);
    for (const auto& e : edges) {
      if (e.src == next) --indeg[e.dst];
    }
  }
  return order;
}

namespace {

constexpr Slot A{SlotKind::kAnchor};
constexpr Slot B{SlotKind::kBound};
constexpr Slot Q{SlotKind::kAnswer};
constexpr Slot BAnd{SlotKind::kBound, JoinKind::kIntersection};
constexpr Slot BOr{SlotKind::kBound, JoinKind::kUnion};
constexpr Slot QAnd{SlotKind::kAnswer, JoinKind::kIntersection};
constexpr Slot QOr{SlotKind::kAnswer, JoinKind::kUnion};

std::string valid_tags() {
  std::string out;
  for (auto t : kAllTags) {
    if (!out.empty()) out += ", ";
    out += t;
  }
  return out;
}

const char* slot_kind_name(SlotKind k) {
  switch (k) {
    case SlotKind::kAnchor:
      return "anchor";
    case SlotKind::kBound:
      return "bound";
    case SlotKind::kAnswer:
      return "answer";
  }
  return "?";
}

const char* join_name(JoinKind k) {
  switch (k) {
    case JoinKind::kNone:
      return "none";
    case JoinKind::kIntersection:
      return "and";
    case JoinKind::kUnion:
      return "or";
  }
  return "?";
}

}  // namespace

QueryStructure structure_of(std::string_view tag) {
  // Edge layouts follow the conventions of the widely used public query benchmarks.
  using E = QueryEdge;
  QueryStructure s;
  s.tag = std::string(tag);
  if (tag == "1p") {
    s.slots = {A, Q};
    s.edges = {E{0, 1}};
  } else if (tag == "2p") {
    s.slots = {A, B, Q};
    s.edges = {E{0, 1}, E{1, 2}};
  } else if (tag == "3p") {
    s.slots = {A, B, B, Q};
    s.edges = {E{0, 1}, E{1, 2}, E{2, 3}};
  } else if (tag == "2i") {
    s.slots = {A, A, QAnd};
    s.edges = {E{0, 2}, E{1, 2}};
  } else if (tag == "3i") {
    s.slots = {A, A, A, QAnd};
    s.edges = {E{0, 3}, E{1, 3}, E{2, 3}};
  } else if (tag == "pi") {
    s.slots = {A, A, B, QAnd};
    s.edges = {E{0, 2}, E{2, 3}, E{1, 3}};
  } else if (tag == "ip") {
    s.slots = {A, A, BAnd, Q};
    s.edges = {E{0, 2}, E{1, 2}, E{2, 3}};
  } else if (tag == "2u") {
    s.slots = {A, A, QOr};
    s.edges = {E{0, 2}, E{1, 2}};
  } else if (tag == "up") {
    s.slots = {A, A, BOr, Q};
    s.edges = {E{0, 2}, E{1, 2}, E{2, 3}};
  } else if (tag == "2in") {
    s.slots = {A, A, QAnd};
    s.edges = {E{0, 2}, E{1, 2, true}};
  } else if (tag == "3in") {
    s.slots = {A, A, A, QAnd};
    s.edges = {E{0, 3}, E{1, 3}, E{2, 3, true}};
  } else if (tag == "inp") {
    s.slots = {A, A, BAnd, Q};
    s.edges = {E{0, 2}, E{1, 2, true}, E{2, 3}};
  } else if (tag == "pin") {
    s.slots = {A, A, B, QAnd};
    s.edges = {E{0, 2}, E{2, 3}, E{1, 3, true}};
  } else if (tag == "pni") {
    s.slots = {A, A, B, QAnd};
    s.edges = {E{0, 2}, E{2, 3, true}, E{1, 3}};
  } else {
    throw StructureError("unknown query shape '" + std::string(tag) + "'; valid tags: " +
                         valid_tags());
  }
  return s;
}

void validate_structure(const QueryStructure& s) {
  auto fail = [&](const std::string& msg) { throw StructureError("structure '" + s.tag + "': " + msg); };
  const int n = static_cast<int>(s.slots.size());
  int answers = 0;
  for (int i = 0; i < n; ++i) {
    if (s.slots[i].kind == SlotKind::kAnswer) ++answers;
    // Anchors come first so GroundedQuery::anchors[i] maps to slot i.
    if (s.slots[i].kind == SlotKind::kAnchor && i > 0 && s.slots[i - 1].kind != SlotKind::kAnchor) {
      fail("anchor slots must precede variable slots");
    }
  }
  if (answers != 1) fail("expected exactly one answer slot, found " + std::to_string(answers));
  for (const auto& e : s.edges) {
    if (e.src < 0 || e.src >= n || e.dst < 0 || e.dst >= n) fail("edge references unknown slot");
    if (s.slots[e.dst].kind == SlotKind::kAnchor) fail("edge into anchor slot " + std::to_string(e.dst));
  }
  s.slot_order();
  const int answer = s.answer_slot();
  for (int i = 0; i < n; ++i) {
    const auto in = s.incoming(i);
    const Slot& slot = s.slots[i];
    if (slot.kind != SlotKind::kAnchor && in.empty()) {
      fail("variable slot " + std::to_string(i) + " has no incoming edge");
    }
    if (in.size() >= 2 && slot.join == JoinKind::kNone) {
      fail("slot " + std::to_string(i) + " joins several edges without a combinator");
    }
    if (in.size() < 2 && slot.join != JoinKind::kNone) {
      fail("slot " + std::to_string(i) + " has a combinator but fewer than two inputs");
    }
    bool has_positive = false, has_negative = false;
    for (int e : in) (s.edges[e].negated ? has_negative : has_positive) = true;
    if (has_negative && (slot.join != JoinKind::kIntersection || !has_positive)) {
      fail("negated edge into slot " + std::to_string(i) +
           " must feed an intersection with a positive branch");
    }
    if (i != answer) {
      bool has_out = std::any_of(s.edges.begin(), s.edges.end(), [&](const QueryEdge& e) { return e.src == i; });
      if (!has_out) fail("slot " + std::to_string(i) + " does not reach the answer");
    }
  }
}

Json structure_to_json(const QueryStructure& s) {
  Json slots = Json::array(), edges = Json::array();
  for (const auto& sl : s.slots) slots.push_back({{"kind", slot_kind_name(sl.kind)}, {"join", join_name(sl.join)}});
  for (const auto& e : s.edges) edges.push_back({{"src", e.src}, {"dst", e.dst}, {"negated", e.negated}});
  return Json{{"tag", s.tag}, {"slots", slots}, {"edges", edges}};
}

QueryStructure structure_from_json(const Json& j) {
  QueryStructure s;
  try {
    s.tag = j.at("tag").get<std::string>();
    for (const auto& sl : j.at("slots")) {
      const auto kind = sl.at("kind").get<std::string>();
      const auto join = sl.value("join", std::string("none"));
      Slot slot{kind == "anchor" ? SlotKind::kAnchor
                                 : kind == "bound" ? SlotKind::kBound : SlotKind::kAnswer,
                join == "and" ? JoinKind::kIntersection
                              : join == "or" ? JoinKind::kUnion : JoinKind::kNone};
      if (kind != "anchor" && kind != "bound" && kind != "answer") {
        throw StructureError("unknown slot kind '" + kind + "'");
      }
      if (join != "none" && join != "and" && join != "or") {
        throw StructureError("unknown join kind '" + join + "'");
      }
      s.slots.push_back(slot);
    }
    for (const auto& e : j.at("edges")) {
      s.edges.push_back({e.at("src").get<int>(), e.at("dst").get<int>(), e.value("negated", false)});
    }
  } catch (const Json::exception& ex) {
    throw StructureError(std::string("malformed structure JSON: ") + ex.what());
  }
  validate_structure(s);
  return s;
}

void validate_query(const GroundedQuery& q, const KnowledgeGraph* g) {
  validate_structure(q.structure);
  if (static_cast<int>(q.anchors.size()) != q.structure.num_anchors()) {
    throw StructureError("query '" + q.structure.tag + "' expects " +
                         std::to_string(q.structure.num_anchors()) + " anchors, got " +
                         std::to_string(q.anchors.size()));
  }
  if (q.rels.size() != q.structure.edges.size()) {
    throw StructureError("query '" + q.structure.tag + "' expects " +
                         std::to_string(q.structure.edges.size()) + " relations, got " +
                         std::to_string(q.rels.size()));
  }
  if (g == nullptr) return;
  for (EntityId a : q.anchors) {
    if (a < 0 || static_cast<size_t>(a) >= g->num_entities()) {
      throw BoundsError("anchor entity " + std::to_string(a) + " out of range");
    }
  }
  for (RelationId r : q.rels) {
    if (r < 0 || static_cast<size_t>(r) >= g->num_relations()) {
      throw BoundsError("relation " + std::to_string(r) + " out of range");
    }
  }
}

DnfQuery to_dnf(const GroundedQuery& q) {
  validate_query(q);
  const QueryStructure& s = q.structure;
  // clauses(slot): DNF of the sub-formula defining `slot`, each clause in dependency order.
  std::function<std::vector<Clause>(int)> clauses = [&](int slot) -> std::vector<Clause> {
    if (s.slots[slot].kind == SlotKind::kAnchor) return {Clause{}};
    std::vector<std::vector<Clause>> per_edge;
    for (int e : s.incoming(slot)) {
      const QueryEdge& edge = s.edges[e];
      const bool from_anchor = s.slots[edge.src].kind == SlotKind::kAnchor;
      Literal lit{q.rels[e], e, edge.src, from_anchor ? q.anchors[edge.src] : -1, slot, edge.negated};
      auto sub = clauses(edge.src);
      for (auto& c : sub) c.push_back(lit);
      per_edge.push_back(std::move(sub));
    }
    std::vector<Clause> out;
    if (s.slots[slot].join == JoinKind::kUnion) {
      for (auto& branch : per_edge) {
        for (auto& c : branch) out.push_back(std::move(c));
      }
      return out;
    }
    out = {Clause{}};
    for (const auto& branch : per_edge) {
      std::vector<Clause> next;
      for (const auto& left : out) {
        for (const auto& right : branch) {
          Clause c = left;
          c.insert(c.end(), right.begin(), right.end());
          next.push_back(std::move(c));
        }
      }
      out = std::move(next);
    }
    return out;
  };
  const int answer = s.answer_slot();
  return DnfQuery{clauses(answer), answer};
}

namespace {

uint64_t stable_hash(std::string_view s) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

class QuerySampler {
 public:
  QuerySampler(const KnowledgeGraph& g, const QueryStructure& s, Rng& rng) : g_(g), s_(s), rng_(rng) {}

  std::optional<GroundedQuery> sample() {
    slot_entity_.assign(s_.slots.size(), -1);
    rels_.assign(s_.edges.size(), -1);
    const auto target = static_cast<EntityId>(uniform_index(rng_, g_.num_entities()));
    if (!ground(s_.answer_slot(), target)) return std::nullopt;
    GroundedQuery q;
    q.structure = s_;
    for (int i = 0; i < s_.num_anchors(); ++i) q.anchors.push_back(slot_entity_[i]);
    q.rels = rels_;
    auto answers = answer_oracle(g_, q);
    if (answers.empty()) return std::nullopt;
    q.answers = std::move(answers);
    return q;
  }

 private:
  // Choose edges into `slot` so that `entity` is produced by every positive branch.
  bool ground(int slot, EntityId entity) {
    slot_entity_[slot] = entity;
    for (int e : s_.incoming(slot)) {
      const QueryEdge& edge = s_.edges[e];
      if (!edge.negated) {
        auto in = g_.incoming(entity);
        if (in.empty()) return false;
        const Triple& t = in[uniform_index(rng_, in.size())];
        rels_[e] = t.rel;
        if (!ground(edge.src, t.head)) return false;
        continue;
      }
      auto all = g_.triples();
      bool found = false;
      for (int attempt = 0; attempt < 32 && !found; ++attempt) {
        const Triple& t = all[uniform_index(rng_, all.size())];
        auto nb = g_.neighbors(t.head, t.rel);
        if (std::binary_search(nb.begin(), nb.end(), entity)) continue;
        rels_[e] = t.rel;
        if (!ground(edge.src, t.head)) return false;
        found = true;
      }
      if (!found) return false;
    }
    return true;
  }

  const KnowledgeGraph& g_;
  const QueryStructure& s_;
  Rng& rng_;
  std::vector<EntityId> slot_entity_;
  std::vector<RelationId> rels_;
};

}  // namespace

std::vector<GroundedQuery> generate_queries(const KnowledgeGraph& g, std::string_view tag,
                                            size_t n, uint64_t seed, int max_retries) {
  const QueryStructure s = structure_of(tag);
  std::vector<GroundedQuery> out;
  if (n == 0) return out;
  if (g.triples().empty()) throw GenerationError("cannot generate queries over an empty graph");
  Rng rng(seed ^ stable_hash(tag));
  QuerySampler sampler(g, s, rng);
  out.reserve(n);
  while (out.size() < n) {
    std::optional<GroundedQuery> q;
    for (int attempt = 0; attempt < max_retries && !q; ++attempt) q = sampler.sample();
    if (!q) {
      throw GenerationError("graph too sparse for shape '" + std::string(tag) + "': generated " +
                            std::to_string(out.size()) + " of " + std::to_string(n) +
                            " queries within " + std::to_string(max_retries) + " retries");
    }
    out.push_back(std::move(*q));
  }
  return out;
}

Json query_to_json(const GroundedQuery& q) {
  Json j = Json::object();
  const bool catalog = [&] {
    for (auto t : kAllTags) {
      if (t == q.structure.tag) return structure_of(t) == q.structure;
    }
    return false;
  }();
  j["structure"] = catalog ? Json(q.structure.tag) : structure_to_json(q.structure);
  j["anchors"] = q.anchors;
  j["rels"] = q.rels;
  if (q.answers) j["answers"] = *q.answers;
  for (const auto& [key, value] : q.extra.items()) {
    if (!j.contains(key)) j[key] = value;
  }
  return j;
}

GroundedQuery query_from_json(const Json& j) {
  GroundedQuery q;
  try {
    const auto& st = j.at("structure");
    q.structure = st.is_string() ? structure_of(st.get<std::string>()) : structure_from_json(st);
    q.anchors = j.at("anchors").get<std::vector<EntityId>>();
    q.rels = j.at("rels").get<std::vector<RelationId>>();
    if (j.contains("answers")) {
      auto answers = j.at("answers").get<std::vector<EntityId>>();
      std::sort(answers.begin(), answers.end());
      q.answers = std::move(answers);
    }
  } catch (const Json::exception& ex) {
    throw ParseError(std::string("malformed query: ") + ex.what());
  }
  for (const auto& [key, value] : j.items()) {
    if (key != "structure" && key != "anchors" && key != "rels" && key != "answers") q.extra[key] = value;
  }
  validate_query(q);
  return q;
}

void write_queries(const std::filesystem::path& path, const std::vector<GroundedQuery>& qs) {
  std::ofstream out(path);
  if (!out) throw IOError("cannot write " + path.string());
  for (const auto& q : qs) out << query_to_json(q).dump() << '\n';
}

std::vector<GroundedQuery> read_queries(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IOError("cannot open " + path.string());
  std::vector<GroundedQuery> qs;
  std::string line;
  for (size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (line.empty()) continue;
    try {
      qs.push_back(query_from_json(Json::parse(line)));
    } catch (const Json::exception& ex) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + ex.what());
    } catch (const ParseError& ex) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + ex.what());
    }
  }
  return qs;
}

}  // namespace kgc
