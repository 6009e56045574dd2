#!/usr/bin/env python3
# Licensed to the Apache Software Foundation (ASF) under one
# or more contributor license agreements.  See the NOTICE file
# distributed with this work for additional information
# regarding copyright ownership.  The ASF licenses this file
# to you under the Apache License, Version 2.0 (the
# "License"); you may not use this file except in compliance
# with the License.  You may obtain a copy of the License at
#
#   http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing,
# software distributed under the License is distributed on an
# "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
# KIND, either express or implied.  See the License for the
# specific language governing permissions and limitations
# under the License.
"""Derive per-shape kernel-launch and intermediate-size tables from template step counts.

This script does not use the C++ library: it re-derives the DNF form of every query shape,
counts operator modules, and multiplies by template step counts. The C++ tests compare the
engine's measured counters against the JSON it writes.
"""

import argparse
import json
import sys
from pathlib import Path

D = 32
H = 64
W = 2 * D

# (slots, edges): slot kinds are "a" anchor, "b" bound, "q" answer; joins "and" / "or" / None.
# Edges are (src, dst, negated).
SHAPES = {
    "1p": ([("a", None), ("q", None)], [(0, 1, False)]),
    "2p": ([("a", None), ("b", None), ("q", None)], [(0, 1, False), (1, 2, False)]),
    "3p": ([("a", None), ("b", None), ("b", None), ("q", None)], [(0, 1, False), (1, 2, False), (2, 3, False)]),
    "2i": ([("a", None), ("a", None), ("q", "and")], [(0, 2, False), (1, 2, False)]),
    "3i": ([("a", None), ("a", None), ("a", None), ("q", "and")], [(0, 3, False), (1, 3, False), (2, 3, False)]),
    "pi": ([("a", None), ("a", None), ("b", None), ("q", "and")], [(0, 2, False), (2, 3, False), (1, 3, False)]),
    "ip": ([("a", None), ("a", None), ("b", "and"), ("q", None)], [(0, 2, False), (1, 2, False), (2, 3, False)]),
    "2u": ([("a", None), ("a", None), ("q", "or")], [(0, 2, False), (1, 2, False)]),
    "up": ([("a", None), ("a", None), ("b", "or"), ("q", None)], [(0, 2, False), (1, 2, False), (2, 3, False)]),
    "2in": ([("a", None), ("a", None), ("q", "and")], [(0, 2, False), (1, 2, True)]),
    "3in": ([("a", None), ("a", None), ("a", None), ("q", "and")], [(0, 3, False), (1, 3, False), (2, 3, True)]),
    "inp": ([("a", None), ("a", None), ("b", "and"), ("q", None)], [(0, 2, False), (1, 2, True), (2, 3, False)]),
    "pin": ([("a", None), ("a", None), ("b", None), ("q", "and")], [(0, 2, False), (2, 3, False), (1, 3, True)]),
    "pni": ([("a", None), ("a", None), ("b", None), ("q", "and")], [(0, 2, False), (2, 3, True), (1, 3, False)]),
}

PROJECTION_WIDTHS = [H, H, H, H, H, H, W, W, W]


def projection_widths(clamp):
    return PROJECTION_WIDTHS + ([W] if clamp else [])


def and_widths(n):
    per_branch = [H, H, H, W, W]
    return per_branch * n + [W * n, W]


NOT_WIDTHS = [W, W]


def or_widths(n):
    return [W * n]


def dnf(slots, edges, slot):
    """Clauses (tuples of edge indices) whose conjunction binds `slot`."""
    kind, join = slots[slot]
    if kind == "a":
        return [()]
    branches = []
    for e, (src, dst, _) in enumerate(edges):
        if dst == slot:
            branches.append([clause + (e,) for clause in dnf(slots, edges, src)])
    if join == "or":
        return [c for branch in branches for c in branch]
    result = [()]
    for branch in branches:
        result = [tuple(dict.fromkeys(a + b)) for a in result for b in branch]
    return result


def clause_modules(edges, clause):
    """FOL modules of one clause as (kind, arity) pairs."""
    by_target = {}
    for e in clause:
        by_target.setdefault(edges[e][1], []).append(e)
    modules = []
    for lits in by_target.values():
        negated = [e for e in lits if edges[e][2]]
        modules += [("project", 1)] * len(lits)
        modules += [("not", 1)] * len(negated)
        if len(lits) > 1 or negated:
            modules.append(("and", len(lits)))
    return modules


def count(tag, clamp=True):
    slots, edges = SHAPES[tag]
    answer = next(i for i, (k, _) in enumerate(slots) if k == "q")
    clauses = dnf(slots, edges, answer)
    modules = [m for c in clauses for m in clause_modules(edges, c)]
    if len(clauses) > 1:
        modules.append(("or", len(clauses)))
    widths = []
    for kind, n in modules:
        widths += {
            "project": lambda: projection_widths(clamp),
            "and": lambda: and_widths(n),
            "not": lambda: NOT_WIDTHS,
            "or": lambda: or_widths(n),
        }[kind]()
    answer_width = W * len(clauses) if len(clauses) > 1 else W
    # Every module output feeds exactly one later module, so the module graph is an in-tree:
    # the whole of it is convex with a single output and fuses into one operator.
    return {
        "clauses": len(clauses),
        "modules": len(modules),
        "fusion_groups": 1,
        "unfused_launches": len(widths),
        "fused_launches": 1,
        "unfused_interm_row_elements": sum(widths) - answer_width,
        "fused_interm_row_elements": 0,
        "answer_row_elements": answer_width,
    }


def build_table():
    return {
        "d": D,
        "h": H,
        "tasks": {tag: count(tag) for tag in SHAPES},
        "nine_step_projection_launches": {tag: count(tag, clamp=False)["unfused_launches"] for tag in SHAPES},
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path(__file__).resolve().parent.parent / "tests/fixtures/launch_table.json")
    parser.add_argument("--check", type=Path, help="compare against an existing table instead of writing")
    args = parser.parse_args()
    text = json.dumps(build_table(), indent=2) + "\n"
    if args.check:
        current = args.check.read_text()
        if current != text:
            print(f"{args.check} is stale; rerun scripts/count_fixtures.py", file=sys.stderr)
            return 1
        print(f"{args.check} is up to date")
        return 0
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(text)
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
