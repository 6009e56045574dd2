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
import json
import math

import numpy as np
import pytest

import kgfuse as kgc


@pytest.fixture(scope="module")
def graph():
    return kgc.synthetic_graph()


@pytest.fixture(scope="module")
def model(graph):
    return kgc.Model(graph, d=8, h=16, seed=3)


def test_graph_and_queries(graph):
    assert graph.num_entities == 100
    assert graph.num_triples == 2000
    assert len(kgc.SHAPES) == 14
    qs = kgc.generate_queries(graph, "2in", 4, seed=1)
    assert len(qs) == 4
    for q in qs:
        assert q.shape == "2in"
        assert q.answers == kgc.oracle_answers(graph, q)
        back = kgc.Query.from_json(q.to_json())
        assert back.anchors == q.anchors and back.rels == q.rels


def test_compile_counts(graph, model):
    q = kgc.generate_queries(graph, "2i", 1)[0]
    c = kgc.compile(q, model)
    assert (c.fol_ops, c.primitive_ops, c.fused_ops) == (3, 32, 1)
    assert sorted(c.modules) == ["and", "project", "project"]
    assert "digraph" in c.dot("primitive")
    assert json.dumps(c.report())


@pytest.mark.parametrize("dtype", ["f32", "f64"])
def test_modes_agree(graph, model, dtype):
    qs = kgc.generate_queries(graph, "up", 6, seed=2)
    c = kgc.compile(qs[0], model)
    u = kgc.execute(c, model, qs, mode="unfused", dtype=dtype)
    f = kgc.execute(c, model, qs, mode="fused", dtype=dtype)
    assert u["answer"].shape == (6, 2, 16)
    assert np.array_equal(u["answer"], f["answer"])
    assert f["stats"]["kernel_launches"] == 1
    assert f["stats"]["interm_bytes"] == 0
    assert u["stats"]["kernel_launches"] == 41
    assert model.rank(f["answer"][0]) == model.rank(u["answer"][0])


def test_special_functions():
    assert kgc.log_beta(2, 2) == pytest.approx(math.log(1 / 6))
    assert kgc.kl_beta(1, 1, 2, 2) == pytest.approx(2 - math.log(6))
    with pytest.raises(kgc.KGCError):
        kgc.log_beta(-1, 2)


def test_errors(graph):
    with pytest.raises(kgc.KGCError):
        kgc.generate_queries(graph, "9z", 1)


def test_benchmark(tmp_path):
    r = kgc.benchmark(["1p"], batches=[1, 2], rounds=1, d=4, h=4, out=tmp_path)
    assert r["parity_ok"]
    assert len(r["rows"]) == 4
    assert (tmp_path / "bench.csv").exists()
