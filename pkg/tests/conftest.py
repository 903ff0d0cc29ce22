import random

import pytest

from graphfuse.frontend import parse_spec_file
from graphfuse.graph import Edge, Graph

import importlib.resources as res


@pytest.fixture(scope="session")
def corpus():
    text = (res.files("graphfuse") / "corpus" / "usecases.grafs").read_text()
    return parse_spec_file(text, "usecases.grafs")


@pytest.fixture(scope="session")
def g1():
    """The running example: 0->1 (w1,c5), 0->2 (w4,c2), 1->2 (w2,c3)."""
    return Graph(3, (Edge(0, 1, 1, 5), Edge(0, 2, 4, 2), Edge(1, 2, 2, 3)))


def random_dag(rng: random.Random, n: int, grid=(0, 1, 2, 3), density=0.4) -> Graph:
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < density:
                edges.append(Edge(i, j, rng.choice(grid), rng.choice(grid)))
    return Graph(n, tuple(edges))


def random_digraph(rng: random.Random, n: int, grid=(0, 1, 2, 3), density=0.35) -> Graph:
    edges = []
    for i in range(n):
        for j in range(n):
            if i != j and rng.random() < density:
                edges.append(Edge(i, j, rng.choice(grid), rng.choice(grid)))
    return Graph(n, tuple(edges))


@pytest.fixture(scope="session")
def compiled_specs(corpus):
    """Lazily compiled plans, shared across the whole test session."""
    from graphfuse.compiler import compile_plan
    from graphfuse.fusion import fuse

    cache = {}

    def get(name):
        if name not in cache:
            d = corpus[name]
            cache[name] = compile_plan(fuse(d.term, d.params, d.map_var, name))
        return cache[name]

    return get
