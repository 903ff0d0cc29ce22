"""Cross-validation of the native harness against the reference engine:
emitted kernels compile, and the harness dumps are byte-identical to the
engine's dumps."""
import random
import subprocess
import sys
from pathlib import Path

import pytest

HARNESS_DIR = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(HARNESS_DIR))

import build as harness_build  # noqa: E402

from graphfuse.compiler import compile_plan  # noqa: E402
from graphfuse.emit import emit_kernels  # noqa: E402
from graphfuse.engine import format_dump, run  # noqa: E402
from graphfuse.frontend import parse_spec_file  # noqa: E402
from graphfuse.fusion import fuse  # noqa: E402
from graphfuse.graph import Edge, Graph, format_edge_list  # noqa: E402

import importlib.resources as res  # noqa: E402

HARNESS_SPECS = ("SSSP", "CC", "WP", "BFS", "WSP")


@pytest.fixture(scope="module")
def built(tmp_path_factory):
    """Emit and build one harness executable per spec."""
    text = (res.files("graphfuse") / "corpus" / "usecases.grafs").read_text()
    corpus = parse_spec_file(text)
    tmp = tmp_path_factory.mktemp("harness")
    out = {}
    for name in HARNESS_SPECS:
        d = corpus[name]
        cp = compile_plan(fuse(d.term, d.params, d.map_var, name))
        kernels = cp.rounds[0].groups[0].kernels
        hpp = tmp / f"{name.lower()}.hpp"
        hpp.write_text(emit_kernels(kernels, name.lower()))
        exe = harness_build.build(hpp, tmp / f"{name.lower()}.bin")
        out[name] = (d, kernels, exe)
    return tmp, out


def random_graph(rng, n, undirected=False):
    pairs = [(i, j) for i in range(n) for j in range(n) if i < j]
    chosen = [p for p in pairs if rng.random() < 0.5]
    if undirected:
        return Graph.undirected(n, [(u, v, rng.randint(1, 3), rng.randint(1, 3))
                                    for (u, v) in chosen])
    edges = []
    for (u, v) in chosen:
        if rng.random() < 0.5:
            u, v = v, u
        edges.append(Edge(u, v, rng.randint(1, 3), rng.randint(1, 3)))
    return Graph(n, tuple(edges))


def run_harness(exe, graph_path, mode, sources, threads=1):
    cmd = [str(exe), str(graph_path), "--mode", mode, "--threads", str(threads)]
    if sources:
        cmd += ["--sources", ",".join(str(s) for s in sources)]
    proc = subprocess.run(cmd, capture_output=True, text=True, check=True)
    return proc.stdout


def test_harness_equivalence(built):
    """[SECONDARY] acceptance: byte-identical dumps for SSSP, CC, WP, BFS,
    WSP on 10 random graphs per spec, both modes."""
    tmp, table = built
    rng = random.Random(42)
    compared = 0
    for name in HARNESS_SPECS:
        d, kernels, exe = table[name]
        undirected = name == "CC"
        for i in range(10):
            g = random_graph(rng, rng.randint(2, 6), undirected=undirected)
            gp = tmp / f"{name}_{i}.txt"
            gp.write_text(format_edge_list(g))
            params = {p: rng.randrange(g.vertex_count) for p in d.params}
            sources = [params[p] for p in d.params]
            for mode, engine_mode in (("pull", "pull+"), ("push", "push+")):
                expected, _, _ = run(g, kernels, engine_mode, params=params,
                                     max_iters=4 * g.vertex_count + 4)
                got = run_harness(exe, gp, mode, sources)
                assert got == format_dump(expected), (name, mode, g.edges, params)
                compared += 1
    print(f"\nACCEPTANCE harness-equivalence: PASS ({compared} byte-identical dumps)")


def test_harness_thread_determinism(built):
    """Any thread count produces identical output for certified-idempotent
    commutative kernels."""
    tmp, table = built
    rng = random.Random(7)
    for name in ("SSSP", "CC", "WP"):
        d, kernels, exe = table[name]
        g = random_graph(rng, 6, undirected=(name == "CC"))
        gp = tmp / f"{name}_mt.txt"
        gp.write_text(format_edge_list(g))
        sources = [0 for _ in d.params]
        base = run_harness(exe, gp, "push", sources, threads=1)
        for threads in (2, 4):
            assert run_harness(exe, gp, "push", sources, threads=threads) == base


def test_harness_rejects_bad_input(built):
    _, table = built
    _, _, exe = table["SSSP"]
    proc = subprocess.run([str(exe), "/nonexistent.graph"], capture_output=True)
    assert proc.returncode != 0
