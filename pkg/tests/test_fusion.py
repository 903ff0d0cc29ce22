import random

import pytest

from graphfuse.fusion import (
    FuseContext, apply_rule, count_rounds, evaluate_plan, fuse, RULE_NAMES,
)
from graphfuse.refsem import evaluate, result_eq
from graphfuse.terms import (
    Builtin, Config, ConfigPair, EVar, FORWARD, ILet, MBin, MSingle, MsPair,
    MsBot, Pairwise, PathRed, Paths, PFn, PPair, TieAware, TripleLet,
    alpha_equivalent, count_vertex_reductions, positions, subterm,
)
from .conftest import random_dag


def test_structural_round_counts(corpus):
    for name, expect in (("Radius", 1), ("DRR", 1), ("RDS", 2)):
        d = corpus[name]
        plan = fuse(d.term, d.params, d.map_var, name)
        assert count_rounds(plan) == expect, name


def test_sssp_trivial_plan(corpus):
    d = corpus["SSSP"]
    plan = fuse(d.term, d.params, d.map_var, "SSSP")
    assert count_rounds(plan) == 1
    r = plan.rounds[0]
    assert r.kind == "map"          # absent vertex reduce
    assert r.es == EVar(r.bind_i)   # trivial map


def test_radius_fused_shape(corpus):
    d = corpus["Radius"]
    plan = fuse(d.term, (), None, "Radius")
    r = plan.rounds[0]
    ms = r.ms
    assert isinstance(ms, MSingle)
    assert ms.red == Pairwise(Builtin("min"), Builtin("min"))
    assert ms.fn == PPair(PFn("length"), PFn("length"))
    assert ms.config == ConfigPair(Config(0, FORWARD), Config(1, FORWARD))
    assert isinstance(r.rs.red, Pairwise)
    assert r.rs.red == Pairwise(Builtin("max"), Builtin("max"))


def test_apply_rule_fmpair():
    a = MSingle(Builtin("min"), PFn("weight"), Config("s", FORWARD))
    b = MSingle(Builtin("min"), PFn("capacity"), Config("s", FORWARD))
    out = apply_rule("FMPair", MsPair(a, b), ())
    assert isinstance(out, MSingle)
    assert out.red == Pairwise(Builtin("min"), Builtin("min"))
    assert out.fn == PPair(PFn("weight"), PFn("capacity"))


def test_apply_rule_filetbin_target_mismatch():
    l = ILet("x", MSingle(Builtin("min"), PFn("weight"), Config("s", FORWARD)), "v", EVar("x"))
    r = ILet("y", MSingle(Builtin("min"), PFn("weight"), Config("s", FORWARD)), "w", EVar("y"))
    t = MBin("+", l, r)
    assert apply_rule("FILetBin", t, ()) is None
    r2 = ILet("y", MSingle(Builtin("min"), PFn("weight"), Config("s", FORWARD)), "v", EVar("y"))
    out = apply_rule("FILetBin", MBin("+", l, r2), ())
    assert isinstance(out, ILet)
    assert out.target == "v"


def test_apply_rule_ielim():
    m = MSingle(Builtin("min"), PFn("weight"), Config("s", FORWARD))
    tl = TripleLet(("x", "y"), MsPair(m, m), None, "a",
                   EVar("x"), "b", __import__("graphfuse.terms", fromlist=["RSingle"]).RSingle(Builtin("min"), ("a",), ""), EVar("b"))
    out = apply_rule("IElim", tl, ())
    assert out is not None
    assert out.bind_i == "x"
    assert out.ms == m


def test_apply_rule_position_addressing(corpus):
    d = corpus["SSSP"]
    ctx = FuseContext(frozenset(d.params), d.map_var)
    t = d.term
    assert apply_rule("FPRed'", t, (), ctx) is not None
    assert apply_rule("FPNest", t, (), ctx) is None
    assert apply_rule("FPRed'", t, (99,), ctx) is None


def test_unknown_rule_rejected(corpus):
    with pytest.raises(Exception):
        apply_rule("NotARule", corpus["SSSP"].term, ())


def test_fusion_preservation_random(corpus):
    rng = random.Random(1)
    graphs = [random_dag(rng, rng.randint(2, 6)) for _ in range(25)]
    for name in ("SSSP", "WSP", "NWR", "Radius", "DRR", "RDS", "DS", "NSP", "CCSS"):
        d = corpus[name]
        plan = fuse(d.term, d.params, d.map_var, name)
        for g in graphs:
            params = {p: i % g.vertex_count for i, p in enumerate(d.params)}
            L = g.longest_simple_path_length() + 1
            ref = evaluate(g, d.term, L, params, d.map_var)
            got = evaluate_plan(plan, g, L, params)
            assert result_eq(got, ref, 1e-9), (name, g.edges, params)


def test_fuse_deterministic(corpus):
    d = corpus["DRR"]
    p1 = fuse(d.term, d.params, d.map_var, "DRR")
    p2 = fuse(d.term, d.params, d.map_var, "DRR")
    assert len(p1.rounds) == len(p2.rounds)
    for a, b in zip(p1.rounds, p2.rounds):
        assert a.var == b.var
        assert alpha_equivalent(a.as_term(), b.as_term())
        assert a.as_term() == b.as_term()  # canonical renaming makes them equal


def test_round_count_bound(corpus):
    for name, d in corpus.items():
        plan = fuse(d.term, d.params, d.map_var, name)
        bound = max(1, count_vertex_reductions(d.term))
        assert count_rounds(plan) <= bound, name


def test_fused_wellformed(corpus):
    from graphfuse.terms import free_vars, tree_distinct

    for name, d in corpus.items():
        plan = fuse(d.term, d.params, d.map_var, name)
        for r in plan.rounds:
            assert tree_distinct(r.bind_i)
            free = free_vars(r.as_term())
            allowed = set(d.params) | set(plan.round_vars())
            if r.target is not None:
                allowed.add(r.target)
            assert free <= allowed, (name, free)


def test_rule_names_cover_spec_catalogue():
    expected = {
        "FMInR", "FMInM", "FPNest", "FPRed", "FPRed'", "FPRed''", "FILetBin",
        "FMInILet", "FMPair", "FVRed", "FLetsBin", "FMInLets", "FRinLets",
        "FRPair", "FRR", "FILit", "FMLVar", "FMPair'", "FMPair''", "FRLit",
        "FRPair'", "FRPair''", "FIUni", "FRUni", "IElim", "ICom", "IAssL",
        "IAssR",
    }
    assert expected <= set(RULE_NAMES)
