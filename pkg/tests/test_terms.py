import pytest
from hypothesis import given, settings, strategies as st

from graphfuse.graph import BOT, is_bot
from graphfuse.terms import (
    Builtin, EBin, ELit, EVar, Guarded, ILet, LEFT, MArgSel, MBin, MCard,
    MLit, MSingle, MUnfactored, MVar, MsBot, Pairwise, PathRed, Paths, PConst,
    PFn, PPair, TieAware, TermError, VertexRed, VertexRedConstrained,
    VertexRedOverSet, alpha_equivalent, apply_op, desugar, free_vars,
    substitute,
)


# -- reductions ---------------------------------------------------------------

def test_builtin_reductions_bot_identity():
    for name in ("min", "max", "or", "and", "sum", "union", "intersect"):
        r = Builtin(name)
        probe = frozenset((1,)) if name in ("union", "intersect") else 3
        assert r.apply(BOT, probe) == probe
        assert r.apply(probe, BOT) == probe
        assert is_bot(r.apply(BOT, BOT))


def test_pairwise_and_tie():
    r = Pairwise(Builtin("min"), Builtin("max"))
    assert r.apply((1, 2), (3, 0)) == (1, 2)
    tie = TieAware(Builtin("min"), Builtin("max"))
    assert tie.apply((1, 5), (2, 9)) == (1, 5)
    assert tie.apply((2, 5), (1, 9)) == (1, 9)
    assert tie.apply((1, 5), (1, 9)) == (1, 9)
    keepleft = TieAware(Builtin("min"), LEFT)
    assert keepleft.apply((1, 5), (1, 9)) == (1, 5)


def test_tie_bot_first_components():
    tie = TieAware(Builtin("min"), Builtin("max"))
    # a defined first component beats an undefined one
    assert tie.apply((BOT, 4), (3, 1)) == (3, 1)
    assert tie.apply((3, 1), (BOT, 4)) == (3, 1)
    assert tie.apply((BOT, 4), (BOT, 1)) == (BOT, 4)


def test_guarded_reduction_fold():
    g = Guarded(Builtin("min"))
    vals = [(True, 5), (False, 1), (BOT, 0), (True, 3)]
    assert g.fold(vals) == 3
    assert is_bot(g.fold([(False, 1)]))


def test_unknown_reduction():
    with pytest.raises(TermError):
        Builtin("frobnicate")


# -- substitution / free variables --------------------------------------------

def test_substitute_simple():
    t = EBin("+", EVar("x"), EVar("y"))
    out = substitute(t, {"x": 3})
    assert out == EBin("+", ELit(3), EVar("y"))


def test_substitute_shape_binding():
    from graphfuse.terms import tree_bind

    assert tree_bind(("x", "y"), (2, 5)) == {"x": 2, "y": 5}
    with pytest.raises(TermError):
        tree_bind(("x", "y"), 3)


def test_substitute_shadowing():
    inner = ILet("x", MsBot(), None, EVar("x"))
    out = substitute(inner, {"x": 7})
    assert out.body == EVar("x")  # bound occurrence untouched


def test_substitute_capture_avoidance():
    # substituting a term mentioning x under a binder named x renames the binder
    t = ILet("x", MsBot(), None, EBin("+", EVar("x"), EVar("y")))
    out = substitute(t, {"y": EVar("x")})
    assert out.binders != "x"
    assert EVar(out.binders) in (out.body.left, out.body.right)
    names = free_vars(out)
    assert "x" in names


def test_free_vars():
    t = ILet("x", MsBot(), None, EBin("+", EVar("x"), EVar("z")))
    assert free_vars(t) == frozenset({"z"})
    assert free_vars(MVar("w")) == frozenset({"w"})


def test_free_vars_paths():
    t = PathRed(Builtin("min"), PFn("weight"), Paths("s", "v"))
    assert free_vars(t) == frozenset({"s", "v"})


@given(st.integers(-5, 5))
@settings(max_examples=20)
def test_substitute_free_var_law(val):
    t = EBin("+", EVar("x"), EVar("y"))
    out = substitute(t, {"x": val})
    assert free_vars(out) == free_vars(t) - {"x"}


# -- desugaring ----------------------------------------------------------------

def test_desugar_argmin():
    t = MArgSel(PFn("penultimate"), Builtin("min"), PFn("length"), Paths("s", "v"))
    out = desugar(t)
    assert isinstance(out, ILet)
    assert isinstance(out.ms, MUnfactored)
    assert out.ms.red == TieAware(Builtin("min"), LEFT)
    assert out.ms.fn == PPair(PFn("length"), PFn("penultimate"))
    # result picks the second component
    assert out.body == EVar(out.binders[1])


def test_desugar_cardinality():
    out = desugar(MCard(Paths("s", "v")))
    assert out == PathRed(Builtin("sum"), PConst(1), Paths("s", "v"))


def test_desugar_singleton_unroll():
    body = PathRed(Builtin("min"), PFn("weight"), Paths("s", "v"))
    t = VertexRedOverSet(Builtin("min"), "s", (3,), body)
    out = desugar(t)
    assert out == PathRed(Builtin("min"), PFn("weight"), Paths(3, "v"))


def test_desugar_set_unrolls_to_operator_chain():
    body = PathRed(Builtin("min"), PFn("weight"), Paths("s", "v"))
    t = VertexRedOverSet(Builtin("min"), "s", (0, 1, 2), body)
    out = desugar(t)
    assert isinstance(out, MBin) and out.op == "min"
    assert isinstance(out.left, MBin) and out.left.op == "min"


def test_desugar_constrained():
    guard = MLit(True)
    body = MVar("v")
    t = VertexRedConstrained(Builtin("min"), "v", guard, body)
    out = desugar(t)
    assert isinstance(out, VertexRed)
    assert out.red == Guarded(Builtin("min"))
    assert out.body == MBin("pair", guard, body)


def test_desugar_idempotent(corpus):
    for d in corpus.values():
        assert desugar(d.term) == d.term


def test_desugar_rejects_bad_argred():
    with pytest.raises(TermError):
        MArgSel(PFn("head"), Builtin("sum"), PFn("length"), Paths(None, "v"))


# -- alpha equivalence ----------------------------------------------------------

def test_alpha_equivalent_binders():
    a = ILet("x", MsBot(), None, EVar("x"))
    b = ILet("y", MsBot(), None, EVar("y"))
    c = ILet("y", MsBot(), None, EVar("z"))
    assert alpha_equivalent(a, b)
    assert not alpha_equivalent(a, c)


def test_alpha_vertex_red():
    a = VertexRed(Builtin("min"), "v", MVar("v"))
    b = VertexRed(Builtin("min"), "w", MVar("w"))
    assert alpha_equivalent(a, b)
    assert not alpha_equivalent(a, VertexRed(Builtin("max"), "w", MVar("w")))


# -- operators -------------------------------------------------------------------

def test_apply_op_strictness():
    assert is_bot(apply_op("+", BOT, 3))
    assert is_bot(apply_op("<", 1, BOT))
    assert apply_op("pair", BOT, 3) == (BOT, 3)
    assert apply_op("/", 1, 0) is BOT
    assert apply_op("/", 3, 2) == 1.5
