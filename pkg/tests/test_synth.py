import time

import pytest

from graphfuse.graph import BOT, is_bot
from graphfuse.kexpr import (
    BOOL, EDGE, INT, KBin, KEdgeFn, KLit, KNeg, KPair, KVar, KernelFn,
    VERTEX, WrappedPropagate,
)
from graphfuse.synth import (
    Memo, SynthesisFailure, candidates, check_R, synth_B, synth_I, synth_P,
    synth_kernels, _base_literals,
)
from graphfuse.terms import (
    Builtin, Config, ConfigPair, FORWARD, LEFT, MSingle, Pairwise, PConst,
    PFn, PPair, TieAware,
)
from graphfuse.verify import Bounds


def test_candidates_size1_int():
    memo = Memo((("n", INT),), _base_literals())
    got = candidates(INT, 1, memo)
    assert KLit(0, INT) in got
    assert KLit(1, INT) in got
    assert KVar("n", INT) in got


def test_candidates_size1_bool():
    memo = Memo((), _base_literals())
    got = candidates(BOOL, 1, memo)
    assert set(got) == {KLit(True, BOOL), KLit(False, BOOL)}


def test_candidates_contains_weight_sum():
    memo = Memo((("n", INT), ("l", EDGE)), _base_literals())
    target = KBin("+", KVar("n", INT), KEdgeFn("weight", KVar("l", EDGE)))
    assert target in candidates(INT, 4, memo)
    assert target not in candidates(INT, 3, memo)


def test_candidates_exact_size():
    memo = Memo((("n", INT), ("l", EDGE)), _base_literals())
    for size in (1, 2, 3, 4):
        for e in candidates(INT, size, memo):
            assert e.size == size


def test_memo_warm_and_cold_equal():
    env = (("n", INT), ("l", EDGE))
    cold = Memo(env, _base_literals())
    warm = Memo(env, _base_literals())
    for s in (1, 2, 3):
        candidates(INT, s, warm)  # prime
    for s in (1, 2, 3, 4):
        assert candidates(INT, s, cold) == candidates(INT, s, warm)


def test_synth_p_sssp():
    t0 = time.time()
    p = synth_P(PFn("weight"), Builtin("min"), sourced=True)
    assert p.body == KBin("+", KVar("n", INT), KEdgeFn("weight", KVar("l", EDGE)))
    assert time.time() - t0 < 10


def test_synth_p_count():
    p = synth_P(PConst(1), Builtin("sum"))
    assert p.body == KVar("n", INT)  # identity


def test_synth_p_capacity():
    t0 = time.time()
    p = synth_P(PFn("capacity"), Builtin("max"))
    assert p.body == KBin("min", KVar("n", INT), KEdgeFn("capacity", KVar("l", EDGE)))
    assert time.time() - t0 < 10


def test_synth_i_sssp():
    i = synth_I(PFn("weight"), sourced=True)
    assert i(3, 3) == 0
    assert is_bot(i(1, 3))


def test_synth_i_cc():
    i = synth_I(PFn("head"), sourced=False)
    assert i.body == KVar("v", VERTEX)


def test_synth_i_count_unsourced():
    i = synth_I(PConst(1), sourced=False)
    assert i.body == KLit(1, INT)


def test_synth_i_capacity_forced_none():
    i = synth_I(PFn("capacity"), sourced=True)
    assert is_bot(i(0, 0))
    assert is_bot(i(1, 0))


def test_synth_b_sum():
    P = WrappedPropagate(KernelFn(("n", "l"), KVar("n", INT)))
    b = synth_B(P, Builtin("sum"), PConst(1), size_cap=4)
    assert b.body == KNeg(KVar("n", INT))


def test_synth_b_nsp_pair():
    fn = PPair(PFn("weight"), PConst(1))
    red = TieAware(Builtin("min"), Builtin("sum"))
    P = WrappedPropagate(KernelFn((("w", "n"), "l"),
                                  KPair(KVar("w", INT), KVar("n", INT))))
    t0 = time.time()
    b = synth_B(P, red, fn, size_cap=4)
    assert b.body == KPair(KVar("n0", INT), KNeg(KVar("n1", INT)))
    assert time.time() - t0 < 10


def test_synth_b_min_has_no_inverse():
    P = WrappedPropagate(KernelFn(("n", "l"), KVar("n", INT)))
    with pytest.raises(SynthesisFailure) as exc:
        synth_B(P, Builtin("min"), PFn("weight"), size_cap=3)
    assert exc.value.tried > 0


def test_check_r():
    assert check_R(Builtin("min"), PFn("weight")) == {"idempotent": True, "lawful": True}
    assert check_R(Builtin("sum"), PConst(1)) == {"idempotent": False, "lawful": True}
    pair = Pairwise(Builtin("min"), Builtin("sum"))
    got = check_R(pair, PPair(PFn("weight"), PConst(1)))
    assert got == {"idempotent": False, "lawful": True}


def test_minimality_rescan():
    """No strictly smaller candidate passes the same conditions."""
    from graphfuse.verify import build_universe, check_c4, check_c5

    b = Bounds()
    fn, red = PFn("weight"), Builtin("min")
    winner = synth_P(fn, red, b, sourced=True)
    uni = build_universe(fn, 0, b) + build_universe(fn, 1, b)
    memo = Memo((("n", INT), ("l", EDGE)), _base_literals())
    for size in range(1, winner.size):
        for body in candidates(INT, size, memo):
            cand = KernelFn(("n", "l"), body)
            ok = (not check_c5(cand, fn, uni, b, skip_none=True)
                  and not check_c4(cand, red, fn, uni, b))
            assert not ok, f"smaller candidate {body!r} passes"


def test_synth_determinism():
    a = synth_P(PFn("weight"), Builtin("min"), sourced=True)
    b = synth_P(PFn("weight"), Builtin("min"), sourced=True)
    assert a.body == b.body


def test_synth_kernels_radius_pair():
    ms = MSingle(
        Pairwise(Builtin("min"), Builtin("min")),
        PPair(PFn("length"), PFn("length")),
        ConfigPair(Config(0, FORWARD), Config(1, FORWARD)),
    )
    res = synth_kernels(ms)
    k = res.kernels
    # componentwise initialization per source, plus-one propagation per edge
    assert k.I(0, 0, 1) == (0, BOT)
    assert k.I(1, 0, 1) == (BOT, 0)
    assert is_bot(k.I(2, 0, 1))
    e = type("E", (), {"src": 0, "dst": 1, "weight": 7, "capacity": 2})()
    assert k.P((0, BOT), e) == (1, BOT)
    assert k.R == Pairwise(Builtin("min"), Builtin("min"))
    assert k.idempotent


def test_synth_kernels_wsp_tie():
    ms = MSingle(TieAware(Builtin("min"), Builtin("max")),
                 PPair(PFn("length"), PFn("capacity")),
                 Config("s", FORWARD))
    res = synth_kernels(ms)
    k = res.kernels
    assert k.I(0, 0) == (0, BOT)
    e = type("E", (), {"src": 0, "dst": 1, "weight": 7, "capacity": 4})()
    assert k.P((0, BOT), e) == (1, 4)
    assert k.P((2, 3), e) == (3, 3)
    assert res.report.ok("C4", "C5", "C7", "C8", "C9")
