"""Type-guided enumerative synthesis of kernel functions from factored
path-based reductions, guided by the bounded condition checker.

Candidates are enumerated by size with memoization; the smallest candidate
passing its conditions wins, so results are minimal and deterministic.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

from .graph import BOT, is_bot
from .kexpr import (
    BOOL, EDGE, INT, SET, VERTEX, CompositePropagate, KBin, KEdgeFn, KExpr,
    KIte, KLit, KNeg, KPair, KSetOf, KVar, KernelFn, WrappedPropagate,
    is_pair_type, pair_type,
)
from .terms import (
    Builtin, Config, ConfigPair, MSingle, PConst, PFn, PPair, PSingleton,
    PathExpr, Pairwise, Reduction, TermError, TieAware,
)
from . import verify
from .verify import Bounds, build_universe, check_c1_c2, check_c4, check_c5


class SynthesisFailure(Exception):
    def __init__(self, what: str, tried: int):
        self.what = what
        self.tried = tried
        super().__init__(f"synthesis of {what} exhausted the size cap after {tried} candidates")


# ---------------------------------------------------------------------------
# Candidate enumeration
# ---------------------------------------------------------------------------

class Memo:
    """(type, size) -> canonically ordered candidate expressions; entries are
    immutable once stored."""

    def __init__(self, env: tuple, literals: tuple):
        self.env = env            # ((name, type), ...)
        self.literals = literals  # ((value, type), ...)
        self.table: dict = {}

    def key(self, t, size):
        return (t, size)


# arithmetic lives on Int; Float kernels reuse the same constructors
_SCALAR_BIN = ("+", "-", "min", "max")


def candidates(t, size: int, memo: Memo) -> tuple[KExpr, ...]:
    """All well-typed expressions of exactly `size` over the memo's variables
    and literal grid.  Each constructor costs one size unit."""
    if size < 1:
        return ()
    k = memo.key(t, size)
    hit = memo.table.get(k)
    if hit is not None:
        return hit
    out: list[KExpr] = []
    if size == 1:
        for (v, lt) in memo.literals:
            if lt == t:
                out.append(KLit(v, t))
        for (name, vt) in memo.env:
            if vt == t:
                out.append(KVar(name, vt))
    else:
        rest = size - 1
        if t == INT:
            for e in candidates(INT, rest, memo):
                out.append(KNeg(e))
            for e in candidates(EDGE, rest, memo):
                out.append(KEdgeFn("weight", e))
                out.append(KEdgeFn("capacity", e))
            for op in _SCALAR_BIN:
                for ls in range(1, rest):
                    for a in candidates(INT, ls, memo):
                        for b in candidates(INT, rest - ls, memo):
                            out.append(KBin(op, a, b))
            for cs in range(1, rest - 1):
                for ts in range(1, rest - cs):
                    es = rest - cs - ts
                    for c in candidates(BOOL, cs, memo):
                        for a in candidates(INT, ts, memo):
                            for b in candidates(INT, es, memo):
                                out.append(KIte(c, a, b))
        elif t == BOOL:
            for op in ("=", "<"):
                for ls in range(1, rest):
                    for a in candidates(INT, ls, memo):
                        for b in candidates(INT, rest - ls, memo):
                            out.append(KBin(op, a, b))
                    for a in candidates(VERTEX, ls, memo):
                        for b in candidates(VERTEX, rest - ls, memo):
                            if op == "=":
                                out.append(KBin(op, a, b))
            for cs in range(1, rest - 1):
                for ts in range(1, rest - cs):
                    es = rest - cs - ts
                    for c in candidates(BOOL, cs, memo):
                        for a in candidates(BOOL, ts, memo):
                            for b in candidates(BOOL, es, memo):
                                out.append(KIte(c, a, b))
        elif t == SET:
            for e in candidates(VERTEX, rest, memo):
                out.append(KSetOf(e))
            for cs in range(1, rest - 1):
                for ts in range(1, rest - cs):
                    es = rest - cs - ts
                    for c in candidates(BOOL, cs, memo):
                        for a in candidates(SET, ts, memo):
                            for b in candidates(SET, es, memo):
                                out.append(KIte(c, a, b))
        elif t == VERTEX:
            for e in candidates(EDGE, rest, memo):
                out.append(KEdgeFn("src", e))
                out.append(KEdgeFn("dst", e))
            for cs in range(1, rest - 1):
                for ts in range(1, rest - cs):
                    es = rest - cs - ts
                    for c in candidates(BOOL, cs, memo):
                        for a in candidates(VERTEX, ts, memo):
                            for b in candidates(VERTEX, es, memo):
                                out.append(KIte(c, a, b))
        elif is_pair_type(t):
            for ls in range(1, rest):
                for a in candidates(t[1], ls, memo):
                    for b in candidates(t[2], rest - ls, memo):
                        out.append(KPair(a, b))
            for cs in range(1, rest - 1):
                for ts in range(1, rest - cs):
                    es = rest - cs - ts
                    for c in candidates(BOOL, cs, memo):
                        for a in candidates(t, ts, memo):
                            for b in candidates(t, es, memo):
                                out.append(KIte(c, a, b))
    result = tuple(out)
    memo.table[k] = result
    return result


def scalar_type(fn: PathExpr):
    if isinstance(fn, PFn):
        return VERTEX if fn.name in ("head", "penultimate") else INT
    if isinstance(fn, PConst):
        if isinstance(fn.value, bool):
            return BOOL
        return INT
    if isinstance(fn, PPair):
        return pair_type(scalar_type(fn.first), scalar_type(fn.second))
    if isinstance(fn, PSingleton):
        return SET
    raise TermError(f"unsupported path function for synthesis: {fn!r}")


def fn_literals(fn: PathExpr) -> list:
    out = []
    if isinstance(fn, PConst) and not is_bot(fn.value):
        t = BOOL if isinstance(fn.value, bool) else INT
        out.append((fn.value, t))
    if isinstance(fn, PPair):
        out += fn_literals(fn.first) + fn_literals(fn.second)
    return out


def _base_literals(extra=()) -> tuple:
    lits = [(0, INT), (1, INT), (True, BOOL), (False, BOOL)]
    for item in extra:
        if item not in lits:
            lits.append(item)
    return tuple(lits)


# ---------------------------------------------------------------------------
# Synthesis procedures
# ---------------------------------------------------------------------------

@dataclass
class SynthStats:
    tried: int = 0


def synth_P(fn: PathExpr, red: Reduction, bounds: Optional[Bounds] = None,
            size_cap: int = 7, sourced: bool = False,
            stats: Optional[SynthStats] = None) -> KernelFn:
    """Smallest propagation body passing aggregate-propagation and
    single-path conditions; the caller wraps the result to lift the none
    value."""
    b = bounds or Bounds()
    t = scalar_type(fn)
    if is_pair_type(t):
        return _synth_P_pair(fn, red, b, size_cap, sourced, stats)
    uni = build_universe(fn, 0 if sourced else None, b)
    if sourced:
        uni = uni + build_universe(fn, 1, b)
    memo = Memo((("n", t), ("l", EDGE)), _base_literals(fn_literals(fn)))
    stats = stats or SynthStats()
    for size in range(1, size_cap + 1):
        for body in candidates(t, size, memo):
            stats.tried += 1
            cand = KernelFn(("n", "l"), body)
            if check_c5(cand, fn, uni, b, skip_none=True, limit=24):
                continue
            if check_c4(cand, red, fn, uni, b, limit=24):
                continue
            if check_c5(cand, fn, uni, b, skip_none=True):
                continue
            if check_c4(cand, red, fn, uni, b):
                continue
            return cand
    raise SynthesisFailure("propagation function", stats.tried)


def _tie_components(fn: PathExpr, red: Reduction):
    """Decompose a tie-aware reduction into (reduction, path-function) leaf
    components, mirroring the pair shape."""
    if isinstance(red, TieAware):
        if not isinstance(fn, PPair):
            raise TermError("tie-aware reduction needs a pair path function")
        return [(_strip(red.outer), fn.first)] + _tie_components(fn.second, red.inner)
    return [(red, fn)]


def _strip(r):
    return r


def _synth_P_pair(fn: PathExpr, red: Reduction, b: Bounds, size_cap: int,
                  sourced: bool, stats) -> KernelFn:
    comps = _tie_components(fn, red)
    bodies = []
    for i, (r_i, f_i) in enumerate(comps):
        p_i = synth_P(f_i, r_i, b, size_cap, sourced, stats)
        bodies.append(_rename_var(p_i.body, "n", f"n{i}"))
    body = bodies[-1]
    for prev in reversed(bodies[:-1]):
        body = KPair(prev, body)
    pattern = f"n{len(comps)-1}"
    for i in reversed(range(len(comps) - 1)):
        pattern = (f"n{i}", pattern)
    return KernelFn((pattern, "l"), body)


def _rename_var(e: KExpr, old: str, new: str) -> KExpr:
    if isinstance(e, KVar) and e.name == old:
        return KVar(new, e.type)
    kids = e.children()
    if not kids:
        return e
    renamed = tuple(_rename_var(c, old, new) for c in kids)
    if isinstance(e, KBin):
        return KBin(e.op, *renamed)
    if isinstance(e, KNeg):
        return KNeg(*renamed)
    if isinstance(e, KIte):
        return KIte(*renamed)
    if isinstance(e, KEdgeFn):
        return KEdgeFn(e.name, *renamed)
    if isinstance(e, KPair):
        return KPair(*renamed)
    return e


def synth_I(fn: PathExpr, sourced: bool, bounds: Optional[Bounds] = None,
            size_cap: int = 7, stats: Optional[SynthStats] = None) -> KernelFn:
    """Smallest initialization body agreeing with the zero-length path under
    the path condition."""
    b = bounds or Bounds()
    t = scalar_type(fn)
    if is_pair_type(t):
        comps = _tie_components(fn, _tie_like(fn))
        bodies = []
        for (_, f_i) in comps:
            sub = synth_I(f_i, sourced, b, size_cap, stats)
            bodies.append(sub.body)
        body = bodies[-1]
        for prev in reversed(bodies[:-1]):
            body = KPair(prev, body)
        return KernelFn(("v", "s"), body)
    env = [("v", VERTEX)]
    if sourced:
        env.append(("s", VERTEX))
    lits = _base_literals(fn_literals(fn) + [(BOT, t), (BOT, VERTEX)])
    memo = Memo(tuple(env), lits)
    stats = stats or SynthStats()
    for size in range(1, size_cap + 1):
        for body in candidates(t, size, memo):
            stats.tried += 1
            cand = KernelFn(("v", "s"), body)
            if check_c1_c2(cand, fn, sourced, b):
                continue
            return cand
    raise SynthesisFailure("initialization function", stats.tried)


def _tie_like(fn: PPair) -> Reduction:
    # component shapes only; the reductions are irrelevant to initialization
    second = fn.second
    inner = _tie_like(second) if isinstance(second, PPair) else Builtin("min")
    return TieAware(Builtin("min"), inner)



def _c11_checker(P, red: Reduction, values, b: Bounds):
    """Precomputed instance table for fast rollback-candidate screening."""
    from .verify import VEdge, edge_universe
    from .terms import Pairwise, TieAware

    edges = []
    seen = set()
    for (u, v, w, c) in edge_universe(b):
        key = (w, c)
        if key in seen and len(edges) >= 12:
            continue
        seen.add(key)
        edges.append(VEdge(u, v, w, c))
        if len(edges) >= 24:
            break
    defined = [v for v in values if not is_bot(v)]
    tie = isinstance(red, TieAware) or (
        isinstance(red, Pairwise) and any(isinstance(x, TieAware) for x in (red.first, red.second)))
    p_tab = [[P(np, e) for e in edges] for np in defined]
    apply = red.apply

    def run(cand, limit=None) -> bool:
        """True when the candidate satisfies the rollback condition on (a
        prefix of) the instances."""
        count = 0
        for j, nprime in enumerate(defined):
            for ei, e in enumerate(edges):
                p_val = p_tab[j][ei]
                b_val = cand(nprime, e)
                for n in defined:
                    if tie:
                        s = apply(n, p_val)
                        if apply(apply(s, b_val), p_val) != s:
                            return False
                    else:
                        if apply(n, apply(p_val, b_val)) != n:
                            return False
                    count += 1
                    if limit and count >= limit:
                        return True
        return True

    return run


def synth_B(P, red: Reduction, fn: PathExpr, bounds: Optional[Bounds] = None,
            size_cap: int = 7, sourced: bool = False,
            stats: Optional[SynthStats] = None) -> KernelFn:
    """Smallest rollback body cancelling the propagation under the reduction;
    reductions with no inverse exhaust the cap."""
    b = bounds or Bounds()
    t = scalar_type(fn)
    uni = build_universe(fn, 0 if sourced else None, b)
    values = verify._values_of(uni, red)
    stats = stats or SynthStats()
    holds = _c11_checker(P, red, values, b)
    if is_pair_type(t):
        comps = _tie_components(fn, red)
        memos = []
        for i, (_, f_i) in enumerate(comps):
            ct = scalar_type(f_i)
            memos.append(Memo(((f"n{i}", ct), ("l", EDGE)), _base_literals(fn_literals(f_i))))
        pattern = f"n{len(comps)-1}"
        for i in reversed(range(len(comps) - 1)):
            pattern = (f"n{i}", pattern)
        # composite bodies are bounded by the overall cap, not per component;
        # reductions with three or more components rarely admit a rollback,
        # so their search is shallow
        max_total = size_cap + 2 if len(comps) <= 2 else len(comps) + 3
        for total in range(len(comps), max_total):
            for sizes in _compositions(total, len(comps), size_cap - len(comps) + 1):
                pools = [candidates(scalar_type(comps[i][1]), sizes[i], memos[i])
                         for i in range(len(comps))]
                for bodies in itertools.product(*pools):
                    stats.tried += 1
                    body = bodies[-1]
                    for prev in reversed(bodies[:-1]):
                        body = KPair(prev, body)
                    cand = WrappedPropagate(KernelFn((pattern, "l"), body))
                    if not holds(cand, limit=32):
                        continue
                    if holds(cand):
                        return cand.inner
        raise SynthesisFailure("rollback function", stats.tried)
    memo = Memo((("n", t), ("l", EDGE)), _base_literals(fn_literals(fn)))
    for size in range(1, size_cap + 1):
        for body in candidates(t, size, memo):
            stats.tried += 1
            cand = WrappedPropagate(KernelFn(("n", "l"), body))
            if not holds(cand, limit=32):
                continue
            if holds(cand):
                return cand.inner
    raise SynthesisFailure("rollback function", stats.tried)


def _compositions(total: int, parts: int, cap: int):
    if parts == 1:
        if 1 <= total <= cap:
            yield (total,)
        return
    for first in range(1, min(cap, total - parts + 1) + 1):
        for rest in _compositions(total - first, parts - 1, cap):
            yield (first,) + rest


def check_R(red: Reduction, fn: PathExpr, bounds: Optional[Bounds] = None) -> dict:
    """Bounded lawfulness of a reduction: identity/commutativity/
    associativity, plus idempotency."""
    b = bounds or Bounds()
    uni = build_universe(fn, None, b)
    values = verify._values_of(uni, red)
    res = verify.check_c6_to_c9(red, values)
    return {
        "idempotent": res["C9"] is None,
        "lawful": res["C6"] is None and res["C7"] is None and res["C8"] is None,
    }


# ---------------------------------------------------------------------------
# Whole kernel-set assembly
# ---------------------------------------------------------------------------

@dataclass
class LeafSpec:
    red: Reduction
    fn: PathExpr
    config: Config


def config_leaves(ms: MSingle) -> list[LeafSpec]:
    """Maximal single-configuration components of a fused reduction."""

    def go(red, fn, cfg):
        if isinstance(cfg, ConfigPair):
            if not isinstance(red, Pairwise) or not isinstance(fn, PPair):
                raise TermError("pair configuration requires a pairwise reduction")
            return go(red.first, fn.first, cfg.first) + go(red.second, fn.second, cfg.second)
        return [LeafSpec(red, fn, cfg)]

    return go(ms.red, ms.fn, ms.config)


@dataclass
class SynthResult:
    kernels: object  # engine.KernelSet
    report: verify.ConditionReport
    failures: list = field(default_factory=list)
    tried: int = 0


def synth_kernels(ms: MSingle, bounds: Optional[Bounds] = None,
                  size_cap: int = 7) -> SynthResult:
    """Assemble the full kernel set for a (single-orientation) fused
    reduction: initialization, wrapped propagation, optional rollback, the
    lifted reduction, and an identity epilogue."""
    from .engine import KernelSet

    b = bounds or Bounds()
    leaves = config_leaves(ms)
    orientations = {l.config.orientation for l in leaves}
    if len(orientations) > 1:
        raise TermError("kernel synthesis needs a single orientation group")
    stats = SynthStats()
    failures: list[str] = []
    i_bodies, p_bodies, sources = [], [], []
    for idx, leaf in enumerate(leaves):
        sourced = leaf.config.source is not None
        sources.append(leaf.config.source)
        p_i = synth_P(leaf.fn, leaf.red, b, size_cap, sourced, stats)
        i_i = synth_I(leaf.fn, sourced, b, size_cap, stats)
        p_bodies.append(_shift_pair_vars(p_i, idx))
        i_bodies.append(_rename_var(i_i.body, "s", f"s{idx}"))
    if len(leaves) == 1:
        pattern = p_bodies[0][0]
        i_body = i_bodies[0]
        P = WrappedPropagate(KernelFn((pattern, "l"), p_bodies[0][1]))
    else:
        pattern = p_bodies[-1][0]
        i_body = i_bodies[-1]
        parts = WrappedPropagate(KernelFn((p_bodies[-1][0], "l"), p_bodies[-1][1]))
        for (pat, body), ib in zip(reversed(p_bodies[:-1]), reversed(i_bodies[:-1])):
            pattern = (pat, pattern)
            parts = (WrappedPropagate(KernelFn((pat, "l"), body)), parts)
            i_body = KPair(ib, i_body)
        P = CompositePropagate(parts)
    I = KernelFn(("v",) + tuple(f"s{i}" for i in range(len(leaves))), i_body)
    lawful = check_R(ms.red, ms.fn, b)
    B = None
    if not lawful["idempotent"]:
        try:
            B = WrappedPropagate(synth_B(P, ms.red, ms.fn, b, size_cap,
                                         any(s is not None for s in sources), stats))
        except SynthesisFailure as exc:
            failures.append(f"push-II unavailable: {exc}")
    kernels = KernelSet(
        I=I, P=P, B=B, R=ms.red, E=None,
        idempotent=lawful["idempotent"],
        sources=tuple(sources),
        value_fn=ms.fn,
    )
    report = verify.check(kernels, ms.fn, ms.red, verify.source_tree_of(ms.config), b)
    return SynthResult(kernels, report, failures, stats.tried)


def _shift_pair_vars(p: KernelFn, idx: int):
    """Rename a component propagation's value variables so components can be
    recombined without clashes."""
    pattern = p.patterns[0]
    if isinstance(pattern, str):
        new = f"n{idx}"
        return new, _rename_var(p.body, pattern, new)
    # tie-aware component: rename each leaf n0,n1,.. to c{idx}_0,..
    names = _pattern_names(pattern)
    body = p.body
    renamed = []
    for j, nm in enumerate(names):
        body = _rename_var(body, nm, f"c{idx}_{j}")
        renamed.append(f"c{idx}_{j}")
    new_pat = _rebuild_pattern(pattern, iter(renamed))
    return new_pat, body


def _pattern_names(p) -> list[str]:
    if isinstance(p, str):
        return [p]
    return _pattern_names(p[0]) + _pattern_names(p[1])


def _rebuild_pattern(p, names):
    if isinstance(p, str):
        return next(names)
    a = _rebuild_pattern(p[0], names)
    b = _rebuild_pattern(p[1], names)
    return (a, b)
