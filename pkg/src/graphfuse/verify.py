"""Bounded exhaustive checking of the kernel correctness and termination
conditions, with replayable counterexample witnesses and SMT-LIB2 export.

The check enumerates every attributed path up to the bounds (deduplicated by
the path-function value and endpoint, keeping one concrete representative),
every edge over the value grid, and instantiates each condition concretely.
Passing is sound only within the bounds; failing is sound outright because
every witness replays.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

from .graph import BOT, is_bot, normalize_value
from .kexpr import KernelFn, WrappedPropagate
from .terms import (
    Builtin, PConst, PFn, PPair, PSingleton, PathExpr, Reduction, TermError,
    TieAware, Pairwise,
)

CONDITION_NAMES = tuple(f"C{i}" for i in range(1, 13)) + ("C10-strong",)


@dataclass(frozen=True)
class Bounds:
    """Exhaustive-search bounds: path length, integer attribute grid, and the
    vertex count of the symbolic graphlet."""

    max_len: int = 3
    grid: tuple[int, ...] = (0, 1, 2, 3)
    vertices: int = 3

    def __post_init__(self):
        if self.max_len < 0 or not self.grid or self.vertices < 2:
            raise ValueError("bounds must be finite and non-empty")


# ---------------------------------------------------------------------------
# Path-value bookkeeping
# ---------------------------------------------------------------------------

def zero_value(fn: PathExpr, v: int):
    """Path-function value of the zero-length path at v."""
    if isinstance(fn, PFn):
        return {"length": 0, "weight": 0, "capacity": BOT,
                "head": v, "penultimate": v}[fn.name]
    if isinstance(fn, PConst):
        return fn.value
    if isinstance(fn, PPair):
        return (zero_value(fn.first, v), zero_value(fn.second, v))
    if isinstance(fn, PSingleton):
        inner = zero_value(fn.of, v)
        return BOT if is_bot(inner) else frozenset((inner,))
    raise TermError(f"bad path function {fn!r}")


def extend_value(fn: PathExpr, val, w: int, c: int, src: int, dst: int):
    """Path-function value of p.e given the value of p and the edge
    attributes (src is the last vertex of p)."""
    if isinstance(fn, PFn):
        n = fn.name
        if n == "length":
            return val + 1
        if n == "weight":
            return val + w
        if n == "capacity":
            return c if is_bot(val) else min(val, c)
        if n == "head":
            return val
        if n == "penultimate":
            return src
    if isinstance(fn, PConst):
        return val
    if isinstance(fn, PPair):
        return (extend_value(fn.first, val[0], w, c, src, dst),
                extend_value(fn.second, val[1], w, c, src, dst))
    if isinstance(fn, PSingleton):
        if is_bot(val):
            return BOT
        inner = next(iter(val))
        out = extend_value(fn.of, inner, w, c, src, dst)
        return BOT if is_bot(out) else frozenset((out,))
    raise TermError(f"bad path function {fn!r}")


def eval_on_walk(fn: PathExpr, vertices: tuple[int, ...], attrs: dict):
    """Evaluate fn over an explicit vertex walk with per-edge attributes."""
    val = zero_value(fn, vertices[0])
    for u, v in zip(vertices, vertices[1:]):
        w, c = attrs[(u, v)]
        val = extend_value(fn, val, w, c, u, v)
    return val


@dataclass(frozen=True)
class PathState:
    """One representative attributed path plus its (possibly source-masked)
    function value; `raw` is the unconditioned value used for extensions and
    `ok` the mask tree (True / False / pair of masks)."""

    value: object
    dest: int
    walk: tuple[int, ...]
    attrs: tuple  # sorted ((u,v),(w,c)) pairs
    raw: object = None
    ok: object = True

    def attr_map(self) -> dict:
        return dict(self.attrs)


def apply_ok(value, ok):
    if ok is True:
        return value
    if ok is False:
        return BOT
    if is_bot(value):
        return BOT
    return normalize_value((apply_ok(value[0], ok[0]), apply_ok(value[1], ok[1])))


def state_ext(fn, st: PathState, w: int, c: int, dst: int):
    """Masked value of the state's path extended by one edge."""
    return apply_ok(extend_value(fn, st.raw, w, c, st.dest, dst), st.ok)


def build_universe(fn: PathExpr, source: Optional[int], b: Bounds) -> list[PathState]:
    """Attributed paths up to the bounds, deduplicated by (value, dest, head).
    With a source, values are conditioned: paths not starting there carry the
    none value (raw values keep extending underneath)."""
    states: list[PathState] = []
    seen: set = set()
    frontier: list[PathState] = []
    for v in range(b.vertices):
        raw = zero_value(fn, v)
        ok = source is None or v == source
        st = PathState(raw if ok else BOT, v, (v,), (), raw, ok)
        frontier.append(st)
        key = (st.value, v, v)
        if key not in seen:
            seen.add(key)
            states.append(st)
    for _ in range(b.max_len):
        nxt = []
        for st in frontier:
            for dst in range(b.vertices):
                if dst == st.dest:
                    continue
                amap = st.attr_map()
                fixed = amap.get((st.dest, dst))
                choices = [fixed] if fixed else [(w, c) for w in b.grid for c in b.grid]
                for (w, c) in choices:
                    raw = extend_value(fn, st.raw, w, c, st.dest, dst)
                    val = apply_ok(raw, st.ok)
                    new_attrs = dict(amap)
                    new_attrs[(st.dest, dst)] = (w, c)
                    st2 = PathState(val, dst, st.walk + (dst,),
                                    tuple(sorted(new_attrs.items())), raw, st.ok)
                    key = (val, dst, st2.walk[0])
                    if key not in seen:
                        seen.add(key)
                        states.append(st2)
                        nxt.append(st2)
                    elif len(nxt) < 4000:
                        nxt.append(st2)
        frontier = nxt
    return states


def source_tree_of(config) -> object:
    """Mirror a configuration tree as a tree of source slots."""
    from .terms import Config, ConfigPair

    if isinstance(config, ConfigPair):
        return (source_tree_of(config.first), source_tree_of(config.second))
    assert isinstance(config, Config)
    return config.source


def source_slots(tree) -> list:
    if isinstance(tree, tuple):
        return source_slots(tree[0]) + source_slots(tree[1])
    return [tree]


def ok_tree(tree, head: int, assign: dict):
    """The mask a source-slot tree induces at a given path head."""
    if isinstance(tree, tuple):
        return (ok_tree(tree[0], head, assign), ok_tree(tree[1], head, assign))
    src = assign.get(tree, tree) if isinstance(tree, str) else tree
    return src is None or head == src


def mask_value(fn: PathExpr, value, tree, head: int, assign: dict):
    """Condition a raw path value: components whose source condition fails at
    the path head become none."""
    return apply_ok(value, ok_tree(tree, head, assign))


def masked_universe(states: list[PathState], fn: PathExpr, tree, assign: dict) -> list[PathState]:
    """Apply a source assignment to a raw universe, re-deduplicating."""
    out = []
    seen = set()
    for st in states:
        ok = ok_tree(tree, st.walk[0], assign)
        val = apply_ok(st.raw, ok)
        key = (val, st.dest)
        if key in seen:
            continue
        seen.add(key)
        out.append(PathState(val, st.dest, st.walk, st.attrs, st.raw, ok))
    return out


def source_assignments(tree, b: Bounds) -> list[dict]:
    symbolic = sorted({s for s in source_slots(tree) if isinstance(s, str)})
    if not symbolic:
        return [{}]
    pools = [range(min(b.vertices, 2)) for _ in symbolic]
    return [dict(zip(symbolic, combo)) for combo in itertools.product(*pools)]


def edge_universe(b: Bounds):
    out = []
    for u in range(b.vertices):
        for v in range(b.vertices):
            if u == v:
                continue
            for w in b.grid:
                for c in b.grid:
                    out.append((u, v, w, c))
    return out


@dataclass(frozen=True)
class VEdge:
    """A concrete edge instance used by the checks (duck-typed like a graph
    edge)."""

    src: int
    dst: int
    weight: int
    capacity: int


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

@dataclass
class Witness:
    condition: str
    parts: dict
    lhs: object
    rhs: object

    def describe(self) -> str:
        bits = ", ".join(f"{k}={v}" for k, v in self.parts.items())
        return f"{self.condition} violated: {bits}; lhs={self.lhs} rhs={self.rhs}"


def replay_witness(w: Witness, red: Reduction, fn: PathExpr) -> bool:
    """Re-evaluate a path/edge witness concretely; True when the violation
    reproduces."""
    if w.condition in ("C10-strong", "C12"):
        attrs = dict(w.parts["attrs"])
        e = w.parts["edge"]
        val = eval_on_walk(fn, w.parts["path"], attrs)
        ext = extend_value(fn, val, e.weight, e.capacity, e.src, e.dst)
        got = red.apply(val, ext)
        if w.condition == "C10-strong":
            return not _veq(got, val)
        return not (_veq(got, val) and not _veq(val, ext))
    if w.condition == "C10":
        attrs = dict(w.parts["attrs"])
        full = eval_on_walk(fn, w.parts["path"], attrs)
        simp = eval_on_walk(fn, w.parts["simple"], attrs)
        return not _veq(red.apply(full, simp), simp)
    if w.condition == "C9":
        n = w.parts["n"]
        return not _veq(red.apply(n, n), n)
    if w.condition == "C7":
        a, b = w.parts["n"], w.parts["n'"]
        return not _veq(red.apply(a, b), red.apply(b, a))
    return not _veq(w.lhs, w.rhs)


@dataclass
class ConditionReport:
    results: dict = field(default_factory=dict)  # name -> (status, Witness|reason|None)

    def set_pass(self, name):
        self.results[name] = ("pass", None)

    def set_fail(self, name, witness):
        self.results[name] = ("fail", witness)

    def set_skip(self, name, reason):
        self.results[name] = ("skipped", reason)

    def ok(self, *names) -> bool:
        return all(self.results.get(n, ("fail", None))[0] == "pass" for n in names)

    def status(self, name) -> str:
        return self.results.get(name, ("skipped",))[0]

    def witness(self, name):
        st, w = self.results.get(name, ("skipped", None))
        return w if st == "fail" else None

    def to_obj(self) -> dict:
        out = {}
        for name, (st, info) in sorted(self.results.items()):
            if st == "fail":
                out[name] = {"status": "fail", "witness": info.describe()}
            elif st == "skipped":
                out[name] = {"status": "skipped", "reason": info}
            else:
                out[name] = {"status": "pass"}
        return out


# ---------------------------------------------------------------------------
# Individual condition checks
# ---------------------------------------------------------------------------

def _values_of(universe, red: Reduction, cap: int = 40):
    vals = []
    seen = set()
    for st in universe:
        if st.value not in seen:
            seen.add(st.value)
            vals.append(st.value)
    vals = vals[:cap]
    folded = []
    pool = list(vals)
    for _ in range(2):  # two fold rounds cover repeated non-idempotent folds
        new = []
        for a, b in itertools.combinations_with_replacement(pool, 2):
            x = red.apply(a, b)
            if x not in seen:
                seen.add(x)
                new.append(x)
        pool = new[:cap]
        folded.extend(pool)
        if not pool:
            break
    return [BOT] + vals + folded[:cap]


def check_c1_c2(I: KernelFn, fn: PathExpr, sourced: bool, b: Bounds):
    """Initialization agrees with the zero-length path under the path
    condition (single-source leaf form used during synthesis)."""
    failures = []
    sources = range(b.vertices) if sourced else [None]
    for s in sources:
        for v in range(b.vertices):
            expected = zero_value(fn, v) if (s is None or v == s) else BOT
            got = I(v, BOT if s is None else s)
            cond = "C1" if (s is None or v == s) else "C2"
            if not _veq(got, expected):
                failures.append((cond, {"vertex": v, "source": s}, got, expected))
    return failures


def check_c1_c2_tree(I, fn: PathExpr, tree, b: Bounds):
    """Initialization check for assembled kernels whose components carry
    their own sources."""
    failures = []
    slots = source_slots(tree)
    for assign in source_assignments(tree, b):
        args = [a if not isinstance(a, str) else assign[a] for a in slots]
        args = [BOT if a is None else a for a in args]
        for v in range(b.vertices):
            expected = mask_value(fn, zero_value(fn, v), tree, v, assign)
            got = I(v, *args)
            is_c1 = not is_bot(expected)
            if not _veq(got, expected):
                failures.append(("C1" if is_c1 else "C2",
                                 {"vertex": v, "sources": tuple(args)}, got, expected))
    return failures


def check_c3(P, b: Bounds):
    for (u, v, w, c) in edge_universe(b):
        e = VEdge(u, v, w, c)
        got = P(BOT, e)
        if not is_bot(got):
            return [("C3", {"edge": e}, got, BOT)]
    return []


def _c4_instances(universe, b: Bounds, endpoint_sensitive: bool):
    by_dest: dict[int, list[PathState]] = {}
    for st in universe:
        by_dest.setdefault(st.dest, []).append(st)
    seen = set()
    for dest, states in sorted(by_dest.items()):
        for s1 in states:
            if is_bot(s1.value):
                continue
            for s2 in states:
                if is_bot(s2.value):
                    continue
                for dst in range(b.vertices):
                    if dst == dest:
                        continue
                    for w in b.grid:
                        for c in b.grid:
                            key = (s1.value, s2.value, w, c)
                            if endpoint_sensitive:
                                key += (dest, dst)
                            if key in seen:
                                continue
                            seen.add(key)
                            yield s1, s2, VEdge(dest, dst, w, c)


def _endpoint_sensitive(fn: PathExpr) -> bool:
    if isinstance(fn, PFn):
        return fn.name in ("head", "penultimate")
    if isinstance(fn, PPair):
        return _endpoint_sensitive(fn.first) or _endpoint_sensitive(fn.second)
    if isinstance(fn, PSingleton):
        return _endpoint_sensitive(fn.of)
    return False


def check_c4(P, R: Reduction, fn: PathExpr, universe, b: Bounds, limit=None):
    """Aggregate propagation: propagating a reduction equals reducing the
    extensions.  Instances with a none path value are skipped (path functions
    are treated as total on real paths)."""
    failures = []
    sens = _endpoint_sensitive(fn)
    count = 0
    for s1, s2, e in _c4_instances(universe, b, sens):
        lhs = P(R.apply(s1.value, s2.value), e)
        ext1 = state_ext(fn, s1, e.weight, e.capacity, e.dst)
        ext2 = state_ext(fn, s2, e.weight, e.capacity, e.dst)
        rhs = R.apply(ext1, ext2)
        if not _veq(lhs, rhs):
            failures.append(("C4", {"path1": s1.walk, "path2": s2.walk, "edge": e,
                                    "attrs1": s1.attrs, "attrs2": s2.attrs}, lhs, rhs))
            return failures
        count += 1
        if limit and count >= limit:
            break
    return failures


def check_c5(P, fn: PathExpr, universe, b: Bounds, skip_none=False, limit=None):
    """Single path: propagating a path value equals the extended path's
    value."""
    failures = []
    sens = _endpoint_sensitive(fn)
    seen = set()
    count = 0
    for st in universe:
        if skip_none and is_bot(st.value):
            continue
        for dst in range(b.vertices):
            if dst == st.dest:
                continue
            for w in b.grid:
                for c in b.grid:
                    key = (st.value, w, c) + ((st.dest, dst) if sens else ())
                    if key in seen:
                        continue
                    seen.add(key)
                    e = VEdge(st.dest, dst, w, c)
                    lhs = P(st.value, e)
                    rhs = state_ext(fn, st, w, c, dst)
                    if not _veq(lhs, rhs):
                        failures.append(("C5", {"path": st.walk, "attrs": st.attrs, "edge": e},
                                         lhs, rhs))
                        return failures
                    count += 1
                    if limit and count >= limit:
                        return failures
    return failures


def check_c6_to_c9(R: Reduction, values) -> dict:
    out = {}
    # C6 identity
    out["C6"] = None
    for n in values:
        if not _veq(R.apply(n, BOT), n) or not _veq(R.apply(BOT, n), n):
            out["C6"] = ("C6", {"n": n}, R.apply(n, BOT), n)
            break
    defined = [v for v in values if not is_bot(v)]
    out["C7"] = None
    for a, b in itertools.product(defined, repeat=2):
        if not _veq(R.apply(a, b), R.apply(b, a)):
            out["C7"] = ("C7", {"n": a, "n'": b}, R.apply(a, b), R.apply(b, a))
            break
    out["C8"] = None
    small = defined[:12]
    for a, b, c in itertools.product(small, repeat=3):
        if not _veq(R.apply(R.apply(a, b), c), R.apply(a, R.apply(b, c))):
            out["C8"] = ("C8", {"n": a, "n'": b, "n''": c},
                         R.apply(R.apply(a, b), c), R.apply(a, R.apply(b, c)))
            break
    out["C9"] = None
    for a in defined:
        if not _veq(R.apply(a, a), a):
            out["C9"] = ("C9", {"n": a}, R.apply(a, a), a)
            break
    return out


def check_c10_strong(R: Reduction, fn: PathExpr, universe, b: Bounds):
    """Edge-based termination: reducing a path value with any one-edge
    extension keeps the original value."""
    for st in universe:
        if is_bot(st.value):
            continue
        for dst in range(b.vertices):
            if dst == st.dest:
                continue
            for w in b.grid:
                for c in b.grid:
                    ext = state_ext(fn, st, w, c, dst)
                    got = R.apply(st.value, ext)
                    if not _veq(got, st.value):
                        e = VEdge(st.dest, dst, w, c)
                        return [("C10-strong", {"path": st.walk, "attrs": st.attrs,
                                                "edge": e}, got, st.value)]
    return []


def check_c10_simple(R: Reduction, fn: PathExpr, b: Bounds):
    """Cycle-removal termination on raw bounded walks (reporting form)."""
    vertices = min(b.vertices, 3)
    grid = b.grid[: min(len(b.grid), 2)]
    walks = [(v,) for v in range(vertices)]
    for _ in range(max(b.max_len, 2)):
        walks = [wk + (d,) for wk in walks for d in range(vertices) if d != wk[-1]]
        for wk in walks:
            simple = _simplify(wk)
            if simple == wk:
                continue
            pairs = sorted({(u, v) for u, v in zip(wk, wk[1:])})
            for combo in itertools.product(grid, repeat=2 * len(pairs)):
                attrs = {
                    pairs[i]: (combo[2 * i], combo[2 * i + 1]) for i in range(len(pairs))
                }
                full = eval_on_walk(fn, wk, attrs)
                simp = eval_on_walk(fn, simple, attrs)
                got = R.apply(full, simp)
                if not _veq(got, simp):
                    return [("C10", {"path": wk, "simple": simple, "attrs": tuple(attrs.items())},
                             got, simp)]
    return []


def _simplify(walk: tuple[int, ...]) -> tuple[int, ...]:
    out = list(walk)
    i = 0
    while i < len(out):
        try:
            j = out.index(out[i], i + 1)
        except ValueError:
            i += 1
            continue
        del out[i:j]
    return tuple(out)


def check_c11(P, B, R: Reduction, values, b: Bounds):
    """Rollback cancels the previously propagated value.  Tie-aware pair
    reductions are checked on states that already absorbed the propagation
    (the only states push-II rolls back)."""
    edges = [VEdge(u, v, w, c) for (u, v, w, c) in edge_universe(b)][:48]
    tie = isinstance(R, TieAware) or (
        isinstance(R, Pairwise) and any(isinstance(x, TieAware) for x in (R.first, R.second))
    )
    for n in values:
        if is_bot(n):
            continue
        for nprime in values:
            if is_bot(nprime):
                continue
            for e in edges:
                p_val = P(nprime, e)
                b_val = B(nprime, e)
                if tie:
                    s = R.apply(n, p_val)
                    lhs = R.apply(R.apply(s, b_val), p_val)
                    if not _veq(lhs, s):
                        return [("C11", {"n": n, "n'": nprime, "edge": e}, lhs, s)]
                else:
                    lhs = R.apply(n, R.apply(p_val, b_val))
                    if not _veq(lhs, n):
                        return [("C11", {"n": n, "n'": nprime, "edge": e}, lhs, n)]
    return []


def check_c12(R: Reduction, fn: PathExpr, universe, b: Bounds):
    """Worsening: extending a path yields an unequal, less favorable value."""
    for st in universe:
        if is_bot(st.value):
            continue
        for dst in range(b.vertices):
            if dst == st.dest:
                continue
            for w in b.grid:
                for c in b.grid:
                    ext = state_ext(fn, st, w, c, dst)
                    got = R.apply(st.value, ext)
                    if not (_veq(got, st.value) and not _veq(st.value, ext)):
                        e = VEdge(st.dest, dst, w, c)
                        return [("C12", {"path": st.walk, "attrs": st.attrs, "edge": e},
                                 got, st.value)]
    return []


def check_strong_termination(R: Reduction, fn: PathExpr, b: Optional[Bounds] = None) -> bool:
    b = b or Bounds()
    uni = build_universe(fn, None, b)
    return not check_c10_strong(R, fn, uni, b)


def _veq(a, b) -> bool:
    if is_bot(a) or is_bot(b):
        return a is b
    if isinstance(a, tuple) and isinstance(b, tuple):
        return len(a) == len(b) and all(_veq(x, y) for x, y in zip(a, b))
    if isinstance(a, bool) != isinstance(b, bool):
        return False
    return a == b


# ---------------------------------------------------------------------------
# Top-level check
# ---------------------------------------------------------------------------

def check(kernels, fn: PathExpr, red: Reduction, source_tree=None,
          bounds: Optional[Bounds] = None) -> ConditionReport:
    """Check every condition for an assembled kernel set against the factored
    reduction (fn, red); source_tree mirrors the configuration (a slot per
    component: vertex parameter name, concrete id, or None)."""
    b = bounds or Bounds()
    rep = ConditionReport()
    if source_tree is None:
        source_tree = None if not isinstance(fn, PPair) else _all_none_tree(fn)
    raw = build_universe(fn, None, b)
    universes = []
    for assign in source_assignments(source_tree, b):
        universes.extend(masked_universe(raw, fn, source_tree, assign))
    values = _values_of(universes, red)

    def record(name, fails):
        if fails:
            cname, parts, lhs, rhs = fails[0]
            rep.set_fail(name, Witness(cname, parts, lhs, rhs))
        else:
            rep.set_pass(name)

    I, P, B = kernels.I, kernels.P, kernels.B
    c12 = check_c1_c2_tree(I, fn, source_tree, b)
    record("C1", [f for f in c12 if f[0] == "C1"])
    record("C2", [f for f in c12 if f[0] == "C2"])
    record("C3", check_c3(P, b))
    record("C4", check_c4(P, red, fn, universes, b))
    record("C5", check_c5(P, fn, universes, b, skip_none=False))
    for name, fail in check_c6_to_c9(red, values).items():
        record(name, [fail] if fail else [])
    record("C10", check_c10_simple(red, fn, b))
    record("C10-strong", check_c10_strong(red, fn, universes, b))
    if B is None:
        rep.set_skip("C11", "no rollback function")
    else:
        record("C11", check_c11(P, B, red, values, b))
    record("C12", check_c12(red, fn, universes, b))
    return rep


def _all_none_tree(fn: PathExpr):
    return None


MODES_SYNC_IDEM = ("pull+", "push+")
MODES_SYNC_NONIDEM = ("pull-", "push-")


def select_modes(rep: ConditionReport, acyclic: bool, sourced: bool,
                 source_on_cycle: bool, has_rollback: bool = False) -> dict:
    """Certified iteration modes, termination verdict, and streaming notes
    derived from a condition report."""
    modes: set[str] = set()
    c1_8 = rep.ok("C1", "C2", "C3", "C4", "C5", "C6", "C7", "C8")
    if c1_8 and rep.ok("C9"):
        modes.update(("pull+", "push+"))
        if rep.ok("C4"):
            modes.update(("apull+", "apush+"))
    if c1_8 and sourced and not source_on_cycle:
        modes.update(("pull-", "push-"))
        modes.add("apull-")
        if has_rollback and rep.ok("C11"):
            modes.update(("push-II", "apush-"))
    termination = acyclic or rep.ok("C10-strong")
    return {
        "modes": sorted(modes),
        "termination_guaranteed": termination,
        "incremental_add_ok": bool(modes) and rep.ok("C9"),
        "incremental_remove_ok": rep.ok("C12"),
        "notes": [] if modes else ["no certified modes"],
    }


# ---------------------------------------------------------------------------
# SMT-LIB2 export
# ---------------------------------------------------------------------------

_SMT_PRELUDE = """\
; bounded-condition audit script (solver-agnostic SMT-LIB2)
(set-logic ALL)
(declare-datatypes ((OptInt 0)) (((mk-val (val Int)) (none))))
(declare-datatypes ((Path 0)) (((pzero (pvertex Int)) (psnoc (pinit Path) (plast Int)))))
(declare-fun eweight (Int Int) Int)
(declare-fun ecapacity (Int Int) Int)
(define-fun-rec plen ((p Path)) Int
  (ite ((_ is pzero) p) 0 (+ (plen (pinit p)) 1)))
(define-fun-rec pdest ((p Path)) Int
  (ite ((_ is pzero) p) (pvertex p) (plast p)))
(define-fun-rec pweight ((p Path)) Int
  (ite ((_ is pzero) p) 0 (+ (pweight (pinit p)) (eweight (pdest (pinit p)) (plast p)))))
(define-fun-rec pcapacity ((p Path)) OptInt
  (ite ((_ is pzero) p) none
    (ite ((_ is pzero) (pinit p)) (mk-val (ecapacity (pdest (pinit p)) (plast p)))
      (mk-val (ite (<= (val (pcapacity (pinit p))) (ecapacity (pdest (pinit p)) (plast p)))
                   (val (pcapacity (pinit p)))
                   (ecapacity (pdest (pinit p)) (plast p)))))))
(define-fun-rec ppenultimate ((p Path)) Int
  (ite ((_ is pzero) p) (pvertex p) (pdest (pinit p))))
(define-fun-rec phd ((p Path)) Int
  (ite ((_ is pzero) p) (pvertex p) (phd (pinit p))))
"""


def _smt_pathfn(fn: PathExpr) -> str:
    if isinstance(fn, PFn):
        return {"length": "plen", "weight": "pweight", "capacity": "pcapacity",
                "head": "phd", "penultimate": "ppenultimate"}[fn.name]
    raise TermError("unsupported value type for SMT encoding (scalar path functions only)")


def _smt_red(red: Reduction, a: str, bnd: str) -> str:
    if isinstance(red, Builtin):
        if red.name == "min":
            return f"(ite (<= {a} {bnd}) {a} {bnd})"
        if red.name == "max":
            return f"(ite (>= {a} {bnd}) {a} {bnd})"
        if red.name == "sum":
            return f"(+ {a} {bnd})"
        if red.name == "or":
            return f"(or {a} {bnd})"
        if red.name == "and":
            return f"(and {a} {bnd})"
    raise TermError("unsupported value type for SMT encoding (builtin reductions only)")


def emit_smtlib(condition: str, fn: PathExpr, red: Reduction, kernels=None) -> str:
    """An SMT-LIB2 script whose satisfiability witnesses a violation of the
    condition (the condition is asserted negated)."""
    if condition not in CONDITION_NAMES:
        raise TermError(f"unknown condition {condition!r}")
    needs_paths = condition in ("C1", "C2", "C3", "C4", "C5", "C10", "C10-strong", "C11", "C12")
    f = _smt_pathfn(fn) if needs_paths else "plen"
    lines = [_SMT_PRELUDE]
    lines.append(f"; condition {condition} for reduction over {f}")
    p_def = None
    if kernels is not None and getattr(kernels, "P", None) is not None:
        p_def = _smt_kernel_p(kernels.P)
        if p_def:
            lines.append(p_def)
    if condition in ("C10-strong", "C12", "C4", "C5"):
        lines.append("(declare-const p Path)")
        lines.append("(declare-const u Int)")
        lines.append("(declare-const x Int)")
        lines.append("(assert (= u (pdest p)))")
        lines.append("(assert (distinct u x))")
        ext = f"(psnoc p x)"
        fv, fe = f"({f} p)", f"({f} {ext})"
        if condition == "C10-strong":
            lines.append(f"(assert (not (= {_smt_red(red, fv, fe)} {fv})))")
        elif condition == "C12":
            lines.append(
                f"(assert (not (and (= {_smt_red(red, fv, fe)} {fv}) (distinct {fv} {fe}))))"
            )
        elif condition == "C5":
            lines.append(f"(assert (not (= (prop {fv} u x) {fe})))" if p_def
                         else f"(assert (not (= {fv} {fe}))) ; no propagation function supplied")
        else:  # C4
            lines.append("(declare-const q Path)")
            lines.append("(assert (= (pdest q) u))")
            gv = f"({f} q)"
            ge = f"({f} (psnoc q x))"
            both = _smt_red(red, fv, gv)
            exts = _smt_red(red, fe, ge)
            lines.append(f"(assert (not (= (prop {both} u x) {exts})))" if p_def
                         else f"(assert (not (= {both} {exts}))) ; no propagation function supplied")
    elif condition in ("C6", "C7", "C8", "C9"):
        lines.append("(declare-const n Int)")
        lines.append("(declare-const m Int)")
        lines.append("(declare-const k Int)")
        if condition == "C7":
            lines.append(f"(assert (not (= {_smt_red(red, 'n', 'm')} {_smt_red(red, 'm', 'n')})))")
        elif condition == "C8":
            ab = _smt_red(red, "n", "m")
            bc = _smt_red(red, "m", "k")
            lines.append(f"(assert (not (= {_smt_red(red, ab, 'k')} {_smt_red(red, 'n', bc)})))")
        elif condition == "C9":
            lines.append(f"(assert (not (= {_smt_red(red, 'n', 'n')} n)))")
        else:
            lines.append("; identity on the none value holds by the lifted wrapper")
            lines.append("(assert false)")
    else:
        lines.append("; initialization/propagation conditions are checked per vertex")
        lines.append("(declare-const v Int)")
        lines.append(f"(assert (not (= ({f} (pzero v)) ({f} (pzero v)))))")
    lines.append("(check-sat)")
    lines.append("(get-model)")
    return "\n".join(lines) + "\n"


def _smt_kernel_p(P) -> Optional[str]:
    from .kexpr import KBin, KEdgeFn, KIte, KLit, KNeg, KVar

    inner = P.inner if isinstance(P, WrappedPropagate) else P
    if not isinstance(inner, KernelFn) or not isinstance(inner.patterns[0], str):
        return None

    def go(e):
        if isinstance(e, KLit):
            if is_bot(e.value):
                raise TermError("none literal")
            return str(e.value).lower()
        if isinstance(e, KVar):
            return {"l": None}.get(e.name, e.name) or "l"
        if isinstance(e, KBin):
            a, bnd = go(e.left), go(e.right)
            op = {"+": "+", "-": "-", "*": "*", "=": "=", "<": "<"}.get(e.op)
            if op:
                return f"({op} {a} {bnd})"
            if e.op == "min":
                return f"(ite (<= {a} {bnd}) {a} {bnd})"
            if e.op == "max":
                return f"(ite (>= {a} {bnd}) {a} {bnd})"
            raise TermError(e.op)
        if isinstance(e, KNeg):
            return f"(- {go(e.arg)})"
        if isinstance(e, KIte):
            return f"(ite {go(e.cond)} {go(e.then)} {go(e.other)})"
        if isinstance(e, KEdgeFn):
            if e.name == "weight":
                return "(eweight esrc edst)"
            if e.name == "capacity":
                return "(ecapacity esrc edst)"
            if e.name == "src":
                return "esrc"
            if e.name == "dst":
                return "edst"
        raise TermError(f"cannot encode {e!r}")

    try:
        body = go(inner.body)
    except TermError:
        return None
    n = inner.patterns[0]
    return (f"(define-fun prop (({n} Int) (esrc Int) (edst Int)) Int\n  {body})")
