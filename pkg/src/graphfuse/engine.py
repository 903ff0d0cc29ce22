"""Executable iterative models: synchronous pull/push with idempotent and
non-idempotent reduction, the rollback push variant, the four asynchronous
variants with a seeded scheduler, and the incremental pull model for
streaming updates.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Callable, Optional

from .graph import BOT, Edge, Graph, is_bot
from .kexpr import GraphInfo, KernelFn, WrappedPropagate
from .refsem import FLOAT_REL_TOL, value_eq
from .terms import Reduction

MODES = ("pull+", "pull-", "push+", "push-", "push-II",
         "apull+", "apull-", "apush+", "apush-")
ASYNC_MODES = ("apull+", "apull-", "apush+", "apush-")
HARD_ITER_CAP = 10_000


class EngineError(ValueError):
    pass


@dataclass
class KernelSet:
    """The synthesized iteration functions.  P and B are none-lifted; E
    defaults to the identity.  sources holds one slot per value component:
    a concrete vertex, a parameter name, or None."""

    I: KernelFn
    P: WrappedPropagate
    R: Reduction
    B: Optional[WrappedPropagate] = None
    E: Optional[KernelFn] = None
    idempotent: bool = True
    sources: tuple = (None,)
    value_fn: object = None

    def resolve_sources(self, params: dict) -> tuple:
        out = []
        for s in self.sources:
            if s is None:
                out.append(BOT)
            elif isinstance(s, int):
                out.append(s)
            else:
                if s not in params:
                    raise EngineError(f"unbound source parameter {s!r}")
                out.append(params[s])
        return tuple(out)

    def init_value(self, v: int, params: dict, info: GraphInfo):
        args = self.resolve_sources(params)
        return self.I(v, *args, info=info)

    def epilogue(self, n, info: GraphInfo):
        if self.E is None:
            return n
        return self.E(n, info=info)


@dataclass
class EngineState:
    current: dict
    previous: dict
    k: int
    b_prev: Optional[dict] = None  # last-propagated values (rollback push)
    b_cur: Optional[dict] = None


def init_state(g: Graph, kernels: KernelSet, params: Optional[dict] = None) -> EngineState:
    info = GraphInfo.of(g)
    params = params or {}
    cur = {v: kernels.init_value(v, params, info) for v in g.vertices}
    prev = {v: BOT for v in g.vertices}
    return EngineState(cur, prev, 1, dict(cur), dict(prev))


def changed_preds(g: Graph, st: EngineState, v: int) -> list[Edge]:
    return [e for e in g.in_edges(v)
            if not value_eq(st.current[e.src], st.previous[e.src])]


def step(st: EngineState, g: Graph, kernels: KernelSet, mode: str,
         scheduler: Optional[random.Random] = None,
         perm: Optional[Callable] = None,
         counter: Optional[list] = None) -> EngineState:
    """One iteration of the chosen model; `perm` optionally permutes the
    predecessor fold order (for scheduler-independence tests) and `counter`
    accumulates the number of propagations."""
    if mode not in MODES:
        raise EngineError(f"unknown mode {mode!r}")
    if mode in ("push-II", "apush-") and kernels.B is None:
        raise EngineError(f"mode {mode} requires a rollback function")
    info = GraphInfo.of(g)
    R, P, B = kernels.R, kernels.P, kernels.B
    cur, prev = st.current, st.previous
    order = perm or (lambda edges: edges)

    def count(n):
        if counter is not None:
            counter[0] += n

    if mode in ("pull+", "pull-"):
        new = {}
        for v in g.vertices:
            ins = g.in_edges(v)
            changed = [e for e in ins if not value_eq(cur[e.src], prev[e.src])]
            if not changed:
                new[v] = cur[v]
                continue
            acc = BOT
            for e in order(ins):
                acc = R.apply(acc, P(cur[e.src], e, info=info))
            count(len(ins))
            if mode == "pull+":
                acc = R.apply(cur[v], acc)
            new[v] = kernels.epilogue(acc, info)
        return EngineState(new, dict(cur), st.k + 1)

    if mode == "push+":
        new = {}
        for v in g.vertices:
            changed = changed_preds(g, st, v)
            acc = cur[v]
            for e in order(changed):
                acc = R.apply(acc, P(cur[e.src], e, info=info))
            count(len(changed))
            new[v] = kernels.epilogue(acc, info)
        return EngineState(new, dict(cur), st.k + 1)

    if mode == "push-":
        # a vertex recomputes (from the none value) only when it receives a
        # defined propagated value; silent vertices keep their value, which
        # is what keeps a source's zero-length contribution alive
        new = {}
        for v in g.vertices:
            ins = g.in_edges(v)
            acc = BOT
            received = False
            for e in order(ins):
                msg = P(cur[e.src], e, info=info)
                if not is_bot(msg):
                    received = True
                acc = R.apply(acc, msg)
            count(len(ins))
            new[v] = kernels.epilogue(acc, info) if received else cur[v]
        return EngineState(new, dict(cur), st.k + 1)

    if mode == "push-II":
        new = {}
        for v in g.vertices:
            changed = changed_preds(g, st, v)
            acc = cur[v]
            for e in order(changed):
                acc = R.apply(R.apply(acc, B(prev[e.src], e, info=info)),
                              P(cur[e.src], e, info=info))
            count(2 * len(changed))
            new[v] = kernels.epilogue(acc, info)
        return EngineState(new, dict(cur), st.k + 1)

    rng = scheduler or random.Random(0)
    if mode in ("apull+", "apull-"):
        work = dict(cur)
        done: set[int] = set()
        sweep = list(g.vertices)
        rng.shuffle(sweep)
        for v in sweep:
            ins = g.in_edges(v)
            changed = [e for e in ins if not value_eq(cur[e.src], prev[e.src])]
            if not changed:
                done.add(v)
                continue
            acc = BOT
            for e in ins:
                u = e.src
                val = work[u] if (u in done and rng.random() < 0.5) else cur[u]
                acc = R.apply(acc, P(val, e, info=info))
            count(len(ins))
            if mode == "apull+":
                acc = R.apply(cur[v], acc)
            work[v] = kernels.epilogue(acc, info)
            done.add(v)
        return EngineState(work, dict(cur), st.k + 1)

    if mode == "apush+":
        work = dict(cur)
        sweep = list(g.vertices)
        rng.shuffle(sweep)
        for v in sweep:
            changed = changed_preds(g, st, v)
            acc = work[v]
            for e in changed:
                acc = R.apply(acc, P(work[e.src], e, info=info))
            count(len(changed))
            work[v] = kernels.epilogue(acc, info)
        return EngineState(work, dict(cur), st.k + 1)

    if mode == "apush-":
        work = dict(cur)
        b_prev = st.b_prev if st.b_prev is not None else dict(prev)
        b_cur = st.b_cur if st.b_cur is not None else dict(cur)
        b_next = dict(b_cur)
        sweep = list(g.vertices)
        rng.shuffle(sweep)
        for v in sweep:
            changed = changed_preds(g, st, v)
            acc = work[v]
            for e in changed:
                u = e.src
                acc = R.apply(R.apply(acc, B(b_prev[u], e, info=info)),
                              P(b_cur[u], e, info=info))
            count(2 * len(changed))
            work[v] = kernels.epilogue(acc, info)
            b_next[v] = work[v]
        out = EngineState(work, dict(cur), st.k + 1)
        out.b_prev, out.b_cur = b_cur, b_next
        return out

    raise EngineError(mode)


def maps_equal(a: dict, b: dict) -> bool:
    return all(value_eq(a[v], b[v], FLOAT_REL_TOL) for v in a)


def run(g: Graph, kernels: KernelSet, mode: str, max_iters: Optional[int] = None,
        params: Optional[dict] = None, seed: int = 0,
        certified_terminating: bool = False,
        counter: Optional[list] = None):
    """Iterate until two consecutive states are value-equal or the iteration
    budget runs out; returns (vertex map, iterations, converged)."""
    if max_iters is None:
        max_iters = g.vertex_count * 4 if certified_terminating else HARD_ITER_CAP
    max_iters = min(max_iters, HARD_ITER_CAP)
    if max_iters < 1:
        raise EngineError("max_iters must be >= 1")
    rng = random.Random(seed)
    st = init_state(g, kernels, params)
    while st.k < max_iters:
        nxt = step(st, g, kernels, mode, scheduler=rng, counter=counter)
        if maps_equal(nxt.current, st.current):
            return nxt.current, nxt.k, True
        st = nxt
    return st.current, st.k, False


# ---------------------------------------------------------------------------
# Streaming
# ---------------------------------------------------------------------------

def run_incremental(g: Graph, prior: dict, delta: tuple, kernels: KernelSet,
                    max_iters: Optional[int] = None, params: Optional[dict] = None):
    """Incremental pull after one edge update.  delta is ("add", Edge) or
    ("remove", u, v); `g` is the graph after the update.  All vertices start
    from the prior result except, on removal, the removed edge's sink, which
    restarts from its initial value; the sink is force-updated in the first
    step."""
    info = GraphInfo.of(g)
    params = params or {}
    kind = delta[0]
    if kind == "add":
        sink = delta[1].dst
        start = dict(prior)
    elif kind == "remove":
        sink = delta[2]
        start = dict(prior)
        start[sink] = kernels.init_value(sink, params, info)
    else:
        raise EngineError(f"bad delta {delta!r}")
    if not (0 <= sink < g.vertex_count):
        raise EngineError("delta endpoint out of range")
    R, P = kernels.R, kernels.P
    if max_iters is None:
        max_iters = HARD_ITER_CAP
    cur = start
    prev = dict(prior)
    k = 1
    first = True
    while k < max_iters:
        new = {}
        for v in g.vertices:
            ins = g.in_edges(v)
            changed = [e for e in ins if not value_eq(cur[e.src], prev[e.src])]
            force = first and v == sink
            if not changed and not force:
                new[v] = cur[v]
                continue
            # active vertices recalculate from their initial value and their
            # remaining predecessors, which lets values worsen after removals
            acc = kernels.init_value(v, params, info)
            for e in ins:
                acc = R.apply(acc, P(cur[e.src], e, info=info))
            new[v] = kernels.epilogue(acc, info)
        first = False
        k += 1
        if maps_equal(new, cur):
            return new, k, True
        prev, cur = cur, new
    return cur, k, False


def reset_reachable(g: Graph, prior: dict, frm: int, kernels: KernelSet,
                    params: Optional[dict] = None) -> dict:
    """Prior values with every vertex reachable from `frm` (itself included)
    reset to its initial value; the removal fallback when the worsening
    condition fails."""
    info = GraphInfo.of(g)
    params = params or {}
    out = dict(prior)
    for v in g.reachable_from(frm):
        out[v] = kernels.init_value(v, params, info)
    return out


# ---------------------------------------------------------------------------
# Hand-written kernel sets
# ---------------------------------------------------------------------------

def pagerank_kernels(damping: float = 0.85) -> KernelSet:
    """The rank kernels: initialize to 1/|V|, propagate rank/outdeg, sum, and
    apply the damped affine epilogue."""
    from .kexpr import KBin, KDeg, KEdgeFn, KLit, KVCount, KVar, FLOAT, INT

    I = KernelFn(("v",), KBin("/", KLit(1.0, FLOAT), KVCount()))
    P = WrappedPropagate(KernelFn(("n", "l"),
                                  KBin("/", KVar("n", FLOAT),
                                       KDeg("outdeg", KEdgeFn("src", KVar("l", "Edge"))))))
    from .terms import Builtin
    E = KernelFn(("n",),
                 KBin("+", KBin("*", KLit(damping, FLOAT), KVar("n", FLOAT)),
                      KBin("/", KLit(1.0 - damping, FLOAT), KVCount())))
    return KernelSet(I=I, P=P, R=Builtin("sum"), B=None, E=E,
                     idempotent=False, sources=())


def sssp_kernels(source_param: str = "s") -> KernelSet:
    """The shortest-path kernels in their standard form."""
    from .kexpr import KBin, KEdgeFn, KIte, KLit, KVar, VERTEX, INT, EDGE
    from .terms import Builtin

    I = KernelFn(("v", "s0"),
                 KIte(KBin("=", KVar("v", VERTEX), KVar("s0", VERTEX)),
                      KLit(0, INT), KLit(BOT, INT)))
    P = WrappedPropagate(KernelFn(("n", "l"),
                                  KBin("+", KVar("n", INT),
                                       KEdgeFn("weight", KVar("l", EDGE)))))
    return KernelSet(I=I, P=P, R=Builtin("min"), idempotent=True,
                     sources=(source_param,))


def format_dump(values: dict) -> str:
    """Result dump: one `vertex value` line per vertex, the none value
    printed literally."""
    lines = []
    for v in sorted(values):
        lines.append(f"{v} {format_value(values[v])}")
    return "\n".join(lines) + "\n"


def format_value(x) -> str:
    if is_bot(x):
        return "⊥"
    if isinstance(x, tuple):
        return "(" + ", ".join(format_value(c) for c in x) + ")"
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, frozenset):
        return "{" + ", ".join(str(e) for e in sorted(x)) + "}"
    if isinstance(x, float):
        return repr(x)
    return str(x)
