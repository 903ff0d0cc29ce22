"""Executable denotational reference semantics: the trusted, intentionally
brute-force oracle.  Path sets are truncated at a length bound; on acyclic
graphs (or when the termination condition is certified) a bound exists past
which the result is exact.
"""
from __future__ import annotations

from typing import Optional, Union

from .graph import BOT, Graph, Path, is_bot, normalize_value, paths_to_all
from .terms import (
    ArgsRed,
    Config,
    ConfigPair,
    Pairwise,
    PPair,
    EBin,
    ELit,
    ESingleton,
    EUn,
    EVar,
    Expr,
    ILet,
    MBin,
    MLit,
    MScalar,
    MSingle,
    MTerm,
    MUn,
    MUnfactored,
    MVar,
    Ms,
    MsBot,
    MsPair,
    Node,
    PathRed,
    Paths,
    PTerm,
    RBin,
    RLit,
    RSingle,
    RTerm,
    RUn,
    RVar,
    Rs,
    RsBot,
    RsPair,
    TermError,
    TripleLet,
    VertexRed,
    apply_op,
    apply_unop,
    path_expr_eval,
    tree_bind,
    BACKWARD,
)

VertexMap = dict

FLOAT_REL_TOL = 1e-9


def value_eq(a, b, float_rel: Optional[float] = None) -> bool:
    """Structural value equality; floats compare with a relative tolerance
    when one is given, exactly otherwise."""
    if is_bot(a) or is_bot(b):
        return a is b
    if isinstance(a, tuple) and isinstance(b, tuple):
        return len(a) == len(b) and all(value_eq(x, y, float_rel) for x, y in zip(a, b))
    if isinstance(a, frozenset) and isinstance(b, frozenset):
        return a == b
    if isinstance(a, bool) or isinstance(b, bool):
        return a is b
    if isinstance(a, float) or isinstance(b, float):
        if float_rel is None:
            return a == b
        if a == b:
            return True
        denom = max(abs(a), abs(b), 1e-300)
        return abs(a - b) / denom <= float_rel
    return a == b


def map_eq(a, b, float_rel: Optional[float] = None) -> bool:
    if is_bot(a) or is_bot(b):
        return a is b
    if set(a) != set(b):
        return False
    return all(value_eq(a[k], b[k], float_rel) for k in a)


def result_eq(a, b, float_rel: Optional[float] = None) -> bool:
    if isinstance(a, dict) or isinstance(b, dict):
        return isinstance(a, dict) and isinstance(b, dict) and map_eq(a, b, float_rel)
    return value_eq(a, b, float_rel)


# ---------------------------------------------------------------------------
# Expression evaluation
# ---------------------------------------------------------------------------

def eval_expr(e: Expr, env: dict):
    if isinstance(e, EVar):
        return env.get(e.name, BOT)
    if isinstance(e, ELit):
        return e.value
    if isinstance(e, EBin):
        return apply_op(e.op, eval_expr(e.left, env), eval_expr(e.right, env))
    if isinstance(e, EUn):
        return apply_unop(e.op, eval_expr(e.arg, env))
    if isinstance(e, ESingleton):
        v = eval_expr(e.arg, env)
        return BOT if is_bot(v) else frozenset((v,))
    raise TermError(f"bad expression {e!r}")


# ---------------------------------------------------------------------------
# Path sets
# ---------------------------------------------------------------------------

def _resolve_slot(slot, env, curvar):
    if slot is None:
        return None
    if isinstance(slot, int):
        return slot
    if slot == curvar:
        return "current"
    v = env.get(slot, BOT)
    if not isinstance(v, int) or isinstance(v, bool):
        raise TermError(f"vertex variable {slot!r} is not bound to a vertex")
    return v


def eval_pathsets(g: Graph, p: PTerm, L: int, env: dict, curvar) -> Union[tuple, object]:
    """Per-vertex path sets: a tuple indexed by vertex id, each entry a
    canonically ordered tuple of paths of the original graph; the none value
    when the term is stuck."""
    if isinstance(p, Paths):
        src = _resolve_slot(p.source, env, curvar)
        dst = _resolve_slot(p.dest, env, curvar)
        if dst == "current" and src != "current":
            return paths_to_all(g, src, L)
        if src == "current" and dst != "current" and dst is not None:
            rev = paths_to_all(g.reversed(), dst, L)
            return tuple(
                tuple(sorted((q.reversed() for q in per), key=lambda x: (x.length, x.vertices)))
                for per in rev
            )
        raise TermError(f"unsupported path endpoints in {p!r} (current vertex {curvar!r})")
    if isinstance(p, ArgsRed):
        inner = eval_pathsets(g, p.inner, L, env, curvar)
        if is_bot(inner):
            return BOT
        out = []
        for per in inner:
            if not per:
                out.append(())
                continue
            vals = [path_expr_eval(p.fn, q, g) for q in per]
            best = p.red.fold(vals)
            out.append(tuple(q for q, v in zip(per, vals) if value_eq(v, best)))
        return tuple(out)
    raise TermError(f"bad path term {p!r}")


# ---------------------------------------------------------------------------
# m / Ms evaluation
# ---------------------------------------------------------------------------

def eval_m(g: Graph, t: MTerm, L: int, env: dict, curvar):
    """A per-vertex map (dict), a scalar for broadcastable subterms, or the
    none value."""
    if isinstance(t, (PathRed, MUnfactored)):
        sets = eval_pathsets(g, t.paths, L, env, curvar)
        if is_bot(sets):
            return BOT
        return {
            v: t.red.fold(path_expr_eval(t.fn, q, g) for q in sets[v])
            for v in g.vertices
        }
    if isinstance(t, MBin):
        return _pointwise2(g, t.op, eval_m(g, t.left, L, env, curvar), eval_m(g, t.right, L, env, curvar))
    if isinstance(t, MUn):
        a = eval_m(g, t.arg, L, env, curvar)
        if isinstance(a, dict):
            return {v: apply_unop(t.op, a[v]) for v in g.vertices}
        return apply_unop(t.op, a)
    if isinstance(t, MLit):
        return t.value
    if isinstance(t, MVar):
        if t.name == curvar:
            return {v: v for v in g.vertices}
        return env.get(t.name, BOT)
    if isinstance(t, MScalar):
        return eval_r(g, t.term, L, env)
    if isinstance(t, ILet):
        vals = eval_ms(g, t.ms, L, env, curvar)
        out = {}
        for v in g.vertices:
            local = dict(env)
            local.update(tree_bind(t.binders, _ms_at(vals, v)))
            if t.target is not None:
                local[t.target] = v
            out[v] = eval_expr(t.body, local)
        return out
    raise TermError(f"bad path-based term {t!r}")


def _pointwise2(g: Graph, op: str, a, b):
    amap, bmap = isinstance(a, dict), isinstance(b, dict)
    if not amap and not bmap:
        return apply_op(op, a, b)
    out = {}
    for v in g.vertices:
        av = a[v] if amap else a
        bv = b[v] if bmap else b
        out[v] = apply_op(op, av, bv)
    return out


def eval_ms(g: Graph, ms: Ms, L: int, env: dict, curvar):
    """Evaluate a factored-reduction tree to a matching tree of per-vertex
    maps."""
    if isinstance(ms, MsPair):
        return (eval_ms(g, ms.first, L, env, curvar), eval_ms(g, ms.second, L, env, curvar))
    if isinstance(ms, MsBot):
        return {v: BOT for v in g.vertices}
    if isinstance(ms, MUnfactored):
        return eval_m(g, PathRed(ms.red, ms.fn, ms.paths), L, env, curvar)
    if isinstance(ms, MSingle):
        return _eval_msingle(g, ms, L, env)
    raise TermError(f"bad factored reduction {ms!r}")


def _eval_msingle(g: Graph, ms: MSingle, L: int, env: dict):
    cfg = ms.config
    if isinstance(cfg, ConfigPair):
        red, fn = ms.red, ms.fn
        if not isinstance(red, Pairwise) or not isinstance(fn, PPair):
            raise TermError("pair configuration requires a pairwise fused reduction")
        a = _eval_msingle(g, MSingle(red.first, fn.first, cfg.first), L, env)
        b = _eval_msingle(g, MSingle(red.second, fn.second, cfg.second), L, env)
        return {v: normalize_value((a[v], b[v])) for v in g.vertices}
    src = cfg.source
    if isinstance(src, str):
        src = _resolve_slot(src, env, None)
    if cfg.orientation == BACKWARD:
        if src is None:
            raise TermError("backward reduction requires a fixed far endpoint")
        rev = paths_to_all(g.reversed(), src, L)
        return {
            v: ms.red.fold(
                path_expr_eval(ms.fn, q.reversed(), g)
                for q in sorted(rev[v], key=lambda x: (x.length, tuple(reversed(x.vertices))))
            )
            for v in g.vertices
        }
    sets = paths_to_all(g, src, L)
    return {
        v: ms.red.fold(path_expr_eval(ms.fn, q, g) for q in sets[v])
        for v in g.vertices
    }


def _ms_at(vals, v: int):
    if isinstance(vals, tuple):
        return (_ms_at(vals[0], v), _ms_at(vals[1], v))
    return vals[v]


# ---------------------------------------------------------------------------
# r / Rs evaluation
# ---------------------------------------------------------------------------

def eval_r(g: Graph, t: RTerm, L: int, env: Optional[dict] = None):
    env = env or {}
    if isinstance(t, VertexRed):
        curvar = t.var
        body = eval_m(g, t.body, L, env, curvar)
        if not isinstance(body, dict):
            if is_bot(body):
                return BOT
            body = {v: body for v in g.vertices}
        return t.red.fold(body[v] for v in sorted(g.vertices))
    if isinstance(t, RBin):
        return apply_op(t.op, eval_r(g, t.left, L, env), eval_r(g, t.right, L, env))
    if isinstance(t, RUn):
        return apply_unop(t.op, eval_r(g, t.arg, L, env))
    if isinstance(t, RLit):
        return t.value
    if isinstance(t, RVar):
        return env.get(t.name, BOT)
    if isinstance(t, TripleLet):
        return _eval_triple(g, t, L, env)
    raise TermError(f"bad vertex-based term {t!r}")


def _eval_triple(g: Graph, t: TripleLet, L: int, env: dict):
    msvals = eval_ms(g, t.ms, L, env, t.target)
    # mlet: per-vertex expression evaluation over the ilet results
    mvals = {}
    for v in g.vertices:
        local = dict(env)
        local.update(tree_bind(t.bind_i, _ms_at(msvals, v)))
        if t.target is not None:
            local[t.target] = v
        mvals[v] = eval_expr(t.es, local)
    maps = _split_tree(t.bind_m, mvals, g)
    local = dict(env)
    local.update(maps)
    rsvals = eval_rs(g, t.rs, local)
    local.update(tree_bind(t.bind_r, rsvals))
    return eval_expr(t.body, local)


def _split_tree(shape, mvals: dict, g: Graph) -> dict:
    """Split a per-vertex map of (possibly pair) values into one map per
    binder leaf."""
    out: dict = {}

    def go(sh, pick):
        if isinstance(sh, str):
            out[sh] = {v: pick(mvals[v]) for v in g.vertices}
            return
        go(sh[0], lambda x, p=pick: _first(p(x)))
        go(sh[1], lambda x, p=pick: _second(p(x)))

    go(shape, lambda x: x)
    return out


def _first(x):
    return BOT if is_bot(x) else x[0]


def _second(x):
    return BOT if is_bot(x) else x[1]


def eval_rs(g: Graph, rs: Rs, env: dict):
    if isinstance(rs, RsPair):
        return (eval_rs(g, rs.first, env), eval_rs(g, rs.second, env))
    if isinstance(rs, RsBot):
        return BOT
    if isinstance(rs, RSingle):
        shape = rs.arg_shape()

        def tuple_at(sh, v):
            if isinstance(sh, str):
                m = env.get(sh, BOT)
                if is_bot(m):
                    return BOT
                return m[v]
            return (tuple_at(sh[0], v), tuple_at(sh[1], v))

        return rs.red.fold(tuple_at(shape, v) for v in sorted(g.vertices))
    raise TermError(f"bad vertex reduction {rs!r}")


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------

def evaluate(g: Graph, t: Node, L: int, params: Optional[dict] = None, map_var: Optional[str] = None):
    """Evaluate an r-term to a scalar or an m-term to a per-vertex map.
    params bind declared source parameters to concrete vertices."""
    env = dict(params or {})
    if isinstance(t, RTerm):
        return eval_r(g, t, L, env)
    if isinstance(t, MTerm):
        return eval_m(g, t, L, env, map_var)
    raise TermError(f"cannot evaluate {type(t).__name__}")


def stable_evaluate(g: Graph, t: Node, L: int, params=None, map_var=None):
    """Evaluate at the bound and report whether the result is stable (equal
    at L and L+1, floats up to relative tolerance)."""
    a = evaluate(g, t, L, params, map_var)
    b = evaluate(g, t, L + 1, params, map_var)
    return a, result_eq(a, b, FLOAT_REL_TOL)


def reduction_fn_pairs(t: Node):
    """Every (reduction, path-function) pair reachable in the term."""
    out = []
    if isinstance(t, (PathRed, MUnfactored, MSingle)):
        out.append((t.red, t.fn))
    if isinstance(t, ArgsRed):
        out.append((t.red, t.fn))
    for c in t.children():
        out.extend(reduction_fn_pairs(c))
    return out


def stabilization_bound(g: Graph, t: Node, c10_certified: Optional[bool] = None):
    """Truncation bound past which evaluation is exact: longest simple path
    plus one.  On cyclic graphs this is only valid when the strengthened
    termination condition holds for every reduction in the term; otherwise
    "unbounded"."""
    bound = g.longest_simple_path_length() + 1
    if g.is_acyclic():
        return bound
    if c10_certified is None:
        from .verify import Bounds, check_strong_termination

        c10_certified = all(
            check_strong_termination(red, fn, Bounds())
            for red, fn in reduction_fn_pairs(t)
        )
    return bound if c10_certified else "unbounded"
