"""The rewrite system that normalizes specifications into iteration-map-reduce
rounds.

Rules are available individually through ``apply_rule`` (pattern + side
conditions at a tree position) and are driven to a normal form by ``fuse``,
whose phase order is: lift literals and unaries, flatten nested arg-reductions
innermost-first, factor flat reductions to configurations, pair lets
bottom-up, eliminate common operations, collapse pairs, and extract nested
closed triple-lets into earlier rounds.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

from .graph import BOT
from .terms import (
    ArgsRed, BACKWARD, Config, ConfigPair, EBin, ELit, EUn, EVar, Expr,
    FORWARD, ILet, MBin, MLit, MScalar, MSingle, MTerm, MUn, MUnfactored,
    MVar, Ms, MsBot, MsPair, Node, Pairwise, PathRed, Paths, PPair, PTerm,
    RBin, RLit, RSingle, RTerm, RUn, RVar, Rs, RsBot, RsPair, TermError,
    TieAware, TripleLet, VarTree, VertexRed, free_vars, fresh_name,
    positions, replace_at, subterm, substitute, tree_vars,
    count_vertex_reductions,
)


class FusionError(TermError):
    pass


@dataclass
class FuseContext:
    """Names fixed by the enclosing specification: source parameters (treated
    as constants) and the current per-vertex map variable."""

    params: frozenset[str] = frozenset()
    curvar: Optional[str] = None


# ---------------------------------------------------------------------------
# Individual rules
# ---------------------------------------------------------------------------

def _rule_fpnest(t: Node, ctx: FuseContext):
    """Flatten a reduction over an arg-restricted path set into a tie-aware
    pair reduction in let form."""
    if isinstance(t, PathRed) and isinstance(t.paths, ArgsRed):
        inner = t.paths
        x, x2 = fresh_name("x"), fresh_name("x")
        red = TieAware(inner.red, t.red)
        fn = PPair(inner.fn, t.fn)
        return ILet((x, x2), MUnfactored(red, fn, inner.inner), None, EVar(x2))
    if isinstance(t, ILet):
        # expand an arg-restricted leaf inside an existing let
        hit = _find_unfactored_argsred(t.binders, t.ms)
        if hit is None:
            return None
        binders, ms = hit
        return ILet(binders, ms, t.target, t.body)
    return None


def _find_unfactored_argsred(binders: VarTree, ms: Ms):
    if isinstance(ms, MUnfactored) and isinstance(ms.paths, ArgsRed):
        inner = ms.paths
        x = fresh_name("x")
        red = TieAware(inner.red, ms.red)
        fn = PPair(inner.fn, ms.fn)
        return (x, binders), MUnfactored(red, fn, inner.inner)
    if isinstance(ms, MsPair):
        if not isinstance(binders, tuple):
            return None
        left = _find_unfactored_argsred(binders[0], ms.first)
        if left is not None:
            return (left[0], binders[1]), MsPair(left[1], ms.second)
        right = _find_unfactored_argsred(binders[1], ms.second)
        if right is not None:
            return (binders[0], right[0]), MsPair(ms.first, right[1])
    return None


def _factor_paths(paths: PTerm, ctx: FuseContext):
    """Classify a Paths term as a (config, target) pair: forward stores at
    the destination, backward at the source."""
    if not isinstance(paths, Paths):
        return None
    src, dst = paths.source, paths.dest
    fixed = lambda s: s is None or isinstance(s, int) or s in ctx.params
    pervertex = lambda s: isinstance(s, str) and s not in ctx.params
    if pervertex(dst) and fixed(src):
        return Config(src, FORWARD), dst
    if pervertex(src) and fixed(dst):
        return Config(dst, BACKWARD), src
    return None


def _rule_fpred(t: Node, ctx: FuseContext, orientation=None):
    """Factor a flat reduction over Paths into configured let form."""
    if isinstance(t, PathRed) and isinstance(t.paths, Paths):
        got = _factor_paths(t.paths, ctx)
        if got is None:
            return None
        cfg, target = got
        if orientation is not None and cfg.orientation != orientation:
            return None
        if orientation == FORWARD and cfg.source is None and t.paths.source is not None:
            return None
        x = fresh_name("x")
        return ILet(x, MSingle(t.red, t.fn, cfg), target, EVar(x))
    if isinstance(t, ILet):
        hit = _find_unfactored_paths(t.ms, ctx, orientation)
        if hit is None:
            return None
        ms, target = hit
        if t.target is not None and target is not None and t.target != target:
            return None
        return ILet(t.binders, ms, t.target or target, t.body)
    return None


def _find_unfactored_paths(ms: Ms, ctx: FuseContext, orientation):
    if isinstance(ms, MUnfactored) and isinstance(ms.paths, Paths):
        got = _factor_paths(ms.paths, ctx)
        if got is None:
            return None
        cfg, target = got
        if orientation is not None and cfg.orientation != orientation:
            return None
        return MSingle(ms.red, ms.fn, cfg), target
    if isinstance(ms, MsPair):
        left = _find_unfactored_paths(ms.first, ctx, orientation)
        if left is not None:
            return MsPair(left[0], ms.second), left[1]
        right = _find_unfactored_paths(ms.second, ctx, orientation)
        if right is not None:
            return MsPair(ms.first, right[0]), right[1]
    return None


def _rule_filetbin(t: Node, ctx: FuseContext):
    """Fuse an operation between two lets, pairing their factored reductions;
    requires disjoint binders/bodies and matching target vertices."""
    if not (isinstance(t, MBin) and isinstance(t.left, ILet) and isinstance(t.right, ILet)):
        return None
    l, r = t.left, t.right
    if l.target is not None and r.target is not None and l.target != r.target:
        return None
    lv, rv = set(tree_vars(l.binders)), set(tree_vars(r.binders))
    if free_vars(l.body) & rv or free_vars(r.body) & lv:
        return None
    if lv & rv:
        ren = {x: fresh_name(x.split("%")[0]) for x in rv & lv}
        r = ILet(_rename_tree(r.binders, ren), r.ms, r.target,
                 substitute(r.body, {k: EVar(v) for k, v in ren.items()}))
    return ILet(
        (l.binders, r.binders),
        MsPair(l.ms, r.ms),
        l.target if l.target is not None else r.target,
        EBin(t.op, l.body, r.body),
    )


def _rename_tree(b: VarTree, ren: dict) -> VarTree:
    if isinstance(b, str):
        return ren.get(b, b)
    return (_rename_tree(b[0], ren), _rename_tree(b[1], ren))


def _rule_fmpair(t: Node, ctx: FuseContext):
    """Fuse a pair of factored reductions into a simultaneous pair
    reduction."""
    if isinstance(t, MsPair) and isinstance(t.first, MSingle) and isinstance(t.second, MSingle):
        a, b = t.first, t.second
        return MSingle(
            Pairwise(a.red, b.red),
            PPair(a.fn, b.fn),
            ConfigPair(a.config, b.config),
        )
    return None


def _rule_fvred(t: Node, ctx: FuseContext):
    """Turn a vertex-based reduction over a factored let into triple-let
    form."""
    if not (isinstance(t, VertexRed) and isinstance(t.body, ILet)):
        return None
    il = t.body
    if not isinstance(il.ms, (MSingle, MsBot)):
        return None  # pairing must finish first
    if t.var is not None and il.target is not None and t.var != il.target:
        return None
    xm, xr = fresh_name("m"), fresh_name("r")
    return TripleLet(
        il.binders, il.ms, il.target,
        xm, il.body,
        xr, RSingle(t.red, (xm,), ""),
        EVar(xr),
    )


def _rule_fletsbin(t: Node, ctx: FuseContext):
    """Fuse an operation between two triple-lets, pairing all three let
    parts."""
    if not (isinstance(t, RBin) and isinstance(t.left, TripleLet) and isinstance(t.right, TripleLet)):
        return None
    l, r = t.left, t.right
    groups_l = (set(tree_vars(l.bind_i)), set(tree_vars(l.bind_m)), set(tree_vars(l.bind_r)))
    groups_r = (set(tree_vars(r.bind_i)), set(tree_vars(r.bind_m)), set(tree_vars(r.bind_r)))
    if free_vars(l.es) & groups_r[0] or free_vars(r.es) & groups_l[0]:
        return None
    if free_vars(l.rs) & groups_r[1] or free_vars(r.rs) & groups_l[1]:
        return None
    if free_vars(l.body) & groups_r[2] or free_vars(r.body) & groups_l[2]:
        return None
    if l.target is not None and r.target is not None and l.target != r.target:
        r = replace(r, target=l.target, es=substitute(r.es, {r.target: EVar(l.target)}))
    clash = (groups_l[0] | groups_l[1] | groups_l[2]) & (groups_r[0] | groups_r[1] | groups_r[2])
    if clash:
        ren = {x: fresh_name(x.split("%")[0]) for x in clash}
        sub = {k: v for k, v in ren.items()}
        r = TripleLet(
            _rename_tree(r.bind_i, ren), r.ms, r.target,
            _rename_tree(r.bind_m, ren), substitute(r.es, sub),
            _rename_tree(r.bind_r, ren), substitute(r.rs, sub),
            substitute(r.body, sub),
        )
    return TripleLet(
        (l.bind_i, r.bind_i), MsPair(l.ms, r.ms), l.target if l.target is not None else r.target,
        (l.bind_m, r.bind_m), EBin("pair", l.es, r.es),
        (l.bind_r, r.bind_r), RsPair(l.rs, r.rs),
        EBin(t.op, l.body, r.body),
    )


def _rule_frpair(t: Node, ctx: FuseContext):
    if isinstance(t, RsPair) and isinstance(t.first, RSingle) and isinstance(t.second, RSingle):
        a, b = t.first, t.second
        return RSingle(
            Pairwise(a.red, b.red),
            a.args + b.args,
            (a.arg_shape(), b.arg_shape()),
        )
    return None


def _rule_filit(t: Node, ctx: FuseContext):
    if isinstance(t, MLit):
        return ILet(fresh_name("x"), MsBot(), None, ELit(t.value))
    return None


def _rule_fmlvar(t: Node, ctx: FuseContext):
    if isinstance(t, MVar) and t.name != ctx.curvar:
        return ILet(fresh_name("x"), MsBot(), None, EVar(t.name))
    if isinstance(t, MVar):
        # the current vertex itself; bind it via the let's target variable
        return ILet(fresh_name("x"), MsBot(), t.name, EVar(t.name))
    return None


def _rule_frlit(t: Node, ctx: FuseContext):
    if isinstance(t, RLit):
        x, xm, xr = fresh_name("x"), fresh_name("m"), fresh_name("r")
        return TripleLet(x, MsBot(), None, xm, ELit(BOT), xr, RsBot(), ELit(t.value))
    return None


def _rule_fiuni(t: Node, ctx: FuseContext):
    if isinstance(t, MUn) and isinstance(t.arg, ILet):
        il = t.arg
        return ILet(il.binders, il.ms, il.target, EUn(t.op, il.body))
    return None


def _rule_fruni(t: Node, ctx: FuseContext):
    if isinstance(t, RUn) and isinstance(t.arg, TripleLet):
        tl = t.arg
        return replace(tl, body=EUn(t.op, tl.body))
    return None


def _rule_fmpair_drop(t: Node, ctx: FuseContext, side: str):
    """Remove a dummy bottom binding from a let pair (left or right)."""
    if not isinstance(t, ILet) or not isinstance(t.ms, MsPair) or not isinstance(t.binders, tuple):
        return None
    first_dummy = isinstance(t.ms.first, MsBot)
    second_dummy = isinstance(t.ms.second, MsBot)
    if side == "second" and second_dummy and isinstance(t.binders[1], str):
        if t.binders[1] in free_vars(t.body):
            return None
        return ILet(t.binders[0], t.ms.first, t.target, t.body)
    if side == "first" and first_dummy and isinstance(t.binders[0], str):
        if t.binders[0] in free_vars(t.body):
            return None
        return ILet(t.binders[1], t.ms.second, t.target, t.body)
    return None


def _rule_frpair_drop(t: Node, ctx: FuseContext, side: str):
    if not isinstance(t, TripleLet) or not isinstance(t.rs, RsPair) or not isinstance(t.bind_r, tuple):
        return None
    if side == "second" and isinstance(t.rs.second, RsBot) and isinstance(t.bind_r[1], str):
        if t.bind_r[1] in free_vars(t.body):
            return None
        return replace(t, bind_r=t.bind_r[0], rs=t.rs.first)
    if side == "first" and isinstance(t.rs.first, RsBot) and isinstance(t.bind_r[0], str):
        if t.bind_r[0] in free_vars(t.body):
            return None
        return replace(t, bind_r=t.bind_r[1], rs=t.rs.second)
    return None


def _rule_ielim(t: Node, ctx: FuseContext):
    """Eliminate an adjacent duplicated path-based reduction in a
    triple-let."""
    if not isinstance(t, TripleLet):
        return None
    hit = _elim_adjacent(t.bind_i, t.ms)
    if hit is None:
        return None
    binders, ms, ren = hit
    sub = {k: EVar(v) for k, v in ren.items()}
    return TripleLet(binders, ms, t.target, t.bind_m, substitute(t.es, sub),
                     t.bind_r, t.rs, t.body)


def _elim_adjacent(binders: VarTree, ms: Ms):
    if isinstance(ms, MsPair) and isinstance(binders, tuple) and ms.first == ms.second:
        ren = dict(zip(tree_vars(binders[1]), tree_vars(binders[0])))
        if len(tree_vars(binders[1])) != len(tree_vars(binders[0])):
            return None
        return binders[0], ms.first, ren
    if isinstance(ms, MsPair) and isinstance(binders, tuple):
        left = _elim_adjacent(binders[0], ms.first)
        if left is not None:
            return (left[0], binders[1]), MsPair(left[1], ms.second), left[2]
        right = _elim_adjacent(binders[1], ms.second)
        if right is not None:
            return (binders[0], right[0]), MsPair(ms.first, right[1]), right[2]
    return None


def _rule_icom(t: Node, ctx: FuseContext):
    if isinstance(t, TripleLet) and isinstance(t.ms, MsPair) and isinstance(t.bind_i, tuple):
        return replace(t, bind_i=(t.bind_i[1], t.bind_i[0]),
                       ms=MsPair(t.ms.second, t.ms.first))
    return None


def _rule_iassl(t: Node, ctx: FuseContext):
    if (isinstance(t, TripleLet) and isinstance(t.ms, MsPair)
            and isinstance(t.ms.second, MsPair) and isinstance(t.bind_i, tuple)
            and isinstance(t.bind_i[1], tuple)):
        b, m = t.bind_i, t.ms
        return replace(t, bind_i=((b[0], b[1][0]), b[1][1]),
                       ms=MsPair(MsPair(m.first, m.second.first), m.second.second))
    return None


def _rule_iassr(t: Node, ctx: FuseContext):
    if (isinstance(t, TripleLet) and isinstance(t.ms, MsPair)
            and isinstance(t.ms.first, MsPair) and isinstance(t.bind_i, tuple)
            and isinstance(t.bind_i[0], tuple)):
        b, m = t.bind_i, t.ms
        return replace(t, bind_i=(b[0][0], (b[0][1], b[1])),
                       ms=MsPair(m.first.first, MsPair(m.first.second, m.second)))
    return None


_LOCAL_RULES = {
    "FPNest": _rule_fpnest,
    "FPRed": lambda t, c: _rule_fpred(t, c, None),
    "FPRed'": lambda t, c: _rule_fpred(t, c, FORWARD),
    "FPRed''": lambda t, c: _rule_fpred(t, c, BACKWARD),
    "FILetBin": _rule_filetbin,
    "FMPair": _rule_fmpair,
    "FVRed": _rule_fvred,
    "FLetsBin": _rule_fletsbin,
    "FRPair": _rule_frpair,
    "FILit": _rule_filit,
    "FMLVar": _rule_fmlvar,
    "FRLit": _rule_frlit,
    "FIUni": _rule_fiuni,
    "FRUni": _rule_fruni,
    "FMPair'": lambda t, c: _rule_fmpair_drop(t, c, "second"),
    "FMPair''": lambda t, c: _rule_fmpair_drop(t, c, "first"),
    "FRPair'": lambda t, c: _rule_frpair_drop(t, c, "second"),
    "FRPair''": lambda t, c: _rule_frpair_drop(t, c, "first"),
    "IElim": _rule_ielim,
    "ICom": _rule_icom,
    "IAssL": _rule_iassl,
    "IAssR": _rule_iassr,
}

# context rules license applying the inner relation at a position
_CONTEXT_RULES = {
    "FMInR": ("FPNest", "FPRed", "FILetBin", "FMLVar", "FILit", "FIUni"),
    "FMInM": ("FPNest", "FPRed", "FILetBin", "FMLVar", "FILit", "FIUni"),
    "FMInILet": ("FMPair", "FMPair'", "FMPair''"),
    "FMInLets": ("FMPair", "FMPair'", "FMPair''"),
    "FRinLets": ("FRPair", "FRPair'", "FRPair''"),
    "FRR": ("FLetsBin", "FRLit", "FRUni"),
}

RULE_NAMES = tuple(_LOCAL_RULES) + tuple(_CONTEXT_RULES)


def apply_rule(name: str, t: Node, pos: tuple[int, ...] = (),
               ctx: Optional[FuseContext] = None) -> Optional[Node]:
    """Apply one fusion rule at a position; None when the pattern or side
    conditions do not hold there."""
    ctx = ctx or FuseContext()
    try:
        sub = subterm(t, pos)
    except TermError:
        return None
    if name in _LOCAL_RULES:
        new = _LOCAL_RULES[name](sub, ctx)
    elif name in _CONTEXT_RULES:
        new = None
        for inner in _CONTEXT_RULES[name]:
            new = _LOCAL_RULES[inner](sub, ctx)
            if new is not None:
                break
    else:
        raise FusionError(f"unknown rule {name!r}")
    if new is None:
        return None
    return replace_at(t, pos, new)


# ---------------------------------------------------------------------------
# Plans
# ---------------------------------------------------------------------------

@dataclass
class Round:
    """One iteration-map-reduce round.  Scalar rounds carry the full
    triple-let; map rounds stop after the per-vertex map expression."""

    var: str
    bind_i: VarTree
    ms: Ms
    bind_m: Optional[VarTree]
    es: Expr
    bind_r: Optional[VarTree] = None
    rs: Optional[Rs] = None
    result: Optional[Expr] = None
    target: Optional[str] = None

    @property
    def kind(self) -> str:
        return "scalar" if self.rs is not None else "map"

    def as_term(self) -> Node:
        if self.kind == "map":
            return ILet(self.bind_i, self.ms, self.target, self.es)
        return TripleLet(self.bind_i, self.ms, self.target, self.bind_m, self.es,
                         self.bind_r, self.rs, self.result)


@dataclass
class Plan:
    """Ordered rounds; later rounds may reference earlier rounds' scalar
    results by name.  The final expression combines round outputs (for map
    plans it is the last round's name)."""

    spec_name: str
    params: tuple[str, ...]
    rounds: list[Round]
    final: Expr
    kind: str  # "scalar" | "map"

    def round_vars(self) -> tuple[str, ...]:
        return tuple(r.var for r in self.rounds)


def count_rounds(p: Plan) -> int:
    return len(p.rounds)


def evaluate_plan(p: Plan, g, L: int, params: Optional[dict] = None):
    """Reference evaluation of a plan: each round via the denotational
    semantics, then the final expression."""
    from .refsem import eval_expr, eval_m, eval_r

    env = dict(params or {})
    for r in p.rounds:
        term = r.as_term()
        if r.kind == "scalar":
            env[r.var] = eval_r(g, term, L, env)
        else:
            env[r.var] = eval_m(g, term, L, env, None)
    out = env[p.rounds[-1].var] if p.kind == "map" else eval_expr(p.final, env)
    if p.kind == "map":
        return out
    return out


# ---------------------------------------------------------------------------
# Fusion driver
# ---------------------------------------------------------------------------

def _exhaust(t: Node, names: tuple[str, ...], ctx: FuseContext, cap: int = 10_000) -> Node:
    """Apply the given rules anywhere until none applies (deterministic:
    first position in preorder, first rule in order)."""
    for _ in range(cap):
        hit = None
        for pos in positions(t):
            for name in names:
                new = apply_rule(name, t, pos, ctx)
                if new is not None:
                    hit = new
                    break
            if hit is not None:
                break
        if hit is None:
            return t
        t = hit
    raise FusionError("rule application did not terminate")


def fuse_m(m: MTerm, ctx: FuseContext) -> ILet:
    """Normalize a path-based term to a single factored let."""
    m = _exhaust(m, ("FPNest",), ctx)
    m = _exhaust(m, ("FPRed'", "FPRed''", "FPRed"), ctx)
    for _ in range(10_000):
        before = m
        m = _exhaust(m, ("FIUni",), ctx)
        if isinstance(m, ILet):
            break
        if isinstance(m, MBin):
            left = fuse_m(m.left, ctx) if not isinstance(m.left, ILet) else m.left
            right = fuse_m(m.right, ctx) if not isinstance(m.right, ILet) else m.right
            m = MBin(m.op, left, right)
            fused = _rule_filetbin(m, ctx)
            if fused is None:
                raise FusionError(f"cannot pair lets in {m.op!r} (mismatched targets)")
            m = fused
            continue
        if isinstance(m, (MLit, MVar)):
            m = _exhaust(m, ("FILit", "FMLVar"), ctx)
            continue
        if isinstance(m, MUn):
            inner = fuse_m(m.arg, ctx)
            m = MUn(m.op, inner)
            continue
        if m is before:
            raise FusionError(f"cannot fuse {type(m).__name__}")
    assert isinstance(m, ILet)
    m = _exhaust(m, ("FMPair'", "FMPair''", "FMPair"), ctx)
    return m


def _collapse_ms(il_or_tl):
    """Collapse remaining factored pairs after elimination."""
    ctx = FuseContext()
    return _exhaust(il_or_tl, ("FMPair'", "FMPair''", "FMPair"), ctx)


def _common_elim(tl: TripleLet) -> TripleLet:
    """Common operation elimination on all three let parts, to a fixed point.
    Associativity/commutativity moves are bounded by the pair-tree size."""
    for _ in range(64):
        before = tl
        tl = _elim_ms_dups(tl)
        tl = _elim_map_dups(tl)
        tl = _elim_red_dups(tl)
        if tl == before:
            return tl
    return tl


def _flatten_ms(binders, ms):
    if isinstance(ms, MsPair):
        if not isinstance(binders, tuple):
            raise FusionError("binder shape mismatch")
        return _flatten_ms(binders[0], ms.first) + _flatten_ms(binders[1], ms.second)
    return [(binders, ms)]


def _rebuild_pairs(items):
    binders, leaves = zip(*items)
    b = binders[0]
    m = leaves[0]
    for nb, nm in items[1:]:
        b = (b, nb)
        m = MsPair(m, nm)
    return b, m


def _elim_ms_dups(tl: TripleLet) -> TripleLet:
    leaves = _flatten_ms(tl.bind_i, tl.ms)
    seen: list[tuple] = []
    ren: dict[str, str] = {}
    kept = []
    for binders, leaf in leaves:
        match = next((kb for kb, kl in seen if kl == leaf), None)
        if match is not None and len(tree_vars(match)) == len(tree_vars(binders)):
            ren.update(zip(tree_vars(binders), tree_vars(match)))
            continue
        seen.append((binders, leaf))
        kept.append((binders, leaf))
    if not ren:
        return tl
    bind_i, ms = _rebuild_pairs(kept)
    sub = {k: EVar(v) for k, v in ren.items()}
    return TripleLet(bind_i, ms, tl.target, tl.bind_m, substitute(tl.es, sub),
                     tl.bind_r, tl.rs, tl.body)


def _flatten_expr_pairs(binders, es):
    if isinstance(es, EBin) and es.op == "pair" and isinstance(binders, tuple):
        return (_flatten_expr_pairs(binders[0], es.left)
                + _flatten_expr_pairs(binders[1], es.right))
    return [(binders, es)]


def _elim_map_dups(tl: TripleLet) -> TripleLet:
    leaves = _flatten_expr_pairs(tl.bind_m, tl.es)
    if len(leaves) <= 1:
        return tl
    seen: list[tuple] = []
    ren: dict[str, str] = {}
    kept = []
    for binders, leaf in leaves:
        match = next((kb for kb, kl in seen if kl == leaf), None)
        if match is not None and len(tree_vars(match)) == len(tree_vars(binders)):
            ren.update(zip(tree_vars(binders), tree_vars(match)))
            continue
        seen.append((binders, leaf))
        kept.append((binders, leaf))
    if not ren:
        return tl
    bm, es = kept[0]
    for nb, ne in kept[1:]:
        bm = (bm, nb)
        es = EBin("pair", es, ne)
    sub = {k: EVar(v) for k, v in ren.items()}
    return TripleLet(tl.bind_i, tl.ms, tl.target, bm, es,
                     tl.bind_r, substitute(tl.rs, sub), substitute(tl.body, sub))


def _flatten_rs(binders, rs):
    if isinstance(rs, RsPair) and isinstance(binders, tuple):
        return _flatten_rs(binders[0], rs.first) + _flatten_rs(binders[1], rs.second)
    return [(binders, rs)]


def _elim_red_dups(tl: TripleLet) -> TripleLet:
    leaves = _flatten_rs(tl.bind_r, tl.rs)
    if len(leaves) <= 1:
        return tl
    seen: list[tuple] = []
    ren: dict[str, str] = {}
    kept = []
    for binders, leaf in leaves:
        match = next((kb for kb, kl in seen if kl == leaf), None)
        if match is not None and len(tree_vars(match)) == len(tree_vars(binders)):
            ren.update(zip(tree_vars(binders), tree_vars(match)))
            continue
        seen.append((binders, leaf))
        kept.append((binders, leaf))
    if not ren:
        return tl
    br, rs = kept[0]
    for nb, nr in kept[1:]:
        br = (br, nb)
        rs = RsPair(rs, nr)
    sub = {k: EVar(v) for k, v in ren.items()}
    return TripleLet(tl.bind_i, tl.ms, tl.target, tl.bind_m, tl.es, br, rs,
                     substitute(tl.body, sub))


def fuse_r(r: RTerm, ctx: FuseContext, rounds: list[Round]) -> Expr:
    """Fuse a scalar term; nested rounds are appended to `rounds` and the
    returned expression combines round outputs."""
    r = _extract_nested(r, ctx, rounds)
    tl = _fuse_r_term(r, ctx)
    if isinstance(tl, RLit):
        return ELit(tl.value)
    if isinstance(tl, RVar):
        return EVar(tl.name)
    assert isinstance(tl, TripleLet), type(tl).__name__
    tl = _common_elim(tl)
    tl = _collapse_ms(tl)
    tl = _exhaust(tl, ("FRPair'", "FRPair''", "FRPair"), FuseContext())
    var = fresh_name("round")
    rounds.append(Round(var, tl.bind_i, tl.ms, tl.bind_m, tl.es, tl.bind_r, tl.rs,
                        tl.body, tl.target))
    return EVar(var)


def _fuse_r_term(r: RTerm, ctx: FuseContext):
    if isinstance(r, VertexRed):
        inner_ctx = FuseContext(ctx.params, r.var or ctx.curvar)
        body = fuse_m(r.body, inner_ctx)
        out = _rule_fvred(VertexRed(r.red, r.var, body), inner_ctx)
        if out is None:
            raise FusionError("vertex reduction target does not match its let")
        return out
    if isinstance(r, RBin):
        left = _fuse_r_term(r.left, ctx)
        right = _fuse_r_term(r.right, ctx)
        t = RBin(r.op, left, right)
        if isinstance(left, RLit) and isinstance(right, RLit):
            return t
        t = _exhaust(t, ("FRLit",), ctx, cap=8)
        merged = _rule_fletsbin(t, ctx)
        if merged is None:
            raise FusionError("cannot pair triple-lets")
        merged = _rule_ielim(merged, ctx) or merged
        return merged
    if isinstance(r, RUn):
        inner = _fuse_r_term(r.arg, ctx)
        out = _rule_fruni(RUn(r.op, inner), ctx)
        return out if out is not None else RUn(r.op, inner)
    if isinstance(r, (RLit, RVar)):
        return r
    if isinstance(r, TripleLet):
        return r
    raise FusionError(f"cannot fuse {type(r).__name__}")


def _extract_nested(t: Node, ctx: FuseContext, rounds: list[Round]) -> Node:
    """Factor closed nested vertex-based reductions out into earlier rounds
    (the multi-round extension)."""
    kids = t.children()
    if kids:
        t = t.replace_children(tuple(_extract_nested(c, ctx, rounds) for c in kids))
    if isinstance(t, MScalar):
        if free_vars(t.term) - ctx.params:
            raise FusionError("nested vertex-based reduction is not closed")
        expr = fuse_r(t.term, ctx, rounds)
        if isinstance(expr, EVar):
            return MVar(expr.name)
        var = fresh_name("round")
        rounds.append(_expr_round(var, expr))
        return MVar(var)
    return t


def _expr_round(var: str, expr: Expr) -> Round:
    x, xm, xr = fresh_name("x"), fresh_name("m"), fresh_name("r")
    return Round(var, x, MsBot(), xm, ELit(BOT), xr, RsBot(), expr)


def fuse(term: Node, params: tuple[str, ...] = (), map_var: Optional[str] = None,
         spec_name: str = "spec") -> Plan:
    """Fuse a desugared closed specification into an iteration-map-reduce
    plan."""
    before = count_vertex_reductions(term)
    ctx = FuseContext(frozenset(params), map_var)
    rounds: list[Round] = []
    if isinstance(term, RTerm):
        final = fuse_r(term, ctx, rounds)
        if not rounds:
            # constant specification
            var = fresh_name("round")
            rounds.append(_expr_round(var, final))
            final = EVar(var)
        plan = Plan(spec_name, params, rounds, final, "scalar")
    else:
        term2 = _extract_nested(term, ctx, rounds)
        il = fuse_m(term2, ctx)
        var = fresh_name("round")
        rounds.append(Round(var, il.binders, il.ms, None, il.body, target=il.target))
        plan = Plan(spec_name, params, rounds, EVar(var), "map")
    plan = _canonicalize(plan)
    if len(plan.rounds) > max(1, before):
        raise FusionError("fusion increased the round count")
    return plan


def _canonicalize(plan: Plan) -> Plan:
    """Deterministically rename every bound variable so identical inputs
    produce identical plans."""
    counter = [0]

    def fresh(prefix):
        counter[0] += 1
        return f"{prefix}{counter[0]}"

    env: dict[str, str] = {}

    def rename_tree(b):
        if isinstance(b, str):
            env[b] = fresh("x")
            return env[b]
        return (rename_tree(b[0]), rename_tree(b[1]))

    def sub(node):
        return substitute(node, {k: EVar(v) for k, v in env.items()})

    out_rounds = []
    for i, r in enumerate(plan.rounds):
        ms = sub(r.ms)  # configs may reference params only; renames are safe
        bind_i = rename_tree(r.bind_i)
        target = None
        if r.target is not None:
            env[r.target] = "v"
            target = "v"
        es = sub(r.es)
        if r.target is not None:
            del env[r.target]
        if r.kind == "map":
            out_rounds.append(Round(f"round{i}", bind_i, ms, None, es, target=target))
            env[r.var] = f"round{i}"
            continue
        bind_m = rename_tree(r.bind_m)
        rs = sub(r.rs)
        bind_r = rename_tree(r.bind_r)
        body = sub(r.result)
        out_rounds.append(Round(f"round{i}", bind_i, ms, bind_m, es, bind_r, rs, body, target))
        env[r.var] = f"round{i}"
    final = substitute(plan.final, {k: EVar(v) for k, v in env.items()})
    return Plan(plan.spec_name, plan.params, out_rounds, final, plan.kind)
