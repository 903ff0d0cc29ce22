"""Specification-language terms: reductions over paths and vertices, the
let forms fusion rewrites into, plus substitution, free variables, alpha
equivalence and desugaring.

All terms are immutable; transformations return new trees.  A generic
child/rebuild protocol supports positional rewriting in the fusion engine.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, fields
from typing import Iterator, Optional, Union

from .graph import BOT, checked_int, is_bot, normalize_value


class TermError(ValueError):
    """Structural error: malformed term, shape mismatch, unsupported form."""


_fresh_counter = itertools.count()


def fresh_name(hint: str = "x") -> str:
    """Fresh interned variable name; monotone counter keeps capture avoidance
    trivial."""
    return f"{hint}%{next(_fresh_counter)}"


# ---------------------------------------------------------------------------
# Generic node protocol
# ---------------------------------------------------------------------------

class Node:
    """Base for all term nodes.  Children are the dataclass fields that hold
    other nodes (or tuples of nodes), in declaration order."""

    __slots__ = ()

    def children(self) -> tuple["Node", ...]:
        out = []
        for f in fields(self):  # type: ignore[arg-type]
            v = getattr(self, f.name)
            if isinstance(v, Node):
                out.append(v)
            elif isinstance(v, tuple) and v and all(isinstance(x, Node) for x in v):
                out.extend(v)
        return tuple(out)

    def replace_children(self, new: tuple["Node", ...]) -> "Node":
        new = list(new)
        kwargs = {}
        for f in fields(self):  # type: ignore[arg-type]
            v = getattr(self, f.name)
            if isinstance(v, Node):
                kwargs[f.name] = new.pop(0)
            elif isinstance(v, tuple) and v and all(isinstance(x, Node) for x in v):
                kwargs[f.name] = tuple(new.pop(0) for _ in v)
            else:
                kwargs[f.name] = v
        assert not new
        return type(self)(**kwargs)


def subterm(t: Node, pos: tuple[int, ...]) -> Node:
    for i in pos:
        kids = t.children()
        if i >= len(kids):
            raise TermError(f"position {pos} does not address a subterm")
        t = kids[i]
    return t


def replace_at(t: Node, pos: tuple[int, ...], new: Node) -> Node:
    if not pos:
        return new
    kids = list(t.children())
    kids[pos[0]] = replace_at(kids[pos[0]], pos[1:], new)
    return t.replace_children(tuple(kids))


def positions(t: Node) -> Iterator[tuple[int, ...]]:
    """All positions, preorder."""
    yield ()
    for i, c in enumerate(t.children()):
        for p in positions(c):
            yield (i,) + p


# ---------------------------------------------------------------------------
# Variable trees (binder tuples)
# ---------------------------------------------------------------------------

VarTree = Union[str, tuple]  # str leaf | (VarTree, VarTree)


def tree_vars(x: VarTree) -> tuple[str, ...]:
    if isinstance(x, str):
        return (x,)
    return tree_vars(x[0]) + tree_vars(x[1])


def tree_bind(x: VarTree, value) -> dict:
    """Pointwise binding of a variable tree to a matching value shape."""
    if isinstance(x, str):
        return {x: value}
    if is_bot(value):
        value = (BOT, BOT)
    if not (isinstance(value, tuple) and len(value) == 2):
        raise TermError(f"shape mismatch binding {x!r} to {value!r}")
    return {**tree_bind(x[0], value[0]), **tree_bind(x[1], value[1])}


def tree_distinct(x: VarTree) -> bool:
    names = tree_vars(x)
    return len(names) == len(set(names))


# ---------------------------------------------------------------------------
# Reduction functions
# ---------------------------------------------------------------------------

BUILTIN_REDUCTIONS = ("min", "max", "or", "and", "sum", "union", "intersect")


class Reduction(Node):
    """Total binary reduction with the none value as identity."""

    __slots__ = ()

    def apply(self, a, b):
        if is_bot(a):
            return b
        if is_bot(b):
            return a
        return self._raw(a, b)

    def _raw(self, a, b):
        raise NotImplementedError

    def fold(self, values):
        acc = BOT
        for v in values:
            acc = self.apply(acc, v)
        return acc

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Builtin(Reduction):
    name: str

    def __post_init__(self):
        if self.name not in BUILTIN_REDUCTIONS + ("left",):
            raise TermError(f"unknown reduction {self.name!r}")

    def _raw(self, a, b):
        n = self.name
        if n == "min":
            return a if a <= b else b
        if n == "max":
            return a if a >= b else b
        if n == "or":
            return bool(a or b)
        if n == "and":
            return bool(a and b)
        if n == "sum":
            if isinstance(a, int) and isinstance(b, int):
                return checked_int(a + b)
            return a + b
        if n == "union":
            return frozenset(a) | frozenset(b)
        if n == "intersect":
            return frozenset(a) & frozenset(b)
        if n == "left":
            return a
        raise TermError(self.name)

    def to_dict(self):
        return {"kind": "builtin", "name": self.name}

    def __repr__(self):
        return self.name


LEFT = Builtin("left")


@dataclass(frozen=True)
class Pairwise(Reduction):
    """Reduce the two components of a pair simultaneously."""

    first: Reduction
    second: Reduction

    def _raw(self, a, b):
        return normalize_value((self.first.apply(a[0], b[0]), self.second.apply(a[1], b[1])))

    def to_dict(self):
        return {"kind": "pairwise", "first": self.first.to_dict(), "second": self.second.to_dict()}

    def __repr__(self):
        return f"pairof({self.first!r}, {self.second!r})"


@dataclass(frozen=True)
class TieAware(Reduction):
    """Keep the pair whose first component wins under the outer min/max;
    on equal first components reduce the second components with inner."""

    outer: Builtin
    inner: Reduction

    def __post_init__(self):
        if self.outer.name not in ("min", "max"):
            raise TermError("tie-aware outer reduction must be min or max")

    def _raw(self, a, b):
        a1, b1 = a[0], b[0]
        if a1 == b1 or (is_bot(a1) and is_bot(b1)):
            return normalize_value((a1, self.inner.apply(a[1], b[1])))
        if self.outer.apply(a1, b1) == a1:
            return a
        return b

    def to_dict(self):
        return {"kind": "tie", "outer": self.outer.to_dict(), "inner": self.inner.to_dict()}

    def __repr__(self):
        return f"tie({self.outer!r}, {self.inner!r})"


@dataclass(frozen=True)
class Guarded(Reduction):
    """Filter-then-reduce over <guard, value> pairs: a pair contributes its
    value only when the guard is true (a none guard counts as false)."""

    inner: Reduction

    def apply(self, acc, x):
        if is_bot(x):
            return acc
        guard, val = x
        if guard is not True:
            return acc
        return self.inner.apply(acc, val)

    def _raw(self, a, b):  # pragma: no cover - apply() overrides
        raise TermError("guarded reduction is fold-only")

    def to_dict(self):
        return {"kind": "guarded", "inner": self.inner.to_dict()}

    def __repr__(self):
        return f"guarded({self.inner!r})"


def reduction_from_dict(d: dict) -> Reduction:
    k = d["kind"]
    if k == "builtin":
        return Builtin(d["name"])
    if k == "pairwise":
        return Pairwise(reduction_from_dict(d["first"]), reduction_from_dict(d["second"]))
    if k == "tie":
        outer = reduction_from_dict(d["outer"])
        assert isinstance(outer, Builtin)
        return TieAware(outer, reduction_from_dict(d["inner"]))
    if k == "guarded":
        return Guarded(reduction_from_dict(d["inner"]))
    raise TermError(f"bad reduction encoding {d!r}")


# ---------------------------------------------------------------------------
# Path functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PathExpr(Node):
    __slots__ = ()


@dataclass(frozen=True)
class PFn(PathExpr):
    name: str

    def __post_init__(self):
        if self.name not in ("length", "weight", "capacity", "head", "penultimate"):
            raise TermError(f"unknown path function {self.name!r}")

    def __repr__(self):
        return self.name


@dataclass(frozen=True)
class PConst(PathExpr):
    value: object

    def __repr__(self):
        return repr(self.value)


@dataclass(frozen=True)
class PPair(PathExpr):
    first: PathExpr
    second: PathExpr

    def __repr__(self):
        return f"<{self.first!r}, {self.second!r}>"


@dataclass(frozen=True)
class PSingleton(PathExpr):
    of: PathExpr

    def __repr__(self):
        return f"{{{self.of!r}}}"


def path_expr_eval(f: PathExpr, p, g):
    from .graph import path_fn

    if isinstance(f, PFn):
        return path_fn(f.name, p, g)
    if isinstance(f, PConst):
        return f.value
    if isinstance(f, PPair):
        return (path_expr_eval(f.first, p, g), path_expr_eval(f.second, p, g))
    if isinstance(f, PSingleton):
        v = path_expr_eval(f.of, p, g)
        return BOT if is_bot(v) else frozenset((v,))
    raise TermError(f"bad path expression {f!r}")


def path_expr_to_dict(f: PathExpr) -> dict:
    if isinstance(f, PFn):
        return {"kind": "fn", "name": f.name}
    if isinstance(f, PConst):
        return {"kind": "const", "value": None if is_bot(f.value) else f.value}
    if isinstance(f, PPair):
        return {"kind": "pair", "first": path_expr_to_dict(f.first), "second": path_expr_to_dict(f.second)}
    if isinstance(f, PSingleton):
        return {"kind": "singleton", "of": path_expr_to_dict(f.of)}
    raise TermError(f"bad path expression {f!r}")


def path_expr_from_dict(d: dict) -> PathExpr:
    k = d["kind"]
    if k == "fn":
        return PFn(d["name"])
    if k == "const":
        return PConst(BOT if d["value"] is None else d["value"])
    if k == "pair":
        return PPair(path_expr_from_dict(d["first"]), path_expr_from_dict(d["second"]))
    if k == "singleton":
        return PSingleton(path_expr_from_dict(d["of"]))
    raise TermError(f"bad path expression encoding {d!r}")


# ---------------------------------------------------------------------------
# Configurations of factored path-based reductions
# ---------------------------------------------------------------------------

FORWARD = "fwd"
BACKWARD = "bwd"


@dataclass(frozen=True)
class Config(Node):
    """Source (vertex variable name, concrete vertex id, or none) plus
    propagation orientation."""

    source: Union[str, int, None]
    orientation: str = FORWARD

    def __post_init__(self):
        if self.orientation not in (FORWARD, BACKWARD):
            raise TermError(f"bad orientation {self.orientation!r}")

    def __repr__(self):
        s = "" if self.source is None else str(self.source)
        arrow = "->" if self.orientation == FORWARD else "<-"
        return f"[{s}{arrow}]"


@dataclass(frozen=True)
class ConfigPair(Node):
    """Configuration of a fused pair reduction; mirrors the pair shape of the
    fused path function."""

    first: Node  # Config | ConfigPair
    second: Node

    def __repr__(self):
        return f"<{self.first!r}, {self.second!r}>"


# ---------------------------------------------------------------------------
# Term node kinds
# ---------------------------------------------------------------------------

OPS = ("+", "-", "*", "/", "min", "max", "and", "or", "union", "intersect",
       "=", "<", ">", "pair")
UNARY_OPS = ("-", "card", "not", "setof")


def apply_op(op: str, a, b):
    """Specification-level binary operators are strict: any none operand
    makes the result none.  Pair construction is the exception."""
    if op == "pair":
        return (a, b)
    if is_bot(a) or is_bot(b):
        return BOT
    if op == "+":
        return checked_int(a + b) if isinstance(a, int) and isinstance(b, int) else a + b
    if op == "-":
        return checked_int(a - b) if isinstance(a, int) and isinstance(b, int) else a - b
    if op == "*":
        return checked_int(a * b) if isinstance(a, int) and isinstance(b, int) else a * b
    if op == "/":
        if b == 0:
            return BOT
        return a / b
    if op == "min":
        return a if a <= b else b
    if op == "max":
        return a if a >= b else b
    if op == "and":
        return bool(a and b)
    if op == "or":
        return bool(a or b)
    if op == "union":
        return frozenset(a) | frozenset(b)
    if op == "intersect":
        return frozenset(a) & frozenset(b)
    if op == "=":
        return a == b
    if op == "<":
        return a < b
    if op == ">":
        return a > b
    raise TermError(f"unknown operator {op!r}")


def apply_unop(op: str, a):
    if is_bot(a):
        return BOT
    if op == "-":
        return checked_int(-a) if isinstance(a, int) else -a
    if op == "card":
        return len(a)
    if op == "not":
        return not a
    if op == "setof":
        return frozenset((a,))
    raise TermError(f"unknown unary operator {op!r}")


# -- expressions (let bodies, map expressions, final expressions) -----------

@dataclass(frozen=True)
class Expr(Node):
    __slots__ = ()


@dataclass(frozen=True)
class EVar(Expr):
    name: str


@dataclass(frozen=True)
class ELit(Expr):
    value: object


@dataclass(frozen=True)
class EBin(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class EUn(Expr):
    op: str
    arg: Expr


@dataclass(frozen=True)
class ESingleton(Expr):
    arg: Expr


def epair(a: Expr, b: Expr) -> Expr:
    return EBin("pair", a, b)


# -- paths -------------------------------------------------------------------

@dataclass(frozen=True)
class PTerm(Node):
    __slots__ = ()


@dataclass(frozen=True)
class Paths(PTerm):
    """Paths(dest) or Paths(source, dest); vertex slots are variable names or
    concrete vertex ids."""

    source: Union[str, int, None]
    dest: Union[str, int]


@dataclass(frozen=True)
class ArgsRed(PTerm):
    """The subset of inner paths whose path-function value is minimal or
    maximal."""

    red: Builtin
    fn: PathExpr
    inner: PTerm

    def __post_init__(self):
        if self.red.name not in ("min", "max"):
            raise TermError("arg-reduction must use min or max")


# -- factored path-based reductions (ilet right-hand sides) ------------------

@dataclass(frozen=True)
class Ms(Node):
    __slots__ = ()


@dataclass(frozen=True)
class MSingle(Ms):
    red: Reduction
    fn: PathExpr
    config: Config


@dataclass(frozen=True)
class MUnfactored(Ms):
    """A path-based reduction not yet factored to a configuration."""

    red: Reduction
    fn: PathExpr
    paths: PTerm


@dataclass(frozen=True)
class MsBot(Ms):
    """Dummy binding introduced when lifting literals into let form."""


@dataclass(frozen=True)
class MsPair(Ms):
    first: Ms
    second: Ms


# -- vertex-based reductions (rlet right-hand sides) --------------------------

@dataclass(frozen=True)
class Rs(Node):
    __slots__ = ()


@dataclass(frozen=True)
class RSingle(Rs):
    red: Reduction
    args: tuple[str, ...]  # variable tuple reduced across vertices (flattened)
    shape: VarTree = ""  # pair shape of args; "" means single variable

    def arg_shape(self) -> VarTree:
        return self.shape if self.shape != "" else self.args[0]


@dataclass(frozen=True)
class RsBot(Rs):
    pass


@dataclass(frozen=True)
class RsPair(Rs):
    first: Rs
    second: Rs


# -- path-based reduction terms (m) -------------------------------------------

@dataclass(frozen=True)
class MTerm(Node):
    __slots__ = ()


@dataclass(frozen=True)
class PathRed(MTerm):
    red: Reduction
    fn: PathExpr
    paths: PTerm


@dataclass(frozen=True)
class MBin(MTerm):
    op: str
    left: MTerm
    right: MTerm


@dataclass(frozen=True)
class MUn(MTerm):
    op: str
    arg: MTerm


@dataclass(frozen=True)
class MLit(MTerm):
    value: object


@dataclass(frozen=True)
class MVar(MTerm):
    name: str


@dataclass(frozen=True)
class MScalar(MTerm):
    """A closed vertex-based reduction used inside a path-based expression;
    denotes the scalar broadcast over vertices."""

    term: "RTerm"


@dataclass(frozen=True)
class ILet(MTerm):
    """ilet X := Ms in e, carrying the explicit target vertex variable of its
    factored reductions."""

    binders: VarTree
    ms: Ms
    target: Optional[str]
    body: Expr


@dataclass(frozen=True)
class Ref(MTerm):
    """A by-name reference to another specification, resolved by inlining
    before desugaring."""

    name: str
    args: tuple[object, ...] = ()


# -- vertex-based reduction terms (r) ------------------------------------------

@dataclass(frozen=True)
class RTerm(Node):
    __slots__ = ()


@dataclass(frozen=True)
class VertexRed(RTerm):
    red: Reduction
    var: Optional[str]
    body: MTerm


@dataclass(frozen=True)
class RBin(RTerm):
    op: str
    left: RTerm
    right: RTerm


@dataclass(frozen=True)
class RUn(RTerm):
    op: str
    arg: RTerm


@dataclass(frozen=True)
class RLit(RTerm):
    value: object


@dataclass(frozen=True)
class RVar(RTerm):
    name: str


@dataclass(frozen=True)
class TripleLet(RTerm):
    bind_i: VarTree
    ms: Ms
    target: Optional[str]
    bind_m: VarTree
    es: Expr
    bind_r: VarTree
    rs: Rs
    body: Expr


# -- sugar forms (removed by desugar) -----------------------------------------

@dataclass(frozen=True)
class MArgSel(MTerm):
    """outer_fn(arg-R over paths of inner_fn): select one extreme path, apply
    outer_fn to it."""

    outer_fn: PathExpr
    red: Builtin
    inner_fn: PathExpr
    paths: PTerm

    def __post_init__(self):
        if self.red.name not in ("min", "max"):
            raise TermError("arg-reduction must use min or max")


@dataclass(frozen=True)
class MCard(MTerm):
    """|P|: the number of paths in the path set."""

    paths: PTerm


@dataclass(frozen=True)
class VertexRedOverSet(RTerm):
    """Reduction over an explicit finite vertex set."""

    red: Builtin
    var: str
    members: tuple[object, ...]  # concrete vertex ids or parameter names
    body: MTerm


@dataclass(frozen=True)
class VertexRedConstrained(RTerm):
    """Reduction over the vertices for which a guard evaluates to true."""

    red: Builtin
    var: str
    guard: MTerm
    body: MTerm


# ---------------------------------------------------------------------------
# Free variables
# ---------------------------------------------------------------------------

def free_vars(t: Node) -> frozenset[str]:
    """Free variable names, respecting every binder (let binders, vertex
    variables, path source/dest slots)."""
    if isinstance(t, EVar):
        return frozenset((t.name,))
    if isinstance(t, MVar):
        return frozenset((t.name,))
    if isinstance(t, RVar):
        return frozenset((t.name,))
    if isinstance(t, Paths):
        out = set()
        if isinstance(t.source, str):
            out.add(t.source)
        if isinstance(t.dest, str):
            out.add(t.dest)
        return frozenset(out)
    if isinstance(t, Config):
        return frozenset((t.source,)) if isinstance(t.source, str) else frozenset()
    if isinstance(t, RSingle):
        return frozenset(t.args)
    if isinstance(t, Ref):
        return frozenset(a for a in t.args if isinstance(a, str))
    if isinstance(t, ILet):
        bound = set(tree_vars(t.binders))
        inner = free_vars(t.body) - bound
        out = set(free_vars(t.ms)) | inner
        if t.target is not None:
            out.add(t.target)
        return frozenset(out)
    if isinstance(t, TripleLet):
        out = set(free_vars(t.ms))
        if t.target is not None:
            out.add(t.target)
        out |= free_vars(t.es) - set(tree_vars(t.bind_i))
        out |= free_vars(t.rs) - set(tree_vars(t.bind_m))
        out |= free_vars(t.body) - set(tree_vars(t.bind_r))
        return frozenset(out)
    if isinstance(t, VertexRed):
        inner = free_vars(t.body)
        return inner - {t.var} if t.var else inner
    if isinstance(t, (VertexRedOverSet, VertexRedConstrained)):
        inner = free_vars(t.body)
        if isinstance(t, VertexRedConstrained):
            inner |= free_vars(t.guard)
        inner -= {t.var}
        if isinstance(t, VertexRedOverSet):
            inner |= {m for m in t.members if isinstance(m, str)}
        return frozenset(inner)
    out: set[str] = set()
    for c in t.children():
        out |= free_vars(c)
    return frozenset(out)


# ---------------------------------------------------------------------------
# Substitution
# ---------------------------------------------------------------------------

def _subst_vertex_slot(slot, bindings):
    if isinstance(slot, str) and slot in bindings:
        v = bindings[slot]
        if isinstance(v, EVar):
            return v.name
        if isinstance(v, ELit) and isinstance(v.value, int):
            return v.value
        if isinstance(v, (str, int)):
            return v
        raise TermError(f"cannot substitute {v!r} for vertex slot {slot!r}")
    return slot


def substitute(t: Node, bindings: dict) -> Node:
    """Capture-avoiding substitution.  Values may be terms (Expr/MTerm/RTerm),
    variable names, or concrete vertex ids; shadowed binders shield their
    bodies and clashing binders are freshened."""
    if not bindings:
        return t
    if isinstance(t, EVar):
        if t.name in bindings:
            v = bindings[t.name]
            if isinstance(v, Expr):
                return v
            if isinstance(v, Node):
                raise TermError(f"cannot inline {type(v).__name__} in expression position")
            if isinstance(v, str):
                return EVar(v)
            return ELit(v)
        return t
    if isinstance(t, MVar):
        if t.name in bindings:
            v = bindings[t.name]
            if isinstance(v, MTerm):
                return v
            if isinstance(v, RTerm):
                return MScalar(v)
            if isinstance(v, Expr):
                raise TermError("expression cannot stand as a path-based term")
            if isinstance(v, str):
                return MVar(v)
            return MLit(v)
        return t
    if isinstance(t, RVar):
        if t.name in bindings:
            v = bindings[t.name]
            if isinstance(v, RTerm):
                return v
            if isinstance(v, str):
                return RVar(v)
            if isinstance(v, Node):
                raise TermError(f"cannot inline {type(v).__name__} at reduction position")
            return RLit(v)
        return t
    if isinstance(t, Paths):
        return Paths(_subst_vertex_slot(t.source, bindings), _subst_vertex_slot(t.dest, bindings))
    if isinstance(t, Config):
        return Config(_subst_vertex_slot(t.source, bindings), t.orientation)
    if isinstance(t, Ref):
        return Ref(t.name, tuple(
            _subst_vertex_slot(a, bindings) if isinstance(a, str) else a for a in t.args
        ))
    if isinstance(t, RSingle):
        def arg_name(a):
            if a not in bindings:
                return a
            v = bindings[a]
            if isinstance(v, str):
                return v
            if isinstance(v, EVar):
                return v.name
            raise TermError(f"cannot substitute {v!r} into a vertex reduction")
        args = tuple(arg_name(a) for a in t.args)
        shape = _rename_shape(t.shape, arg_name) if t.shape != "" else ""
        return RSingle(t.red, args, shape)
    if isinstance(t, ILet):
        ms = substitute(t.ms, bindings)
        target = _subst_vertex_slot(t.target, bindings) if t.target is not None else None
        if isinstance(target, int):
            raise TermError("target vertex of a let cannot become concrete")
        bound = set(tree_vars(t.binders))
        inner = {k: v for k, v in bindings.items() if k not in bound}
        clash = bound & _names_in_values(inner.values())
        binders, body = t.binders, t.body
        if clash:
            binders, ren = _freshen(binders, clash)
            body = substitute(body, {k: EVar(v) for k, v in ren.items()})
        return ILet(binders, ms, target, substitute(body, inner))
    if isinstance(t, TripleLet):
        return _subst_triple(t, bindings)
    if isinstance(t, VertexRed):
        if t.var is None:
            return VertexRed(t.red, None, substitute(t.body, bindings))
        inner = {k: v for k, v in bindings.items() if k != t.var}
        var, body = t.var, t.body
        if t.var in _names_in_values(inner.values()):
            nv = fresh_name(t.var)
            body = substitute(body, {t.var: nv})
            var = nv
        return VertexRed(t.red, var, substitute(body, inner))
    if isinstance(t, (VertexRedOverSet, VertexRedConstrained)):
        inner = {k: v for k, v in bindings.items() if k != t.var}
        var = t.var
        if var in _names_in_values(inner.values()):
            nv = fresh_name(var)
            ren = {var: nv}
            if isinstance(t, VertexRedOverSet):
                t = VertexRedOverSet(t.red, nv, t.members, substitute(t.body, ren))
            else:
                t = VertexRedConstrained(t.red, nv, substitute(t.guard, ren), substitute(t.body, ren))
            var = nv
        if isinstance(t, VertexRedOverSet):
            members = tuple(_subst_vertex_slot(m, inner) if isinstance(m, str) else m for m in t.members)
            return VertexRedOverSet(t.red, var, members, substitute(t.body, inner))
        return VertexRedConstrained(t.red, var, substitute(t.guard, inner), substitute(t.body, inner))
    kids = t.children()
    if not kids:
        return t
    return t.replace_children(tuple(substitute(c, bindings) for c in kids))


def _rename_shape(shape: VarTree, fn) -> VarTree:
    if isinstance(shape, str):
        return fn(shape)
    return (_rename_shape(shape[0], fn), _rename_shape(shape[1], fn))


def _names_in_values(values) -> set[str]:
    out: set[str] = set()
    for v in values:
        if isinstance(v, Node):
            out |= free_vars(v)
        elif isinstance(v, str):
            out.add(v)
    return out


def _freshen(binders: VarTree, clash: set[str]) -> tuple[VarTree, dict]:
    ren: dict[str, str] = {}

    def go(b):
        if isinstance(b, str):
            if b in clash:
                ren[b] = fresh_name(b)
                return ren[b]
            return b
        return (go(b[0]), go(b[1]))

    return go(binders), ren


def _subst_triple(t: TripleLet, bindings: dict) -> TripleLet:
    ms = substitute(t.ms, bindings)
    target = _subst_vertex_slot(t.target, bindings) if t.target is not None else None
    if isinstance(target, int):
        raise TermError("target vertex of a let cannot become concrete")
    bi = set(tree_vars(t.bind_i))
    after_i = {k: v for k, v in bindings.items() if k not in bi}
    es = substitute(t.es, after_i)
    bm = set(tree_vars(t.bind_m))
    after_m = {k: v for k, v in after_i.items() if k not in bm}
    rs = substitute(t.rs, after_m)
    br = set(tree_vars(t.bind_r))
    after_r = {k: v for k, v in after_m.items() if k not in br}
    body = substitute(t.body, after_r)
    return TripleLet(t.bind_i, ms, target, t.bind_m, es, t.bind_r, rs, body)


# ---------------------------------------------------------------------------
# Alpha equivalence
# ---------------------------------------------------------------------------

def alpha_equivalent(a: Node, b: Node) -> bool:
    return _alpha(a, b, {}, {})


def _alpha(a: Node, b: Node, la: dict, lb: dict) -> bool:
    if type(a) is not type(b):
        return False
    if isinstance(a, (EVar, MVar, RVar)):
        na, nb = a.name, b.name
        return la.get(na, na) == lb.get(nb, nb)
    if isinstance(a, Paths):
        return _slot_eq(a.source, b.source, la, lb) and _slot_eq(a.dest, b.dest, la, lb)
    if isinstance(a, Config):
        return a.orientation == b.orientation and _slot_eq(a.source, b.source, la, lb)
    if isinstance(a, RSingle):
        if a.red != b.red or len(a.args) != len(b.args):
            return False
        return all(la.get(x, x) == lb.get(y, y) for x, y in zip(a.args, b.args))
    if isinstance(a, ILet):
        if not _alpha(a.ms, b.ms, la, lb):
            return False
        if not _slot_eq(a.target, b.target, la, lb):
            return False
        ext = _bind_alpha(a.binders, b.binders)
        if ext is None:
            return False
        ea, eb = ext
        return _alpha(a.body, b.body, {**la, **ea}, {**lb, **eb})
    if isinstance(a, TripleLet):
        if not _alpha(a.ms, b.ms, la, lb) or not _slot_eq(a.target, b.target, la, lb):
            return False
        for bind_a, bind_b, ta, tb in (
            (a.bind_i, b.bind_i, a.es, b.es),
            (a.bind_m, b.bind_m, a.rs, b.rs),
            (a.bind_r, b.bind_r, a.body, b.body),
        ):
            ext = _bind_alpha(bind_a, bind_b)
            if ext is None:
                return False
            la = {**la, **ext[0]}
            lb = {**lb, **ext[1]}
            if not _alpha(ta, tb, la, lb):
                return False
        return True
    if isinstance(a, VertexRed):
        if a.red != b.red:
            return False
        if (a.var is None) != (b.var is None):
            return False
        if a.var is None:
            return _alpha(a.body, b.body, la, lb)
        mark = f"!{len(la)}"
        return _alpha(a.body, b.body, {**la, a.var: mark}, {**lb, b.var: mark})
    if isinstance(a, (VertexRedOverSet, VertexRedConstrained)):
        if a.red != b.red:
            return False
        mark = f"!{len(la)}"
        la2, lb2 = {**la, a.var: mark}, {**lb, b.var: mark}
        if isinstance(a, VertexRedOverSet):
            if a.members != b.members:
                return False
            return _alpha(a.body, b.body, la2, lb2)
        return _alpha(a.guard, b.guard, la2, lb2) and _alpha(a.body, b.body, la2, lb2)
    ka, kb = a.children(), b.children()
    if len(ka) != len(kb):
        return False
    if not ka:
        return a == b
    # compare non-child payload fields
    for f in fields(a):  # type: ignore[arg-type]
        va, vb = getattr(a, f.name), getattr(b, f.name)
        if isinstance(va, Node) or (isinstance(va, tuple) and va and all(isinstance(x, Node) for x in va)):
            continue
        if va != vb:
            return False
    return all(_alpha(x, y, la, lb) for x, y in zip(ka, kb))


def _slot_eq(x, y, la, lb) -> bool:
    if isinstance(x, str) and isinstance(y, str):
        return la.get(x, x) == lb.get(y, y)
    return x == y


def _bind_alpha(x: VarTree, y: VarTree):
    if isinstance(x, str) and isinstance(y, str):
        mark = fresh_name("!")
        return {x: mark}, {y: mark}
    if isinstance(x, tuple) and isinstance(y, tuple):
        l0 = _bind_alpha(x[0], y[0])
        l1 = _bind_alpha(x[1], y[1])
        if l0 is None or l1 is None:
            return None
        return {**l0[0], **l1[0]}, {**l0[1], **l1[1]}
    return None


# ---------------------------------------------------------------------------
# Desugaring
# ---------------------------------------------------------------------------

def desugar(t: Node) -> Node:
    """Remove every sugar form: singular arg-reductions become tie-aware pair
    reductions in let form, path-set cardinality becomes a count reduction,
    explicit vertex sets unroll to operator chains, and constrained vertex
    reductions become filter-compose pair reductions.  Idempotent."""
    t = t.replace_children(tuple(desugar(c) for c in t.children())) if t.children() else t
    if isinstance(t, MArgSel):
        x, x2 = fresh_name("x"), fresh_name("x")
        red = TieAware(t.red, LEFT)
        fn = PPair(t.inner_fn, t.outer_fn)
        return ILet((x, x2), MUnfactored(red, fn, t.paths), None, EVar(x2))
    if isinstance(t, MCard):
        return PathRed(Builtin("sum"), PConst(1), t.paths)
    if isinstance(t, VertexRedOverSet):
        if not t.members:
            raise TermError("vertex reduction over an empty set")
        op = _red_to_op(t.red)
        parts = [desugar(substitute(t.body, {t.var: m})) for m in t.members]
        if all(isinstance(p, (RTerm, MScalar)) for p in parts):
            lifted = [p.term if isinstance(p, MScalar) else p for p in parts]
            out = lifted[0]
            for m in lifted[1:]:
                out = RBin(op, out, m)
            return out
        out = parts[0]
        for m in parts[1:]:
            out = MBin(op, out, m)
        return out
    if isinstance(t, VertexRedConstrained):
        return VertexRed(Guarded(t.red), t.var, MBin("pair", t.guard, t.body))
    return t


def _red_to_op(r: Builtin) -> str:
    table = {"min": "min", "max": "max", "sum": "+", "or": "or", "and": "and",
             "union": "union", "intersect": "intersect"}
    return table[r.name]


def normalize_scalars(t: Node) -> Node:
    """Collapse operator combinations of scalar (vertex-reduction) subterms
    into single scalar nodes, bottom-up.  Keeps parsed trees structurally
    aligned with resolver output."""
    kids = t.children()
    if kids:
        t = t.replace_children(tuple(normalize_scalars(c) for c in kids))
    if isinstance(t, MBin) and _scalarish(t.left) and _scalarish(t.right):
        return MScalar(RBin(t.op, _to_r(t.left), _to_r(t.right)))
    if isinstance(t, MUn) and _scalarish(t.arg):
        return MScalar(RUn(t.op, _to_r(t.arg)))
    return t


def _scalarish(t: Node) -> bool:
    return isinstance(t, (MScalar, MLit))


def _to_r(t: Node) -> RTerm:
    if isinstance(t, MScalar):
        return t.term
    if isinstance(t, MLit):
        return RLit(t.value)
    raise TermError(f"not scalar: {t!r}")


def count_vertex_reductions(t: Node) -> int:
    """Number of vertex-based reduction sites (used by fusion's round-count
    bound)."""
    n = 0
    if isinstance(t, (VertexRed, VertexRedOverSet, VertexRedConstrained)):
        n += 1
    if isinstance(t, TripleLet):
        n += 1
    if isinstance(t, VertexRedOverSet):
        n += (len(t.members) - 1) * count_vertex_reductions(t.body)
    for c in t.children():
        n += count_vertex_reductions(c)
    return n
