"""Kernel-function expressions: the typed little language the synthesizer
enumerates and the engine executes.

Runtime semantics of the none value: min, max, + and - treat it as an
identity (they filter it); * and / are strict; equality compares it like any
value; a none condition makes the conditional none.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from .graph import BOT, Edge, Graph, checked_int, is_bot, normalize_value
from .terms import TermError, VarTree

INT = "Int"
FLOAT = "Float"
BOOL = "Bool"
EDGE = "Edge"
VERTEX = "Vertex"
SET = "Set"


def pair_type(a, b) -> tuple:
    return ("Pair", a, b)


def is_pair_type(t) -> bool:
    return isinstance(t, tuple) and t and t[0] == "Pair"


class KExpr:
    __slots__ = ()

    def children(self) -> tuple["KExpr", ...]:
        return ()

    @property
    def size(self) -> int:
        return 1 + sum(c.size for c in self.children())


@dataclass(frozen=True)
class KLit(KExpr):
    value: object
    type: object

    def __repr__(self):
        return "bot" if is_bot(self.value) else repr(self.value)


@dataclass(frozen=True)
class KVar(KExpr):
    name: str
    type: object

    def __repr__(self):
        return self.name


@dataclass(frozen=True)
class KBin(KExpr):
    op: str  # + - * / = < min max
    left: KExpr
    right: KExpr

    def children(self):
        return (self.left, self.right)

    def __repr__(self):
        if self.op in ("min", "max"):
            return f"{self.op}({self.left!r}, {self.right!r})"
        return f"({self.left!r} {self.op} {self.right!r})"


@dataclass(frozen=True)
class KNeg(KExpr):
    arg: KExpr

    def children(self):
        return (self.arg,)

    def __repr__(self):
        return f"(-{self.arg!r})"


@dataclass(frozen=True)
class KIte(KExpr):
    cond: KExpr
    then: KExpr
    other: KExpr

    def children(self):
        return (self.cond, self.then, self.other)

    def __repr__(self):
        return f"(if {self.cond!r} then {self.then!r} else {self.other!r})"


@dataclass(frozen=True)
class KEdgeFn(KExpr):
    name: str  # weight capacity src dst
    arg: KExpr

    def children(self):
        return (self.arg,)

    def __repr__(self):
        return f"{self.name}({self.arg!r})"


@dataclass(frozen=True)
class KDeg(KExpr):
    name: str  # indeg outdeg
    arg: KExpr

    def children(self):
        return (self.arg,)

    def __repr__(self):
        return f"{self.name}({self.arg!r})"


@dataclass(frozen=True)
class KVCount(KExpr):
    def __repr__(self):
        return "|V|"


@dataclass(frozen=True)
class KPair(KExpr):
    left: KExpr
    right: KExpr

    def children(self):
        return (self.left, self.right)

    def __repr__(self):
        return f"<{self.left!r}, {self.right!r}>"


@dataclass(frozen=True)
class KSetOf(KExpr):
    """Singleton-set construction (the set-domain extension)."""

    arg: KExpr

    def children(self):
        return (self.arg,)

    def __repr__(self):
        return f"{{{self.arg!r}}}"


@dataclass(frozen=True)
class GraphInfo:
    """The per-graph context a kernel body may consult."""

    vertex_count: int
    indeg: tuple[int, ...]
    outdeg: tuple[int, ...]

    @staticmethod
    def of(g: Graph) -> "GraphInfo":
        return GraphInfo(
            g.vertex_count,
            tuple(g.indeg(v) for v in g.vertices),
            tuple(g.outdeg(v) for v in g.vertices),
        )


def _filter2(op, a, b):
    if is_bot(a):
        return b
    if is_bot(b):
        return a
    return op(a, b)


def eval_kexpr(e: KExpr, env: dict, info: Optional[GraphInfo] = None):
    if isinstance(e, KLit):
        return e.value
    if isinstance(e, KVar):
        return env[e.name]
    if isinstance(e, KBin):
        a = eval_kexpr(e.left, env, info)
        b = eval_kexpr(e.right, env, info)
        op = e.op
        if op == "+":
            return _filter2(lambda x, y: checked_int(x + y) if isinstance(x, int) and isinstance(y, int) else x + y, a, b)
        if op == "-":
            if is_bot(b):
                return a
            if is_bot(a):
                return checked_int(-b) if isinstance(b, int) else -b
            return checked_int(a - b) if isinstance(a, int) and isinstance(b, int) else a - b
        if op == "min":
            return _filter2(lambda x, y: x if x <= y else y, a, b)
        if op == "max":
            return _filter2(lambda x, y: x if x >= y else y, a, b)
        if op == "*":
            if is_bot(a) or is_bot(b):
                return BOT
            return checked_int(a * b) if isinstance(a, int) and isinstance(b, int) else a * b
        if op == "/":
            if is_bot(a) or is_bot(b) or b == 0:
                return BOT
            return a / b
        if op == "=":
            return (a is BOT) == (b is BOT) and (a is BOT or a == b)
        if op == "<":
            if is_bot(a) or is_bot(b):
                return False
            return a < b
        raise TermError(f"unknown kernel operator {op!r}")
    if isinstance(e, KNeg):
        a = eval_kexpr(e.arg, env, info)
        if is_bot(a):
            return BOT
        return checked_int(-a) if isinstance(a, int) else -a
    if isinstance(e, KIte):
        c = eval_kexpr(e.cond, env, info)
        if is_bot(c):
            return BOT
        return eval_kexpr(e.then if c else e.other, env, info)
    if isinstance(e, KEdgeFn):
        edge = eval_kexpr(e.arg, env, info)
        if is_bot(edge):
            return BOT
        return getattr(edge, {"weight": "weight", "capacity": "capacity",
                              "src": "src", "dst": "dst"}[e.name])
    if isinstance(e, KDeg):
        v = eval_kexpr(e.arg, env, info)
        if is_bot(v) or info is None:
            return BOT
        return (info.indeg if e.name == "indeg" else info.outdeg)[v]
    if isinstance(e, KVCount):
        return info.vertex_count if info is not None else BOT
    if isinstance(e, KPair):
        return (eval_kexpr(e.left, env, info), eval_kexpr(e.right, env, info))
    if isinstance(e, KSetOf):
        v = eval_kexpr(e.arg, env, info)
        return BOT if is_bot(v) else frozenset((v,))
    raise TermError(f"bad kernel expression {e!r}")


@dataclass(frozen=True)
class KernelFn:
    """A lambda over (possibly destructured) parameters.  A pair-typed
    parameter may bind its components through a tuple pattern."""

    patterns: tuple[VarTree, ...]
    body: KExpr

    def __call__(self, *args, info: Optional[GraphInfo] = None):
        env: dict = {}
        for pat, arg in zip(self.patterns, args):
            _bind_pattern(pat, arg, env)
        return normalize_value(eval_kexpr(self.body, env, info))

    @property
    def size(self) -> int:
        return self.body.size

    def __repr__(self):
        ps = ", ".join(_pat_str(p) for p in self.patterns)
        return f"\\{ps}. {self.body!r}"


def _bind_pattern(pat: VarTree, value, env: dict):
    if isinstance(pat, str):
        env[pat] = value
        return
    if is_bot(value):
        _bind_pattern(pat[0], BOT, env)
        _bind_pattern(pat[1], BOT, env)
        return
    _bind_pattern(pat[0], value[0], env)
    _bind_pattern(pat[1], value[1], env)


def _pat_str(p: VarTree) -> str:
    if isinstance(p, str):
        return p
    return f"<{_pat_str(p[0])}, {_pat_str(p[1])}>"


def wrap_propagate(p: KernelFn) -> "WrappedPropagate":
    return WrappedPropagate(p)


@dataclass(frozen=True)
class WrappedPropagate:
    """The none-lifting wrapper over a propagation function: a none input
    propagates none."""

    inner: KernelFn

    def __call__(self, n, edge, info=None):
        if is_bot(n):
            return BOT
        return self.inner(n, edge, info=info)

    def __repr__(self):
        return f"\\n, l. (if n = bot then bot else {self.inner.body!r})"


@dataclass(frozen=True)
class CompositePropagate:
    """Componentwise none-lifting for fused pair kernels: each configured
    component lifts independently, so a none component stays none while its
    siblings keep propagating."""

    parts: tuple  # tree of WrappedPropagate mirroring the config pair shape

    def __call__(self, n, edge, info=None):
        if is_bot(n):
            return BOT
        return normalize_value(self._apply(self.parts, n, edge, info))

    @staticmethod
    def _apply(parts, n, edge, info):
        if isinstance(parts, tuple):
            a = n[0] if not is_bot(n) else BOT
            b = n[1] if not is_bot(n) else BOT
            return (CompositePropagate._apply(parts[0], a, edge, info),
                    CompositePropagate._apply(parts[1], b, edge, info))
        return parts(n, edge, info=info)

    @property
    def inner(self):
        return self

    def __repr__(self):
        return f"componentwise({self.parts!r})"


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def type_to_obj(t):
    if is_pair_type(t):
        return {"pair": [type_to_obj(t[1]), type_to_obj(t[2])]}
    return t


def type_from_obj(o):
    if isinstance(o, dict):
        return pair_type(type_from_obj(o["pair"][0]), type_from_obj(o["pair"][1]))
    return o


def kexpr_to_obj(e: KExpr):
    if isinstance(e, KLit):
        return {"lit": None if is_bot(e.value) else e.value, "type": type_to_obj(e.type)}
    if isinstance(e, KVar):
        return {"var": e.name, "type": type_to_obj(e.type)}
    if isinstance(e, KBin):
        return {"bin": e.op, "args": [kexpr_to_obj(e.left), kexpr_to_obj(e.right)]}
    if isinstance(e, KNeg):
        return {"neg": kexpr_to_obj(e.arg)}
    if isinstance(e, KIte):
        return {"ite": [kexpr_to_obj(e.cond), kexpr_to_obj(e.then), kexpr_to_obj(e.other)]}
    if isinstance(e, KEdgeFn):
        return {"edgefn": e.name, "arg": kexpr_to_obj(e.arg)}
    if isinstance(e, KDeg):
        return {"deg": e.name, "arg": kexpr_to_obj(e.arg)}
    if isinstance(e, KVCount):
        return {"vcount": True}
    if isinstance(e, KPair):
        return {"pair": [kexpr_to_obj(e.left), kexpr_to_obj(e.right)]}
    if isinstance(e, KSetOf):
        return {"setof": kexpr_to_obj(e.arg)}
    raise TermError(f"cannot serialize {e!r}")


def kexpr_from_obj(o) -> KExpr:
    if "lit" in o:
        v = o["lit"]
        return KLit(BOT if v is None else v, type_from_obj(o.get("type")))
    if "var" in o:
        return KVar(o["var"], type_from_obj(o.get("type")))
    if "bin" in o:
        return KBin(o["bin"], kexpr_from_obj(o["args"][0]), kexpr_from_obj(o["args"][1]))
    if "neg" in o:
        return KNeg(kexpr_from_obj(o["neg"]))
    if "ite" in o:
        c, t, e = (kexpr_from_obj(x) for x in o["ite"])
        return KIte(c, t, e)
    if "edgefn" in o:
        return KEdgeFn(o["edgefn"], kexpr_from_obj(o["arg"]))
    if "deg" in o:
        return KDeg(o["deg"], kexpr_from_obj(o["arg"]))
    if "vcount" in o:
        return KVCount()
    if "pair" in o:
        return KPair(kexpr_from_obj(o["pair"][0]), kexpr_from_obj(o["pair"][1]))
    if "setof" in o:
        return KSetOf(kexpr_from_obj(o["setof"]))
    raise TermError(f"bad kernel expression encoding {o!r}")


def pattern_to_obj(p: VarTree):
    if isinstance(p, str):
        return p
    return [pattern_to_obj(p[0]), pattern_to_obj(p[1])]


def pattern_from_obj(o) -> VarTree:
    if isinstance(o, str):
        return o
    return (pattern_from_obj(o[0]), pattern_from_obj(o[1]))


def kernelfn_to_obj(f: Union[KernelFn, WrappedPropagate, None]):
    if f is None:
        return None
    wrapped = isinstance(f, WrappedPropagate)
    inner = f.inner if wrapped else f
    return {
        "patterns": [pattern_to_obj(p) for p in inner.patterns],
        "body": kexpr_to_obj(inner.body),
        "wrapped": wrapped,
    }


def kernelfn_from_obj(o):
    if o is None:
        return None
    fn = KernelFn(tuple(pattern_from_obj(p) for p in o["patterns"]), kexpr_from_obj(o["body"]))
    return WrappedPropagate(fn) if o.get("wrapped") else fn
