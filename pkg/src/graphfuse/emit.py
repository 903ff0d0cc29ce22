"""Backend emission: native kernel source consumed by the harness runtime,
the plan JSON contract, and a sentinel-semantics mirror used to cross-check
the emitted logic against the abstract-value engine.

Value encoding: pair shapes flatten to fields first, second, third, ...;
the none value maps to a per-field sentinel chosen by the field's reduction
direction (largest value for min fields, smallest for max fields, zero for
sums, false for or, true for and).
"""
from __future__ import annotations

import json
from dataclasses import dataclass

from .graph import BOT, INT64_MAX, INT64_MIN, is_bot, normalize_value
from .kexpr import (
    CompositePropagate, KBin, KEdgeFn, KExpr, KIte, KLit, KNeg, KPair, KVar,
    WrappedPropagate, kernelfn_from_obj, kernelfn_to_obj,
)
from .engine import KernelSet
from .fusion import Plan, Round
from .terms import (
    Builtin, Config, ConfigPair, EBin, ELit, ESingleton, EUn, EVar, Expr,
    MSingle, Ms, MsBot, Pairwise, PPair, PathExpr, RSingle, Reduction, Rs,
    RsBot, RsPair, TieAware, VarTree, path_expr_from_dict, path_expr_to_dict,
    reduction_from_dict,
)

FIELD_NAMES = ("first", "second", "third", "fourth", "fifth", "sixth")

PLAN_SCHEMA = "grafs-plan/1"


class EmitError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Field layout
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Field:
    name: str
    direction: str      # min | max | sum | or | and | left
    sentinel: int
    kind: str           # int | bool | vertex


def _directions(red: Reduction) -> list[str]:
    if isinstance(red, Builtin):
        return [red.name]
    if isinstance(red, Pairwise):
        return _directions(red.first) + _directions(red.second)
    if isinstance(red, TieAware):
        return [red.outer.name] + _directions(red.inner)
    raise EmitError(f"cannot emit reduction {red!r}")


def _fn_kinds(fn: PathExpr) -> list[str]:
    from .terms import PConst, PFn, PSingleton

    if isinstance(fn, PFn):
        return ["vertex" if fn.name in ("head", "penultimate") else "int"]
    if isinstance(fn, PConst):
        return ["bool" if isinstance(fn.value, bool) else "int"]
    if isinstance(fn, PPair):
        return _fn_kinds(fn.first) + _fn_kinds(fn.second)
    if isinstance(fn, PSingleton):
        raise EmitError("value shapes beyond nested pairs of scalars are not emitted")
    raise EmitError(f"cannot emit path function {fn!r}")


_SENTINELS = {
    "min": INT64_MAX,
    "left": INT64_MAX,
    "max": INT64_MIN,
    "sum": 0,
    "or": 0,
    "and": 1,
}


def field_layout(kernels: KernelSet) -> list[Field]:
    dirs = _directions(kernels.R)
    kinds = _fn_kinds(kernels.value_fn) if kernels.value_fn is not None else ["int"] * len(dirs)
    if len(dirs) != len(kinds):
        raise EmitError("reduction and value shapes disagree")
    if len(dirs) > len(FIELD_NAMES):
        raise EmitError("too many value components to flatten")
    out = []
    for i, (d, k) in enumerate(zip(dirs, kinds)):
        if d not in _SENTINELS:
            raise EmitError(f"no sentinel encoding for reduction {d!r}")
        out.append(Field(FIELD_NAMES[i], d, _SENTINELS[d], k))
    return out


def encode_value(value, fields: list[Field], shape="leaf") -> tuple:
    """Flatten an abstract value into sentinel-encoded machine words."""
    flat = _flatten_by_shape(value, shape)
    if len(flat) != len(fields):
        raise EmitError("value does not match the field layout")
    out = []
    for f, v in zip(fields, flat):
        if is_bot(v):
            out.append(f.sentinel)
        elif v is True:
            out.append(1)
        elif v is False:
            out.append(0)
        else:
            out.append(int(v))
    return tuple(out)


def decode_value(words, fields: list[Field], shape):
    """Interpret sentinel-encoded machine words back into the none-lifted
    value domain."""
    vals = []
    for f, w in zip(fields, words):
        if w == f.sentinel:
            vals.append(BOT)
        elif f.kind == "bool":
            vals.append(bool(w))
        else:
            vals.append(int(w))
    it = iter(vals)
    return normalize_value(_reshape(shape, it))


def value_shape(fn: PathExpr):
    from .terms import PConst, PFn, PSingleton

    if isinstance(fn, PPair):
        return (value_shape(fn.first), value_shape(fn.second))
    return "leaf"


def _reshape(shape, it):
    if shape == "leaf":
        return next(it)
    return (_reshape(shape[0], it), _reshape(shape[1], it))


def _flatten_by_shape(value, shape):
    if shape == "leaf":
        return [value]
    if is_bot(value):
        value = (BOT, BOT)
    return _flatten_by_shape(value[0], shape[0]) + _flatten_by_shape(value[1], shape[1])


# ---------------------------------------------------------------------------
# Sentinel-semantics mirror (python model of the emitted code)
# ---------------------------------------------------------------------------

@dataclass
class SentinelKernels:
    """The emitted kernels, interpreted in Python over sentinel words; used
    to validate the emitted logic against the abstract engine."""

    base: KernelSet
    fields: list[Field]
    shape: object

    def encode(self, value):
        return encode_value(value, self.fields, self.shape)

    def decode(self, words):
        return decode_value(words, self.fields, self.shape)

    def initialize(self, v: int, params: dict, info) -> tuple:
        return self.encode(self.base.init_value(v, params, info))

    def propagate(self, words, edge, info) -> tuple:
        return self.encode(self.base.P(self.decode(words), edge, info=info))

    def reduce_into(self, slot_words, incoming) -> tuple:
        cur = self.decode(slot_words)
        inc = self.decode(incoming)
        return self.encode(self.base.R.apply(cur, inc))


def sentinel_kernels(kernels: KernelSet) -> SentinelKernels:
    fields = field_layout(kernels)
    shape = value_shape(kernels.value_fn) if kernels.value_fn is not None else "leaf"
    return SentinelKernels(kernels, fields, shape)


# ---------------------------------------------------------------------------
# C++ kernel emission
# ---------------------------------------------------------------------------

def _cpp_field_expr(e: KExpr, fields: list[Field], leaf_names: dict, out: list) -> None:
    """Flatten a kernel body expression into one C++ expression per field."""
    if isinstance(e, KPair):
        _cpp_field_expr(e.left, fields, leaf_names, out)
        _cpp_field_expr(e.right, fields, leaf_names, out)
        return
    out.append(_cpp_scalar(e, leaf_names))


def _cpp_scalar(e: KExpr, names: dict) -> str:
    if isinstance(e, KLit):
        if is_bot(e.value):
            return "NONEVAL"
        if e.value is True:
            return "1"
        if e.value is False:
            return "0"
        return str(int(e.value))
    if isinstance(e, KVar):
        return names.get(e.name, e.name)
    if isinstance(e, KBin):
        a, b = _cpp_scalar(e.left, names), _cpp_scalar(e.right, names)
        if e.op == "+":
            return f"kadd({a}, {b})"
        if e.op == "-":
            return f"ksub({a}, {b})"
        if e.op == "min":
            return f"kmin({a}, {b})"
        if e.op == "max":
            return f"kmax({a}, {b})"
        if e.op == "=":
            return f"(({a}) == ({b}) ? 1 : 0)"
        if e.op == "<":
            return f"(({a}) < ({b}) ? 1 : 0)"
        raise EmitError(f"cannot emit operator {e.op!r}")
    if isinstance(e, KNeg):
        return f"kneg({_cpp_scalar(e.arg, names)})"
    if isinstance(e, KIte):
        return (f"(istrue({_cpp_scalar(e.cond, names)}) ? "
                f"{_cpp_scalar(e.then, names)} : {_cpp_scalar(e.other, names)})")
    if isinstance(e, KEdgeFn):
        return {"weight": "e.weight", "capacity": "e.capacity",
                "src": "e.src", "dst": "e.dst"}[e.name]
    raise EmitError(f"cannot emit kernel expression {e!r}")


def _pattern_leaf_names(pattern: VarTree) -> list[str]:
    if isinstance(pattern, str):
        return [pattern]
    return _pattern_leaf_names(pattern[0]) + _pattern_leaf_names(pattern[1])


def _reduce_body(red: Reduction, fields: list[Field], base: int, lines: list, indent: str):
    """Emit the field-update logic of the compare-and-swap reduce loop,
    mirroring the generated listings: min/max fields take the better value,
    tie-aware pairs fall through to their payload on equal firsts."""
    if isinstance(red, Builtin):
        f = fields[base].name
        if red.name in ("min", "left"):
            lines.append(f"{indent}if (b.{f} < c.{f}) {{ w.{f} = b.{f}; }} "
                         f"else {{ if (b.{f} > c.{f}) {{ w.{f} = c.{f}; }} }}")
        elif red.name == "max":
            lines.append(f"{indent}if (b.{f} > c.{f}) {{ w.{f} = b.{f}; }} "
                         f"else {{ if (b.{f} < c.{f}) {{ w.{f} = c.{f}; }} }}")
        elif red.name == "sum":
            lines.append(f"{indent}w.{f} = kadd(c.{f}, b.{f});")
        elif red.name == "or":
            lines.append(f"{indent}w.{f} = (c.{f} || b.{f}) ? 1 : 0;")
        elif red.name == "and":
            lines.append(f"{indent}w.{f} = (c.{f} && b.{f}) ? 1 : 0;")
        else:
            raise EmitError(red.name)
        return base + 1
    if isinstance(red, Pairwise):
        mid = _reduce_body(red.first, fields, base, lines, indent)
        return _reduce_body(red.second, fields, mid, lines, indent)
    if isinstance(red, TieAware):
        f = fields[base].name
        width = len(_directions(red))
        take_b = " ".join(f"w.{fields[base+i].name} = b.{fields[base+i].name};"
                          for i in range(width))
        keep_c = " ".join(f"w.{fields[base+i].name} = c.{fields[base+i].name};"
                          for i in range(width))
        cmp_win = "<" if red.outer.name == "min" else ">"
        cmp_lose = ">" if red.outer.name == "min" else "<"
        lines.append(f"{indent}if (b.{f} {cmp_win} c.{f}) {{ {take_b} }}")
        lines.append(f"{indent}else {{ if (b.{f} {cmp_lose} c.{f}) {{ {keep_c} }} }}")
        if not (isinstance(red.inner, Builtin) and red.inner.name == "left"):
            lines.append(f"{indent}if (c.{f} == b.{f}) {{")
            _reduce_body(red.inner, fields, base + 1, lines, indent + "\t")
            lines.append(f"{indent}}}")
        return base + width
    raise EmitError(f"cannot emit reduction {red!r}")


def _improve_pred(red: Reduction, fields: list[Field], base: int) -> tuple[str, int]:
    """Retry predicate: the incoming value would still improve the slot."""
    if isinstance(red, Builtin):
        f = fields[base].name
        if red.name in ("min", "left"):
            return f"b.{f} < c.{f}", base + 1
        if red.name == "max":
            return f"b.{f} > c.{f}", base + 1
        if red.name == "sum":
            return f"b.{f} != 0", base + 1
        if red.name == "or":
            return f"(b.{f} && !c.{f})", base + 1
        if red.name == "and":
            return f"(!b.{f} && c.{f})", base + 1
        raise EmitError(red.name)
    if isinstance(red, Pairwise):
        a, mid = _improve_pred(red.first, fields, base)
        b, end = _improve_pred(red.second, fields, mid)
        return f"{a} ||\n\t    {b}", end
    if isinstance(red, TieAware):
        f = fields[base].name
        width = len(_directions(red))
        win = "<" if red.outer.name == "min" else ">"
        if isinstance(red.inner, Builtin) and red.inner.name == "left":
            return f"b.{f} {win} c.{f}", base + width
        inner, _ = _improve_pred(red.inner, fields, base + 1)
        return (f"b.{f} {win} c.{f} ||\n\t    (c.{f} == b.{f} && ({inner}))", base + width)
    raise EmitError(f"cannot emit reduction {red!r}")


def emit_kernels(kernels: KernelSet, name: str) -> str:
    """Deterministic native kernel source for the harness: value struct,
    initialize/propagate(/rollback) and the atomic reduce with a
    compare-and-swap retry loop."""
    fields = field_layout(kernels)
    nfields = len(fields)
    lines = [f"// kernel: {name}", "#pragma once", "#include <cstdint>",
             '#include "runtime.hpp"', ""]
    lines.append("struct VValueType {")
    for f in fields:
        lines.append(f"\tint64_t {f.name};")
    lines.append("};")
    sent = ", ".join(_sent_cpp(f.sentinel) for f in fields)
    lines.append(f"static const VValueType VNONE = {{{sent}}};")
    lines.append("static inline bool is_none(const VValueType& v) {")
    conds = " && ".join(f"v.{f.name} == {_sent_cpp(f.sentinel)}" for f in fields)
    lines.append(f"\treturn {conds};")
    lines.append("}")
    lines.append("")
    # encoding helpers: kernel bodies compute over a canonical none word
    for f in fields:
        lines.append(f"static inline int64_t enc_{f.name}(int64_t x) "
                     f"{{ return x == NONEVAL ? {_sent_cpp(f.sentinel)} : x; }}")
        lines.append(f"static inline int64_t dec_{f.name}(int64_t x) "
                     f"{{ return x == {_sent_cpp(f.sentinel)} ? NONEVAL : x; }}")
    lines.append("")
    # initialize
    srcs = ", ".join(f"int64_t s{i}" for i in range(max(1, len(kernels.sources))))
    lines.append(f"static inline VValueType initialize(int64_t v, int64_t n_vertices, {srcs}) {{")
    exprs: list[str] = []
    names = {"v": "v"}
    for i in range(len(kernels.sources)):
        names[f"s{i}"] = f"s{i}"
    names["s"] = "s0"
    _cpp_field_expr(kernels.I.body, fields, names, exprs)
    lines.append("\tVValueType out;")
    for f, ex in zip(fields, exprs):
        lines.append(f"\tout.{f.name} = enc_{f.name}({ex});")
    lines.append("\treturn out;")
    lines.append("}")
    lines.append("")
    # propagate
    lines.append("static inline VValueType propagate(const VValueType n, const EdgeRef e) {")
    lines.append("\tif (is_none(n)) return VNONE;")
    body = _propagate_body(kernels, fields)
    lines.extend(body)
    lines.append("}")
    lines.append("")
    if kernels.B is not None:
        lines.append("static inline VValueType rollback(const VValueType n, const EdgeRef e) {")
        lines.append("\tif (is_none(n)) return VNONE;")
        lines.extend(_propagate_body(kernels, fields, use_rollback=True))
        lines.append("}")
        lines.append("")
    else:
        lines.append("// no rollback function")
        lines.append("")
    # slot accessors: true compare-and-swap for single-field values, striped
    # locks otherwise
    lines.append("static inline VValueType vslot_load(VSlot& a) {")
    if nfields == 1:
        lines.append("\tVValueType v; v.first = a.w[0].load(std::memory_order_relaxed); return v;")
    else:
        lines.append("\tstd::lock_guard<std::mutex> g(stripe_for(&a));")
        lines.append("\tVValueType v;")
        for i, f in enumerate(fields):
            lines.append(f"\tv.{f.name} = a.w[{i}].load(std::memory_order_relaxed);")
        lines.append("\treturn v;")
    lines.append("}")
    lines.append("static inline void vslot_store(VSlot& a, const VValueType v) {")
    for i, f in enumerate(fields):
        lines.append(f"\ta.w[{i}].store(v.{f.name}, std::memory_order_relaxed);")
    lines.append("}")
    lines.append("static inline bool vslot_cas(VSlot& a, const VValueType c, const VValueType w) {")
    if nfields == 1:
        lines.append("\tint64_t expect = c.first;")
        lines.append("\treturn a.w[0].compare_exchange_strong(expect, w.first);")
    else:
        lines.append("\tstd::lock_guard<std::mutex> g(stripe_for(&a));")
        conds = " && ".join(f"a.w[{i}].load(std::memory_order_relaxed) == c.{f.name}"
                            for i, f in enumerate(fields))
        lines.append(f"\tif (!({conds})) return false;")
        for i, f in enumerate(fields):
            lines.append(f"\ta.w[{i}].store(w.{f.name}, std::memory_order_relaxed);")
        lines.append("\treturn true;")
    lines.append("}")
    lines.append("")
    # sequential reduce (pull loops have a single writer per vertex)
    lines.append("static inline VValueType reduce_local(const VValueType c, const VValueType b) {")
    lines.append("\tVValueType w = c;")
    lbody: list[str] = []
    _reduce_body(kernels.R, fields, 0, lbody, "\t")
    lines.extend(lbody)
    lines.append("\treturn w;")
    lines.append("}")
    lines.append("")
    # atomic reduce
    lines.append("static inline bool reduce(VSlot& a, const VValueType b) {")
    lines.append("\tbool r = 0;")
    lines.append("\tVValueType c;")
    lines.append("\tVValueType w;")
    lines.append("\tdo {")
    lines.append("\t\tc = vslot_load(a);")
    lines.append("\t\tw = c;")
    rbody: list[str] = []
    _reduce_body(kernels.R, fields, 0, rbody, "\t\t")
    lines.extend(rbody)
    pred, _ = _improve_pred(kernels.R, fields, 0)
    lines.append(f"\t}} while((({pred}) &&")
    lines.append("\t    !(r = vslot_cas(a, c, w))));")
    lines.append("\treturn r;")
    lines.append("}")
    lines.append("")
    lines.append(f"static const int VFIELDS = {nfields};")
    idem = "true" if kernels.idempotent else "false"
    lines.append(f"static const bool VIDEMPOTENT = {idem};")
    kinds = ", ".join(f"'{f.kind[0]}'" for f in fields)
    lines.append(f"static const char VFIELD_KINDS[] = {{{kinds}}};")
    lines.append("static inline int64_t vfield(const VValueType& v, int i) {")
    lines.append("\tswitch (i) {")
    for i, f in enumerate(fields):
        lines.append(f"\t\tcase {i}: return v.{f.name};")
    lines.append("\t}")
    lines.append("\treturn 0;")
    lines.append("}")
    lines.append("static inline int64_t vsentinel(int i) {")
    lines.append("\tswitch (i) {")
    for i, f in enumerate(fields):
        lines.append(f"\t\tcase {i}: return {_sent_cpp(f.sentinel)};")
    lines.append("\t}")
    lines.append("\treturn 0;")
    lines.append("}")
    lines.append(f"static const int VNUM_SOURCES = {len(kernels.sources)};")
    lines.append("static inline VValueType init_from(int64_t v, int64_t n_vertices, const int64_t* s) {")
    args = ", ".join(f"s[{i}]" for i in range(max(1, len(kernels.sources))))
    lines.append(f"\treturn initialize(v, n_vertices, {args});")
    lines.append("}")
    return "\n".join(lines) + "\n"


def _sent_cpp(v: int) -> str:
    if v == INT64_MAX:
        return "INT64_MAX"
    if v == INT64_MIN:
        return "INT64_MIN"
    return str(v)


def _propagate_body(kernels: KernelSet, fields: list[Field], use_rollback=False) -> list[str]:
    fn = kernels.B if use_rollback else kernels.P
    inner = fn.inner if isinstance(fn, (WrappedPropagate,)) else fn
    if isinstance(inner, CompositePropagate):
        parts = _composite_leaves(inner.parts)
        pattern: VarTree = None
        bodies = []
        for p in parts:
            k = p.inner
            bodies.append((k.patterns[0], k.body))
    else:
        k = inner
        bodies = [(k.patterns[0], k.body)]
    lines = ["\tVValueType out;"]
    base = 0
    for pat, body in bodies:
        leaf_names = _pattern_leaf_names(pat)
        names = {nm: f"dec_{fields[base + j].name}(n.{fields[base + j].name})"
                 for j, nm in enumerate(leaf_names)}
        names["l"] = "e"
        exprs: list[str] = []
        _cpp_field_expr(body, fields, names, exprs)
        width = len(exprs)
        guard = " && ".join(
            f"n.{fields[base + j].name} == {_sent_cpp(fields[base + j].sentinel)}"
            for j in range(width))
        if len(bodies) > 1:
            lines.append(f"\tif ({guard}) {{")
            for j in range(width):
                f = fields[base + j]
                lines.append(f"\t\tout.{f.name} = {_sent_cpp(f.sentinel)};")
            lines.append("\t} else {")
            for j, ex in enumerate(exprs):
                f = fields[base + j]
                lines.append(f"\t\tout.{f.name} = enc_{f.name}({ex});")
            lines.append("\t}")
        else:
            for j, ex in enumerate(exprs):
                f = fields[base + j]
                lines.append(f"\tout.{f.name} = enc_{f.name}({ex});")
        base += width
    lines.append("\treturn out;")
    return lines


def _composite_leaves(parts):
    if isinstance(parts, tuple):
        return _composite_leaves(parts[0]) + _composite_leaves(parts[1])
    return [parts]


# ---------------------------------------------------------------------------
# Plan JSON
# ---------------------------------------------------------------------------

def expr_to_obj(e: Expr):
    if isinstance(e, EVar):
        return {"var": e.name}
    if isinstance(e, ELit):
        v = e.value
        if is_bot(v):
            return {"lit": None}
        if isinstance(v, frozenset):
            return {"lit": sorted(v), "set": True}
        return {"lit": v}
    if isinstance(e, EBin):
        return {"op": e.op, "args": [expr_to_obj(e.left), expr_to_obj(e.right)]}
    if isinstance(e, EUn):
        return {"unop": e.op, "arg": expr_to_obj(e.arg)}
    if isinstance(e, ESingleton):
        return {"unop": "setof", "arg": expr_to_obj(e.arg)}
    raise EmitError(f"cannot serialize expression {e!r}")


def expr_from_obj(o) -> Expr:
    if "var" in o:
        return EVar(o["var"])
    if "lit" in o:
        v = o["lit"]
        if v is None:
            return ELit(BOT)
        if o.get("set"):
            return ELit(frozenset(v))
        return ELit(v)
    if "op" in o:
        return EBin(o["op"], expr_from_obj(o["args"][0]), expr_from_obj(o["args"][1]))
    if "unop" in o:
        return EUn(o["unop"], expr_from_obj(o["arg"]))
    raise EmitError(f"bad expression encoding {o!r}")


def _bind_to_obj(b: VarTree):
    if isinstance(b, str):
        return b
    return [_bind_to_obj(b[0]), _bind_to_obj(b[1])]


def _bind_from_obj(o) -> VarTree:
    if isinstance(o, str):
        return o
    return (_bind_from_obj(o[0]), _bind_from_obj(o[1]))


def config_to_obj(c):
    if isinstance(c, ConfigPair):
        return {"pair": [config_to_obj(c.first), config_to_obj(c.second)]}
    return {"source": c.source, "orientation": c.orientation}


def config_from_obj(o):
    if "pair" in o:
        return ConfigPair(config_from_obj(o["pair"][0]), config_from_obj(o["pair"][1]))
    return Config(o["source"], o["orientation"])


def ms_to_obj(ms: Ms):
    if isinstance(ms, MsBot):
        return {"bot": True}
    if isinstance(ms, MSingle):
        return {"red": ms.red.to_dict(), "fn": path_expr_to_dict(ms.fn),
                "config": config_to_obj(ms.config)}
    raise EmitError("round reductions must be fused before emission")


def ms_from_obj(o) -> Ms:
    if o.get("bot"):
        return MsBot()
    return MSingle(reduction_from_dict(o["red"]), path_expr_from_dict(o["fn"]),
                   config_from_obj(o["config"]))


def rs_to_obj(rs: Rs):
    if isinstance(rs, RsBot):
        return {"bot": True}
    if isinstance(rs, RsPair):
        return {"pair": [rs_to_obj(rs.first), rs_to_obj(rs.second)]}
    if isinstance(rs, RSingle):
        return {"red": rs.red.to_dict(), "args": list(rs.args),
                "shape": _bind_to_obj(rs.arg_shape())}
    raise EmitError(f"cannot serialize vertex reduction {rs!r}")


def rs_from_obj(o) -> Rs:
    if o.get("bot"):
        return RsBot()
    if "pair" in o:
        return RsPair(rs_from_obj(o["pair"][0]), rs_from_obj(o["pair"][1]))
    shape = _bind_from_obj(o["shape"])
    args = tuple(o["args"])
    return RSingle(reduction_from_dict(o["red"]), args,
                   shape if not isinstance(shape, str) else "")


def kernelset_to_obj(k: KernelSet):
    def prop_to_obj(p):
        if p is None:
            return None
        inner = p.inner if isinstance(p, WrappedPropagate) else p
        if isinstance(inner, CompositePropagate):
            return {"composite": _parts_to_obj(inner.parts)}
        return kernelfn_to_obj(p)

    def _parts_to_obj(parts):
        if isinstance(parts, tuple):
            return [_parts_to_obj(parts[0]), _parts_to_obj(parts[1])]
        return kernelfn_to_obj(parts)

    return {
        "I": kernelfn_to_obj(k.I),
        "P": prop_to_obj(k.P),
        "B": prop_to_obj(k.B),
        "R": k.R.to_dict(),
        "idempotent": k.idempotent,
        "sources": list(k.sources),
        "value_fn": path_expr_to_dict(k.value_fn) if k.value_fn is not None else None,
    }


def kernelset_from_obj(o) -> KernelSet:
    def prop_from_obj(p):
        if p is None:
            return None
        if isinstance(p, dict) and "composite" in p:
            return CompositePropagate(_parts_from_obj(p["composite"]))
        return kernelfn_from_obj(p)

    def _parts_from_obj(parts):
        if isinstance(parts, list):
            return (_parts_from_obj(parts[0]), _parts_from_obj(parts[1]))
        return kernelfn_from_obj(parts)

    return KernelSet(
        I=kernelfn_from_obj(o["I"]),
        P=prop_from_obj(o["P"]),
        B=prop_from_obj(o["B"]),
        R=reduction_from_dict(o["R"]),
        idempotent=o["idempotent"],
        sources=tuple(o["sources"]),
        value_fn=path_expr_from_dict(o["value_fn"]) if o["value_fn"] else None,
    )


def emit_plan(cp) -> str:
    """Serialize a compiled plan to the versioned JSON contract."""
    from .compiler import CompiledPlan

    assert isinstance(cp, CompiledPlan)
    plan = cp.plan
    rounds = []
    for cr in cp.rounds:
        r = cr.round
        obj = {
            "var": r.var,
            "kind": r.kind,
            "target": r.target,
            "bind_i": _bind_to_obj(r.bind_i),
            "ms": ms_to_obj(r.ms),
            "map_exprs": expr_to_obj(r.es),
            "groups": [
                {
                    "orientation": grp.orientation,
                    "ms": ms_to_obj(grp.ms),
                    "kernels": kernelset_to_obj(grp.kernels),
                    "conditions": grp.result.report.to_obj(),
                }
                for grp in cr.groups
            ],
            "certified_modes": cr.candidate_modes() if cr.groups else [],
        }
        if r.kind == "scalar":
            obj["bind_m"] = _bind_to_obj(r.bind_m)
            obj["bind_r"] = _bind_to_obj(r.bind_r)
            obj["vertex_reduce"] = rs_to_obj(r.rs)
            obj["result_expr"] = expr_to_obj(r.result)
        rounds.append(obj)
    doc = {
        "schema": PLAN_SCHEMA,
        "spec": plan.spec_name,
        "params": list(plan.params),
        "kind": plan.kind,
        "rounds": rounds,
        "final": expr_to_obj(plan.final),
    }
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def load_plan(text: str):
    """Reconstruct a compiled plan from the JSON contract."""
    from .compiler import CompiledPlan, CompiledRound, RoundGroup, _skeleton_of
    from .synth import SynthResult
    from .verify import ConditionReport

    doc = json.loads(text)
    if doc.get("schema") != PLAN_SCHEMA:
        raise EmitError(f"unsupported plan schema {doc.get('schema')!r}")
    rounds = []
    crounds = []
    for ro in doc["rounds"]:
        kind = ro["kind"]
        r = Round(
            ro["var"],
            _bind_from_obj(ro["bind_i"]),
            ms_from_obj(ro["ms"]),
            _bind_from_obj(ro["bind_m"]) if kind == "scalar" else None,
            expr_from_obj(ro["map_exprs"]),
            _bind_from_obj(ro["bind_r"]) if kind == "scalar" else None,
            rs_from_obj(ro["vertex_reduce"]) if kind == "scalar" else None,
            expr_from_obj(ro["result_expr"]) if kind == "scalar" else None,
            ro.get("target"),
        )
        rounds.append(r)
        groups = []
        for go in ro["groups"]:
            rep = ConditionReport()
            for cname, entry in go["conditions"].items():
                if entry["status"] == "pass":
                    rep.set_pass(cname)
                elif entry["status"] == "fail":
                    rep.set_fail(cname, _LoadedWitness(entry.get("witness", "")))
                else:
                    rep.set_skip(cname, entry.get("reason", ""))
            groups.append(RoundGroup(go["orientation"], ms_from_obj(go["ms"]),
                                     SynthResult(kernelset_from_obj(go["kernels"]), rep)))
        leaves = []
        if isinstance(r.ms, MSingle):
            n = _count_leaves(r.ms.config)
            order = []
            by_orient = {}
            tags = []
            flat = _config_leaf_orients(r.ms.config)
            counts: dict = {}
            for o in flat:
                if o not in by_orient:
                    by_orient[o] = True
                    order.append(o)
                tags.append((order.index(o), counts.setdefault(o, 0)))
                counts[o] += 1
            skeleton = _skeleton_of(r.ms, list(tags))
        else:
            skeleton = None
        crounds.append(CompiledRound(r, groups, skeleton))
    plan = Plan(doc["spec"], tuple(doc["params"]), rounds, expr_from_obj(doc["final"]),
                doc["kind"])
    return CompiledPlan(plan, crounds)


def _config_leaf_orients(cfg) -> list[str]:
    if isinstance(cfg, ConfigPair):
        return _config_leaf_orients(cfg.first) + _config_leaf_orients(cfg.second)
    return [cfg.orientation]


def _count_leaves(cfg) -> int:
    return len(_config_leaf_orients(cfg))


@dataclass
class _LoadedWitness:
    text: str

    def describe(self) -> str:
        return self.text
