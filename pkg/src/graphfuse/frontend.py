"""Concrete text syntax for specifications (.grafs files): tokenizer,
recursive-descent parser, by-name reference resolution, and a pretty-printer
whose output parses back alpha-equivalent.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Union

from .graph import BOT, is_bot
from .terms import (
    ArgsRed, BACKWARD, Builtin, Config, ConfigPair, EBin, ELit, EUn, EVar, Expr, FORWARD,
    Guarded, ILet, LEFT, MArgSel, MBin, MCard, MLit, MScalar, MSingle, MTerm,
    MUn, MUnfactored, MVar, Ms, MsBot, MsPair, Node, Pairwise, PathRed, Paths,
    PConst, PFn, PPair, PSingleton, PTerm, PathExpr, RBin, RLit, RSingle,
    RTerm, RUn, RVar, Ref, Rs, RsBot, RsPair, Reduction, TermError, TieAware,
    TripleLet, VarTree, VertexRed, VertexRedConstrained, VertexRedOverSet,
    desugar, normalize_scalars, substitute, tree_vars,
)

REDUCTION_WORDS = ("min", "max", "sum", "or", "and", "union", "intersect")
PATH_FN_WORDS = ("length", "weight", "capacity", "head", "penultimate")
KEYWORDS = set(REDUCTION_WORDS) | set(PATH_FN_WORDS) | {
    "in", "let", "where", "true", "false", "bot", "V", "Paths",
    "argmin", "argmax", "argsmin", "argsmax",
    "ilet", "mlet", "rlet", "tie", "pairof", "guarded", "left", "not", "card",
}


class SpecError(ValueError):
    """Parse or resolution failure, formatted file:line:col: message."""

    def __init__(self, msg: str, filename: str = "<spec>", line: int = 0, col: int = 0):
        self.filename, self.line, self.col = filename, line, col
        self.bare_message = msg
        super().__init__(f"{filename}:{line}:{col}: {msg}")


@dataclass
class SpecDef:
    """One named specification: parameters, optional per-vertex map variable,
    and the resolved term (m-valued when map_var is set, scalar otherwise)."""

    name: str
    params: tuple[str, ...]
    map_var: Optional[str]
    term: Node
    line: int = 0
    groups: tuple[tuple[str, ...], ...] = ()  # raw header groups pre-resolution


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>\#[^\n]*)
  | (?P<nl>\n)
  | (?P<float>\d+\.\d+)
  | (?P<int>\d+)
  | (?P<assign>:=)
  | (?P<arrowr>->)
  | (?P<arrowl><-)
  | (?P<name>[A-Za-z_][A-Za-z0-9_%]*'*)
  | (?P<sym>[(){}<>=,|/*+\-@])
    """,
    re.VERBOSE,
)


@dataclass
class Tok:
    kind: str  # name|int|float|sym|assign|arrowr|arrowl|eof
    text: str
    line: int
    col: int


def tokenize(text: str, filename: str = "<spec>") -> list[Tok]:
    out: list[Tok] = []
    line, col, i = 1, 1, 0
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        if not m:
            raise SpecError(f"unexpected character {text[i]!r}", filename, line, col)
        kind = m.lastgroup
        tok = m.group()
        if kind == "nl":
            line += 1
            col = 1
        elif kind in ("ws", "comment"):
            col += len(tok)
        else:
            out.append(Tok(kind, tok, line, col))
            col += len(tok)
        i = m.end()
    out.append(Tok("eof", "", line, col))
    return out


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

class Parser:
    def __init__(self, tokens: list[Tok], filename: str = "<spec>"):
        self.toks = tokens
        self.i = 0
        self.filename = filename
        self.path_sets: dict[str, PTerm] = {}
        # inside <...> pairs a bare '>' closes the pair instead of comparing
        self._ctx: list[str] = []

    # -- token helpers ------------------------------------------------------

    def peek(self, ahead: int = 0) -> Tok:
        return self.toks[min(self.i + ahead, len(self.toks) - 1)]

    def next(self) -> Tok:
        t = self.toks[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def at(self, text: str) -> bool:
        return self.peek().text == text and self.peek().kind in ("sym", "name", "assign", "arrowr", "arrowl")

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.next()
            return True
        return False

    def expect(self, text: str) -> Tok:
        t = self.peek()
        if not self.accept(text):
            raise self.err(f"expected {text!r}, found {t.text!r}")
        return t

    def err(self, msg: str) -> SpecError:
        t = self.peek()
        return SpecError(msg, self.filename, t.line, t.col)

    # -- spec file ----------------------------------------------------------

    def parse_file(self) -> dict[str, SpecDef]:
        defs: dict[str, SpecDef] = {}
        while self.peek().kind != "eof":
            d = self.parse_decl()
            if d.name in defs:
                raise self.err(f"duplicate specification {d.name!r}")
            defs[d.name] = d
        return defs

    def parse_decl(self) -> SpecDef:
        t = self.peek()
        if t.kind != "name":
            raise self.err(f"expected a specification name, found {t.text!r}")
        name = self.next().text
        line = t.line
        groups: list[tuple[str, ...]] = []
        while self.at("("):
            self.next()
            grp = [self.expect_name()]
            while self.accept(","):
                grp.append(self.expect_name())
            self.expect(")")
            groups.append(tuple(grp))
        self.expect("=")
        self.path_sets = {}
        body = self.parse_m_expr()
        # params/map_var are classified after references are resolved
        return SpecDef(name, (), None, body, line, tuple(groups))

    def expect_name(self) -> str:
        t = self.peek()
        if t.kind != "name":
            raise self.err(f"expected a name, found {t.text!r}")
        return self.next().text

    # -- expressions (uniform m-layer) ---------------------------------------

    def parse_m_expr(self) -> MTerm:
        return self.parse_or()

    def parse_or(self) -> MTerm:
        left = self.parse_and()
        while self.peek().text == "or" and self.peek(1).text not in ("{",):
            self.next()
            left = MBin("or", left, self.parse_and())
        return left

    def parse_and(self) -> MTerm:
        left = self.parse_cmp()
        while self.peek().text == "and" and self.peek(1).text not in ("{",):
            self.next()
            left = MBin("and", left, self.parse_cmp())
        return left

    def parse_cmp(self) -> MTerm:
        left = self.parse_add()
        t = self.peek()
        if t.kind == "sym" and (
            t.text in ("=", "<") or (t.text == ">" and (not self._ctx or self._ctx[-1] != "pair"))
        ):
            op = self.next().text
            return MBin(op, left, self.parse_add())
        return left

    def parse_add(self) -> MTerm:
        left = self.parse_mul()
        while self.peek().text in ("+", "-") and self.peek().kind == "sym":
            op = self.next().text
            left = MBin(op, left, self.parse_mul())
        return left

    def parse_mul(self) -> MTerm:
        left = self.parse_unary()
        while self.peek().text in ("*", "/") and self.peek().kind == "sym":
            op = self.next().text
            left = MBin(op, left, self.parse_unary())
        return left

    def parse_unary(self) -> MTerm:
        if self.at("-"):
            self.next()
            return MUn("-", self.parse_unary())
        if self.peek().text in ("not", "card") and self.peek(1).text == "(":
            op = self.next().text
            self.expect("(")
            arg = self.parse_m_expr()
            self.expect(")")
            return MUn(op, arg)
        return self.parse_atom()

    def parse_atom(self) -> MTerm:
        t = self.peek()
        if t.kind == "int":
            self.next()
            return MLit(int(t.text))
        if t.kind == "float":
            self.next()
            return MLit(float(t.text))
        if self.at("true"):
            self.next()
            return MLit(True)
        if self.at("false"):
            self.next()
            return MLit(False)
        if self.at("bot"):
            self.next()
            return MLit(BOT)
        if self.at("("):
            self.next()
            self._ctx.append("paren")
            e = self.parse_m_expr()
            self._ctx.pop()
            self.expect(")")
            return e
        if self.at("<"):
            self.next()
            self._ctx.append("pair")
            a = self.parse_m_expr()
            self.expect(",")
            b = self.parse_m_expr()
            self._ctx.pop()
            self.expect(">")
            return MBin("pair", a, b)
        if self.at("{"):
            self.next()
            e = self.parse_m_expr()
            self.expect("}")
            return MUn("setof", e)
        if self.at("|"):
            self.next()
            inner = self.try_parse_path_set()
            if inner is not None:
                self.expect("|")
                return MCard(inner)
            e = self.parse_m_expr()
            self.expect("|")
            return MUn("card", e)
        if t.text in REDUCTION_WORDS:
            if self.peek(1).text == "{":
                return self.parse_reduction()
            if self.peek(1).text == "(" and t.text in ("min", "max", "union", "intersect"):
                op = self.next().text
                self.expect("(")
                a = self.parse_m_expr()
                self.expect(",")
                b = self.parse_m_expr()
                self.expect(")")
                return MBin(op, a, b)
            raise self.err(f"reduction {t.text!r} must be followed by a binder")
        if t.text in ("tie", "pairof", "guarded"):
            return self.parse_reduction()
        if t.text in PATH_FN_WORDS:
            return self.parse_path_fn_apply()
        if self.at("let"):
            return self.parse_let()
        if self.at("ilet"):
            return self.parse_ilet()
        if t.kind == "name":
            if t.text in ("argmin", "argmax", "argsmin", "argsmax"):
                raise self.err(f"{t.text} is only allowed under a path function or as a path set")
            self.next()
            if self.at("("):
                self.next()
                args: list[object] = []
                if not self.at(")"):
                    args.append(self.parse_ref_arg())
                    while self.accept(","):
                        args.append(self.parse_ref_arg())
                self.expect(")")
                return Ref(t.text, tuple(args))
            return MVar(t.text)
        raise self.err(f"unexpected token {t.text!r}")

    def parse_ref_arg(self):
        t = self.peek()
        if t.kind == "int":
            self.next()
            return int(t.text)
        if t.kind == "name":
            self.next()
            return t.text
        raise self.err("specification arguments are vertex names or literals")

    # -- reductions ------------------------------------------------------------

    def parse_reduction_name(self) -> Reduction:
        t = self.peek()
        if t.text in REDUCTION_WORDS:
            self.next()
            return Builtin(t.text)
        if t.text == "left":
            self.next()
            return LEFT
        if t.text == "tie":
            self.next()
            self.expect("(")
            outer = self.parse_reduction_name()
            self.expect(",")
            inner = self.parse_reduction_name()
            self.expect(")")
            if not isinstance(outer, Builtin):
                raise self.err("tie-aware outer reduction must be min or max")
            return TieAware(outer, inner)
        if t.text == "pairof":
            self.next()
            self.expect("(")
            a = self.parse_reduction_name()
            self.expect(",")
            b = self.parse_reduction_name()
            self.expect(")")
            return Pairwise(a, b)
        if t.text == "guarded":
            self.next()
            self.expect("(")
            r = self.parse_reduction_name()
            self.expect(")")
            return Guarded(r)
        raise self.err(f"unknown reduction {t.text!r}")

    def parse_reduction(self) -> MTerm:
        red = self.parse_reduction_name()
        self.expect("{")
        var = self.expect_name()
        self.expect("in")
        if self.at("V"):
            self.next()
            if self.accept("where"):
                guard = self.parse_m_expr()
                self.expect("}")
                body = self.parse_m_expr()
                if not isinstance(red, Builtin):
                    raise self.err("constrained vertex reductions take a builtin reduction")
                return MScalar(VertexRedConstrained(red, var, guard, body))
            self.expect("}")
            body = self.parse_m_expr()
            return MScalar(VertexRed(red, var, body))
        if self.at("{"):
            self.next()
            members: list[object] = [self.parse_vertex_lit()]
            while self.accept(","):
                members.append(self.parse_vertex_lit())
            self.expect("}")
            self.expect("}")
            body = self.parse_m_expr()
            if not isinstance(red, Builtin):
                raise self.err("vertex-set reductions take a builtin reduction")
            return MScalar(VertexRedOverSet(red, var, tuple(members), body))
        pset = self.parse_path_set()
        self.expect("}")
        fn = self.parse_fexpr(var)
        if self.peek().kind == "arrowr":
            raise self.err("map-valued reduction unsupported")
        return PathRed(red, fn, pset)

    def parse_vertex_lit(self):
        t = self.peek()
        if t.kind == "int":
            self.next()
            return int(t.text)
        if t.kind == "name":
            self.next()
            return t.text
        raise self.err("vertex set members are vertex ids or parameter names")

    # -- path sets ---------------------------------------------------------------

    def try_parse_path_set(self) -> Optional[PTerm]:
        t = self.peek()
        if t.text in ("Paths", "argsmin", "argsmax"):
            return self.parse_path_set()
        if t.kind == "name" and t.text in self.path_sets and self.peek(1).text == "|":
            self.next()
            return self.path_sets[t.text]
        return None

    def parse_path_set(self) -> PTerm:
        t = self.peek()
        if self.at("Paths"):
            self.next()
            self.expect("(")
            a = self.parse_vertex_lit()
            if self.accept(","):
                b = self.parse_vertex_lit()
                self.expect(")")
                return Paths(a, b)
            self.expect(")")
            return Paths(None, a)
        if t.text in ("argsmin", "argsmax"):
            self.next()
            red = Builtin("min" if t.text == "argsmin" else "max")
            self.expect("{")
            var = self.expect_name()
            self.expect("in")
            inner = self.parse_path_set()
            self.expect("}")
            fn = self.parse_fexpr(var)
            return ArgsRed(red, fn, inner)
        if t.kind == "name" and t.text in self.path_sets:
            self.next()
            return self.path_sets[t.text]
        raise self.err(f"expected a path set, found {t.text!r}")

    def parse_let(self) -> MTerm:
        self.expect("let")
        name = self.expect_name()
        if self.peek().kind != "assign":
            raise self.err("expected ':='")
        self.next()
        pset = self.parse_path_set()
        self.expect("in")
        saved = self.path_sets.get(name)
        self.path_sets[name] = pset
        body = self.parse_m_expr()
        if saved is None:
            del self.path_sets[name]
        else:
            self.path_sets[name] = saved
        return body

    # -- path-function expressions --------------------------------------------

    def parse_path_fn_apply(self) -> MTerm:
        fn_name = self.next().text
        self.expect("(")
        t = self.peek()
        if t.text in ("argmin", "argmax"):
            self.next()
            red = Builtin("min" if t.text == "argmin" else "max")
            self.expect("{")
            var = self.expect_name()
            self.expect("in")
            pset = self.parse_path_set()
            self.expect("}")
            inner_fn = self.parse_fexpr(var)
            self.expect(")")
            return MArgSel(PFn(fn_name), red, inner_fn, pset)
        raise self.err("path functions apply to arg-reductions in this position")

    def parse_fexpr(self, pathvar: str) -> PathExpr:
        t = self.peek()
        if t.kind == "int":
            self.next()
            return PConst(int(t.text))
        if self.at("true"):
            self.next()
            return PConst(True)
        if self.at("false"):
            self.next()
            return PConst(False)
        if self.at("<"):
            self.next()
            a = self.parse_fexpr(pathvar)
            self.expect(",")
            b = self.parse_fexpr(pathvar)
            self.expect(">")
            return PPair(a, b)
        if self.at("{"):
            self.next()
            f = self.parse_fexpr(pathvar)
            self.expect("}")
            return PSingleton(f)
        if t.text in PATH_FN_WORDS:
            self.next()
            self.expect("(")
            v = self.expect_name()
            if v != pathvar:
                raise self.err(f"path function applies to {pathvar!r}, found {v!r}")
            self.expect(")")
            return PFn(t.text)
        if t.kind == "name":
            raise self.err(f"unknown path function {t.text!r}")
        raise self.err(f"expected a path function expression, found {t.text!r}")

    def parse_bare_fexpr(self) -> PathExpr:
        t = self.peek()
        if t.kind == "int":
            self.next()
            return PConst(int(t.text))
        if self.at("true"):
            self.next()
            return PConst(True)
        if self.at("false"):
            self.next()
            return PConst(False)
        if self.at("bot"):
            self.next()
            return PConst(BOT)
        if self.at("<"):
            self.next()
            a = self.parse_bare_fexpr()
            self.expect(",")
            b = self.parse_bare_fexpr()
            self.expect(">")
            return PPair(a, b)
        if self.at("{"):
            self.next()
            f = self.parse_bare_fexpr()
            self.expect("}")
            return PSingleton(f)
        if t.text in PATH_FN_WORDS:
            self.next()
            return PFn(t.text)
        raise self.err(f"expected a path function, found {t.text!r}")

    # -- fused let forms --------------------------------------------------------

    def parse_ilet(self) -> MTerm:
        self.expect("ilet")
        binders = self.parse_bind_tree()
        if self.peek().kind != "assign":
            raise self.err("expected ':='")
        self.next()
        ms = self.parse_ms_tree()
        target = None
        if self.accept("@"):
            target = self.expect_name()
        self.expect("in")
        if self.at("mlet"):
            return self.parse_triple_tail(binders, ms, target)
        body = self.parse_m_expr()
        return ILet(binders, ms, target, _to_expr(body, self))

    def parse_triple_tail(self, bind_i, ms, target) -> MTerm:
        self.expect("mlet")
        bind_m = self.parse_bind_tree()
        self.next() if self.peek().kind == "assign" else self.expect(":=")
        es = _to_expr(self.parse_m_expr(), self)
        self.expect("in")
        self.expect("rlet")
        bind_r = self.parse_bind_tree()
        self.next() if self.peek().kind == "assign" else self.expect(":=")
        rs = self.parse_rs_tree()
        self.expect("in")
        body = _to_expr(self.parse_m_expr(), self)
        return MScalar(TripleLet(bind_i, ms, target, bind_m, es, bind_r, rs, body))

    def parse_bind_tree(self) -> VarTree:
        if self.at("<"):
            self.next()
            a = self.parse_bind_tree()
            self.expect(",")
            b = self.parse_bind_tree()
            self.expect(">")
            return (a, b)
        return self.expect_name()

    def parse_ms_tree(self) -> Ms:
        if self.at("<"):
            self.next()
            a = self.parse_ms_tree()
            self.expect(",")
            b = self.parse_ms_tree()
            self.expect(">")
            return MsPair(a, b)
        if self.at("bot"):
            self.next()
            return MsBot()
        red = self.parse_reduction_name()
        if self.at("{"):
            self.next()
            var = self.expect_name()
            self.expect("in")
            pset = self.parse_path_set()
            self.expect("}")
            fn = self.parse_fexpr(var)
            return MUnfactored(red, fn, pset)
        # configured form: red (<cfg, cfg> | slot ->|<-) barefn
        self.expect("(")
        cfg = self.parse_config_tree()
        self.expect(")")
        fn = self.parse_bare_fexpr()
        return MSingle(red, fn, cfg)

    def parse_config_tree(self):
        if self.at("<") and self.peek().kind == "sym":
            self.next()
            a = self.parse_config_tree()
            self.expect(",")
            b = self.parse_config_tree()
            self.expect(">")
            return ConfigPair(a, b)
        source: Union[str, int, None] = None
        t = self.peek()
        if t.kind == "int":
            self.next()
            source = int(t.text)
        elif t.kind == "name":
            self.next()
            source = t.text
        if self.peek().kind == "arrowr":
            self.next()
            return Config(source, FORWARD)
        if self.peek().kind == "arrowl":
            self.next()
            return Config(source, BACKWARD)
        raise self.err("expected an orientation arrow")

    def parse_rs_tree(self) -> Rs:
        if self.at("<"):
            self.next()
            a = self.parse_rs_tree()
            self.expect(",")
            b = self.parse_rs_tree()
            self.expect(">")
            return RsPair(a, b)
        if self.at("bot"):
            self.next()
            return RsBot()
        red = self.parse_reduction_name()
        shape = self.parse_bind_tree()
        if isinstance(shape, str):
            return RSingle(red, (shape,), "")
        return RSingle(red, tree_vars(shape), shape)


def _is_scalar(t: MTerm) -> bool:
    if isinstance(t, (MScalar, MLit)):
        return True
    if isinstance(t, MBin):
        return _is_scalar(t.left) and _is_scalar(t.right)
    if isinstance(t, MUn):
        return _is_scalar(t.arg)
    if isinstance(t, Ref):
        return False  # resolved later; treated as per-vertex until known
    return False


def _lift_scalar(t: MTerm) -> RTerm:
    if isinstance(t, MScalar):
        return t.term
    if isinstance(t, MLit):
        return RLit(t.value)
    if isinstance(t, MBin):
        return RBin(t.op, _lift_scalar(t.left), _lift_scalar(t.right))
    if isinstance(t, MUn):
        return RUn(t.op, _lift_scalar(t.arg))
    raise TermError(f"term is not scalar-valued: {t!r}")


def _to_expr(t: MTerm, parser: Parser) -> Expr:
    """Interpret a parsed m-layer tree as a plain expression (let bodies)."""
    if isinstance(t, MVar):
        return EVar(t.name)
    if isinstance(t, MLit):
        return ELit(t.value)
    if isinstance(t, MBin):
        return EBin(t.op, _to_expr(t.left, parser), _to_expr(t.right, parser))
    if isinstance(t, MUn):
        return EUn(t.op, _to_expr(t.arg, parser))
    raise parser.err("only variable expressions are allowed in let bodies")


# ---------------------------------------------------------------------------
# Resolution: inline by-name references
# ---------------------------------------------------------------------------

def resolve(defs: dict[str, SpecDef]) -> dict[str, SpecDef]:
    """Inline every Ref by substituting the referenced spec's parameters and
    map variable; rejects unknown names, arity mismatches, and cycles."""
    resolved: dict[str, SpecDef] = {}
    visiting: set[str] = set()

    def resolve_def(name: str) -> SpecDef:
        if name in resolved:
            return resolved[name]
        if name in visiting:
            raise SpecError(f"cyclic reference through {name!r}")
        visiting.add(name)
        d = defs[name]
        term = normalize_scalars(_inline(d.term, d))
        visiting.discard(name)
        if _is_scalar(term):
            params = tuple(x for g in d.groups for x in g)
            out = SpecDef(d.name, params, None, _lift_scalar(term), d.line, d.groups)
        else:
            if not d.groups or len(d.groups[-1]) != 1:
                raise SpecError(
                    f"per-vertex specification {d.name!r} needs a trailing (v) map variable",
                    line=d.line,
                )
            params = tuple(x for g in d.groups[:-1] for x in g)
            out = SpecDef(d.name, params, d.groups[-1][0], term, d.line, d.groups)
        resolved[name] = out
        return out

    def _inline(t: Node, ctx: SpecDef) -> Node:
        if isinstance(t, MVar) and t.name in defs:
            t = Ref(t.name, ())
        if isinstance(t, Ref):
            if t.name not in defs:
                raise SpecError(f"unknown specification {t.name!r} referenced from {ctx.name!r}")
            target = resolve_def(t.name)
            expect = len(target.params) + (1 if target.map_var else 0)
            if len(t.args) != expect:
                raise SpecError(
                    f"{t.name!r} takes {expect} argument(s), got {len(t.args)} in {ctx.name!r}"
                )
            names = list(target.params) + ([target.map_var] if target.map_var else [])
            bindings = dict(zip(names, t.args))
            body = substitute(target.term, bindings)
            if isinstance(body, RTerm):
                return MScalar(body)
            return body
        kids = t.children()
        if not kids:
            return t
        return t.replace_children(tuple(_inline(c, ctx) for c in kids))

    for name in defs:
        resolve_def(name)
    return resolved


def parse_spec_file(text: str, filename: str = "<spec>") -> dict[str, SpecDef]:
    """Parse, resolve and desugar every specification in a .grafs file."""
    parser = Parser(tokenize(text, filename), filename)
    defs = parser.parse_file()
    defs = resolve(defs)
    for d in defs.values():
        d.term = desugar(d.term)
    return defs


def parse_term(text: str, filename: str = "<term>") -> Node:
    """Parse a bare term (for round-trip tests); scalar bodies lift to the
    vertex-reduction layer."""
    parser = Parser(tokenize(text, filename), filename)
    body = parser.parse_m_expr()
    if parser.peek().kind != "eof":
        raise parser.err(f"trailing input {parser.peek().text!r}")
    body = normalize_scalars(body)
    return _lift_scalar(body) if _is_scalar(body) else body


# ---------------------------------------------------------------------------
# Pretty-printer
# ---------------------------------------------------------------------------

def _lit(v) -> str:
    if is_bot(v):
        return "bot"
    if v is True:
        return "true"
    if v is False:
        return "false"
    return repr(v)


def pretty_reduction(r: Reduction) -> str:
    if isinstance(r, Builtin):
        return r.name
    if isinstance(r, TieAware):
        return f"tie({pretty_reduction(r.outer)}, {pretty_reduction(r.inner)})"
    if isinstance(r, Pairwise):
        return f"pairof({pretty_reduction(r.first)}, {pretty_reduction(r.second)})"
    if isinstance(r, Guarded):
        return f"guarded({pretty_reduction(r.inner)})"
    raise TermError(f"cannot print reduction {r!r}")


def _fexpr(f: PathExpr, var: Optional[str]) -> str:
    if isinstance(f, PFn):
        return f"{f.name}({var})" if var else f.name
    if isinstance(f, PConst):
        return _lit(f.value)
    if isinstance(f, PPair):
        return f"<{_fexpr(f.first, var)}, {_fexpr(f.second, var)}>"
    if isinstance(f, PSingleton):
        return f"{{{_fexpr(f.of, var)}}}"
    raise TermError(f"cannot print path expression {f!r}")


def _pset(p: PTerm) -> str:
    if isinstance(p, Paths):
        if p.source is None:
            return f"Paths({p.dest})"
        return f"Paths({p.source}, {p.dest})"
    if isinstance(p, ArgsRed):
        kw = "argsmin" if p.red.name == "min" else "argsmax"
        return f"{kw} {{q in {_pset(p.inner)}}} {_fexpr(p.fn, 'q')}"
    raise TermError(f"cannot print path set {p!r}")


def _bind(b: VarTree) -> str:
    if isinstance(b, str):
        return b
    return f"<{_bind(b[0])}, {_bind(b[1])}>"


def _ms(ms: Ms) -> str:
    if isinstance(ms, MsPair):
        return f"<{_ms(ms.first)}, {_ms(ms.second)}>"
    if isinstance(ms, MsBot):
        return "bot"
    if isinstance(ms, MUnfactored):
        return f"{pretty_reduction(ms.red)} {{q in {_pset(ms.paths)}}} {_fexpr(ms.fn, 'q')}"
    if isinstance(ms, MSingle):
        return f"{pretty_reduction(ms.red)} ({_cfg(ms.config)}) {_fexpr(ms.fn, None)}"
    raise TermError(f"cannot print factored reduction {ms!r}")


def _cfg(c) -> str:
    if isinstance(c, ConfigPair):
        return f"<{_cfg(c.first)}, {_cfg(c.second)}>"
    src = "" if c.source is None else f"{c.source} "
    arrow = "->" if c.orientation == FORWARD else "<-"
    return f"{src}{arrow}"


def _rs(rs: Rs) -> str:
    if isinstance(rs, RsPair):
        return f"<{_rs(rs.first)}, {_rs(rs.second)}>"
    if isinstance(rs, RsBot):
        return "bot"
    if isinstance(rs, RSingle):
        return f"{pretty_reduction(rs.red)} {_bind(rs.arg_shape())}"
    raise TermError(f"cannot print vertex reduction {rs!r}")


def pretty(t: Node) -> str:
    """Render a term in concrete syntax; parse(pretty(t)) is alpha-equivalent
    to t."""
    if isinstance(t, (EVar, MVar, RVar)):
        return t.name
    if isinstance(t, (ELit, MLit, RLit)):
        return _lit(t.value)
    if isinstance(t, (EBin, MBin, RBin)):
        a, b = pretty(t.left), pretty(t.right)
        if t.op == "pair":
            return f"<{a}, {b}>"
        if t.op in ("min", "max", "union", "intersect"):
            return f"{t.op}({a}, {b})"
        return f"({a} {t.op} {b})"
    if isinstance(t, (EUn, MUn, RUn)):
        a = pretty(t.arg)
        if t.op == "-":
            return f"(- {a})"
        if t.op == "setof":
            return f"{{{a}}}"
        if t.op == "card":
            return f"card({a})"
        return f"{t.op}({a})"
    if isinstance(t, PathRed):
        return f"{pretty_reduction(t.red)} {{q in {_pset(t.paths)}}} {_fexpr(t.fn, 'q')}"
    if isinstance(t, MCard):
        return f"| {_pset(t.paths)} |"
    if isinstance(t, MArgSel):
        kw = "argmin" if t.red.name == "min" else "argmax"
        return f"{t.outer_fn.name}({kw} {{q in {_pset(t.paths)}}} {_fexpr(t.inner_fn, 'q')})"
    if isinstance(t, MScalar):
        return f"({pretty(t.term)})"
    if isinstance(t, Ref):
        return f"{t.name}({', '.join(str(a) for a in t.args)})"
    if isinstance(t, ILet):
        at = f" @ {t.target}" if t.target else ""
        return f"ilet {_bind(t.binders)} := {_ms(t.ms)}{at} in {pretty(t.body)}"
    if isinstance(t, VertexRed):
        var = t.var or "v"
        return f"{pretty_reduction(t.red)} {{{var} in V}} {pretty(t.body)}"
    if isinstance(t, VertexRedConstrained):
        return f"{pretty_reduction(t.red)} {{{t.var} in V where {pretty(t.guard)}}} {pretty(t.body)}"
    if isinstance(t, VertexRedOverSet):
        mem = ", ".join(str(m) for m in t.members)
        return f"{pretty_reduction(t.red)} {{{t.var} in {{{mem}}}}} {pretty(t.body)}"
    if isinstance(t, TripleLet):
        at = f" @ {t.target}" if t.target else ""
        return (
            f"ilet {_bind(t.bind_i)} := {_ms(t.ms)}{at} in "
            f"mlet {_bind(t.bind_m)} := {pretty(t.es)} in "
            f"rlet {_bind(t.bind_r)} := {_rs(t.rs)} in {pretty(t.body)}"
        )
    raise TermError(f"cannot print {type(t).__name__}")


def pretty_spec(d: SpecDef) -> str:
    head = d.name
    if d.params:
        head += f"({', '.join(d.params)})"
    if d.map_var:
        head += f"({d.map_var})"
    return f"{head} = {pretty(d.term)}"
