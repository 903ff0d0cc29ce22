"""Pipeline driver: compile, run, diff and stream commands over spec and
graph files.

Exit codes: 0 ok, 1 usage, 2 synthesis/verification failure, 3 runtime
mismatch.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from .graph import BOT, GraphError, parse_edge_list
from .compiler import CompileError, compile_plan, execute_plan
from .emit import emit_kernels, emit_plan, load_plan
from .engine import format_dump, format_value, run, run_incremental, reset_reachable
from .frontend import SpecError, parse_spec_file
from .fusion import FusionError, count_rounds, fuse
from .refsem import result_eq
from .synth import SynthesisFailure
from .terms import TermError
from .verify import Bounds, emit_smtlib

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_SYNTH = 2
EXIT_MISMATCH = 3


def _fail_usage(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return EXIT_USAGE


def _parse_bounds(text: str) -> Bounds:
    """--bounds L=3,grid=0..3 (vertex count fixed by the checker)."""
    max_len, grid = 3, (0, 1, 2, 3)
    for part in text.split(","):
        key, _, val = part.partition("=")
        if key == "L":
            max_len = int(val)
        elif key == "grid":
            lo, _, hi = val.partition("..")
            grid = tuple(range(int(lo), int(hi) + 1))
        else:
            raise ValueError(f"unknown bounds key {key!r}")
    return Bounds(max_len=max_len, grid=grid)


def _parse_params(items) -> dict:
    out = {}
    for item in items or ():
        name, _, val = item.partition("=")
        if not val:
            raise ValueError(f"bad parameter binding {item!r} (expected name=vertex)")
        out[name] = int(val)
    return out


def _out_dir(flag_value) -> Path:
    base = flag_value or os.environ.get("GRAPHFUSE_OUT_DIR") or "."
    p = Path(base)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _load_specs(path: str):
    text = Path(path).read_text()
    return parse_spec_file(text, path)


def cmd_compile(args) -> int:
    try:
        defs = _load_specs(args.spec_file)
    except SpecError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_SYNTH
    names = [args.spec] if args.spec else list(defs)
    if args.spec and args.spec not in defs:
        return _fail_usage(f"spec {args.spec!r} not found in {args.spec_file}")
    out = _out_dir(args.out_dir)
    bounds = _parse_bounds(args.bounds) if args.bounds else None
    status = EXIT_OK
    for name in names:
        d = defs[name]
        plan = fuse(d.term, d.params, d.map_var, name)
        if args.no_fuse:
            plan = _unfused_plan(d, name)
        try:
            cp = compile_plan(plan, bounds, args.size_cap)
        except (SynthesisFailure, TermError, CompileError) as exc:
            print(f"{name}: synthesis failed: {exc}", file=sys.stderr)
            # retain the partial report alongside the failure
            rep_path = out / f"{name.lower()}.conditions.json"
            rep_path.write_text(json.dumps(
                {"error": str(exc), "rounds": count_rounds(plan)},
                indent=1) + "\n")
            status = EXIT_SYNTH
            continue
        plan_path = out / f"{name.lower()}.plan.json"
        plan_path.write_text(emit_plan(cp))
        wrote = [str(plan_path)]
        if cp.failures:
            status = EXIT_SYNTH
            for f in cp.failures:
                print(f"{name}: {f}", file=sys.stderr)
        reports = {}
        for i, cr in enumerate(cp.rounds):
            for gi, grp in enumerate(cr.groups):
                reports[f"round{i}.group{gi}"] = grp.result.report.to_obj()
        rep_path = out / f"{name.lower()}.conditions.json"
        rep_path.write_text(json.dumps(reports, indent=1, sort_keys=True) + "\n")
        wrote.append(str(rep_path))
        if "kernels" in args.emit:
            for i, cr in enumerate(cp.rounds):
                for gi, grp in enumerate(cr.groups):
                    try:
                        text = emit_kernels(grp.kernels, f"{name.lower()}_r{i}g{gi}")
                    except Exception as exc:
                        print(f"{name}: kernel emission skipped: {exc}", file=sys.stderr)
                        continue
                    kp = out / f"{name.lower()}_r{i}g{gi}.kernel.hpp"
                    kp.write_text(text)
                    wrote.append(str(kp))
        if "smt" in args.emit:
            for i, cr in enumerate(cp.rounds):
                for gi, grp in enumerate(cr.groups):
                    for cond in ("C4", "C5", "C7", "C8", "C9", "C10-strong", "C12"):
                        try:
                            script = emit_smtlib(cond, grp.ms.fn, grp.ms.red, grp.kernels)
                        except TermError:
                            continue
                        sp = out / f"{name.lower()}_r{i}g{gi}.{cond}.smt2"
                        sp.write_text(script)
                        wrote.append(str(sp))
        print(f"{name}: {count_rounds(plan)} round(s) -> {', '.join(wrote)}")
    return status


def _unfused_plan(d, name):
    """Factor every path reduction into its own round without pairing or
    elimination (the A/B baseline for diff)."""
    from . import fusion
    from .fusion import FuseContext, Plan, Round, _canonicalize
    from .terms import (EVar, MBin, MLit, MScalar, MUn, MVar, RTerm,
                        TripleLet, fresh_name)

    ctx = FuseContext(frozenset(d.params), d.map_var)
    rounds = []

    def go_m(m):
        from .terms import EBin, ELit, EUn
        if isinstance(m, MBin):
            return EBin(m.op, go_m(m.left), go_m(m.right))
        if isinstance(m, MUn):
            return EUn(m.op, go_m(m.arg))
        if isinstance(m, MLit):
            return ELit(m.value)
        if isinstance(m, MVar):
            return EVar(m.name)
        if isinstance(m, MScalar):
            return fusion.fuse_r(m.term, ctx, rounds)
        il = fusion.fuse_m(m, ctx)
        var = fresh_name("round")
        rounds.append(Round(var, il.binders, il.ms, None, il.body, target=il.target))
        return EVar(var)

    if isinstance(d.term, RTerm):
        final = fusion.fuse_r(d.term, FuseContext(frozenset(d.params), d.map_var), rounds) \
            if isinstance(d.term, TripleLet) else _unfused_r(d.term, ctx, rounds, go_m)
        plan = Plan(name, d.params, rounds, final, "scalar")
    else:
        final = go_m(d.term)
        plan = Plan(name, d.params, rounds, final, "map")
    return _canonicalize(plan)


def _unfused_r(t, ctx, rounds, go_m):
    from . import fusion
    from .fusion import Round
    from .terms import (EBin, ELit, EUn, EVar, RBin, RLit, RUn, RVar,
                        VertexRed, fresh_name)

    if isinstance(t, RBin):
        return EBin(t.op, _unfused_r(t.left, ctx, rounds, go_m),
                    _unfused_r(t.right, ctx, rounds, go_m))
    if isinstance(t, RUn):
        return EUn(t.op, _unfused_r(t.arg, ctx, rounds, go_m))
    if isinstance(t, RLit):
        return ELit(t.value)
    if isinstance(t, RVar):
        return EVar(t.name)
    if isinstance(t, VertexRed):
        inner_ctx = fusion.FuseContext(ctx.params, t.var or ctx.curvar)
        il = fusion.fuse_m(t.body, inner_ctx)
        out = fusion._rule_fvred(VertexRed(t.red, t.var, il), inner_ctx)
        if out is None:
            raise FusionError("vertex reduction target mismatch")
        var = fresh_name("round")
        rounds.append(Round(var, out.bind_i, out.ms, out.bind_m, out.es,
                            out.bind_r, out.rs, out.body, out.target))
        return EVar(var)
    raise FusionError(f"cannot factor {type(t).__name__}")


def _load_compiled(plan_file: str):
    return load_plan(Path(plan_file).read_text())


def _report(args, obj: dict) -> None:
    if args.human:
        for k, v in obj.items():
            print(f"{k:18} {v}")
    else:
        print(json.dumps(obj, indent=1, sort_keys=True, default=str))


def _result_obj(result):
    if isinstance(result, dict):
        return {str(v): format_value(x) for v, x in sorted(result.items())}
    return format_value(result)


def cmd_run(args) -> int:
    try:
        cp = _load_compiled(args.plan_file)
        g = parse_edge_list(Path(args.graph_file).read_text())
        params = _parse_params(args.param)
    except (ValueError, GraphError) as exc:
        return _fail_usage(str(exc))
    missing = [p for p in cp.plan.params if p not in params]
    if missing:
        return _fail_usage(f"unbound spec parameter(s): {', '.join(missing)} (use --param name=vertex)")
    t0 = time.time()
    try:
        result, stats, modes = execute_plan(cp, g, params, mode=args.mode,
                                            seed=args.seed, max_iters=args.max_iters,
                                            force=args.force)
    except CompileError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_SYNTH
    report = {
        "spec": cp.plan.spec_name,
        "rounds": len(cp.rounds),
        "modes": modes,
        "iterations": [s.iterations for s in stats],
        "converged": all(s.converged for s in stats),
        "result": _result_obj(result),
        "wall_time_s": round(time.time() - t0, 4),
        "seed": args.seed,
    }
    _report(args, report)
    if isinstance(result, dict):
        sys.stdout.write(format_dump(result))
    return EXIT_OK


def cmd_diff(args) -> int:
    try:
        defs = _load_specs(args.spec_file)
        g = parse_edge_list(Path(args.graph_file).read_text())
        params = _parse_params(args.param)
    except (ValueError, GraphError, SpecError) as exc:
        return _fail_usage(str(exc))
    if args.spec not in defs:
        return _fail_usage(f"spec {args.spec!r} not found")
    d = defs[args.spec]
    missing = [p for p in d.params if p not in params]
    if missing:
        return _fail_usage(f"unbound spec parameter(s): {', '.join(missing)}")
    fused = compile_plan(fuse(d.term, d.params, d.map_var, args.spec))
    unfused = compile_plan(_unfused_plan(d, args.spec))
    out = {}
    for label, cp in (("fused", fused), ("unfused", unfused)):
        stats_all = []
        result, stats, modes = execute_plan(cp, g, params, seed=args.seed, force=True)
        out[label] = {
            "rounds": len(cp.rounds),
            "relaxations": sum(s.relaxations for s in stats),
            "result": _result_obj(result),
        }
    equal = out["fused"]["result"] == out["unfused"]["result"]
    report = {
        "spec": args.spec,
        "fused_rounds": out["fused"]["rounds"],
        "unfused_rounds": out["unfused"]["rounds"],
        "fused_relaxations": out["fused"]["relaxations"],
        "unfused_relaxations": out["unfused"]["relaxations"],
        "equal": equal,
    }
    if not equal:
        diffs = {}
        f, u = out["fused"]["result"], out["unfused"]["result"]
        if isinstance(f, dict) and isinstance(u, dict):
            diffs = {k: (f.get(k), u.get(k)) for k in set(f) | set(u) if f.get(k) != u.get(k)}
        report["differing"] = diffs or {"scalar": (f, u)}
        _report(args, report)
        return EXIT_MISMATCH
    _report(args, report)
    return EXIT_OK


def cmd_stream(args) -> int:
    try:
        cp = _load_compiled(args.plan_file)
        g = parse_edge_list(Path(args.graph_file).read_text())
        params = _parse_params(args.param)
        script = Path(args.delta_script).read_text()
    except (ValueError, GraphError) as exc:
        return _fail_usage(str(exc))
    if len(cp.rounds) != 1 or not cp.rounds[0].groups:
        return _fail_usage("streaming requires a single-round plan")
    cr = cp.rounds[0]
    if len(cr.groups) != 1:
        return _fail_usage("streaming requires a single-orientation plan")
    kernels = cr.groups[0].kernels
    if not kernels.idempotent:
        return _fail_usage("streaming requires an idempotent certified plan")
    from .graph import Edge

    deltas = []
    for lineno, line in enumerate(script.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "add" and len(parts) == 5:
            deltas.append(("add", Edge(*map(int, parts[1:]))))
        elif parts[0] == "remove" and len(parts) == 3:
            deltas.append(("remove", int(parts[1]), int(parts[2])))
        else:
            return _fail_usage(f"{args.delta_script}:{lineno}: bad delta {line!r}")
    # the worsening condition is judged on the graph's own attribute grid
    rep = _recheck_c12(cr, g)
    c12_ok = rep
    prior, _, _ = run(g, kernels, "pull+", params=params)
    steps = []
    status = EXIT_OK
    for i, delta in enumerate(deltas):
        if delta[0] == "add":
            g2 = g.add_edge(delta[1])
            if not g.directed:
                g2 = g2.add_edge(Edge(delta[1].dst, delta[1].src,
                                      delta[1].weight, delta[1].capacity))
        else:
            g2 = g.remove_edge(delta[1], delta[2])
            if not g.directed:
                g2 = g2.remove_edge(delta[2], delta[1])
        inc, iters, conv = run_incremental(g2, prior, delta, kernels, params=params,
                                           max_iters=args.max_iters or 1000)
        full, _, _ = run(g2, kernels, "pull+", params=params)
        agree = all(result_eq(inc[v], full[v], 1e-9) for v in g2.vertices)
        entry = {"delta": " ".join(map(str, delta[1:] if delta[0] == "remove"
                                       else (delta[1].src, delta[1].dst))),
                 "kind": delta[0], "agree": agree, "converged": conv}
        if not agree or not conv:
            if delta[0] == "remove" and (not c12_ok or not conv):
                sink = delta[2]
                resetted = reset_reachable(g2, prior, sink, kernels, params)
                fixed = _run_from(g2, resetted, kernels)
                agree2 = all(result_eq(fixed[v], full[v], 1e-9) for v in g2.vertices)
                entry["fallback"] = "reset_reachable"
                entry["agree_after_reset"] = agree2
                if not agree2:
                    status = EXIT_MISMATCH
                inc = fixed
            else:
                entry["error"] = "cross-check mismatch without worsening-condition justification"
                status = EXIT_MISMATCH
        steps.append(entry)
        g, prior = g2, inc
    report = {"spec": cp.plan.spec_name, "worsening_holds": c12_ok,
              "steps": steps, "final": _result_obj(prior)}
    _report(args, report)
    return status


def _recheck_c12(cr, g) -> bool:
    from .verify import Bounds as VB, build_universe, check_c12

    grp = cr.groups[0]
    attrs = sorted({e.weight for e in g.edges} | {e.capacity for e in g.edges}) or [1]
    grid = tuple(attrs[:4])
    b = VB(max_len=3, grid=grid)
    uni = build_universe(grp.ms.fn, None, b)
    return not check_c12(grp.ms.red, grp.ms.fn, uni, b)


def _run_from(g, start, kernels):
    from .engine import EngineState, maps_equal, step

    st = EngineState(dict(start), {v: BOT for v in g.vertices}, 1)
    for _ in range(10_000):
        nxt = step(st, g, kernels, "pull+")
        if maps_equal(nxt.current, st.current):
            return nxt.current
        st = nxt
    return st.current


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="graphfuse",
                                 description="fuse, synthesize, verify and run "
                                             "path-based graph-analytics specifications")
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compile", help="fuse a spec file and synthesize kernels")
    c.add_argument("spec_file")
    c.add_argument("--spec", help="compile only this specification")
    c.add_argument("--out-dir", default=None)
    c.add_argument("--no-fuse", action="store_true", help="skip fusion (A/B baseline)")
    c.add_argument("--emit", nargs="*", default=["plan"],
                   choices=["plan", "kernels", "smt"])
    c.add_argument("--bounds", help="verification bounds, e.g. L=3,grid=0..3")
    c.add_argument("--size-cap", type=int, default=7,
                   help="kernel body size cap for synthesis")
    c.set_defaults(fn=cmd_compile)

    r = sub.add_parser("run", help="execute a compiled plan on a graph")
    r.add_argument("plan_file")
    r.add_argument("graph_file")
    r.add_argument("--mode", choices=["pull+", "pull-", "push+", "push-", "push-II",
                                      "apull+", "apull-", "apush+", "apush-"])
    r.add_argument("--param", action="append", help="bind a source parameter, name=vertex")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--max-iters", type=int)
    r.add_argument("--force", action="store_true", help="run uncertified modes")
    r.add_argument("--human", action="store_true")
    r.set_defaults(fn=cmd_run)

    d = sub.add_parser("diff", help="compare fused vs unfused pipelines")
    d.add_argument("spec_file")
    d.add_argument("graph_file")
    d.add_argument("--spec", required=True)
    d.add_argument("--param", action="append")
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--human", action="store_true")
    d.set_defaults(fn=cmd_diff)

    s = sub.add_parser("stream", help="apply scripted edge deltas incrementally")
    s.add_argument("plan_file")
    s.add_argument("graph_file")
    s.add_argument("delta_script")
    s.add_argument("--param", action="append")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--max-iters", type=int)
    s.add_argument("--human", action="store_true")
    s.set_defaults(fn=cmd_stream)

    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        return args.fn(args)
    except (SpecError, FusionError) as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_SYNTH
    except (ValueError, OSError) as exc:
        return _fail_usage(str(exc))


if __name__ == "__main__":
    sys.exit(main())
