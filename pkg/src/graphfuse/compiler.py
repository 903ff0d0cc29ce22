"""Bridges fusion output to execution: synthesizes kernels for every round,
verifies them, and executes compiled plans on concrete graphs.

A round's fused reduction may mix propagation orientations; the components
are partitioned into orientation groups, each iterated on the graph (or its
reverse) with its own kernel set, and the per-vertex values are reassembled
into the round's pair shape.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .graph import BOT, Graph, is_bot, normalize_value
from .engine import KernelSet, run
from .fusion import Plan, Round
from .refsem import eval_expr, eval_rs, _split_tree
from .synth import SynthResult, synth_kernels
from .terms import (
    BACKWARD, ConfigPair, MSingle, Ms, MsBot, Pairwise, PPair, tree_bind,
)
from . import verify
from .verify import Bounds


class CompileError(Exception):
    pass


def _uniform_source(sources: tuple) -> bool:
    """The restart-style models need one shared source condition across all
    value components; mixed or absent sources disable them."""
    return len(set(sources)) == 1 and sources[0] is not None


@dataclass
class RoundGroup:
    orientation: str
    ms: MSingle
    result: SynthResult

    @property
    def kernels(self) -> KernelSet:
        return self.result.kernels


@dataclass
class CompiledRound:
    round: Round
    groups: list[RoundGroup]
    skeleton: object  # int leaf tag -> (group, projection path) | pair tree

    def candidate_modes(self) -> list[str]:
        """Modes whose graph-independent conditions hold for every group."""
        modes = None
        for grp in self.groups:
            rep = grp.result.report
            m = verify.select_modes(rep, acyclic=True,
                                    sourced=_uniform_source(grp.kernels.sources),
                                    source_on_cycle=False,
                                    has_rollback=grp.kernels.B is not None)
            modes = set(m["modes"]) if modes is None else modes & set(m["modes"])
        return sorted(modes or ())

    def modes_for(self, g: Graph, params: dict) -> dict:
        """Certified modes on a concrete graph, with termination verdict."""
        modes = None
        term = True
        for grp in self.groups:
            rep = grp.result.report
            gg = g.reversed() if grp.orientation == BACKWARD else g
            sourced = _uniform_source(grp.kernels.sources)
            on_cycle = False
            if sourced:
                for s in grp.kernels.resolve_sources(params):
                    if not is_bot(s) and gg.on_cycle(s):
                        on_cycle = True
            m = verify.select_modes(rep, acyclic=gg.is_acyclic(), sourced=sourced,
                                    source_on_cycle=on_cycle,
                                    has_rollback=grp.kernels.B is not None)
            modes = set(m["modes"]) if modes is None else modes & set(m["modes"])
            term = term and m["termination_guaranteed"]
        return {"modes": sorted(modes or ()), "termination_guaranteed": term}


@dataclass
class CompiledPlan:
    plan: Plan
    rounds: list[CompiledRound]
    failures: list = field(default_factory=list)

    @property
    def kind(self) -> str:
        return self.plan.kind


# ---------------------------------------------------------------------------
# Compilation
# ---------------------------------------------------------------------------

def _leaf_specs(ms: Ms):
    from .synth import config_leaves

    if isinstance(ms, MsBot):
        return []
    if isinstance(ms, MSingle):
        return config_leaves(ms)
    raise CompileError("round reduction must be fully fused before compilation")


def _skeleton_of(ms: Ms, tags):
    """Mirror the value shape with leaf tags (consumed in order)."""
    if isinstance(ms, MSingle):
        cfg = ms.config
        if isinstance(cfg, ConfigPair):
            left = _skeleton_of(MSingle(ms.red.first, ms.fn.first, cfg.first), tags)
            right = _skeleton_of(MSingle(ms.red.second, ms.fn.second, cfg.second), tags)
            return (left, right)
        return tags.pop(0)
    if isinstance(ms, MsBot):
        return None
    raise CompileError("unfused round reduction")


def _combine_leaves(leaves) -> MSingle:
    ms = MSingle(leaves[0].red, leaves[0].fn, leaves[0].config)
    for leaf in leaves[1:]:
        ms = MSingle(Pairwise(ms.red, leaf.red), PPair(ms.fn, leaf.fn),
                     ConfigPair(ms.config, leaf.config))
    return ms


def compile_round(r: Round, bounds: Optional[Bounds] = None,
                  size_cap: int = 7) -> CompiledRound:
    leaves = _leaf_specs(r.ms)
    if not leaves:
        return CompiledRound(r, [], None)
    order: list[str] = []
    by_orient: dict[str, list] = {}
    for leaf in leaves:
        o = leaf.config.orientation
        if o not in by_orient:
            by_orient[o] = []
            order.append(o)
        by_orient[o].append(leaf)
    groups = []
    tags = []
    proj_count = {o: 0 for o in order}
    for leaf in leaves:
        o = leaf.config.orientation
        tags.append((order.index(o), proj_count[o]))
        proj_count[o] += 1
    for o in order:
        ms = _combine_leaves(by_orient[o])
        groups.append(RoundGroup(o, ms, synth_kernels(ms, bounds, size_cap)))
    skeleton = _skeleton_of(r.ms, list(tags)) if isinstance(r.ms, MSingle) else None
    return CompiledRound(r, groups, skeleton)


def compile_plan(plan: Plan, bounds: Optional[Bounds] = None,
                 size_cap: int = 7) -> CompiledPlan:
    rounds = []
    failures = []
    for r in plan.rounds:
        cr = compile_round(r, bounds, size_cap)
        for grp in cr.groups:
            failures.extend(grp.result.failures)
        rounds.append(cr)
    return CompiledPlan(plan, rounds, failures)


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------

def _project(value, path):
    for i in path:
        if is_bot(value):
            return BOT
        value = value[i]
    return value


def _group_paths(n: int) -> list[tuple]:
    """Projection path of each leaf in a left-nested combination of n
    leaves."""
    if n == 1:
        return [()]
    paths = [(0,) * (n - 1)]
    for i in range(1, n):
        paths.append((0,) * (n - 1 - i) + (1,))
    return paths


@dataclass
class RunStats:
    iterations: dict = field(default_factory=dict)
    converged: bool = True
    relaxations: int = 0


def execute_round(cr: CompiledRound, g: Graph, mode: str, env: dict,
                  seed: int = 0, max_iters: Optional[int] = None,
                  stats: Optional[RunStats] = None):
    """Run a round's iteration groups, assemble per-vertex values, apply the
    map expressions and (for scalar rounds) the vertex reduction and result
    expression."""
    r = cr.round
    group_maps = []
    group_projs = []
    for gi, grp in enumerate(cr.groups):
        gg = g.reversed() if grp.orientation == BACKWARD else g
        counter = [0]
        certified = cr.modes_for(g, env)["termination_guaranteed"]
        vals, iters, conv = run(gg, grp.kernels, mode, max_iters=max_iters,
                                params=env, seed=seed,
                                certified_terminating=certified,
                                counter=counter)
        if stats is not None:
            stats.iterations[f"group{gi}"] = iters
            stats.converged = stats.converged and conv
            stats.relaxations += counter[0]
        group_maps.append(vals)
        group_projs.append(_group_paths(sum(1 for _ in verify.source_slots(
            verify.source_tree_of(grp.ms.config)))))

    def value_at(skel, v):
        if skel is None:
            return BOT
        if isinstance(skel, tuple) and len(skel) == 2 and not isinstance(skel[0], int):
            return normalize_value((value_at(skel[0], v), value_at(skel[1], v)))
        gi, slot = skel
        return _project(group_maps[gi][v], group_projs[gi][slot])

    skel = cr.skeleton
    out_map = {}
    for v in g.vertices:
        local = dict(env)
        local.update(tree_bind(r.bind_i, value_at(skel, v)))
        if r.target is not None:
            local[r.target] = v
        out_map[v] = eval_expr(r.es, local)
    if r.kind == "map":
        return out_map
    maps = _split_tree(r.bind_m, out_map, g)
    local = dict(env)
    local.update(maps)
    rsvals = eval_rs(g, r.rs, local)
    local.update(tree_bind(r.bind_r, rsvals))
    return eval_expr(r.result, local)


def execute_plan(cp: CompiledPlan, g: Graph, params: Optional[dict] = None,
                 mode: Optional[str] = None, seed: int = 0,
                 max_iters: Optional[int] = None,
                 force: bool = False):
    """Run every round; the mode must be certified for each round unless
    forced.  Returns (result, per-round stats, per-round modes used)."""
    env = dict(params or {})
    all_stats = []
    used_modes = []
    result = None
    for cr in cp.rounds:
        if cr.groups:
            cert = cr.modes_for(g, env)["modes"]
            preferred = [m for m in ("pull+", "push+", "pull-", "push-") if m in cert]
            use = mode or (preferred[0] if preferred else (cert[0] if cert else None))
            if use is None:
                if not force:
                    raise CompileError(
                        f"no certified mode for round {cr.round.var}; use force to override")
                use = "pull+"
            if use not in cert and not force:
                raise CompileError(
                    f"mode {use} is not certified for round {cr.round.var} "
                    f"(certified: {cert or 'none'})")
            stats = RunStats()
            value = execute_round(cr, g, use, env, seed, max_iters, stats)
            all_stats.append(stats)
            used_modes.append(use)
        else:
            # constant round (no iteration)
            local = dict(env)
            local.update(tree_bind(cr.round.bind_i, BOT))
            if cr.round.kind == "map":
                value = {v: eval_expr(cr.round.es, local) for v in g.vertices}
            else:
                local.update(tree_bind(cr.round.bind_m, eval_expr(cr.round.es, local)))
                local.update(tree_bind(cr.round.bind_r, BOT))
                value = eval_expr(cr.round.result, local)
            all_stats.append(RunStats(iterations={}, converged=True))
            used_modes.append("none")
        env[cr.round.var] = value
        result = value
    if cp.kind == "scalar":
        result = eval_expr(cp.plan.final, env)
    return result, all_stats, used_modes
