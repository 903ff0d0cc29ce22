"""Directed attributed graphs, vertex-sequence paths, and brute-force path
enumeration.

This module is the ground truth the rest of the system leans on: the
reference semantics and the bounded verifier both enumerate paths here.
Everything is immutable and hashable so results can be cached per graph.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Optional

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1


class GraphError(ValueError):
    """Domain error: malformed graph, path, or out-of-range vertex."""


class _Bottom:
    """The none value: identity of every reduction, result of undefined
    computation.  A single shared instance, distinct from every other value."""

    __slots__ = ()
    _instance: "_Bottom | None" = None

    def __new__(cls) -> "_Bottom":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "⊥"

    def __reduce__(self):
        return (_Bottom, ())


BOT = _Bottom()


def is_bot(v) -> bool:
    return v is BOT


def normalize_value(v):
    """Canonical value form: a pair whose components are all none IS the none
    value."""
    if isinstance(v, tuple):
        parts = tuple(normalize_value(x) for x in v)
        if all(is_bot(x) for x in parts):
            return BOT
        return parts
    return v


def checked_int(n: int) -> int:
    """Arithmetic stays in signed 64-bit range; overflow is an error, never
    wraparound."""
    if not (INT64_MIN <= n <= INT64_MAX):
        raise OverflowError(f"integer result {n} exceeds signed 64-bit range")
    return n


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    weight: int = 1
    capacity: int = 1

    def __repr__(self) -> str:
        return f"{self.src}->{self.dst}(w{self.weight},c{self.capacity})"


@dataclass(frozen=True)
class Graph:
    """Directed graph over vertices ``0..vertex_count-1``.

    Undirected graphs are stored as symmetric directed edge pairs with
    identical attributes (use :meth:`undirected`).  Self-loops are rejected:
    the zero-length path ``<v,v>`` is a path concept, not a stored edge.
    """

    vertex_count: int
    edges: tuple[Edge, ...]
    directed: bool = True

    def __post_init__(self):
        seen: set[tuple[int, int]] = set()
        for e in self.edges:
            if not (0 <= e.src < self.vertex_count and 0 <= e.dst < self.vertex_count):
                raise GraphError(f"edge {e} endpoint out of range (n={self.vertex_count})")
            if e.src == e.dst:
                raise GraphError(f"self-loop edge {e} is not allowed")
            if (e.src, e.dst) in seen:
                raise GraphError(f"parallel edge {e} is not allowed")
            seen.add((e.src, e.dst))
            checked_int(e.weight)
            checked_int(e.capacity)

    @staticmethod
    def undirected(vertex_count: int, edges: Iterable[tuple[int, int, int, int]]) -> "Graph":
        out = []
        for (u, v, w, c) in edges:
            out.append(Edge(u, v, w, c))
            out.append(Edge(v, u, w, c))
        return Graph(vertex_count, tuple(out), directed=False)

    @property
    def vertices(self) -> range:
        return range(self.vertex_count)

    def out_edges(self, v: int) -> tuple[Edge, ...]:
        return self._adjacency()[0][v]

    def in_edges(self, v: int) -> tuple[Edge, ...]:
        return self._adjacency()[1][v]

    def predecessors(self, v: int) -> tuple[int, ...]:
        return tuple(e.src for e in self.in_edges(v))

    def outdeg(self, v: int) -> int:
        return len(self.out_edges(v))

    def indeg(self, v: int) -> int:
        return len(self.in_edges(v))

    def edge(self, u: int, v: int) -> Edge:
        for e in self.out_edges(u):
            if e.dst == v:
                return e
        raise GraphError(f"no edge {u}->{v}")

    def has_edge(self, u: int, v: int) -> bool:
        return any(e.dst == v for e in self.out_edges(u))

    def reversed(self) -> "Graph":
        rev = tuple(Edge(e.dst, e.src, e.weight, e.capacity) for e in self.edges)
        return Graph(self.vertex_count, rev, self.directed)

    def add_edge(self, e: Edge) -> "Graph":
        return Graph(self.vertex_count, self.edges + (e,), self.directed)

    def remove_edge(self, u: int, v: int) -> "Graph":
        kept = tuple(e for e in self.edges if not (e.src == u and e.dst == v))
        if len(kept) == len(self.edges):
            raise GraphError(f"no edge {u}->{v} to remove")
        return Graph(self.vertex_count, kept, self.directed)

    def is_acyclic(self) -> bool:
        color = [0] * self.vertex_count  # 0 new, 1 active, 2 done
        for start in self.vertices:
            if color[start]:
                continue
            stack: list[tuple[int, int]] = [(start, 0)]
            color[start] = 1
            while stack:
                v, i = stack[-1]
                outs = self.out_edges(v)
                if i < len(outs):
                    stack[-1] = (v, i + 1)
                    w = outs[i].dst
                    if color[w] == 1:
                        return False
                    if color[w] == 0:
                        color[w] = 1
                        stack.append((w, 0))
                else:
                    color[v] = 2
                    stack.pop()
        return True

    def on_cycle(self, v: int) -> bool:
        """True when some nonzero-length path leads from v back to v."""
        frontier = {e.dst for e in self.out_edges(v)}
        seen = set(frontier)
        while frontier:
            if v in frontier:
                return True
            nxt = set()
            for u in frontier:
                for e in self.out_edges(u):
                    if e.dst not in seen:
                        seen.add(e.dst)
                        nxt.add(e.dst)
            frontier = nxt
        return False

    def reachable_from(self, v: int) -> set[int]:
        """Vertices reachable from v, including v itself."""
        seen = {v}
        frontier = [v]
        while frontier:
            u = frontier.pop()
            for e in self.out_edges(u):
                if e.dst not in seen:
                    seen.add(e.dst)
                    frontier.append(e.dst)
        return seen

    def longest_simple_path_length(self) -> int:
        """Length (edge count) of the longest simple path anywhere in the
        graph.  Exponential search; graphs here are desk-scale."""
        best = 0
        for start in self.vertices:
            stack = [(start, 1 << start, 0)]
            while stack:
                v, mask, length = stack.pop()
                best = max(best, length)
                for e in self.out_edges(v):
                    if not (mask >> e.dst) & 1:
                        stack.append((e.dst, mask | (1 << e.dst), length + 1))
        return best

    def _adjacency(self):
        key = (self.vertex_count, self.edges)
        cached = _ADJACENCY.get(key)
        if cached is not None:
            return cached
        outs: list[list[Edge]] = [[] for _ in self.vertices]
        ins: list[list[Edge]] = [[] for _ in self.vertices]
        for e in self.edges:
            outs[e.src].append(e)
            ins[e.dst].append(e)
        entry = (
            tuple(tuple(sorted(o, key=lambda e: e.dst)) for o in outs),
            tuple(tuple(sorted(i, key=lambda e: e.src)) for i in ins),
        )
        if len(_ADJACENCY) > 2048:
            _ADJACENCY.clear()
        _ADJACENCY[key] = entry
        return entry


_ADJACENCY: dict[int, tuple] = {}


# ---------------------------------------------------------------------------
# Paths
# ---------------------------------------------------------------------------

@dataclass(frozen=True, order=True)
class Path:
    """Non-empty vertex sequence.  The zero-length path <v,v> is stored as the
    one-element sequence (v,)."""

    vertices: tuple[int, ...]

    def __post_init__(self):
        if not self.vertices:
            raise GraphError("a path has at least one vertex")

    @staticmethod
    def zero(v: int) -> "Path":
        return Path((v,))

    @property
    def length(self) -> int:
        return len(self.vertices) - 1

    @property
    def head(self) -> int:
        return self.vertices[0]

    @property
    def dest(self) -> int:
        return self.vertices[-1]

    @property
    def penultimate(self) -> int:
        # penultimate(<v,v>) = v
        return self.vertices[-2] if len(self.vertices) > 1 else self.vertices[0]

    def rest(self) -> "Path":
        if self.length == 0:
            raise GraphError("zero-length path has no rest")
        return Path(self.vertices[1:])

    def reversed(self) -> "Path":
        return Path(tuple(reversed(self.vertices)))

    def edges(self, g: Graph) -> Iterator[Edge]:
        for u, v in zip(self.vertices, self.vertices[1:]):
            yield g.edge(u, v)

    def is_valid(self, g: Graph) -> bool:
        if any(not (0 <= v < g.vertex_count) for v in self.vertices):
            return False
        return all(g.has_edge(u, v) for u, v in zip(self.vertices, self.vertices[1:]))

    def simple(self) -> "Path":
        """Remove cycles: repeatedly cut the segment between the first
        repeated vertex occurrence and its next occurrence."""
        verts = list(self.vertices)
        i = 0
        while i < len(verts):
            try:
                j = verts.index(verts[i], i + 1)
            except ValueError:
                i += 1
                continue
            del verts[i:j]
        return Path(tuple(verts))

    def __repr__(self) -> str:
        if self.length == 0:
            v = self.vertices[0]
            return f"<{v},{v}>"
        return "<" + ",".join(map(str, self.vertices)) + ">"


def extend(p: Path, e: Edge) -> Path:
    """Append edge e to path p; zero-length paths extend from their single
    vertex."""
    if p.dest != e.src:
        raise GraphError(f"cannot extend {p!r} with {e!r}: endpoint mismatch")
    return Path(p.vertices + (e.dst,))


def enumerate_paths(
    g: Graph,
    dest: int,
    source: Optional[int] = None,
    max_len: int = 0,
) -> tuple[Path, ...]:
    """Every path of length <= max_len ending at dest (and starting at source
    when given).  Includes the zero-length path <dest,dest> when source is
    absent or equals dest.  Ordering is canonical: (length, vertex sequence).
    """
    if not (0 <= dest < g.vertex_count):
        raise GraphError(f"destination {dest} out of range")
    if source is not None and not (0 <= source < g.vertex_count):
        raise GraphError(f"source {source} out of range")
    if max_len < 0:
        raise GraphError("max_len must be >= 0")
    by_dest = paths_to_all(g, source, max_len)
    return by_dest[dest]


def paths_to_all(
    g: Graph, source: Optional[int], max_len: int
) -> tuple[tuple[Path, ...], ...]:
    """Paths of length <= max_len grouped by destination vertex, canonically
    ordered.  Cached per (graph, source, max_len)."""
    key = (g.vertex_count, g.edges, source, max_len)
    hit = _PATH_CACHE.get(key)
    if hit is not None:
        return hit
    if source is None:
        frontier = [Path.zero(v) for v in g.vertices]
    else:
        frontier = [Path.zero(source)]
    collected: list[list[Path]] = [[] for _ in g.vertices]
    for p in frontier:
        collected[p.dest].append(p)
    for _ in range(max_len):
        nxt = []
        for p in frontier:
            for e in g.out_edges(p.dest):
                q = extend(p, e)
                collected[q.dest].append(q)
                nxt.append(q)
        frontier = nxt
        if not frontier:
            break
    result = tuple(
        tuple(sorted(ps, key=lambda p: (p.length, p.vertices))) for ps in collected
    )
    if len(_PATH_CACHE) > 4096:
        _PATH_CACHE.clear()
    _PATH_CACHE[key] = result
    return result


_PATH_CACHE: dict = {}


# ---------------------------------------------------------------------------
# Path functions
# ---------------------------------------------------------------------------

PATH_FN_NAMES = ("length", "weight", "capacity", "head", "penultimate")


def path_fn(name: str, p: Path, g: Graph):
    """Evaluate a builtin path function.  weight/length/capacity follow the
    recursive edge-fold definitions; capacity of a zero-length path is the
    none value."""
    if not p.is_valid(g):
        raise GraphError(f"path {p!r} is not a path of the graph")
    if name == "length":
        return p.length
    if name == "head":
        return p.head
    if name == "penultimate":
        return p.penultimate
    if name == "weight":
        total = 0
        for e in p.edges(g):
            total = checked_int(total + e.weight)
        return total
    if name == "capacity":
        cap = BOT
        for e in p.edges(g):
            cap = e.capacity if is_bot(cap) else min(cap, e.capacity)
        return cap
    raise GraphError(f"unknown path function {name!r}")


# ---------------------------------------------------------------------------
# Edge-list text format
# ---------------------------------------------------------------------------

def parse_edge_list(text: str) -> Graph:
    """Parse the edge-list format: header ``vertices N directed|undirected``,
    then one ``src dst weight capacity`` line per edge; ``#`` starts a
    comment."""
    n = None
    directed = True
    raw: list[tuple[int, int, int, int]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "vertices":
            if len(parts) != 3 or parts[2] not in ("directed", "undirected"):
                raise GraphError(f"line {lineno}: bad header {line!r}")
            n = int(parts[1])
            directed = parts[2] == "directed"
            continue
        if n is None:
            raise GraphError(f"line {lineno}: edge before 'vertices' header")
        if len(parts) != 4:
            raise GraphError(f"line {lineno}: expected 'src dst weight capacity'")
        try:
            u, v, w, c = (int(x) for x in parts)
        except ValueError as exc:
            raise GraphError(f"line {lineno}: {exc}") from None
        raw.append((u, v, w, c))
    if n is None:
        raise GraphError("missing 'vertices N directed|undirected' header")
    if directed:
        return Graph(n, tuple(Edge(u, v, w, c) for (u, v, w, c) in raw))
    return Graph.undirected(n, raw)


def format_edge_list(g: Graph) -> str:
    lines = [f"vertices {g.vertex_count} {'directed' if g.directed else 'undirected'}"]
    edges = g.edges
    if not g.directed:
        # keep one representative per symmetric pair
        seen = set()
        kept = []
        for e in edges:
            if (e.dst, e.src) in seen:
                continue
            seen.add((e.src, e.dst))
            kept.append(e)
        edges = tuple(kept)
    for e in edges:
        lines.append(f"{e.src} {e.dst} {e.weight} {e.capacity}")
    return "\n".join(lines) + "\n"
