"""Graph representation, parsing, instance generation, and an exact MIS oracle.

Vertices are numbered 1..n throughout the public API; the 0-based bitset
arithmetic used by the exact solver is internal only.
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable

__all__ = [
    "Graph",
    "ExactResult",
    "GraphParseError",
    "parse_edge_list",
    "parse_dimacs",
    "parse_graph",
    "emit_dimacs",
    "random_graph",
    "is_independent",
    "greedy_independent_set",
    "exact_mis",
]


class GraphParseError(ValueError):
    """Raised for malformed graph text; message includes a 1-based line number."""


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph with vertices 1..n.

    Edges are stored normalized: each as a tuple (i, j) with i < j, no
    duplicates, no self-loops.
    """

    n: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        if self.n < 0:
            raise ValueError(f"vertex count must be non-negative, got {self.n}")
        for e in self.edges:
            i, j = e
            if not (1 <= i < j <= self.n):
                raise ValueError(f"edge {e} out of range for n={self.n}")

    @property
    def m(self) -> int:
        """Number of edges."""
        return len(self.edges)

    def degree(self, v: int) -> int:
        return sum(1 for (i, j) in self.edges if v in (i, j))

    def neighbors(self, v: int) -> frozenset:
        return frozenset(j if i == v else i for (i, j) in self.edges if v in (i, j))


def _normalize_edges(n: int, raw: Iterable[tuple[int, int]], *, where: str = "",
                     warn_duplicates: bool = False) -> frozenset:
    seen: set[tuple[int, int]] = set()
    dupes = 0
    for (a, b) in raw:
        if a == b:
            raise GraphParseError(f"{where}self-loop ({a}, {b}) not allowed")
        if not (1 <= a <= n and 1 <= b <= n):
            raise GraphParseError(f"{where}vertex index out of range in ({a}, {b}) for n={n}")
        e = (a, b) if a < b else (b, a)
        if e in seen:
            dupes += 1
        else:
            seen.add(e)
    if dupes and warn_duplicates:
        warnings.warn(f"{dupes} duplicate edge(s) collapsed", stacklevel=3)
    return frozenset(seen)


_DECL_RE = re.compile(r"n\s*=\s*(\d+)\s*;")
_PAIR_RE = re.compile(r"\(\s*(\d+)\s*,\s*(\d+)\s*\)")


def _line_of(text: str, pos: int) -> int:
    return text.count("\n", 0, pos) + 1


def parse_edge_list(text: str) -> Graph:
    """Parse the parenthesized pair format: ``n=25; (1,3) (1,4) ... (22,25) ;``.

    A vertex-count declaration ``n=<N>;`` must precede the pairs.  Pairs may be
    separated by arbitrary whitespace/newlines; the list is terminated by a
    semicolon (which may be absent when there are no pairs after the
    declaration's own semicolon).  Duplicate pairs and both orientations of the
    same pair collapse to a single edge.  Errors report 1-based line numbers.
    """
    decl = _DECL_RE.search(text)
    if decl is None:
        raise GraphParseError("line 1: missing vertex-count declaration 'n=<N>;'")
    n = int(decl.group(1))
    pos = decl.end()
    raw: list[tuple[int, int]] = []
    end = len(text)
    while pos < end:
        ch = text[pos]
        if ch.isspace():
            pos += 1
            continue
        if ch == ";":
            pos += 1
            break
        m = _PAIR_RE.match(text, pos)
        if m is None:
            raise GraphParseError(
                f"line {_line_of(text, pos)}: malformed pair near {text[pos:pos + 12]!r}")
        raw.append((int(m.group(1)), int(m.group(2))))
        pos = m.end()
    try:
        edges = _normalize_edges(n, raw)
    except GraphParseError as exc:
        raise GraphParseError(f"line {_line_of(text, decl.end())}: {exc}") from None
    return Graph(n=n, edges=edges)


def parse_dimacs(text: str) -> Graph:
    """Parse DIMACS .col-style text: a ``p edge N M`` header and ``e i j`` lines.

    Comment lines start with ``c``.  Duplicate edges are collapsed with a
    warning (real benchmark files contain them).  Errors report line numbers.
    """
    n = None
    declared_m = None
    raw: list[tuple[int, int]] = []
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("c"):
            continue
        parts = stripped.split()
        if parts[0] == "p":
            if len(parts) != 4 or parts[1] not in ("edge", "edges", "col"):
                raise GraphParseError(f"line {lineno}: malformed problem header {stripped!r}")
            n = int(parts[2])
            declared_m = int(parts[3])
        elif parts[0] == "e":
            if n is None:
                raise GraphParseError(f"line {lineno}: edge line before 'p edge' header")
            if len(parts) != 3:
                raise GraphParseError(f"line {lineno}: malformed edge line {stripped!r}")
            try:
                raw.append((int(parts[1]), int(parts[2])))
            except ValueError:
                raise GraphParseError(f"line {lineno}: malformed edge line {stripped!r}") from None
        else:
            raise GraphParseError(f"line {lineno}: unrecognized line {stripped!r}")
    if n is None:
        raise GraphParseError("missing 'p edge N M' header")
    edges = _normalize_edges(n, raw, warn_duplicates=True)
    if declared_m is not None and len(edges) != declared_m:
        warnings.warn(
            f"header declares {declared_m} edges but {len(edges)} remain after normalization",
            stacklevel=2)
    return Graph(n=n, edges=edges)


def parse_graph(text: str) -> Graph:
    """Auto-detect the input format (DIMACS header vs parenthesized list)."""
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped or stripped.startswith("c"):
            continue
        if stripped.startswith("p "):
            return parse_dimacs(text)
        break
    return parse_edge_list(text)


def emit_dimacs(g: Graph) -> str:
    """Canonical emitter: ``p edge n m`` then sorted ``e i j`` lines with i < j."""
    lines = [f"p edge {g.n} {g.m}"]
    lines.extend(f"e {i} {j}" for (i, j) in sorted(g.edges))
    return "\n".join(lines) + "\n"


_MASK64 = (1 << 64) - 1


def _splitmix64(z: int) -> int:
    """One round of the SplitMix64 mixer; fixed so fixtures are platform-stable."""
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def random_graph(n: int, p: float, seed: int) -> Graph:
    """G(n, p) with a counter-based generator: identical (n, p, seed) gives an
    identical graph on every platform.

    Each unordered pair (i, j) draws one 64-bit SplitMix64 value from the pair's
    linear counter mixed with the seed, and the edge is included iff the draw
    falls below p * 2^64.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not (0.0 <= p <= 1.0):
        raise ValueError("p must lie in [0, 1]")
    base = _splitmix64(seed & _MASK64)
    threshold = int(p * float(1 << 64))
    edges = []
    counter = 0
    for i in range(1, n + 1):
        for j in range(i + 1, n + 1):
            draw = _splitmix64((base + counter) & _MASK64)
            if draw < threshold:
                edges.append((i, j))
            counter += 1
    return Graph(n=n, edges=frozenset(edges))


def is_independent(g: Graph, members: Iterable[int]) -> bool:
    """True iff no edge of g has both endpoints in ``members``."""
    s = set(members)
    for v in s:
        if not (1 <= v <= g.n):
            raise ValueError(f"vertex {v} out of range for n={g.n}")
    return all(not (i in s and j in s) for (i, j) in g.edges)


@lru_cache(maxsize=64)
def _adjacency_masks(g: Graph) -> tuple:
    adj = [0] * g.n
    for (i, j) in g.edges:
        adj[i - 1] |= 1 << (j - 1)
        adj[j - 1] |= 1 << (i - 1)
    return tuple(adj)


def greedy_independent_set(g: Graph) -> frozenset:
    """Min-degree greedy independent set; deterministic (ties by lowest index)."""
    adj = _adjacency_masks(g)
    alive = (1 << g.n) - 1
    chosen = 0
    while alive:
        best_v, best_d = -1, g.n + 1
        m = alive
        while m:
            v = (m & -m).bit_length() - 1
            m &= m - 1
            d = (adj[v] & alive).bit_count()
            if d < best_d:
                best_v, best_d = v, d
        chosen |= 1 << best_v
        alive &= ~((1 << best_v) | adj[best_v])
    return frozenset(v + 1 for v in range(g.n) if chosen >> v & 1)


@dataclass(frozen=True)
class ExactResult:
    """Outcome of the exact solver.

    status "optimal": alpha is the maximum independent-set size and witness
    attains it.  status "unknown": the node budget ran out; alpha/witness hold
    the best independent set found so far (a valid lower bound, never a wrong
    answer).
    """

    status: str
    alpha: int
    witness: frozenset
    nodes: int


class _BudgetExhausted(Exception):
    pass


def exact_mis(g: Graph, budget: int | None = None) -> ExactResult:
    """Exact maximum independent set by bitset branch-and-bound.

    Branches on a highest-degree candidate vertex (include/exclude), prunes by
    the remaining-candidate count bound, and seeds the incumbent with the
    min-degree greedy set.  Deterministic given g.  ``budget`` caps the number
    of search nodes; exhaustion returns status "unknown" with the incumbent.
    """
    n = g.n
    if n == 0:
        return ExactResult(status="optimal", alpha=0, witness=frozenset(), nodes=0)
    if n > 4096:
        raise ValueError("exact_mis is intended for small instances (n <= 4096)")
    adj = _adjacency_masks(g)

    seed = greedy_independent_set(g)
    best_mask = 0
    for v in seed:
        best_mask |= 1 << (v - 1)
    best_size = len(seed)

    nodes = 0

    def rec(cand: int, cur: int, size: int) -> None:
        nonlocal best_size, best_mask, nodes
        nodes += 1
        if budget is not None and nodes > budget:
            raise _BudgetExhausted
        if size > best_size:
            best_size, best_mask = size, cur
        if not cand:
            return
        if size + cand.bit_count() <= best_size:
            return
        # branch vertex: highest degree within the candidate subgraph
        bv, bd = -1, -1
        m = cand
        while m:
            v = (m & -m).bit_length() - 1
            m &= m - 1
            d = (adj[v] & cand).bit_count()
            if d > bd:
                bv, bd = v, d
        bit = 1 << bv
        rec(cand & ~bit & ~adj[bv], cur | bit, size + 1)  # include bv
        rec(cand & ~bit, cur, size)                       # exclude bv

    status = "optimal"
    try:
        rec((1 << n) - 1, 0, 0)
    except _BudgetExhausted:
        status = "unknown"
    witness = frozenset(v + 1 for v in range(n) if best_mask >> v & 1)
    return ExactResult(status=status, alpha=best_size, witness=witness, nodes=nodes)
