"""Undirected social graph: loading, synthetic generation, structural similarity."""

from __future__ import annotations

import hashlib
import logging
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

log = logging.getLogger(__name__)


class GraphParseError(ValueError):
    def __init__(self, line_no: int, line: str):
        super().__init__(f"line {line_no}: cannot parse edge from {line!r}")
        self.line_no = line_no


class EmptyGraphError(ValueError):
    pass


@dataclass(frozen=True)
class EdgeListFile:
    path: str


@dataclass(frozen=True)
class SyntheticScaleFree:
    n: int
    m: int
    seed: int

    def __post_init__(self):
        if not (self.n >= self.m + 1 >= 2):
            raise ValueError(f"need n >= m+1 >= 2, got n={self.n} m={self.m}")


GraphSource = EdgeListFile | SyntheticScaleFree


@dataclass(frozen=True)
class SocialGraph:
    """Simple undirected graph over dense node ids ``0..node_count-1``.

    ``external_ids[k]`` is the id node ``k`` had in the source file, or
    ``None`` for generated graphs whose ids are already dense.
    """

    node_count: int
    edges: frozenset[tuple[int, int]]
    adjacency: tuple[tuple[int, ...], ...]
    external_ids: tuple[int, ...] | None = None
    _nbr_sets: tuple[frozenset[int], ...] = field(
        init=False, repr=False, compare=False
    )

    def __post_init__(self):
        object.__setattr__(
            self, "_nbr_sets", tuple(frozenset(a) for a in self.adjacency)
        )

    @classmethod
    def from_edges(
        cls,
        node_count: int,
        pairs: Iterable[tuple[int, int]],
        external_ids: tuple[int, ...] | None = None,
    ) -> "SocialGraph":
        edges = set()
        for a, b in pairs:
            if a == b:
                continue
            edges.add((a, b) if a < b else (b, a))
        adj: list[list[int]] = [[] for _ in range(node_count)]
        for a, b in edges:
            if b >= node_count:
                raise ValueError(f"edge ({a},{b}) outside 0..{node_count - 1}")
            adj[a].append(b)
            adj[b].append(a)
        return cls(
            node_count,
            frozenset(edges),
            tuple(tuple(sorted(x)) for x in adj),
            external_ids,
        )

    def neighbors(self, i: int) -> tuple[int, ...]:
        return self.adjacency[i]

    def neighbor_set(self, i: int) -> frozenset[int]:
        return self._nbr_sets[i]

    def degree(self, i: int) -> int:
        return len(self.adjacency[i])

    def has_edge(self, i: int, j: int) -> bool:
        return j in self._nbr_sets[i]

    def edge_list_bytes(self) -> bytes:
        """Canonical edge list text (sorted, one ``a b`` pair per line)."""
        return "".join(f"{a} {b}\n" for a, b in sorted(self.edges)).encode()

    def check_invariants(self) -> None:
        n = self.node_count
        assert n > 0
        seen = 0
        for i, nbrs in enumerate(self.adjacency):
            assert list(nbrs) == sorted(set(nbrs)), f"node {i}: unsorted or duplicate"
            for j in nbrs:
                assert j != i, f"self-loop at {i}"
                assert 0 <= j < n
                assert i in self._nbr_sets[j], f"asymmetric edge {i}-{j}"
                assert (min(i, j), max(i, j)) in self.edges
            seen += len(nbrs)
        assert seen == 2 * len(self.edges)


def _parse_edge_file(path: Path) -> tuple[list[tuple[int, int]], int]:
    pairs = []
    with path.open() as fh:
        for line_no, line in enumerate(fh, 1):
            s = line.strip()
            if not s or s[0] in "%#":
                continue
            parts = s.split()
            # KONECT files may carry weight/timestamp columns after the pair
            if len(parts) < 2:
                raise GraphParseError(line_no, line.rstrip("\n"))
            try:
                a, b = int(parts[0]), int(parts[1])
            except ValueError:
                raise GraphParseError(line_no, line.rstrip("\n")) from None
            if a < 0 or b < 0:
                raise GraphParseError(line_no, line.rstrip("\n"))
            pairs.append((a, b))
    loops = sum(1 for a, b in pairs if a == b)
    return pairs, loops


def scale_free_edges(n: int, m: int, seed: int) -> list[tuple[int, int]]:
    """Preferential attachment: a complete core on ``m`` nodes, then each new
    node links to ``m`` distinct existing nodes chosen proportionally to degree.

    Edge count is exactly ``C(m, 2) + m * (n - m)``.
    """
    SyntheticScaleFree(n, m, seed)  # validates
    rng = random.Random(f"scale-free/{n}/{m}/{seed}")
    edges = [(a, b) for a in range(m) for b in range(a + 1, m)]
    # each node appears once per incident edge end
    ends: list[int] = [x for e in edges for x in e]
    for new in range(m, n):
        targets: set[int] = set()
        if new == m:
            targets = set(range(m))
        else:
            while len(targets) < m:
                targets.add(ends[rng.randrange(len(ends))] if ends else rng.randrange(new))
        for t in sorted(targets):
            edges.append((t, new))
            ends.extend((t, new))
    return edges


def load_graph(source: GraphSource) -> SocialGraph:
    if isinstance(source, SyntheticScaleFree):
        return SocialGraph.from_edges(
            source.n, scale_free_edges(source.n, source.m, source.seed)
        )
    path = Path(source.path)
    if not path.is_file():
        raise FileNotFoundError(str(path))
    pairs, loops = _parse_edge_file(path)
    if loops:
        log.warning("dropped %d self-loop(s) from %s", loops, path)
    pairs = [(a, b) for a, b in pairs if a != b]
    if not pairs:
        raise EmptyGraphError(f"{path}: no edges after cleaning")
    ids = sorted({x for p in pairs for x in p})
    dense = {ext: k for k, ext in enumerate(ids)}
    return SocialGraph.from_edges(
        len(ids), ((dense[a], dense[b]) for a, b in pairs), tuple(ids)
    )


def dataset_fingerprint(source: GraphSource, graph: SocialGraph | None = None) -> str:
    """SHA-256 of the input edge list: file bytes, or the canonical edge list
    of a generated graph."""
    if isinstance(source, EdgeListFile):
        h = hashlib.sha256()
        with open(source.path, "rb") as fh:
            for chunk in iter(lambda: fh.read(1 << 20), b""):
                h.update(chunk)
        return h.hexdigest()
    graph = graph or load_graph(source)
    return hashlib.sha256(graph.edge_list_bytes()).hexdigest()


def write_edge_list(graph: SocialGraph, path: str | Path, header: str = "") -> None:
    with open(path, "wb") as fh:
        if header:
            fh.write(f"% {header}\n".encode())
        fh.write(graph.edge_list_bytes())


def pearson_similarity(g: SocialGraph, i: int, j: int) -> float:
    """Pearson correlation of adjacency rows ``i`` and ``j`` (diagonal = 0).

    Uses the 0/1 closed form: with degrees ``ki``, ``kj`` and ``c`` common
    neighbours, ``cov = c - ki*kj/n`` and ``var = k - k*k/n``. Rows with zero
    variance (isolated, or adjacent to everything else) give 0.
    """
    n = g.node_count
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"node out of range: {i}, {j}")
    ki, kj = g.degree(i), g.degree(j)
    var_i = ki - ki * ki / n
    var_j = kj - kj * kj / n
    if var_i <= 0 or var_j <= 0:
        return 0.0
    if i == j:
        return 1.0
    a, b = g.neighbor_set(i), g.neighbor_set(j)
    common = len(a & b) if len(a) <= len(b) else len(b & a)
    num = common - ki * kj / n
    r = num / math.sqrt(var_i * var_j)
    return max(-1.0, min(1.0, r))


def hill_exponent(degrees: Iterable[int], tail_fraction: float = 0.1) -> float:
    """Hill estimate of the degree-distribution exponent ``gamma`` (pdf
    ``p(k) ~ k**-gamma``) from the top ``tail_fraction`` of degrees."""
    xs = sorted((d for d in degrees if d > 0), reverse=True)
    k = max(2, int(len(xs) * tail_fraction))
    if k >= len(xs):
        raise ValueError("not enough positive degrees for a tail estimate")
    x_min = xs[k]
    s = sum(math.log(x / x_min) for x in xs[:k])
    if s == 0:
        raise ValueError("degenerate tail")
    return 1.0 + k / s
