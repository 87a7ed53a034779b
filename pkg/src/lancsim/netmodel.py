"""AS-level underlay graphs, peer placement, and overlay construction.

The underlay is a small undirected AS graph with precomputed all-pairs hop
counts. Peers are placed into ASes (by degree share or uniformly) and wired
into a symmetric overlay in which locality-aware peers prefer same-AS
neighbors with probability p per drawn link.
"""

from __future__ import annotations

from collections import deque
from importlib import resources
from pathlib import Path
from typing import Iterable

import numpy as np


class ParseError(ValueError):
    pass


class DisconnectedGraph(ValueError):
    pass


class InfeasibleParameters(ValueError):
    pass


class InfeasibleDegree(ValueError):
    pass


class DisconnectedTopology(RuntimeError):
    """Overlay kept missing the server after repeated rebuilds."""


class UnderlayGraph:
    """Undirected AS graph with hop distances and per-AS degrees."""

    def __init__(self, edges: list[tuple[int, int]]):
        if not edges:
            raise ParseError("underlay has no edges")
        self.asns = sorted({a for e in edges for a in e})
        self._index = {a: i for i, a in enumerate(self.asns)}
        self.edges = edges
        self.degree = {a: 0 for a in self.asns}
        adj: list[list[int]] = [[] for _ in self.asns]
        seen = set()
        for u, v in edges:
            if u == v:
                raise ParseError(f"self-loop at AS {u}")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise ParseError(f"duplicate edge {u} {v}")
            seen.add(key)
            adj[self._index[u]].append(self._index[v])
            adj[self._index[v]].append(self._index[u])
            self.degree[u] += 1
            self.degree[v] += 1
        self.hop_matrix = _bfs_all_pairs(adj)
        if (self.hop_matrix < 0).any():
            raise DisconnectedGraph("underlay graph is not connected")

    @property
    def as_count(self) -> int:
        return len(self.asns)

    def hops(self, asn_a: int, asn_b: int) -> int:
        return int(self.hop_matrix[self._index[asn_a], self._index[asn_b]])

    def mean_pairwise_hops(self) -> float:
        n = self.as_count
        return float(self.hop_matrix.sum() / (n * (n - 1)))

    def max_degree_asn(self) -> int:
        best = max(self.degree.values())
        return min(a for a, d in self.degree.items() if d == best)


def _bfs_all_pairs(adj: list[list[int]]) -> np.ndarray:
    n = len(adj)
    hops = np.full((n, n), -1, dtype=np.int16)
    for start in range(n):
        hops[start, start] = 0
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if hops[start, v] < 0:
                    hops[start, v] = hops[start, u] + 1
                    queue.append(v)
    return hops


def load_underlay(source: str | Path | Iterable[str]) -> UnderlayGraph:
    """Read an edge list: one "u v" pair of integer ASNs per line, '#'
    comments and blank lines ignored."""
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    else:
        lines = list(source)
    edges = []
    for ln, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"line {ln}: expected 'u v', got {raw.strip()!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(f"line {ln}: non-integer ASN in {raw.strip()!r}") from None
        edges.append((u, v))
    return UnderlayGraph(edges)


def default_underlay() -> UnderlayGraph:
    """The synthetic 37-AS / 156-edge graph shipped with the package."""
    text = resources.files("lancsim.data").joinpath("underlay_37_156.txt").read_text()
    return load_underlay(text.splitlines())


def generate_underlay(as_count: int, edge_count: int, rng: np.random.Generator) -> UnderlayGraph:
    """Connected random graph with exact node and edge counts: a random
    spanning tree plus uniformly chosen extra edges."""
    max_edges = as_count * (as_count - 1) // 2
    if edge_count < as_count - 1 or edge_count > max_edges:
        raise InfeasibleParameters(
            f"{edge_count} edges infeasible for {as_count} nodes "
            f"(need {as_count - 1}..{max_edges})"
        )
    order = rng.permutation(as_count)
    edges = []
    present = set()
    for i in range(1, as_count):
        u = int(order[i])
        v = int(order[rng.integers(0, i)])
        edges.append((u, v))
        present.add((min(u, v), max(u, v)))
    while len(edges) < edge_count:
        u, v = (int(x) for x in rng.integers(0, as_count, size=2))
        if u == v:
            continue
        key = (min(u, v), max(u, v))
        if key in present:
            continue
        present.add(key)
        edges.append((u, v))
    return UnderlayGraph(edges)


def assign_peers(
    underlay: UnderlayGraph,
    peer_count: int,
    mode: str,
    rng: np.random.Generator,
) -> np.ndarray:
    """Place peers into ASes; returns the ASN of each peer.

    "proportional" weights every AS by its degree share, "uniform" weights
    all ASes equally; either way each peer is an independent draw.
    """
    if peer_count < 1:
        raise ValueError("peer_count must be >= 1")
    asns = np.array(underlay.asns)
    if mode == "proportional":
        weights = np.array([underlay.degree[a] for a in underlay.asns], dtype=float)
    elif mode == "uniform":
        weights = np.ones(len(asns))
    else:
        raise ValueError(f"unknown placement mode {mode!r}")
    probs = weights / weights.sum()
    return asns[rng.choice(len(asns), size=peer_count, p=probs)]


class OverlayGraph:
    """Symmetric peer neighborhood graph annotated with AS numbers."""

    def __init__(self, asn_of: np.ndarray, adjacency: list[set[int]], locality_aware: np.ndarray):
        self.asn_of = asn_of
        self.adjacency = adjacency
        self.locality_aware = locality_aware

    @property
    def peer_count(self) -> int:
        return len(self.asn_of)

    def mean_degree(self) -> float:
        return sum(len(s) for s in self.adjacency) / self.peer_count

    def intra_domain_link_fraction(self) -> float:
        intra = total = 0
        for i, nbrs in enumerate(self.adjacency):
            for j in nbrs:
                if j > i:
                    total += 1
                    intra += self.asn_of[i] == self.asn_of[j]
        return intra / total if total else 0.0

    def reachable_from(self, start: int) -> set[int]:
        seen = {start}
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in self.adjacency[u]:
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        return seen


def _pick_neighbor(pool: list[int], taken: set[int], me: int, rng: np.random.Generator) -> int | None:
    """Uniform draw from pool excluding self and existing neighbors."""
    if len(pool) <= 1:
        return None
    for _ in range(32):
        cand = pool[rng.integers(0, len(pool))]
        if cand != me and cand not in taken:
            return cand
    explicit = [q for q in pool if q != me and q not in taken]
    if not explicit:
        return None
    return explicit[rng.integers(0, len(explicit))]


def build_overlay(
    asn_of: np.ndarray,
    avg_degree: float,
    p: float,
    deploy_fraction: float,
    rng: np.random.Generator,
    aware: np.ndarray | None = None,
) -> OverlayGraph:
    """Wire a symmetric overlay of the given average degree.

    Each peer initiates its share of links. A locality-aware initiator draws
    each link from its own AS with probability p, spilling to the general
    population when the AS has no spare candidates; oblivious initiators
    (and the 1-p case) draw uniformly from everyone.
    """
    n = len(asn_of)
    if not 0 <= p <= 1:
        raise ValueError("p must be in [0, 1]")
    if avg_degree >= n or avg_degree < 1:
        raise InfeasibleDegree(f"avg_degree {avg_degree} infeasible for {n} peers")
    if aware is None:
        k = int(round(deploy_fraction * n))
        aware = np.zeros(n, dtype=bool)
        aware[rng.permutation(n)[:k]] = True

    by_as: dict[int, list[int]] = {}
    for i, a in enumerate(asn_of):
        by_as.setdefault(int(a), []).append(i)
    everyone = list(range(n))

    target_links = int(round(n * avg_degree / 2))
    inits = np.full(n, int(avg_degree) // 2, dtype=np.int64)
    extra = target_links - int(inits.sum())
    if extra > 0:
        inits[rng.permutation(n)[:extra]] += 1

    adjacency: list[set[int]] = [set() for _ in range(n)]
    for i in rng.permutation(n):
        i = int(i)
        for _ in range(int(inits[i])):
            cand = None
            if aware[i] and rng.random() < p:
                cand = _pick_neighbor(by_as[int(asn_of[i])], adjacency[i], i, rng)
            if cand is None:
                cand = _pick_neighbor(everyone, adjacency[i], i, rng)
            if cand is None:
                continue
            adjacency[i].add(cand)
            adjacency[cand].add(i)
    return OverlayGraph(asn_of=asn_of, adjacency=adjacency, locality_aware=aware)


def build_connected_overlay(
    asn_of: np.ndarray,
    avg_degree: float,
    p: float,
    deploy_fraction: float,
    rng: np.random.Generator,
    server: int = 0,
    aware: np.ndarray | None = None,
    attempts: int = 10,
) -> OverlayGraph:
    """build_overlay, retried until every peer can reach the server."""
    for _ in range(attempts):
        overlay = build_overlay(asn_of, avg_degree, p, deploy_fraction, rng, aware=aware)
        if len(overlay.reachable_from(server)) == overlay.peer_count:
            return overlay
    raise DisconnectedTopology(f"no overlay reaching all peers from {server} in {attempts} tries")


def peer_distance(i: int, j: int, asn_of: np.ndarray, underlay: UnderlayGraph) -> int:
    """Hop distance between two peers: 0 inside one AS, else underlay hops."""
    a, b = int(asn_of[i]), int(asn_of[j])
    if a == b:
        return 0
    return underlay.hops(a, b)


def dump_overlay(overlay: OverlayGraph) -> str:
    """Debug text form: a 'peer_id asn' preamble, then one edge per line."""
    out = ["# peers"]
    for i in range(overlay.peer_count):
        out.append(f"{i} {int(overlay.asn_of[i])}")
    out.append("# edges")
    for i, nbrs in enumerate(overlay.adjacency):
        for j in sorted(nbrs):
            if j > i:
                out.append(f"{i} {j}")
    return "\n".join(out) + "\n"


def parse_overlay(text: str) -> tuple[dict[int, int], list[tuple[int, int]]]:
    """Inverse of dump_overlay; returns (peer asn map, edge list)."""
    peers: dict[int, int] = {}
    edges: list[tuple[int, int]] = []
    section = None
    for raw in text.splitlines():
        line = raw.strip()
        if line == "# peers":
            section = "peers"
            continue
        if line == "# edges":
            section = "edges"
            continue
        if not line or line.startswith("#"):
            continue
        a, b = (int(x) for x in line.split())
        if section == "peers":
            peers[a] = b
        else:
            edges.append((a, b))
    return peers, edges
