"""Evaluation metrics computed from a transfer trace.

Inter-domain traffic redundancy (IDTR) divides the hop-weighted number of
inter-domain transfers by the minimum possible: one copy of each block
crossing one hop into every populated AS other than the server's. The
distribution-time numbers cover finished downloaders only; peers that never
reach full rank are counted separately.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .netmodel import UnderlayGraph, peer_distance


class DegenerateTopology(ValueError):
    """Inter-domain traffic observed although only one AS is populated."""


class NoFinishedPeers(ValueError):
    pass


@dataclass
class MetricsReport:
    idtr: float
    avg_dt: float | None
    max_dt: float | None
    unfinished_count: int
    unfinished_fraction: float
    total_interdomain_block_hops: int
    interdomain_transfers: int
    dependent_block_count: int
    total_transfers: int
    upload_cov: float | None
    temporal_series: list[tuple[int, int, int]]  # (slot, transfers, weighted)
    upload_histogram: list[tuple[int, int, int, float | None]]  # (peer, asn, uploads, finish)


def idtr(trace, underlay: UnderlayGraph, asn_of: np.ndarray, n: int, server_asn: int) -> float:
    """Hop-weighted inter-domain transfers over the theoretical minimum.

    Hop counts are recomputed from the underlay here rather than read from
    the trace, so this doubles as a check of the engine's online counter.
    The minimum is n blocks entering each populated AS but the server's.
    """
    populated = {int(asn_of[p.id]) for p in trace.peers if p.join_time is not None}
    populated.add(server_asn)
    denom = n * (len(populated) - 1)
    numer = 0
    for rec in trace.records:
        numer += peer_distance(rec.src, rec.dst, asn_of, underlay)
    if denom == 0:
        if numer == 0 and not any(r.hops for r in trace.records):
            return 1.0
        raise DegenerateTopology("inter-domain traffic with a single populated AS")
    return numer / denom


def distribution_times(trace) -> tuple[float, float, int]:
    """(average, maximum) download time of finished downloaders, plus the
    count of peers that never finished. The server is not a downloader."""
    times = []
    unfinished = 0
    for p in trace.peers:
        if p.is_server or p.join_time is None:
            continue
        if p.finish_time is None:
            unfinished += 1
        else:
            times.append(p.finish_time - p.join_time)
    if not times:
        raise NoFinishedPeers(f"no peer finished ({unfinished} unfinished)")
    return float(np.mean(times)), float(np.max(times)), unfinished


def temporal_series(trace, bin_width: float = 1.0) -> list[tuple[int, int, int]]:
    """Per-slot inter-domain transfer counts and hop-weighted counts.

    Bins partition the trace: summing any column over slots reproduces the
    run totals.
    """
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    counts: dict[int, list[int]] = {}
    for rec in trace.records:
        if rec.hops == 0:
            continue
        slot = int(rec.t_arrive // bin_width)
        cell = counts.setdefault(slot, [0, 0])
        cell[0] += 1
        cell[1] += rec.hops
    if not counts:
        return []
    last = max(counts)
    return [(s, *counts.get(s, (0, 0))) for s in range(last + 1)]


def upload_histogram(trace) -> tuple[list[tuple[int, int, int, float | None]], float | None]:
    """Blocks uploaded per peer, plus the coefficient of variation of the
    non-server counts (spread of the upload load across ordinary peers)."""
    rows = [
        (p.id, p.asn, p.uploads, p.finish_time)
        for p in trace.peers
        if p.join_time is not None
    ]
    ordinary = np.array([p.uploads for p in trace.peers if p.join_time is not None and not p.is_server])
    cov = None
    if len(ordinary) and ordinary.mean() > 0:
        cov = float(ordinary.std() / ordinary.mean())
    return rows, cov


def build_report(
    trace,
    underlay: UnderlayGraph,
    asn_of: np.ndarray,
    n: int,
    server_asn: int,
    bin_width: float = 1.0,
) -> MetricsReport:
    try:
        avg_dt, max_dt, unfinished = distribution_times(trace)
    except NoFinishedPeers:
        avg_dt = max_dt = None
        unfinished = sum(
            1 for p in trace.peers if not p.is_server and p.join_time is not None and p.finish_time is None
        )
    downloaders = sum(1 for p in trace.peers if not p.is_server and p.join_time is not None)
    inter = [r for r in trace.records if r.hops > 0]
    histogram, cov = upload_histogram(trace)
    return MetricsReport(
        idtr=idtr(trace, underlay, asn_of, n, server_asn),
        avg_dt=avg_dt,
        max_dt=max_dt,
        unfinished_count=unfinished,
        unfinished_fraction=unfinished / downloaders if downloaders else 0.0,
        total_interdomain_block_hops=sum(r.hops for r in inter),
        interdomain_transfers=len(inter),
        dependent_block_count=sum(1 for r in trace.records if r.dependent),
        total_transfers=len(trace.records),
        upload_cov=cov,
        temporal_series=temporal_series(trace, bin_width),
        upload_histogram=histogram,
    )
