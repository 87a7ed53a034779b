"""Deterministic event-driven swarm simulator.

A single priority queue drives ticks, block arrivals, and churn. Peers
attempt new requests once per time unit and again whenever one of their
downloads completes; a transfer occupies one upload slot at the source and
one download slot at the destination for a uniformly random [0.75, 1.25] ts
link delay. The run ends when nothing is in flight, nobody can issue a
request, and no churn remains. Everything is driven by one seeded
generator, so a (config, seed) pair fully determines the trace.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import metrics, netmodel, policies, rlnc
from .policies import PolicyVariant, SchedulingPolicy, TftLedger, tft_admit
from .rlnc import CoeffMatrix, FileSpec, InnovationCache

SCENARIOS = ("Static", "A", "B", "C", "D")


class ConfigError(ValueError):
    pass


@dataclass
class SimConfig:
    """Full description of one simulation run.

    The first block of fields mirrors the config-file keys; the rest are
    library-level knobs (placement mode, server capacity class, and the
    churn-scenario constants) with the standard values baked in.
    """

    peers: int = 1000
    blocks: int = 100
    block_size: int = 64
    avg_degree: int = 10
    intra_fraction: float = 0.7
    deploy_fraction: float = 1.0
    server_locality: bool = True
    policy: PolicyVariant = PolicyVariant.LANC_RANDOM
    encoding_density: int | None = None  # None encodes the whole buffer
    capacity_up: int = 3
    capacity_down: int = 3
    hetero_fraction: float = 0.0
    hetero_multiplier: float = 10.0
    tft_threshold: int | None = None
    scenario: str = "Static"
    underlay: str = ""  # path to an edge list; empty loads the shipped graph
    server_as: int = -1  # -1 places the server in the highest-degree AS
    seed: int = 0

    placement: str = "proportional"
    server_hetero: bool = False
    staleness: float = 0.0  # buffer-map exchange period; 0 = always current
    batch_size: int = 100
    batch_interval: float = 10.0
    depart_linger: float = 10.0
    server_depart_delay: float = 10.0
    server_serve_limit: int = 120
    churn_size: int = 50
    churn_interval: float = 10.0
    churn_until: float = 100.0

    def validate(self) -> None:
        if self.peers < 2:
            raise ConfigError("need at least a server and one downloader")
        if self.blocks < 1 or self.block_size < 1:
            raise ConfigError("blocks and block_size must be >= 1")
        if not 1 <= self.avg_degree < self.peers:
            raise ConfigError("avg_degree must be in [1, peers)")
        for name in ("intra_fraction", "deploy_fraction", "hetero_fraction"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1]")
        if self.capacity_up < 1 or self.capacity_down < 1:
            raise ConfigError("capacities must be >= 1")
        if self.hetero_multiplier <= 0:
            raise ConfigError("hetero_multiplier must be positive")
        if self.encoding_density is not None and self.encoding_density < 1:
            raise ConfigError("encoding_density must be >= 1 (or all)")
        if self.tft_threshold is not None and self.tft_threshold < 0:
            raise ConfigError("tft_threshold must be >= 0")
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"scenario must be one of {SCENARIOS}")
        if self.placement not in ("proportional", "uniform"):
            raise ConfigError("placement must be proportional or uniform")
        if self.staleness < 0:
            raise ConfigError("staleness must be >= 0")

    def scheduling_policy(self) -> SchedulingPolicy:
        return SchedulingPolicy(
            variant=self.policy,
            encoding_density=self.encoding_density,
            tft_threshold=self.tft_threshold,
        )


def sample_link_delay(rng: np.random.Generator) -> float:
    """Per-transfer link delay, uniform on [0.75, 1.25] time units."""
    return float(rng.uniform(0.75, 1.25))


class TransferRecord(NamedTuple):
    t_request: float
    t_arrive: float
    src: int
    dst: int
    hops: int
    dependent: bool


@dataclass
class PeerSummary:
    id: int
    asn: int
    is_server: bool
    join_time: float | None
    finish_time: float | None
    departed: bool
    uploads: int
    downloads: int


@dataclass
class TransferTrace:
    """Every completed transfer plus per-peer outcomes for one run."""

    records: list[TransferRecord]
    peers: list[PeerSummary]
    end_time: float
    online_interdomain_hops: int
    online_dependent_count: int


class _Transfer(NamedTuple):
    src: int
    dst: int
    t_request: float
    hops: int
    block: object  # CodedBlock, or (block_id, payload) for plain schemes


class PeerState:
    """One simulated peer: buffer, capacities, ledgers, and lifecycle."""

    def __init__(self, pid: int, asn: int, up_cap: int, down_cap: int, coded: bool, n: int, k: int):
        self.id = pid
        self.asn = asn
        self.up_cap = up_cap
        self.down_cap = down_cap
        self.active_up = 0
        self.active_down = 0
        self.neighbors: set[int] = set()
        self.ledger = TftLedger()
        self.join_time: float | None = None
        self.finish_time: float | None = None
        self.departed = False
        self.is_server = False
        self.uploads = 0
        self.downloads = 0
        if coded:
            self.matrix: CoeffMatrix | None = CoeffMatrix(n, k)
            self.have = None
            self.payloads = None
            self.have_count = 0
        else:
            self.matrix = None
            self.have = np.zeros(n, dtype=bool)
            self.payloads: dict[int, np.ndarray] = {}
            self.have_count = 0
        self.in_flight_from: dict[int, int] = {}
        self.pending_blocks: set[int] = set()
        # state advertised to neighbors under a nonzero exchange period
        self.published_have = None if coded else np.zeros(n, dtype=bool)
        self.published_log_len = 0

    def publish(self) -> None:
        if self.matrix is not None:
            self.published_log_len = len(self.matrix.log)
        else:
            self.published_have = self.have.copy()

    @property
    def present(self) -> bool:
        return self.join_time is not None and not self.departed

    def blocks_held(self) -> int:
        return self.matrix.rank if self.matrix is not None else self.have_count

    def finished(self, n: int) -> bool:
        return self.blocks_held() >= n


class Simulation:
    def __init__(self, config: SimConfig):
        config.validate()
        self.cfg = config
        self.rng = np.random.default_rng(config.seed)
        self.policy = config.scheduling_policy()
        self.coded = config.policy.coded
        self.spec = FileSpec(n=config.blocks, k=config.block_size)

        self.underlay = (
            netmodel.load_underlay(config.underlay) if config.underlay else netmodel.default_underlay()
        )
        self._setup_peers()
        self._setup_topology()
        self._seed_server()

        self._heap: list = []
        self._seq = 0
        self._nontick = 0
        self._tick_pending = False
        self._now = 0.0
        self._next_publish = 0.0
        self._in_flight = 0
        self._transfers: dict[int, _Transfer] = {}
        self._next_tid = 0
        self.records: list[TransferRecord] = []
        self.online_hops = 0
        self.online_dependent = 0

    # -- construction -----------------------------------------------------

    def _setup_peers(self) -> None:
        cfg = self.cfg
        asn_of = netmodel.assign_peers(self.underlay, cfg.peers, cfg.placement, self.rng)
        server_asn = cfg.server_as if cfg.server_as >= 0 else self.underlay.max_degree_asn()
        if server_asn not in self.underlay.degree:
            raise ConfigError(f"server_as {server_asn} not present in the underlay")
        asn_of[0] = server_asn
        self.asn_of = asn_of
        self._as_index = np.array([self.underlay._index[int(a)] for a in asn_of])

        fast = np.zeros(cfg.peers, dtype=bool)
        n_fast = int(round(cfg.hetero_fraction * (cfg.peers - 1)))
        if n_fast:
            fast[1 + self.rng.permutation(cfg.peers - 1)[:n_fast]] = True
        fast[0] = cfg.server_hetero

        self.peers: list[PeerState] = []
        for pid in range(cfg.peers):
            mult = cfg.hetero_multiplier if fast[pid] else 1.0
            p = PeerState(
                pid,
                int(asn_of[pid]),
                up_cap=max(1, int(round(cfg.capacity_up * mult))),
                down_cap=max(1, int(round(cfg.capacity_down * mult))),
                coded=self.coded,
                n=cfg.blocks,
                k=cfg.block_size,
            )
            self.peers.append(p)
        self.peers[0].is_server = True

        self.cache = InnovationCache()
        if self.coded:
            for p in self.peers:
                self.cache.register(p.id, p.matrix)

    def _setup_topology(self) -> None:
        cfg = self.cfg
        aware = np.zeros(cfg.peers, dtype=bool)
        k = int(round(cfg.deploy_fraction * cfg.peers))
        aware[self.rng.permutation(cfg.peers)[:k]] = True
        aware[0] = cfg.server_locality
        self.aware = aware

        if cfg.scenario in ("Static", "D"):
            overlay = netmodel.build_connected_overlay(
                self.asn_of, cfg.avg_degree, cfg.intra_fraction, cfg.deploy_fraction,
                self.rng, server=0, aware=aware,
            )
            for p in self.peers:
                p.neighbors = set(overlay.adjacency[p.id])
                p.join_time = 0.0
        else:
            self.peers[0].join_time = 0.0  # churn scenarios start with the server alone

    def _seed_server(self) -> None:
        server = self.peers[0]
        self.file_bytes = self.rng.integers(0, 256, self.spec.total_bytes, dtype=np.uint8).tobytes()
        blocks = rlnc.seed_blocks(self.file_bytes, self.spec)
        if self.coded:
            for b in blocks:
                server.matrix.insert_and_reduce(b)
        else:
            server.have[:] = True
            server.have_count = self.cfg.blocks
            server.payloads = {i: b.payload for i, b in enumerate(blocks)}
        server.finish_time = 0.0

    # -- event plumbing ---------------------------------------------------

    def _push(self, time: float, kind: str, data=None) -> None:
        if kind != "tick":
            self._nontick += 1
        heapq.heappush(self._heap, (time, self._seq, kind, data))
        self._seq += 1

    def _push_tick(self, time: float) -> None:
        if not self._tick_pending:
            self._tick_pending = True
            heapq.heappush(self._heap, (time, self._seq, "tick", None))
            self._seq += 1

    def apply_scenario(self) -> None:
        """Install the churn events for the configured scenario."""
        cfg = self.cfg
        if cfg.scenario == "Static":
            return
        if cfg.scenario == "D":
            t = cfg.churn_interval
            while t <= cfg.churn_until:
                self._push(t, "churn_batch", None)
                t += cfg.churn_interval
            return
        # A, B, C: everyone but the server joins in batches
        ids = list(range(1, cfg.peers))
        t = 0.0
        last = 0.0
        for start in range(0, len(ids), cfg.batch_size):
            self._push(t, "join_batch", ids[start : start + cfg.batch_size])
            last = t
            t += cfg.batch_interval
        if cfg.scenario == "B":
            self._push(last + cfg.server_depart_delay, "server_depart", None)

    # -- distances and admission ------------------------------------------

    def _distance(self, i: int, j: int) -> int:
        a, b = self._as_index[i], self._as_index[j]
        if a == b:
            return 0
        return int(self.underlay.hop_matrix[a, b])

    def _admissible(self, responder: PeerState, requester: PeerState) -> bool:
        if responder.departed or responder.active_up >= responder.up_cap:
            return False
        if responder.is_server:
            return True  # the seeder has nothing to download, never throttled
        return tft_admit(responder.ledger.balance(requester.id), self.policy.tft_threshold)

    # -- request issue ----------------------------------------------------

    def _decide(self, p: PeerState) -> policies.RequestDecision | None:
        nbr_ids = sorted(p.neighbors)
        stale = self.cfg.staleness > 0
        if self.coded:
            views = []
            for j in nbr_ids:
                q = self.peers[j]
                if not q.present:
                    continue
                visible = q.published_log_len if stale else None
                views.append(
                    policies.CodedNeighbor(
                        peer=j,
                        distance=self._distance(p.id, j),
                        admissible=self._admissible(q, p),
                        in_flight=p.in_flight_from.get(j, 0),
                        count_upper=self.cache.upper_bound(p.id, j, visible),
                        count_exact=lambda i=p.id, j=j, v=visible: self.cache.count(i, j, v),
                    )
                )
            pivot_fn = None
            if self.policy.variant is PolicyVariant.LANC_INFORMED:
                def pivot_fn(j, p=p):
                    piv = rlnc.innovative_pivots(p.matrix, self.peers[j].matrix)
                    return int(piv[self.rng.integers(0, len(piv))])
            return policies.select_request_lanc(
                p.matrix.rank, self.cfg.blocks, views, self.policy.variant, self.rng, pivot_fn=pivot_fn
            )
        views = []
        for j in nbr_ids:
            q = self.peers[j]
            if not q.present:
                continue
            views.append(
                policies.PlainNeighbor(
                    peer=j,
                    distance=self._distance(p.id, j),
                    admissible=self._admissible(q, p),
                    have=q.published_have if stale else q.have,
                )
            )
        if not views:
            return None
        if self.policy.variant is PolicyVariant.RANDOM:
            return policies.select_request_random(p.have, p.pending_blocks, views, self.rng)
        return policies.select_request_la_lr(p.have, p.pending_blocks, views, self.rng)

    def schedule_round(self, p: PeerState, now: float) -> int:
        """Fill the peer's free download slots one request at a time."""
        issued = 0
        while (
            p.present
            and not p.finished(self.cfg.blocks)
            and p.active_down < p.down_cap
        ):
            decision = self._decide(p)
            if decision is None:
                break
            self._issue(p, decision, now)
            issued += 1
        return issued

    def _issue(self, p: PeerState, decision: policies.RequestDecision, now: float) -> None:
        src = self.peers[decision.target]
        buffer = src.matrix if self.coded else src.payloads
        block = policies.respond(buffer, decision, self.policy, self.rng)
        src.active_up += 1
        p.active_down += 1
        assert src.active_up <= src.up_cap and p.active_down <= p.down_cap
        if self.coded:
            p.in_flight_from[src.id] = p.in_flight_from.get(src.id, 0) + 1
        else:
            p.pending_blocks.add(decision.block_id)
        self._in_flight += 1
        tid = self._next_tid
        self._next_tid += 1
        self._transfers[tid] = _Transfer(
            src=src.id, dst=p.id, t_request=now, hops=self._distance(src.id, p.id), block=block
        )
        self._push(now + sample_link_delay(self.rng), "arrival", tid)

    # -- event handlers ----------------------------------------------------

    def _release(self, tid: int, tr: _Transfer) -> None:
        """Refund the slots held by a transfer (completion or cancellation)."""
        src, dst = self.peers[tr.src], self.peers[tr.dst]
        src.active_up -= 1
        dst.active_down -= 1
        self._in_flight -= 1
        if self.coded:
            dst.in_flight_from[tr.src] -= 1
        else:
            dst.pending_blocks.discard(tr.block[0])

    def _on_arrival(self, tid: int, now: float) -> None:
        tr = self._transfers.pop(tid, None)
        if tr is None:
            return  # cancelled by a departure
        self._release(tid, tr)
        src, dst = self.peers[tr.src], self.peers[tr.dst]

        if self.coded:
            accepted = dst.matrix.insert_and_reduce(tr.block)
            dependent = not accepted
        else:
            block_id, payload = tr.block
            assert not dst.have[block_id]
            dst.have[block_id] = True
            dst.have_count += 1
            dst.payloads[block_id] = payload
            dependent = False

        src.ledger.record_upload(dst.id)
        dst.ledger.record_download(src.id)
        src.uploads += 1
        dst.downloads += 1
        self.records.append(
            TransferRecord(tr.t_request, now, tr.src, tr.dst, tr.hops, dependent)
        )
        self.online_hops += tr.hops
        self.online_dependent += dependent

        if (
            self.cfg.scenario == "C"
            and src.is_server
            and not src.departed
            and src.uploads >= self.cfg.server_serve_limit
        ):
            self._depart(src.id, now)

        if dst.finish_time is None and dst.finished(self.cfg.blocks):
            dst.finish_time = now
            if self.coded and dst.matrix.decode(self.spec) != self.file_bytes:
                raise AssertionError(f"peer {dst.id} decoded corrupt data")
            if self.cfg.scenario in ("A", "B", "C"):
                self._push(now + self.cfg.depart_linger, "depart", dst.id)
        elif not dst.departed and dst.finish_time is None:
            self.schedule_round(dst, now)

    def _depart(self, pid: int, now: float) -> None:
        p = self.peers[pid]
        if p.departed or p.join_time is None:
            return
        p.departed = True
        for tid, tr in [(t, x) for t, x in self._transfers.items() if x.src == pid or x.dst == pid]:
            self._release(tid, tr)
            del self._transfers[tid]

    def _join_batch(self, ids: list[int], now: float) -> None:
        # Joiners wire to already-present peers at a 7:3 intra:inter ratio;
        # when one side runs short the remainder spills to the other.
        cfg = self.cfg
        intra_target = int(round(0.7 * cfg.avg_degree))
        inter_target = cfg.avg_degree - intra_target
        for pid in ids:
            p = self.peers[pid]
            p.join_time = now
            intra, inter = [], []
            for q in self.peers:
                if q.present and q.id != pid:
                    (intra if q.asn == p.asn else inter).append(q.id)
            n_intra = min(intra_target, len(intra))
            n_inter = min(inter_target + (intra_target - n_intra), len(inter))
            unmet_inter = inter_target + (intra_target - n_intra) - n_inter
            n_intra = min(n_intra + unmet_inter, len(intra))
            chosen = []
            if n_intra:
                chosen += [intra[int(k)] for k in self.rng.choice(len(intra), size=n_intra, replace=False)]
            if n_inter:
                chosen += [inter[int(k)] for k in self.rng.choice(len(inter), size=n_inter, replace=False)]
            for j in chosen:
                p.neighbors.add(j)
                self.peers[j].neighbors.add(pid)

    def _churn_batch(self, now: float) -> None:
        candidates = [p.id for p in self.peers if p.present and not p.is_server]
        take = min(self.cfg.churn_size, len(candidates))
        if take == 0:
            return
        for k in self.rng.choice(len(candidates), size=take, replace=False):
            self._depart(candidates[int(k)], now)

    def _publish_all(self, now: float) -> None:
        for p in self.peers:
            p.publish()
        self._next_publish = now + self.cfg.staleness

    def _request_pass(self, now: float) -> int:
        downloaders = [
            p.id for p in self.peers if p.present and p.finish_time is None and not p.is_server
        ]
        issued = 0
        for idx in self.rng.permutation(len(downloaders)):
            p = self.peers[downloaders[int(idx)]]
            if p.present and p.finish_time is None:
                issued += self.schedule_round(p, now)
        return issued

    def _tick(self, now: float) -> None:
        self._tick_pending = False
        stale = self.cfg.staleness > 0
        if stale and now >= self._next_publish - 1e-9:
            self._publish_all(now)
        issued = self._request_pass(now)
        if stale and not (issued or self._in_flight or self._nontick):
            # Apparent global stall: refresh every view before concluding,
            # otherwise outdated buffer maps could hide feasible requests.
            self._publish_all(now)
            issued = self._request_pass(now)
        if issued or self._in_flight or self._nontick:
            self._push_tick(now + 1.0)

    # -- main loop ----------------------------------------------------------

    def run(self) -> TransferTrace:
        self.apply_scenario()
        self._push_tick(0.0)
        end_time = 0.0
        while self._heap:
            time, _, kind, data = heapq.heappop(self._heap)
            self._now = time
            end_time = max(end_time, time)
            if kind == "tick":
                self._tick(time)
                continue
            self._nontick -= 1
            if kind == "arrival":
                self._on_arrival(data, time)
            elif kind == "join_batch":
                self._join_batch(data, time)
            elif kind == "depart":
                self._depart(data, time)
            elif kind == "server_depart":
                self._depart(0, time)
            elif kind == "churn_batch":
                self._churn_batch(time)
            else:  # pragma: no cover
                raise RuntimeError(f"unknown event {kind}")
        summaries = [
            PeerSummary(
                id=p.id,
                asn=p.asn,
                is_server=p.is_server,
                join_time=p.join_time,
                finish_time=p.finish_time,
                departed=p.departed,
                uploads=p.uploads,
                downloads=p.downloads,
            )
            for p in self.peers
        ]
        return TransferTrace(
            records=self.records,
            peers=summaries,
            end_time=end_time,
            online_interdomain_hops=self.online_hops,
            online_dependent_count=self.online_dependent,
        )


def run(config: SimConfig) -> tuple["metrics.MetricsReport", TransferTrace]:
    """Run one simulation and compute its metrics report."""
    sim = Simulation(config)
    trace = sim.run()
    report = metrics.build_report(
        trace,
        underlay=sim.underlay,
        asn_of=sim.asn_of,
        n=config.blocks,
        server_asn=int(sim.asn_of[0]),
    )
    return report, trace
