import numpy as np
import pytest

from lancsim import metrics, netmodel, sim_engine
from lancsim.sim_engine import PeerSummary, SimConfig, TransferRecord, TransferTrace


def make_trace(records, peers, end=100.0):
    return TransferTrace(
        records=records,
        peers=peers,
        end_time=end,
        online_interdomain_hops=sum(r.hops for r in records),
        online_dependent_count=sum(r.dependent for r in records),
    )


def peer(pid, asn, join=0.0, finish=None, server=False, uploads=0, downloads=0):
    return PeerSummary(id=pid, asn=asn, is_server=server, join_time=join,
                       finish_time=finish, departed=False, uploads=uploads, downloads=downloads)


def rec(src, dst, hops, t=1.0, dep=False):
    return TransferRecord(t_request=t - 1.0, t_arrive=t, src=src, dst=dst, hops=hops, dependent=dep)


class TestIdtr:
    def test_hand_built_line_graph(self):
        # three ASes in a line: 0 - 1 - 2; five transfers with known hops
        underlay = netmodel.load_underlay(["0 1", "1 2"])
        asn_of = np.array([0, 1, 2, 0])
        peers = [peer(0, 0, server=True, finish=0.0), peer(1, 1), peer(2, 2), peer(3, 0)]
        records = [
            rec(0, 1, 1),  # AS0 -> AS1: 1 hop
            rec(0, 2, 2),  # AS0 -> AS2: 2 hops
            rec(1, 2, 1),
            rec(0, 3, 0),  # same AS
            rec(3, 1, 1),
        ]
        trace = make_trace(records, peers)
        # numerator 1+2+1+0+1 = 5; denominator n=1 block x 2 non-server ASes
        value = metrics.idtr(trace, underlay, asn_of, n=1, server_asn=0)
        assert value == pytest.approx(5 / 2)

    def test_recomputed_hops_ignore_trace_column(self):
        underlay = netmodel.load_underlay(["0 1"])
        asn_of = np.array([0, 1])
        peers = [peer(0, 0, server=True, finish=0.0), peer(1, 1)]
        # lie in the recorded hops column; idtr must recompute from the graph
        trace = make_trace([rec(0, 1, hops=99)], peers)
        assert metrics.idtr(trace, underlay, asn_of, n=1, server_asn=0) == 1.0

    def test_single_as_is_unity_by_convention(self):
        underlay = netmodel.load_underlay(["0 1"])
        asn_of = np.array([0, 0])
        peers = [peer(0, 0, server=True, finish=0.0), peer(1, 0)]
        trace = make_trace([rec(0, 1, 0)], peers)
        assert metrics.idtr(trace, underlay, asn_of, n=4, server_asn=0) == 1.0

    def test_degenerate_topology_raises(self):
        # all peers in one AS, yet the trace claims an inter-domain hop:
        # the denominator is zero while traffic is nonzero
        underlay = netmodel.load_underlay(["0 1"])
        asn_of = np.array([0, 0])
        peers = [peer(0, 0, server=True, finish=0.0), peer(1, 0)]
        trace = make_trace([rec(0, 1, 1)], peers)
        with pytest.raises(metrics.DegenerateTopology):
            metrics.idtr(trace, underlay, asn_of, n=1, server_asn=0)

    def test_default_shape_denominator(self):
        # 100 blocks, 37 populated ASes -> minimum 3600 inter-domain blocks
        underlay = netmodel.default_underlay()
        rng = np.random.default_rng(0)
        asn_of = netmodel.assign_peers(underlay, 2000, "proportional", rng)
        peers = [peer(i, int(asn_of[i]), server=(i == 0), finish=0.0 if i == 0 else None)
                 for i in range(2000)]
        assert all(np.bincount([p.asn for p in peers], minlength=37) > 0)
        one_hop = rec(0, 1, 1)
        trace = make_trace([one_hop] * 3600, peers)
        got = metrics.idtr(trace, underlay, asn_of, n=100, server_asn=int(asn_of[0]))
        hops01 = netmodel.peer_distance(0, 1, asn_of, underlay)
        assert got == pytest.approx(3600 * hops01 / 3600)


class TestDistributionTimes:
    def test_two_finishers(self):
        peers = [peer(0, 0, server=True, finish=0.0),
                 peer(1, 0, join=0.0, finish=4.0),
                 peer(2, 0, join=0.0, finish=6.0)]
        avg, mx, unfin = metrics.distribution_times(make_trace([], peers))
        assert (avg, mx, unfin) == (5.0, 6.0, 0)

    def test_unfinished_excluded_but_counted(self):
        peers = [peer(0, 0, server=True, finish=0.0),
                 peer(1, 0, join=2.0, finish=12.0),
                 peer(2, 0, join=0.0, finish=None)]
        avg, mx, unfin = metrics.distribution_times(make_trace([], peers))
        assert (avg, mx, unfin) == (10.0, 10.0, 1)

    def test_churn_joiner_measured_from_join(self):
        peers = [peer(0, 0, server=True, finish=0.0), peer(1, 0, join=30.0, finish=75.0)]
        avg, mx, _ = metrics.distribution_times(make_trace([], peers))
        assert (avg, mx) == (45.0, 45.0)

    def test_no_finishers_raises(self):
        peers = [peer(0, 0, server=True, finish=0.0), peer(1, 0, finish=None)]
        with pytest.raises(metrics.NoFinishedPeers):
            metrics.distribution_times(make_trace([], peers))

    def test_never_joined_peers_ignored(self):
        peers = [peer(0, 0, server=True, finish=0.0),
                 peer(1, 0, join=None),
                 peer(2, 0, join=1.0, finish=3.0)]
        avg, mx, unfin = metrics.distribution_times(make_trace([], peers))
        assert (avg, mx, unfin) == (2.0, 2.0, 0)


class TestTemporalSeries:
    def test_empty_trace(self):
        peers = [peer(0, 0, server=True, finish=0.0)]
        assert metrics.temporal_series(make_trace([], peers)) == []

    def test_partition_identity(self):
        rng = np.random.default_rng(1)
        peers = [peer(0, 0, server=True, finish=0.0), peer(1, 1)]
        records = [rec(0, 1, int(rng.integers(0, 4)), t=float(rng.uniform(0, 30)))
                   for _ in range(200)]
        trace = make_trace(records, peers)
        series = metrics.temporal_series(trace, bin_width=2.5)
        inter = [r for r in records if r.hops > 0]
        assert sum(row[1] for row in series) == len(inter)
        assert sum(row[2] for row in series) == sum(r.hops for r in inter)

    def test_intra_domain_transfers_not_binned(self):
        peers = [peer(0, 0, server=True, finish=0.0), peer(1, 0)]
        series = metrics.temporal_series(make_trace([rec(0, 1, 0)], peers))
        assert series == []

    def test_bad_bin_width(self):
        peers = [peer(0, 0, server=True, finish=0.0)]
        with pytest.raises(ValueError):
            metrics.temporal_series(make_trace([], peers), bin_width=0)


class TestUploadHistogram:
    def test_single_seeder_counts(self):
        peers = [peer(0, 0, server=True, finish=0.0, uploads=8), peer(1, 0, uploads=0, finish=9.0)]
        rows, cov = metrics.upload_histogram(make_trace([], peers))
        assert rows[0] == (0, 0, 8, 0.0)
        assert rows[1][2] == 0
        assert cov is None  # the lone downloader uploaded nothing: no spread statistic

    def test_cov_over_ordinary_peers_only(self):
        peers = [peer(0, 0, server=True, finish=0.0, uploads=1000),
                 peer(1, 0, uploads=10), peer(2, 0, uploads=10), peer(3, 0, uploads=10)]
        _, cov = metrics.upload_histogram(make_trace([], peers))
        assert cov == 0.0  # the seeder's bulk upload does not skew the spread

    def test_histogram_totals_match_trace(self):
        cfg = SimConfig(peers=30, blocks=8, block_size=8, avg_degree=5, seed=3)
        report, trace = sim_engine.run(cfg)
        assert sum(row[2] for row in report.upload_histogram) == len(trace.records)


@pytest.fixture(scope="module")
def run_result():
    cfg = SimConfig(peers=40, blocks=10, block_size=8, avg_degree=6, seed=4)
    sim = sim_engine.Simulation(cfg)
    trace = sim.run()
    report = metrics.build_report(trace, underlay=sim.underlay, asn_of=sim.asn_of,
                                  n=cfg.blocks, server_asn=int(sim.asn_of[0]))
    return sim, trace, report


class TestBuildReport:
    def test_idtr_matches_online_counter(self, run_result):
        sim, trace, report = run_result
        populated = {int(p.asn) for p in trace.peers}
        denom = 10 * (len(populated) - 1)
        assert report.idtr == pytest.approx(trace.online_interdomain_hops / denom)

    def test_totals_consistent(self, run_result):
        _, trace, report = run_result
        assert report.total_transfers == len(trace.records)
        assert report.total_interdomain_block_hops == trace.online_interdomain_hops
        assert report.dependent_block_count == trace.online_dependent_count
        assert sum(row[2] for row in report.temporal_series) == report.total_interdomain_block_hops

    def test_avg_at_most_max(self, run_result):
        _, _, report = run_result
        assert report.avg_dt <= report.max_dt
