import numpy as np
import pytest

from lancsim import policies, rlnc
from lancsim.policies import (
    CodedNeighbor,
    PlainNeighbor,
    PolicyVariant,
    RequestDecision,
    SchedulingPolicy,
    TftLedger,
    coded_neighbor_views,
    respond,
    select_request_la_lr,
    select_request_lanc,
    select_request_random,
    tft_admit,
)
from lancsim.rlnc import CodedBlock, CoeffMatrix, FileSpec


def have(n, *blocks):
    arr = np.zeros(n, dtype=bool)
    arr[list(blocks)] = True
    return arr


def coeff_only(rows, n):
    m = CoeffMatrix(n, 0)
    empty = np.empty(0, dtype=np.uint8)
    for row in rows:
        m.insert_and_reduce(CodedBlock(coeffs=np.asarray(row, dtype=np.uint8), payload=empty))
    return m


class TestLaLr:
    def test_single_feasible_pair(self):
        nb = PlainNeighbor(peer=7, distance=2, admissible=True, have=have(4, 1))
        d = select_request_la_lr(have(4, 0), set(), [nb], np.random.default_rng(0))
        assert d == RequestDecision(target=7, block_id=1)

    def test_never_requests_held_or_pending(self):
        rng = np.random.default_rng(1)
        nb = PlainNeighbor(peer=1, distance=0, admissible=True, have=have(4, 0, 1, 2, 3))
        for _ in range(50):
            d = select_request_la_lr(have(4, 0), {1}, [nb], rng)
            assert d.block_id in (2, 3)

    def test_rarest_block_avoided_when_common(self):
        # requester's neighborhood holds two copies of block 0, one of each other
        rng = np.random.default_rng(2)
        full = PlainNeighbor(peer=0, distance=1, admissible=True, have=have(4, 0, 1, 2, 3))
        partial = PlainNeighbor(peer=1, distance=0, admissible=True, have=have(4, 0))
        for _ in range(100):
            d = select_request_la_lr(have(4), set(), [full, partial], rng)
            assert d.block_id != 0

    def test_closest_owner_preferred(self):
        rng = np.random.default_rng(3)
        far = PlainNeighbor(peer=1, distance=3, admissible=True, have=have(2, 0))
        near = PlainNeighbor(peer=2, distance=0, admissible=True, have=have(2, 0))
        for _ in range(50):
            assert select_request_la_lr(have(2), set(), [far, near], rng).target == 2

    def test_busy_owner_counts_for_rarity_but_not_ownership(self):
        rng = np.random.default_rng(4)
        busy = PlainNeighbor(peer=1, distance=0, admissible=False, have=have(2, 0))
        free = PlainNeighbor(peer=2, distance=2, admissible=True, have=have(2, 0, 1))
        for _ in range(50):
            d = select_request_la_lr(have(2), set(), [busy, free], rng)
            assert d.block_id == 1 and d.target == 2  # block 0 has 2 copies nearby

    def test_none_when_no_feasible_pair(self):
        nb = PlainNeighbor(peer=1, distance=0, admissible=False, have=have(2, 1))
        assert select_request_la_lr(have(2, 0), set(), [nb], np.random.default_rng(5)) is None

    def test_rarity_ties_uniform(self):
        rng = np.random.default_rng(6)
        nb = PlainNeighbor(peer=1, distance=0, admissible=True, have=have(3, 0, 1, 2))
        picks = [select_request_la_lr(have(3), set(), [nb], rng).block_id for _ in range(3000)]
        counts = np.bincount(picks, minlength=3)
        assert (counts > 800).all()


class TestRandomPolicy:
    def test_motivation_fixture_distinct_probability(self):
        # four requesters pull one of four blocks each from the lone seeder;
        # all-distinct should happen with probability 4!/4^4 = 9.375%
        rng = np.random.default_rng(7)
        seeder = PlainNeighbor(peer=0, distance=1, admissible=True, have=have(4, 0, 1, 2, 3))
        trials = 20_000
        hits = 0
        for _ in range(trials):
            picks = {select_request_random(have(4), set(), [seeder], rng).block_id for _ in range(4)}
            hits += len(picks) == 4
        assert hits / trials == pytest.approx(0.09375, abs=0.01)

    def test_owner_uniform_regardless_of_distance(self):
        rng = np.random.default_rng(8)
        near = PlainNeighbor(peer=1, distance=0, admissible=True, have=have(1, 0))
        far = PlainNeighbor(peer=2, distance=3, admissible=True, have=have(1, 0))
        targets = [select_request_random(have(1), set(), [near, far], rng).target for _ in range(2000)]
        frac_near = targets.count(1) / len(targets)
        assert abs(frac_near - 0.5) < 0.05


class TestLancSelection:
    def make_neighbor(self, peer, distance, r, q=0, admissible=True):
        return CodedNeighbor(
            peer=peer, distance=distance, admissible=admissible,
            in_flight=q, count_upper=r, count_exact=lambda: r,
        )

    def test_complete_peer_requests_nothing(self):
        nb = self.make_neighbor(1, 0, r=5)
        assert select_request_lanc(8, 8, [nb], PolicyVariant.LANC_RANDOM, np.random.default_rng(0)) is None

    def test_saturated_in_flight_excluded(self):
        nb = self.make_neighbor(1, 0, r=2, q=2)
        assert select_request_lanc(0, 8, [nb], PolicyVariant.LANC_RANDOM, np.random.default_rng(1)) is None

    def test_lanc_always_picks_closest_candidate(self):
        rng = np.random.default_rng(2)
        near = self.make_neighbor(1, 0, r=1)
        far = self.make_neighbor(2, 2, r=5)
        for _ in range(100):
            d = select_request_lanc(0, 8, [near, far], PolicyVariant.LANC_RANDOM, rng)
            assert d.target == 1

    def test_p_lanc_ignores_distance(self):
        rng = np.random.default_rng(3)
        near = self.make_neighbor(1, 0, r=3)
        far = self.make_neighbor(2, 2, r=3)
        targets = [
            select_request_lanc(0, 8, [near, far], PolicyVariant.P_LANC, rng).target
            for _ in range(10_000)
        ]
        assert abs(targets.count(1) / len(targets) - 0.5) < 0.05

    def test_exact_count_overrides_optimistic_bound(self):
        calls = []

        def exact():
            calls.append(1)
            return 0

        nb = CodedNeighbor(peer=1, distance=0, admissible=True, in_flight=0, count_upper=4, count_exact=exact)
        assert select_request_lanc(0, 8, [nb], PolicyVariant.LANC_RANDOM, np.random.default_rng(4)) is None
        assert calls  # the bound alone was not trusted

    def test_informed_attaches_pivot(self):
        nb = self.make_neighbor(3, 1, r=2)
        d = select_request_lanc(
            0, 8, [nb], PolicyVariant.LANC_INFORMED, np.random.default_rng(5), pivot_fn=lambda j: 1
        )
        assert d == RequestDecision(target=3, pivot_hint=1)

    def test_views_from_matrices(self):
        a_i = coeff_only([[1, 0, 0, 0]], 4)
        a_j = coeff_only(np.eye(4, dtype=np.uint8), 4)
        views = coded_neighbor_views(a_i, {9: a_j}, {}, {9: 2}, {})
        assert views[0].count_exact() == 3
        d = select_request_lanc(1, 4, views, PolicyVariant.LANC_RANDOM, np.random.default_rng(6))
        assert d.target == 9


class TestRespond:
    def setup_method(self):
        rng = np.random.default_rng(10)
        self.spec = FileSpec(n=6, k=8)
        data = rng.integers(0, 256, self.spec.total_bytes, dtype=np.uint8).tobytes()
        self.originals = rlnc.seed_blocks(data, self.spec)
        self.matrix = CoeffMatrix(self.spec.n, self.spec.k)
        for b in self.originals[:5]:
            self.matrix.insert_and_reduce(b)

    def test_plain_copy(self):
        buffer = {0: np.arange(4, dtype=np.uint8)}
        policy = SchedulingPolicy(PolicyVariant.LA_LR)
        bid, payload = respond(buffer, RequestDecision(target=1, block_id=0), policy, np.random.default_rng(0))
        assert bid == 0 and payload.tolist() == [0, 1, 2, 3]
        payload[0] = 99  # a copy, not a view
        assert buffer[0][0] == 0

    def test_plain_unknown_block(self):
        policy = SchedulingPolicy(PolicyVariant.LA_LR)
        with pytest.raises(policies.UnknownBlock):
            respond({}, RequestDecision(target=1, block_id=3), policy, np.random.default_rng(0))

    def test_density_all_combines_entire_buffer(self):
        policy = SchedulingPolicy(PolicyVariant.LANC_RANDOM, encoding_density=None)
        out = respond(self.matrix, RequestDecision(target=1), policy, np.random.default_rng(1))
        # support can only come from the five held originals
        assert not out.coeffs[5:].any()
        assert out.coeffs[:5].any()

    def test_empty_buffer_raises(self):
        policy = SchedulingPolicy(PolicyVariant.LANC_RANDOM)
        with pytest.raises(policies.EmptyBuffer):
            respond(CoeffMatrix(4, 0), RequestDecision(target=1), policy, np.random.default_rng(2))

    def test_single_block_buffer_gives_scalar_multiple(self):
        m = CoeffMatrix(self.spec.n, self.spec.k)
        m.insert_and_reduce(self.originals[2])
        policy = SchedulingPolicy(PolicyVariant.LANC_RANDOM, encoding_density=20)
        out = respond(m, RequestDecision(target=1), policy, np.random.default_rng(3))
        assert np.array_equal(np.flatnonzero(out.coeffs), [2])

    def test_informed_output_is_innovative_for_requester(self):
        rng = np.random.default_rng(4)
        requester = CoeffMatrix(self.spec.n, self.spec.k)
        for b in self.originals[:3]:
            requester.insert_and_reduce(b)
        pivots = rlnc.innovative_pivots(requester, self.matrix)
        assert pivots
        policy = SchedulingPolicy(PolicyVariant.LANC_INFORMED, encoding_density=2)
        for pivot in pivots:
            out = respond(self.matrix, RequestDecision(target=1, pivot_hint=pivot), policy, rng)
            assert rlnc.is_innovative(requester, out.coeffs)

    def test_density_truncated_to_buffer_size(self):
        policy = SchedulingPolicy(PolicyVariant.LANC_RANDOM, encoding_density=99)
        out = respond(self.matrix, RequestDecision(target=1), policy, np.random.default_rng(5))
        assert out.coeffs.any()

    def test_payload_consistency_preserved(self):
        policy = SchedulingPolicy(PolicyVariant.LANC_RANDOM, encoding_density=3)
        rng = np.random.default_rng(6)
        for _ in range(20):
            out = respond(self.matrix, RequestDecision(target=1), policy, rng)
            recomputed = rlnc.encode(self.originals, out.coeffs)
            assert np.array_equal(recomputed.payload, out.payload)


class TestTitForTat:
    def test_disabled_always_admits(self):
        assert tft_admit(10**6, None)

    def test_boundary_at_threshold(self):
        assert tft_admit(3, 3)
        assert not tft_admit(4, 3)

    def test_admission_resumes_after_payback(self):
        ledger = TftLedger()
        c = 2
        for _ in range(3):
            ledger.record_upload(7)
        assert not tft_admit(ledger.balance(7), c)
        ledger.record_download(7)
        assert tft_admit(ledger.balance(7), c)

    def test_ledger_antisymmetry(self):
        a, b = TftLedger(), TftLedger()
        rng = np.random.default_rng(11)
        for _ in range(100):
            if rng.random() < 0.5:
                a.record_upload(1)
                b.record_download(0)
            else:
                b.record_upload(0)
                a.record_download(1)
            assert a.balance(1) == -b.balance(0)


class TestSchedulingPolicyValidation:
    def test_bad_density(self):
        with pytest.raises(ValueError):
            SchedulingPolicy(PolicyVariant.LANC_RANDOM, encoding_density=0)

    def test_bad_threshold(self):
        with pytest.raises(ValueError):
            SchedulingPolicy(PolicyVariant.LA_LR, tft_threshold=-1)

    def test_coded_flags(self):
        assert PolicyVariant.LANC_RANDOM.coded
        assert PolicyVariant.P_LANC.coded
        assert not PolicyVariant.LA_LR.coded
        assert not PolicyVariant.RANDOM.coded
