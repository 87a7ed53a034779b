"""Request selection and response generation for every distribution scheme.

Five variants are supported:

* Random          - plain blocks, uniform block and owner choice
* LA_LR           - plain blocks, locally-rarest-first block choice and
                    closest-owner download (the non-coded baseline)
* P_LANC          - network coding, locality used only in the overlay:
                    the download target is uniform among candidates
* LANC_Random     - network coding, closest candidate, sender combines a
                    random subset of its buffer
* LANC_Informed   - as LANC_Random, but the requester names one block the
                    sender must include with a nonzero coefficient

Plus the tit-for-tat admission rule shared by all of them. Decision
functions are pure over snapshots of simulator state; the only mutable
input is the random generator.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Mapping, Sequence

import numpy as np

from . import rlnc
from .rlnc import CodedBlock, CoeffMatrix


class UnknownBlock(KeyError):
    pass


class EmptyBuffer(ValueError):
    pass


class PolicyVariant(str, Enum):
    RANDOM = "Random"
    LA_LR = "LA_LR"
    P_LANC = "P_LANC"
    LANC_RANDOM = "LANC_Random"
    LANC_INFORMED = "LANC_Informed"

    @property
    def coded(self) -> bool:
        return self in (PolicyVariant.P_LANC, PolicyVariant.LANC_RANDOM, PolicyVariant.LANC_INFORMED)


@dataclass(frozen=True)
class SchedulingPolicy:
    """Scheme variant plus its two knobs.

    encoding_density None means "all": combine the whole buffer.
    tft_threshold None disables the incentive mechanism.
    """

    variant: PolicyVariant
    encoding_density: int | None = None
    tft_threshold: int | None = None

    def __post_init__(self):
        if self.encoding_density is not None and self.encoding_density < 1:
            raise ValueError("encoding density must be >= 1")
        if self.tft_threshold is not None and self.tft_threshold < 0:
            raise ValueError("tit-for-tat threshold must be >= 0")


@dataclass(frozen=True)
class RequestDecision:
    """One issued request: the chosen neighbor plus, depending on the
    variant, the plain block id or the informed pivot row on the target."""

    target: int
    block_id: int | None = None
    pivot_hint: int | None = None


class TftLedger:
    """Signed per-neighbor (uploaded - downloaded) block counters."""

    __slots__ = ("_balance",)

    def __init__(self):
        self._balance: dict[int, int] = {}

    def balance(self, neighbor: int) -> int:
        return self._balance.get(neighbor, 0)

    def record_upload(self, neighbor: int) -> None:
        self._balance[neighbor] = self._balance.get(neighbor, 0) + 1

    def record_download(self, neighbor: int) -> None:
        self._balance[neighbor] = self._balance.get(neighbor, 0) - 1


def tft_admit(balance: int, threshold: int | None) -> bool:
    """May the holder of this ledger balance serve one more request?

    A responder refuses only when its uploaded-minus-downloaded surplus
    toward the requester already exceeds the threshold.
    """
    return threshold is None or balance <= threshold


@dataclass
class PlainNeighbor:
    """Snapshot of a non-coded neighbor at decision time."""

    peer: int
    distance: int
    admissible: bool  # spare upload capacity, tit-for-tat ok, still present
    have: np.ndarray  # (n,) bool


@dataclass
class CodedNeighbor:
    """Snapshot of a coded neighbor at decision time.

    count_upper is a free optimistic bound on the innovative count;
    count_exact is only called when the bound cannot rule the neighbor out.
    """

    peer: int
    distance: int
    admissible: bool
    in_flight: int
    count_upper: int
    count_exact: Callable[[], int]


def _uniform_choice(items: Sequence, rng: np.random.Generator):
    return items[int(rng.integers(0, len(items)))] if len(items) > 1 else items[0]


def _eligible_blocks(have, pending, neighbors):
    """Blocks the peer lacks, is not fetching, and can get from someone."""
    n = len(have)
    wanted = ~have
    if pending:
        wanted[list(pending)] = False
    owners_ok = np.zeros(n, dtype=bool)
    census = have.astype(np.int64)
    for nb in neighbors:
        census += nb.have
        if nb.admissible:
            owners_ok |= nb.have
    eligible = wanted & owners_ok
    return eligible, census


def _closest_owner(block, neighbors, rng):
    owners = [nb for nb in neighbors if nb.admissible and nb.have[block]]
    best = min(nb.distance for nb in owners)
    return _uniform_choice([nb for nb in owners if nb.distance == best], rng)


def select_request_la_lr(
    have: np.ndarray,
    pending: set[int],
    neighbors: Sequence[PlainNeighbor],
    rng: np.random.Generator,
) -> RequestDecision | None:
    """Locally-rarest block over the neighborhood census (own copies
    included), then the closest admissible owner; ties uniform."""
    have = np.asarray(have, dtype=bool)
    eligible, census = _eligible_blocks(have, pending, neighbors)
    if not eligible.any():
        return None
    counts = np.where(eligible, census, np.iinfo(np.int64).max)
    rarest = counts.min()
    block = int(_uniform_choice(np.flatnonzero(counts == rarest), rng))
    owner = _closest_owner(block, neighbors, rng)
    return RequestDecision(target=owner.peer, block_id=block)


def select_request_random(
    have: np.ndarray,
    pending: set[int],
    neighbors: Sequence[PlainNeighbor],
    rng: np.random.Generator,
) -> RequestDecision | None:
    """Uniform choice among eligible blocks, then a uniform admissible owner."""
    have = np.asarray(have, dtype=bool)
    eligible, _ = _eligible_blocks(have, pending, neighbors)
    if not eligible.any():
        return None
    block = int(_uniform_choice(np.flatnonzero(eligible), rng))
    owners = [nb for nb in neighbors if nb.admissible and nb.have[block]]
    return RequestDecision(target=_uniform_choice(owners, rng).peer, block_id=block)


def select_request_lanc(
    rank: int,
    n: int,
    neighbors: Sequence[CodedNeighbor],
    variant: PolicyVariant,
    rng: np.random.Generator,
    pivot_fn: Callable[[int], int] | None = None,
) -> RequestDecision | None:
    """Pick a neighbor that can still supply an innovative block.

    A neighbor with r innovative blocks and q already in flight can be asked
    for at most r - q more. LANC variants take the closest such candidate,
    P_LANC treats all candidates alike. The informed variant attaches the
    pivot row the sender must cover.
    """
    if rank >= n:
        return None

    def is_candidate(nb: CodedNeighbor) -> bool:
        if not nb.admissible or nb.count_upper <= nb.in_flight:
            return False
        return nb.count_exact() - nb.in_flight > 0

    if variant is PolicyVariant.P_LANC:
        candidates = [nb for nb in neighbors if is_candidate(nb)]
        chosen = _uniform_choice(candidates, rng) if candidates else None
    else:
        chosen = None
        for dist in sorted({nb.distance for nb in neighbors}):
            group = [nb for nb in neighbors if nb.distance == dist and is_candidate(nb)]
            if group:
                chosen = _uniform_choice(group, rng)
                break
    if chosen is None:
        return None
    hint = None
    if variant is PolicyVariant.LANC_INFORMED:
        if pivot_fn is None:
            raise ValueError("LANC_Informed requires a pivot_fn")
        hint = pivot_fn(chosen.peer)
    return RequestDecision(target=chosen.peer, pivot_hint=hint)


def coded_neighbor_views(
    a_i: CoeffMatrix,
    matrices: Mapping[int, CoeffMatrix],
    in_flight: Mapping[int, int],
    distances: Mapping[int, int],
    admissible: Mapping[int, bool],
) -> list[CodedNeighbor]:
    """Direct (cache-free) views for tests and one-shot decisions."""
    views = []
    for j, a_j in matrices.items():
        views.append(
            CodedNeighbor(
                peer=j,
                distance=distances[j],
                admissible=admissible.get(j, True),
                in_flight=in_flight.get(j, 0),
                count_upper=a_j.rank,
                count_exact=lambda a_j=a_j: rlnc.innovative_count(a_i, a_j),
            )
        )
    return views


def respond(
    buffer,
    decision: RequestDecision,
    policy: SchedulingPolicy,
    rng: np.random.Generator,
):
    """Produce the block a responder sends for an admitted request.

    Non-coded variants return a verbatim (block_id, payload) copy out of a
    mapping buffer. Coded variants combine min(m, buffer size) distinct
    buffer rows with fresh random local coefficients; the informed variant
    forces the hinted row into the selection with a nonzero coefficient.
    """
    if not policy.variant.coded:
        if decision.block_id not in buffer:
            raise UnknownBlock(f"responder does not hold block {decision.block_id}")
        return decision.block_id, buffer[decision.block_id].copy()

    matrix: CoeffMatrix = buffer
    if matrix.rank == 0:
        raise EmptyBuffer("no blocks to encode over")
    m = policy.encoding_density
    size = matrix.rank if m is None else min(m, matrix.rank)
    if decision.pivot_hint is not None:
        if not 0 <= decision.pivot_hint < matrix.rank:
            raise UnknownBlock(f"pivot row {decision.pivot_hint} not held")
        others = np.delete(np.arange(matrix.rank), decision.pivot_hint)
        extra = rng.choice(others, size=size - 1, replace=False) if size > 1 else []
        picks = np.concatenate(([decision.pivot_hint], np.asarray(extra, dtype=np.int64)))
        coeffs = rlnc.draw_local_coeffs(size, rng)
        if coeffs[0] == 0:
            coeffs[0] = rng.integers(1, 256)
    else:
        picks = rng.choice(matrix.rank, size=size, replace=False) if size < matrix.rank else np.arange(matrix.rank)
        coeffs = rlnc.draw_local_coeffs(size, rng)
    return matrix.combine(picks, coeffs)
