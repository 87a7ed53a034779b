"""Random linear network coding over GF(2^8).

A file is split into n original blocks of k bytes. Coded blocks carry a
payload plus an n-length global coefficient vector expressing the payload
as a combination of the originals. Receivers accumulate blocks in a
coefficient matrix kept incrementally in reduced echelon form with the
payloads reduced alongside, so a full-rank matrix decodes by direct
read-out.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from numba import njit

from . import field_arith as gf

_MUL = gf.TABLES.mul
_INV = gf.TABLES.inv


@njit(cache=True)
def _reduce_kernel(v, data, piv_cols, rank, mul):
    """In-place elimination of v against reduced-echelon rows.

    Rows are mutually reduced, so the pivot coefficients of v never change
    mid-loop and a single sequential pass is exact.
    """
    width = v.shape[0]
    for r in range(rank):
        c = v[piv_cols[r]]
        if c != 0:
            row = data[r]
            mc = mul[c]
            for t in range(width):
                v[t] ^= mc[row[t]]


@njit(cache=True)
def _insert_kernel(data, piv_cols, rank, v, n, mul, inv):
    """Reduce v, normalize it, back-eliminate, and store it as row `rank`.

    Returns the new pivot column, or -1 when v lies in the current span.
    """
    width = v.shape[0]
    _reduce_kernel(v, data, piv_cols, rank, mul)
    lead = -1
    for t in range(n):
        if v[t] != 0:
            lead = t
            break
    if lead < 0:
        return -1
    if v[lead] != 1:
        mi = mul[inv[v[lead]]]
        for t in range(width):
            v[t] = mi[v[t]]
    for r in range(rank):
        c = data[r, lead]
        if c != 0:
            mc = mul[c]
            row = data[r]
            for t in range(width):
                row[t] ^= mc[v[t]]
    data[rank] = v
    piv_cols[rank] = lead
    return lead


class EmptyFile(ValueError):
    pass


class EmptyInput(ValueError):
    pass


class ShapeMismatch(ValueError):
    pass


class RankDeficient(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True)
class FileSpec:
    """Block geometry of the distributed file.

    n: block count, k: block size in bytes, length: true byte length of the
    file (at most n*k; the last block is zero padded).
    """

    n: int
    k: int
    length: int | None = None

    def __post_init__(self):
        if self.n < 1 or self.k < 1:
            raise ValueError("n and k must be >= 1")
        if self.length is None:
            object.__setattr__(self, "length", self.n * self.k)
        if not 0 < self.length <= self.n * self.k:
            raise ValueError("true length must be in (0, n*k]")

    @property
    def total_bytes(self) -> int:
        return self.n * self.k


@dataclass
class CodedBlock:
    """Payload bytes plus the global coefficient vector over the originals."""

    coeffs: np.ndarray  # (n,) uint8
    payload: np.ndarray  # (k,) uint8

    @property
    def n(self) -> int:
        return len(self.coeffs)

    @property
    def k(self) -> int:
        return len(self.payload)


def seed_blocks(file_bytes: bytes, spec: FileSpec) -> list[CodedBlock]:
    """Split a file into trivially-coded blocks (unit coefficient vectors).

    Shorter-than-n*k input is zero padded; spec.length records the true size.
    """
    if len(file_bytes) == 0:
        raise EmptyFile("cannot seed an empty file")
    if len(file_bytes) != spec.length:
        raise ShapeMismatch(f"file is {len(file_bytes)} bytes, spec says {spec.length}")
    data = np.zeros(spec.total_bytes, dtype=np.uint8)
    data[: len(file_bytes)] = np.frombuffer(file_bytes, dtype=np.uint8)
    blocks = []
    for i in range(spec.n):
        coeffs = np.zeros(spec.n, dtype=np.uint8)
        coeffs[i] = 1
        blocks.append(CodedBlock(coeffs=coeffs, payload=data[i * spec.k : (i + 1) * spec.k].copy()))
    return blocks


def draw_local_coeffs(m: int, rng: np.random.Generator) -> np.ndarray:
    """Draw m uniform local coefficients, rejecting the all-zero vector."""
    if m < 1:
        raise ValueError("m must be >= 1")
    vals = rng.integers(0, 256, size=m, dtype=np.uint8)
    while not vals.any():
        vals = rng.integers(0, 256, size=m, dtype=np.uint8)
    return vals


def encode(blocks: list[CodedBlock], coeffs: np.ndarray) -> CodedBlock:
    """Linear combination sum_j coeffs[j] * blocks[j].

    The output global coefficient vector is the same combination of the
    inputs' vectors, so payload consistency with the originals is preserved.
    """
    if len(blocks) == 0:
        raise EmptyInput("need at least one block to encode")
    if len(coeffs) != len(blocks):
        raise ShapeMismatch(f"{len(coeffs)} coefficients for {len(blocks)} blocks")
    n, k = blocks[0].n, blocks[0].k
    if any(b.n != n or b.k != k for b in blocks):
        raise ShapeMismatch("blocks disagree on n or k")
    coeffs = np.asarray(coeffs, dtype=np.uint8)
    gmat = np.stack([b.coeffs for b in blocks])
    pmat = np.stack([b.payload for b in blocks])
    return CodedBlock(coeffs=gf.matvec(coeffs, gmat), payload=gf.matvec(coeffs, pmat))


class CoeffMatrix:
    """A peer's held blocks in reduced echelon form, payloads included.

    Rows live in a single (rank, n + k) array: the first n columns are the
    global coefficients, the rest the payload. Every pivot is 1 and the sole
    nonzero entry of its column among the coefficient rows, so insertion
    reduces a candidate in one vectorized pass and decode is a read-out.
    The coefficient rows of every accepted insertion are kept in an
    append-only log so cross-peer rank caches can catch up lazily.
    """

    __slots__ = ("n", "k", "_data", "_piv_cols", "_piv_to_row", "rank", "log")

    def __init__(self, n: int, k: int = 0):
        self.n = n
        self.k = k
        self._data = np.zeros((min(n, 8), n + k), dtype=np.uint8)
        self._piv_cols = np.zeros(n, dtype=np.int64)
        self._piv_to_row: dict[int, int] = {}
        self.rank = 0
        self.log: list[np.ndarray] = []

    def _grow(self):
        if self.rank == len(self._data):
            new_cap = min(self.n, max(2 * len(self._data), 1))
            data = np.zeros((new_cap, self.n + self.k), dtype=np.uint8)
            data[: self.rank] = self._data[: self.rank]
            self._data = data

    @property
    def coeff_rows(self) -> np.ndarray:
        return self._data[: self.rank, : self.n]

    @property
    def payload_rows(self) -> np.ndarray:
        return self._data[: self.rank, self.n :]

    @property
    def pivot_cols(self) -> set[int]:
        return set(self._piv_to_row)

    def copy(self) -> "CoeffMatrix":
        out = CoeffMatrix(self.n, self.k)
        out._data = self._data[: self.rank].copy()
        out._piv_cols = self._piv_cols.copy()
        out._piv_to_row = dict(self._piv_to_row)
        out.rank = self.rank
        out.log = list(self.log)
        return out

    def reduce_coeffs(self, vec: np.ndarray) -> np.ndarray:
        """Residual of an n-length coefficient vector against this matrix."""
        if len(vec) != self.n:
            raise DimensionMismatch(f"vector length {len(vec)} != n {self.n}")
        out = vec.astype(np.uint8, copy=True)
        if self.rank:
            _reduce_kernel(out, self._data[:, : self.n], self._piv_cols, self.rank, _MUL)
        return out

    def insert_row(self, v: np.ndarray) -> bool:
        """Raw insert of a scratch (n + k)-wide row; v is consumed in place."""
        self._grow()
        lead = _insert_kernel(self._data, self._piv_cols, self.rank, v, self.n, _MUL, _INV)
        if lead < 0:
            return False
        self._piv_to_row[int(lead)] = self.rank
        self.rank += 1
        self.log.append(self._data[self.rank - 1, : self.n].copy())
        return True

    def insert_and_reduce(self, block: CodedBlock) -> bool:
        """Fold a block in; True iff it raised the rank.

        The block payload is reduced together with its coefficient row, and
        existing rows are back-eliminated so the matrix stays in reduced
        echelon form.
        """
        if block.n != self.n:
            raise DimensionMismatch(f"block n {block.n} != matrix n {self.n}")
        v = np.empty(self.n + self.k, dtype=np.uint8)
        v[: self.n] = block.coeffs
        if self.k:
            if block.k != self.k:
                raise DimensionMismatch(f"payload width {block.k} != {self.k}")
            v[self.n :] = block.payload
        return self.insert_row(v)

    def combine(self, row_indices: np.ndarray, coeffs: np.ndarray) -> CodedBlock:
        """Encode directly over held rows (the sender-side fast path)."""
        rows = self._data[np.asarray(row_indices)]
        out = gf.matvec(np.asarray(coeffs, dtype=np.uint8), rows)
        return CodedBlock(coeffs=out[: self.n], payload=out[self.n :])

    def decode(self, spec: FileSpec) -> bytes:
        """Recover the original file; requires full rank."""
        if self.rank < self.n:
            raise RankDeficient(f"rank {self.rank} < n {self.n}")
        out = np.empty((self.n, self.k), dtype=np.uint8)
        for col in range(self.n):
            out[col] = self._data[self._piv_to_row[col], self.n :]
        return out.tobytes()[: spec.length]


def decode(matrix: CoeffMatrix, spec: FileSpec) -> bytes:
    return matrix.decode(spec)


def _residual_rows(a: CoeffMatrix, rows: np.ndarray) -> np.ndarray:
    """Reduce a stack of coefficient rows against matrix a in one pass."""
    if len(rows) == 0 or a.rank == 0:
        return rows.copy()
    f = np.ascontiguousarray(rows[:, a._piv_cols[: a.rank]])
    out = rows.copy()
    if f.any():
        out ^= gf.matmul(f, a.coeff_rows)
    return out


def _rank_of_rows(rows: np.ndarray, n: int) -> int:
    scratch = CoeffMatrix(n, 0)
    for row in rows:
        scratch.insert_row(row.astype(np.uint8, copy=True))
    return scratch.rank


def innovative_count(a_i: CoeffMatrix, a_j: CoeffMatrix) -> int:
    """Number of blocks j holds that are linearly independent of i's span.

    Equals rank of the stacked matrices minus rank of a_i.
    """
    if a_i.n != a_j.n:
        raise DimensionMismatch(f"matrices over n={a_i.n} vs n={a_j.n}")
    return _rank_of_rows(_residual_rows(a_i, a_j.coeff_rows), a_i.n)


def innovative_pivots(a_i: CoeffMatrix, a_j: CoeffMatrix) -> list[int]:
    """Indices of j's held blocks that individually remain nonzero after
    elimination against a_i. Any one of them is a valid informed pivot."""
    if a_i.n != a_j.n:
        raise DimensionMismatch(f"matrices over n={a_i.n} vs n={a_j.n}")
    res = _residual_rows(a_i, a_j.coeff_rows)
    return [i for i in range(len(res)) if res[i].any()]


def is_innovative(a_i: CoeffMatrix, coeffs: np.ndarray) -> bool:
    """Would a block with this coefficient vector raise i's rank?"""
    return bool(a_i.reduce_coeffs(coeffs).any())


class _PairState:
    __slots__ = ("residual", "i_rank", "j_seen")

    def __init__(self, n: int):
        self.residual = CoeffMatrix(n, 0)
        self.i_rank = 0
        self.j_seen = 0


class InnovationCache:
    """Lazily synchronized innovative-block counts between peer matrices.

    For an ordered pair (i, j) the cache keeps a basis of j's span reduced
    modulo i's span. Both spans only ever grow, so rows of j that once
    reduced to zero stay zero and are never revisited: syncing costs only
    the new content on either side since the last query. An upper bound on
    the count is available without syncing, which lets the caller skip
    saturated neighbors cheaply.
    """

    def __init__(self):
        self._pairs: dict[tuple[int, int], _PairState] = {}
        self._mats: dict[int, CoeffMatrix] = {}

    def register(self, peer_id: int, matrix: CoeffMatrix) -> None:
        self._mats[peer_id] = matrix

    def _state(self, i: int, j: int) -> _PairState:
        st = self._pairs.get((i, j))
        if st is None:
            st = _PairState(self._mats[i].n)
            self._pairs[(i, j)] = st
        return st

    def upper_bound(self, i: int, j: int, j_visible: int | None = None) -> int:
        """Count never exceeds this; computed without any elimination work.

        j_visible caps how much of j's arrival log the caller may see (stale
        buffer-map semantics); every logged row raised j's rank, so the
        visible prefix length bounds the innovative count directly.
        """
        vis = len(self._mats[j].log) if j_visible is None else j_visible
        st = self._pairs.get((i, j))
        if st is None:
            return vis
        return st.residual.rank + max(0, vis - st.j_seen)

    def count(self, i: int, j: int, j_visible: int | None = None) -> int:
        """Exact innovative count of j's visible span toward i."""
        a_i, a_j = self._mats[i], self._mats[j]
        st = self._state(i, j)
        res = st.residual
        if st.i_rank < a_i.rank and res.rank > 0:
            # Fold i's new pivots into the residual, then re-reduce it.
            new_cols = a_i._piv_cols[st.i_rank : a_i.rank]
            f = np.ascontiguousarray(res.coeff_rows[:, new_cols])
            if f.any():
                rows = res.coeff_rows ^ gf.matmul(f, a_i._data[st.i_rank : a_i.rank, : a_i.n])
                rebuilt = CoeffMatrix(a_i.n, 0)
                for row in rows:
                    rebuilt.insert_row(row)
                st.residual = res = rebuilt
        st.i_rank = a_i.rank
        log = a_j.log
        vis = len(log) if j_visible is None else j_visible
        while st.j_seen < vis:
            u = a_i.reduce_coeffs(log[st.j_seen])
            if u.any():
                res.insert_row(u)
            st.j_seen += 1
        return res.rank


def op_count_per_byte(m: int, n: int, k: int) -> tuple[Fraction, Fraction]:
    """Field multiplications and additions per output byte when combining m
    blocks of k bytes with n-length coefficient vectors.

    Generating one coded block costs m*(k+n) multiplications and
    (m-1)*(k+n) additions, i.e. m*(1 + n/k) and (m-1)*(1 + n/k) per byte.
    """
    if m < 1 or n < 1 or k < 1:
        raise ValueError("m, n, k must all be >= 1")
    return Fraction(m * (k + n), k), Fraction((m - 1) * (k + n), k)
