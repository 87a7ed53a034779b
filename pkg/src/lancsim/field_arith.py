"""GF(2^8) arithmetic backed by precomputed lookup tables.

All coding operations in this package run over the Galois field GF(2^8)
built from the irreducible polynomial x^8 + x^4 + x^3 + x^2 + 1 (0x11D).
Multiplication is a 256x256 table lookup; addition is plain XOR, which is
faster than indexing a table. The tables are immutable after construction
and safe to share between concurrent runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

POLY = 0x11D  # x^8 + x^4 + x^3 + x^2 + 1
GENERATOR = 0x02


class ZeroInverse(ZeroDivisionError):
    """Multiplicative inverse of zero requested."""


class LengthMismatch(ValueError):
    """Row operands of unequal length."""


@dataclass(frozen=True)
class FieldTables:
    """Precomputed multiplication and inverse tables.

    mul: (256, 256) uint8, mul[a, b] = a*b in the field.
    inv: (256,) uint8, inv[a] = a^-1 for a != 0; slot 0 is unused (kept 0).
    """

    mul: np.ndarray
    inv: np.ndarray

    def __post_init__(self):
        self.mul.setflags(write=False)
        self.inv.setflags(write=False)


def _exp_log_tables() -> tuple[np.ndarray, np.ndarray]:
    # Powers of the generator cycle through all 255 nonzero elements.
    exp = np.zeros(510, dtype=np.int64)
    log = np.zeros(256, dtype=np.int64)
    x = 1
    for i in range(255):
        exp[i] = x
        log[x] = i
        x <<= 1
        if x & 0x100:
            x ^= POLY
    exp[255:510] = exp[0:255]
    return exp, log


def build_tables() -> FieldTables:
    """Build the full multiplication table and the inverse table once."""
    exp, log = _exp_log_tables()
    a = np.arange(256)
    mul = exp[(log[a][:, None] + log[a][None, :])].astype(np.uint8)
    mul[0, :] = 0
    mul[:, 0] = 0
    inv = np.zeros(256, dtype=np.uint8)
    inv[1:] = exp[255 - log[1:256]].astype(np.uint8)
    return FieldTables(mul=mul, inv=inv)


TABLES = build_tables()


def add(a: int, b: int) -> int:
    """Field addition: bitwise XOR (the field has characteristic 2)."""
    return a ^ b


def mul(a: int, b: int) -> int:
    """Field multiplication via table lookup."""
    return int(TABLES.mul[a, b])


def inv(a: int) -> int:
    """Multiplicative inverse; raises ZeroInverse for a = 0."""
    if a == 0:
        raise ZeroInverse("0 has no multiplicative inverse")
    return int(TABLES.inv[a])


def mul_row(coeff: int, row: np.ndarray) -> np.ndarray:
    """Scale a byte row by a field scalar, elementwise."""
    return TABLES.mul[coeff][row]


def axpy_row(dest: np.ndarray, src: np.ndarray, coeff: int) -> np.ndarray:
    """Return dest + coeff*src elementwise over the field.

    Applying the same (src, coeff) twice restores dest: in characteristic 2
    the update is an involution.
    """
    if dest.shape != src.shape:
        raise LengthMismatch(f"row lengths differ: {dest.shape} vs {src.shape}")
    return dest ^ TABLES.mul[coeff][src]


def matvec(coeffs: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Combination sum_i coeffs[i] * rows[i] over the field.

    coeffs: (r,) uint8; rows: (r, width) uint8. Returns (width,) uint8.
    """
    if len(coeffs) == 0:
        return np.zeros(rows.shape[1] if rows.ndim == 2 else 0, dtype=np.uint8)
    prods = TABLES.mul[coeffs[:, None], rows]
    return np.bitwise_xor.reduce(prods, axis=0)


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Field matrix product of a (m, r) with b (r, width)."""
    if a.shape[0] == 0 or a.shape[1] == 0:
        return np.zeros((a.shape[0], b.shape[1]), dtype=np.uint8)
    prods = TABLES.mul[a[:, :, None], b[None, :, :]]
    return np.bitwise_xor.reduce(prods, axis=1)


def outer_axpy(dest: np.ndarray, col: np.ndarray, row: np.ndarray) -> None:
    """In-place dest[i] += col[i]*row for every matrix row i."""
    dest ^= TABLES.mul[col[:, None], row[None, :]]
