"""Independent reference implementations used to cross-check the library.

Everything here is deliberately written without touching the package's
lookup tables or echelon-form code: bit-by-bit field arithmetic and a
from-scratch Gaussian elimination that only uses these primitives.
"""

POLY = 0x11D


def gf_mul_bitwise(a: int, b: int) -> int:
    """Carry-less shift-and-reduce product, one bit of b at a time."""
    acc = 0
    while b:
        if b & 1:
            acc ^= a
        b >>= 1
        a <<= 1
        if a & 0x100:
            a ^= POLY
    return acc


def gf_inv_bruteforce(a: int) -> int:
    for x in range(1, 256):
        if gf_mul_bitwise(a, x) == 1:
            return x
    raise ValueError(f"no inverse for {a}")


def rank_bruteforce(rows) -> int:
    """Rank of a list of byte rows via plain row-echelon elimination."""
    work = [list(int(x) for x in row) for row in rows]
    rank = 0
    ncols = len(work[0]) if work else 0
    for col in range(ncols):
        pivot = None
        for r in range(rank, len(work)):
            if work[r][col] != 0:
                pivot = r
                break
        if pivot is None:
            continue
        work[rank], work[pivot] = work[pivot], work[rank]
        inv_lead = gf_inv_bruteforce(work[rank][col])
        work[rank] = [gf_mul_bitwise(inv_lead, x) for x in work[rank]]
        for r in range(len(work)):
            if r != rank and work[r][col] != 0:
                factor = work[r][col]
                work[r] = [x ^ gf_mul_bitwise(factor, y) for x, y in zip(work[r], work[rank])]
        rank += 1
        if rank == len(work):
            break
    return rank


def solve_bruteforce(coeff_rows, payload_rows):
    """Solve A X = Y over the field by full elimination; A must be square
    and invertible. Returns the recovered original payload rows."""
    n = len(coeff_rows)
    aug = [list(int(x) for x in cr) + list(int(x) for x in pr) for cr, pr in zip(coeff_rows, payload_rows)]
    for col in range(n):
        pivot = next(r for r in range(col, n) if aug[r][col] != 0)
        aug[col], aug[pivot] = aug[pivot], aug[col]
        inv_lead = gf_inv_bruteforce(aug[col][col])
        aug[col] = [gf_mul_bitwise(inv_lead, x) for x in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                factor = aug[r][col]
                aug[r] = [x ^ gf_mul_bitwise(factor, y) for x, y in zip(aug[r], aug[col])]
    return [row[n:] for row in aug]
