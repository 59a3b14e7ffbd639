"""Derivative and equation counts for spatial prolongation."""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations_with_replacement
from math import comb

from ..errors import LimitExceeded, NoProlongationExists

P_MAX_DEFAULT = 12


def compute_h(m: int, c: int, n: int) -> int:
    if not 1 <= c <= m or n < 1:
        raise ValueError(f"need 1 <= c <= m and n >= 1, got m={m}, c={c}, n={n}")
    return (m - c) * (n + 1)


def count_derivatives(p: int, n: int) -> int:
    """Number of spatial multi-indices of order at most p in n variables."""
    if p < 0:
        return 0
    return comb(p + n, n)


def multi_indices(order: int, n: int) -> list[tuple[int, ...]]:
    """Multi-indices of exactly ``order`` in descending lexicographic order.

    For order 1 this lists e_1, e_2, ..., e_n.
    """
    out = []
    for combo in combinations_with_replacement(range(n), order):
        alpha = [0] * n
        for i in combo:
            alpha[i] += 1
        out.append(tuple(alpha))
    return sorted(out, reverse=True)


def multi_indices_upto(order: int, n: int) -> list[tuple[int, ...]]:
    return [a for k in range(order + 1) for a in multi_indices(k, n)]


@dataclass(frozen=True)
class ProlongationCounts:
    p: int
    F_p: int
    F_p2: int
    E: int
    U: int

    @property
    def surplus(self) -> int:
        return self.E - self.U


def prolongation_counts(m: int, n: int, c: int, p: int) -> ProlongationCounts:
    if p < 0:
        raise ValueError("p must be nonnegative")
    f_p = count_derivatives(p, n)
    f_p2 = count_derivatives(p + 2, n)
    return ProlongationCounts(p=p, F_p=f_p, F_p2=f_p2, E=m * f_p, U=(m - c) * (f_p2 + f_p))


def find_min_prolongation(m: int, n: int, c: int, p_max: int = P_MAX_DEFAULT) -> int:
    """Smallest p with more prolonged equations than algebraic unknowns."""
    if 2 * c <= m:
        raise NoProlongationExists(f"c={c} <= m/2={m / 2}: unknowns always outnumber equations")
    for p in range(p_max + 1):
        counts = prolongation_counts(m, n, c, p)
        if counts.E > counts.U:
            return p
    raise LimitExceeded(f"no p <= {p_max} with E(p) > U(p)")
