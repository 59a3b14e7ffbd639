"""Sparse patterns and the prolonged reduced adjoint matrix.

With psi_1..psi_c eliminated, equation j of the reduced adjoint system reads

    sum_{l>c} (g_lj . grad - a_lj) psi_l                          (j <= c)
    -d_t psi_j - div(d_j grad psi_j) + sum_{l>c} (g_lj . grad - a_lj) psi_l   (j > c)

Prolonging by d^beta for |beta| <= p gives a linear algebraic system in the
unknowns d^alpha psi_l and d_t d^beta psi_l (l > c).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..model import CoupledSystem
from .counting import multi_indices, multi_indices_upto


@dataclass(frozen=True)
class Unknown:
    """Algebraic unknown d_t^time d^alpha psi_component (component 0-based)."""

    component: int
    alpha: tuple[int, ...]
    time: int = 0

    def label(self) -> str:
        parts = ["dt"] * self.time
        for i, a in enumerate(self.alpha):
            if a:
                parts.append(f"dx{i + 1}^{a}" if a > 1 else f"dx{i + 1}")
        return "".join(p + " " for p in parts) + f"psi{self.component + 1}"


@dataclass(frozen=True)
class Equation:
    """Prolonged equation d^beta (row j of the reduced adjoint), j 0-based."""

    equation: int
    beta: tuple[int, ...]


@dataclass
class SparsePattern:
    rows: int
    cols: int
    entries: dict[tuple[int, int], float] = field(default_factory=dict)
    tags: dict[tuple[int, int], str] = field(default_factory=dict)
    row_labels: list = field(default_factory=list)
    col_labels: list = field(default_factory=list)

    def __post_init__(self):
        for (r, c) in self.entries:
            if not (0 <= r < self.rows and 0 <= c < self.cols):
                raise IndexError(f"entry ({r}, {c}) outside {self.rows}x{self.cols}")

    @classmethod
    def from_dense(cls, M) -> "SparsePattern":
        M = np.asarray(M, dtype=float)
        rows, cols = np.nonzero(M)
        return cls(M.shape[0], M.shape[1], {(int(r), int(c)): float(M[r, c]) for r, c in zip(rows, cols)})

    @classmethod
    def from_triplets(cls, triplets, rows=None, cols=None) -> "SparsePattern":
        entries = {}
        for r, c, v in triplets:
            key = (int(r), int(c))
            if key in entries:
                raise ValueError(f"duplicate entry {key}")
            entries[key] = float(v)
        nr = rows if rows is not None else 1 + max((k[0] for k in entries), default=-1)
        nc = cols if cols is not None else 1 + max((k[1] for k in entries), default=-1)
        return cls(nr, nc, entries)

    def nonzero(self):
        """Structural nonzeros (entries with a tag count even if numerically zero)."""
        return sorted(set(k for k, v in self.entries.items() if v != 0.0) | set(self.tags))

    def adjacency(self) -> list[list[int]]:
        adj = [[] for _ in range(self.rows)]
        for r, c in self.nonzero():
            adj[r].append(c)
        return adj

    def to_dense(self) -> np.ndarray:
        M = np.zeros((self.rows, self.cols))
        for (r, c), v in self.entries.items():
            M[r, c] = v
        return M

    def tag_matrix(self) -> list[list[str]]:
        out = [["0"] * self.cols for _ in range(self.rows)]
        for (r, c), t in self.tags.items():
            out[r][c] = t
        return out


def prolonged_columns(m: int, c: int, n: int, p: int) -> list[Unknown]:
    """Column order of the prolonged matrix.

    Spatial groups S_k (order k, components c+1..m) ascend in order; the
    time-derivative group T_k (order k, components m..c+1) sits in front of
    S_{k+2}, with S_1 placed right after T_0.
    """
    comps = list(range(c, m))

    def spatial(k):
        return [Unknown(l, a) for a in multi_indices(k, n) for l in comps]

    def temporal(k):
        return [Unknown(l, a, 1) for a in multi_indices(k, n) for l in reversed(comps)]

    cols = spatial(0)
    for k in range(p + 1):
        cols += temporal(k)
        if k == 0:
            cols += spatial(1)
        cols += spatial(k + 2)
    return cols


def _tag(kind: str, l: int, j: int, n: int, i: int = 0) -> str:
    if kind == "a":
        return f"-a{l + 1}{j + 1}"
    return f"g{l + 1}{j + 1}" if n == 1 else f"g{i + 1}:{l + 1}{j + 1}"


def build_prolonged_matrix(sys: CoupledSystem, p: int) -> SparsePattern:
    m, c, n = sys.m, sys.c, sys.n
    rows = [Equation(j, beta) for beta in multi_indices_upto(p, n) for j in range(m)]
    cols = prolonged_columns(m, c, n, p)
    index = {u: k for k, u in enumerate(cols)}
    entries, tags = {}, {}

    def put(r, unknown, value, tag):
        key = (r, index[unknown])
        entries[key] = entries.get(key, 0.0) + value
        tags[key] = tag

    for r, eq in enumerate(rows):
        j, beta = eq.equation, eq.beta
        for l in range(c, m):
            put(r, Unknown(l, beta), -sys.A[l, j], _tag("a", l, j, n))
            for i in range(n):
                shifted = tuple(b + (k == i) for k, b in enumerate(beta))
                put(r, Unknown(l, shifted), sys.G[l, j, i], _tag("g", l, j, n, i))
        if j >= c:
            put(r, Unknown(j, beta, 1), -1.0, "-1")
            d = sys.D[j]
            for i in range(n):
                for k in range(i, n):
                    shifted = list(beta)
                    shifted[i] += 1
                    shifted[k] += 1
                    coef = d[i, i] if i == k else d[i, k] + d[k, i]
                    if i != k and coef == 0.0:
                        continue
                    tag = f"-d{j + 1}" if n == 1 else f"-d{j + 1}[{i + 1}{k + 1}]"
                    put(r, Unknown(j, tuple(shifted)), -coef, tag)
    return SparsePattern(len(rows), len(cols), entries, tags, rows, cols)
