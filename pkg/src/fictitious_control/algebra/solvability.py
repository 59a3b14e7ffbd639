"""Algebraic solvability verdicts and extraction of the right inverse.

The reduced problem asks for (y_hat, u_hat) with L(y_hat, u_hat) = f for any
source f.  We look for y_hat supported on components 1..c, so that the
unactuated equations reduce to

    K y_hat := sum_{i<=c} (g_li . grad + a_li) y_hat_i = -f_l,   l > c.

K* is, up to sign, the first c rows of the reduced adjoint.  Prolonging those
rows to order q yields a square block R over the derivatives of psi_{c+1..m};
if R is invertible, reading off the order-0 unknowns gives a left inverse of
K*, whose formal adjoint is a right inverse of K.  The actuated equations then
define u_hat.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional

import numpy as np
import scipy.linalg as sla

from ..errors import (LimitExceeded, NoProlongationExists, NoSquareCandidate,
                      NotSolvableAtP)
from ..model import CoupledSystem
from .counting import (P_MAX_DEFAULT, ProlongationCounts, compute_h, count_derivatives,
                       find_min_prolongation, multi_indices_upto, prolongation_counts)
from .dm import DMDecomposition, dulmage_mendelsohn
from .matching import maximum_matching
from .operator import (DifferentialOperator, apply_operator_polynomial,
                       max_abs_coefficient, poly_add)
from .pattern import Equation, Unknown, build_prolonged_matrix

RCOND_MIN = 1e-12


@dataclass
class SolvabilityReport:
    h: int
    regime: str  # fully_actuated | c_ge_h | c_lt_h
    verdict: str  # solvable | not_solvable | inconclusive
    p_min: Optional[int]
    counts: Optional[ProlongationCounts]
    condition_numbers: list = field(default_factory=list)
    failing_subset: Optional[tuple] = None
    candidate: Optional[dict] = None
    dm: Optional[dict] = None
    message: str = ""

    def to_dict(self) -> dict:
        counts = None if self.counts is None else vars(self.counts).copy()
        return {
            "h": self.h, "regime": self.regime, "verdict": self.verdict,
            "p_min": self.p_min, "counts": counts,
            "condition_numbers": [float(x) for x in self.condition_numbers],
            "failing_subset": None if self.failing_subset is None else list(self.failing_subset),
            "candidate": self.candidate, "dm": self.dm, "message": self.message,
        }


def rcond(M: np.ndarray) -> float:
    """Reciprocal 1-norm condition number from a pivoted LU factorization."""
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return 1.0
    if not np.all(np.isfinite(M)):
        return 0.0
    anorm = np.linalg.norm(M, 1)
    if anorm == 0.0:
        return 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        lu, _ = sla.lu_factor(M, check_finite=False)
    if np.any(np.diag(lu) == 0.0):
        return 0.0
    rc, _ = sla.lapack.dgecon(lu, anorm, norm="1")
    return float(rc)


def build_C(sys: CoupledSystem, alphas) -> np.ndarray:
    """Rank-condition matrix for the 1-based actuated indices ``alphas``."""
    alphas = [int(a) for a in alphas]
    m, c, n = sys.m, sys.c, sys.n
    h = compute_h(m, c, n)
    if len(alphas) != h:
        raise ValueError(f"need {h} indices, got {len(alphas)}")
    if len(set(alphas)) != len(alphas):
        raise ValueError(f"repeated indices in {alphas}")
    if any(not 1 <= a <= c for a in alphas):
        raise ValueError(f"indices must lie in 1..{c}")
    C = np.zeros((h, h))
    for row, a in enumerate(alphas):
        j = a - 1
        blocks = [sys.A[c:, j]] + [sys.G[c:, j, i] for i in range(n)]
        C[row] = np.concatenate(blocks)
    return C


# square candidate -----------------------------------------------------------

@dataclass(frozen=True)
class SquareCandidate:
    q: int
    rows: tuple  # Equation(j, beta), j <= c
    cols: tuple  # Unknown(l, alpha), l > c, |alpha| <= q+1
    matrix: np.ndarray

    def to_dict(self) -> dict:
        return {
            "q": self.q, "size": len(self.rows),
            "rows": [[e.equation + 1, list(e.beta)] for e in self.rows],
            "cols": [u.label() for u in self.cols],
        }


def candidate_order(m: int, c: int, n: int, q_max: int = P_MAX_DEFAULT) -> int:
    """Smallest q with at least as many C-type rows as unknowns of order <= q+1."""
    for q in range(q_max + 1):
        if c * count_derivatives(q, n) >= (m - c) * count_derivatives(q + 1, n):
            return q
    raise NoSquareCandidate(f"no square candidate with q <= {q_max}")


def square_candidate(sys: CoupledSystem, q_max: int = P_MAX_DEFAULT) -> SquareCandidate:
    """Lowest-index square block of prolonged C-type rows.

    For c >= h this is C (a-columns negated) on indices 1..h; for c < h it is
    the shifted stack of C blocks.
    """
    m, c, n = sys.m, sys.c, sys.n
    q = candidate_order(m, c, n, q_max)
    cols = [Unknown(l, a) for a in multi_indices_upto(q + 1, n) for l in range(c, m)]
    rows = [Equation(j, b) for b in multi_indices_upto(q, n) for j in range(c)][:len(cols)]
    index = {u: k for k, u in enumerate(cols)}
    R = np.zeros((len(rows), len(cols)))
    for r, eq in enumerate(rows):
        j, beta = eq.equation, eq.beta
        for l in range(c, m):
            R[r, index[Unknown(l, beta)]] -= sys.A[l, j]
            for i in range(n):
                shifted = tuple(b + (k == i) for k, b in enumerate(beta))
                R[r, index[Unknown(l, shifted)]] += sys.G[l, j, i]
    return SquareCandidate(q, tuple(rows), tuple(cols), R)


def _regime(sys: CoupledSystem) -> str:
    h = compute_h(sys.m, sys.c, sys.n)
    if sys.c == sys.m:
        return "fully_actuated"
    return "c_ge_h" if sys.c >= h else "c_lt_h"


def _safe_counts(sys: CoupledSystem, p_max: int):
    try:
        p = find_min_prolongation(sys.m, sys.n, sys.c, p_max)
    except (NoProlongationExists, LimitExceeded):
        return None, None
    return p, prolongation_counts(sys.m, sys.n, sys.c, p)


def check_square_candidate(sys: CoupledSystem, p: int, rank_tol: float = RCOND_MIN) -> SolvabilityReport:
    """Square-candidate verdict at prolongation order p.

    Raises NoSquareCandidate when the candidate does not fit inside the
    overdetermined DM block at this p (increase p).
    """
    m, c, n = sys.m, sys.c, sys.n
    h = compute_h(m, c, n)
    cand = square_candidate(sys)
    if cand.q > p:
        raise NoSquareCandidate(f"candidate needs q={cand.q} > p={p}; increase p")
    pat = build_prolonged_matrix(sys, p)
    dm = dulmage_mendelsohn(pat, maximum_matching(pat))
    row_index = {e: k for k, e in enumerate(pat.row_labels)}
    col_index = {u: k for k, u in enumerate(pat.col_labels)}
    rows = [row_index[e] for e in cand.rows]
    cols = [col_index[u] for u in cand.cols]
    if not (set(rows) <= dm.VR and set(cols) <= dm.VC):
        raise NoSquareCandidate(f"candidate not inside the overdetermined block at p={p}; increase p")
    rc = rcond(cand.matrix)
    solvable = rc >= rank_tol
    info = cand.to_dict()
    info.update(p=p, prolonged_rows=[r + 1 for r in rows], prolonged_cols=[k + 1 for k in cols])
    return SolvabilityReport(
        h=h, regime=_regime(sys), verdict="solvable" if solvable else "not_solvable",
        p_min=p, counts=prolongation_counts(m, n, c, p), condition_numbers=[rc],
        failing_subset=None if solvable else tuple(r + 1 for r in rows),
        candidate=info, dm=dm.to_dict(),
        message="" if solvable else f"square candidate singular (rcond={rc:.3g})",
    )


def find_square_candidate_p(sys: CoupledSystem, p_max: int = P_MAX_DEFAULT) -> int:
    for p in range(p_max + 1):
        try:
            check_square_candidate(sys, p)
        except NoSquareCandidate:
            continue
        return p
    raise LimitExceeded(f"no square candidate inside the overdetermined block for p <= {p_max}")


def check_rank_condition(sys: CoupledSystem, p_max: int = P_MAX_DEFAULT,
                         rank_tol: float = RCOND_MIN) -> SolvabilityReport:
    m, c, n = sys.m, sys.c, sys.n
    h = compute_h(m, c, n)
    regime = _regime(sys)
    if regime == "fully_actuated":
        return SolvabilityReport(h=0, regime=regime, verdict="solvable", p_min=0,
                                 counts=prolongation_counts(m, n, c, 0))
    if regime == "c_ge_h":
        p, counts = _safe_counts(sys, p_max)
        conds = []
        for subset in combinations(range(1, c + 1), h):
            rc = rcond(build_C(sys, subset))
            conds.append(rc)
            if rc < rank_tol:
                return SolvabilityReport(h=h, regime=regime, verdict="not_solvable", p_min=p,
                                         counts=counts, condition_numbers=conds,
                                         failing_subset=subset,
                                         message=f"C singular on indices {list(subset)} (rcond={rc:.3g})")
        return SolvabilityReport(h=h, regime=regime, verdict="solvable", p_min=p,
                                 counts=counts, condition_numbers=conds)
    # c < h: only the square-candidate route can decide
    try:
        p = find_square_candidate_p(sys, p_max)
    except (NoSquareCandidate, LimitExceeded) as exc:
        return SolvabilityReport(h=h, regime=regime, verdict="inconclusive", p_min=None,
                                 counts=None, message=str(exc))
    return check_square_candidate(sys, p, rank_tol)


def pipeline_order(sys: CoupledSystem, p_max: int = P_MAX_DEFAULT) -> int:
    """Prolongation order used downstream (weight exponent, stencil widths)."""
    if _regime(sys) == "c_lt_h":
        return find_square_candidate_p(sys, p_max)
    return find_min_prolongation(sys.m, sys.n, sys.c, p_max)


# operator extraction --------------------------------------------------------

def _diffusion_terms(sys: CoupledSystem, comp: int):
    """(alpha, coef) pairs of div(d_comp grad .)."""
    n = sys.n
    d = sys.D[comp]
    out = []
    for i in range(n):
        for k in range(i, n):
            alpha = [0] * n
            alpha[i] += 1
            alpha[k] += 1
            coef = d[i, i] if i == k else d[i, k] + d[k, i]
            if coef != 0.0:
                out.append((tuple(alpha), coef))
    return out


def state_operator(sys: CoupledSystem) -> DifferentialOperator:
    """L(y, u) = d_t y - div(D grad y) - G . grad y - A y - B u."""
    m, c, n = sys.m, sys.c, sys.n
    zero = (0,) * n
    L = DifferentialOperator(m, m + c, n)
    for p in range(m):
        L.add(p, p, 1, zero, 1.0)
        for alpha, coef in _diffusion_terms(sys, p):
            L.add(p, p, 0, alpha, -coef)
        for k in range(m):
            L.add(p, k, 0, zero, -sys.A[p, k])
            for i in range(n):
                L.add(p, k, 0, tuple(int(r == i) for r in range(n)), -sys.G[p, k, i])
    for i in range(c):
        L.add(i, m + i, 0, zero, -1.0)
    return L


def extract_inverse_operator(sys: CoupledSystem, p: Optional[int] = None,
                             rank_tol: float = RCOND_MIN) -> DifferentialOperator:
    """Right inverse B with L o B = Id_m, mapping m sources to (y_hat, u_hat)."""
    m, c, n = sys.m, sys.c, sys.n
    if p is None:
        p = pipeline_order(sys)
    cand = square_candidate(sys)
    if cand.q > p:
        raise NotSolvableAtP(f"square candidate needs prolongation order {cand.q} > {p}")
    rc = rcond(cand.matrix)
    if rc < rank_tol:
        raise NotSolvableAtP(f"square block singular at p={p} (rcond={rc:.3g})")

    zero = (0,) * n
    B = DifferentialOperator(m + c, m, n)
    if cand.matrix.size:
        Rinv = np.linalg.inv(cand.matrix)
        # B_bar*(f)_l = sum P[l,(beta,j)] d^beta f_j; its formal adjoint gives y_hat_j
        for ci, u in enumerate(cand.cols):
            if sum(u.alpha):
                continue
            for ri, eq in enumerate(cand.rows):
                sign = (-1) ** sum(eq.beta)
                B.add(eq.equation, u.component, 0, eq.beta, sign * Rinv[ci, ri])

    # u_hat_i = (d_t - div(d_i grad)) y_hat_i - sum_k (g_ik . grad + a_ik) y_hat_k - f_i
    yhat = {o: B.rows(o) for o in range(c)}
    for i in range(c):
        for (src, k, alpha), v in yhat[i].items():
            B.add(m + i, src, k + 1, alpha, v)
            for beta, coef in _diffusion_terms(sys, i):
                B.add(m + i, src, k, tuple(a + b for a, b in zip(alpha, beta)), -coef * v)
        for kk in range(c):
            for (src, k, alpha), v in yhat[kk].items():
                B.add(m + i, src, k, alpha, -sys.A[i, kk] * v)
                for s in range(n):
                    shifted = tuple(a + (r == s) for r, a in enumerate(alpha))
                    B.add(m + i, src, k, shifted, -sys.G[i, kk, s] * v)
        B.add(m + i, i, 0, zero, -1.0)
    return B


def random_polynomials(rng, count: int, n: int, deg_x: int, deg_t: int = 2):
    shape = (deg_t + 1,) + (deg_x + 1,) * n
    return [rng.standard_normal(shape) for _ in range(count)]


def right_inverse_residual(sys: CoupledSystem, B_op: DifferentialOperator, phi) -> float:
    L = state_operator(sys)
    LB = apply_operator_polynomial(L, apply_operator_polynomial(B_op, phi))
    return max_abs_coefficient([poly_add(a, -b) for a, b in zip(LB, phi)])


def verify_right_inverse(sys: CoupledSystem, B_op: DifferentialOperator, trials: int = 50,
                         p: Optional[int] = None, seed=0) -> float:
    """Max coefficient of L(B(phi)) - phi over random polynomial inputs."""
    rng = np.random.default_rng(seed)
    if p is None:
        p = max(B_op.max_space_order - 2, 0)
    worst = 0.0
    for _ in range(trials):
        phi = random_polynomials(rng, sys.m, sys.n, p + 3)
        worst = max(worst, right_inverse_residual(sys, B_op, phi))
    return worst
