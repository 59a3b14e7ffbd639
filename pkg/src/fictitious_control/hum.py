"""Penalized HUM for the fully actuated system.

For k > 0 we minimise

    J_k(v) = 1/2 sum dt dx rho^{-1} |v|^2 + k/2 ||y(T)||^2

over controls v acting through theta.  The optimum is v = -rho theta psi with
psi the adjoint started from phi = k y(T), and phi solves

    (Lambda + I/k) phi = y_free(T),   Lambda phi = -y_phi(T),

where y_phi is driven from zero by the source -rho theta^2 psi_phi.  Lambda is
symmetric positive semi-definite for the discrete inner product, so conjugate
gradients apply.  On the discrete level the control at step k pairs rho(t_k)
with psi^{k-1}, which makes the cost identity J_k = 1/2 <y0, psi(0)> exact.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .carleman import CarlemanWeights, CutoffFamily, eval_rho, eval_star_weights, log_weight
from .errors import FictitiousControlError, NotConverged
from .model import CoupledSystem
from .pde import DiscreteOperator, Grid, TrajectoryField, assemble, inner, solve_adjoint, solve_forward

K_SCHEDULE = (1e2, 1e3, 1e4, 1e5, 1e6)


@dataclass
class HumProblem:
    sys: CoupledSystem
    grid: Grid
    weights: CarlemanWeights
    cutoffs: CutoffFamily
    opd: DiscreteOperator
    rho: np.ndarray  # (Nt+1, Nx)
    theta: np.ndarray  # (Nx,)

    @classmethod
    def build(cls, sys: CoupledSystem, grid: Grid, weights: CarlemanWeights, cutoffs: CutoffFamily,
              opd: Optional[DiscreteOperator] = None) -> "HumProblem":
        if abs(weights.T - grid.T) > 1e-12 * grid.T:
            raise ValueError("weights and grid use different horizons")
        opd = assemble(sys, grid) if opd is None else opd
        rho = eval_rho(weights, grid.t[:, None], grid.x[None, :])
        return cls(sys, grid, weights, cutoffs, opd, rho, cutoffs.theta(grid.x))

    @property
    def control_weight(self) -> np.ndarray:
        """rho(t_k) theta^2, the factor in front of psi^{k-1} in the source at step k."""
        return self.rho * self.theta[None, :] ** 2

    def control_from_adjoint(self, psi: TrajectoryField, rho=None) -> TrajectoryField:
        """v^k = -rho(t_k) theta psi^{k-1}, v^0 = 0."""
        rho = self.rho if rho is None else rho
        v = np.zeros_like(psi.values)
        v[1:] = -(rho[1:, None, :] * self.theta[None, None, :]) * psi.values[:-1]
        return TrajectoryField(v, self.grid)

    def source(self, v: TrajectoryField) -> TrajectoryField:
        return TrajectoryField(v.values * self.theta[None, None, :], self.grid)

    def weighted_norm(self, psi: TrajectoryField) -> float:
        """sum dt dx rho^{-1} |v|^2 written as rho theta^2 |psi^{k-1}|^2."""
        g = self.grid
        w = self.control_weight[1:, None, :]
        return float(g.dt * g.dx * np.sum(w * psi.values[:-1] ** 2))


def free_solution(prob: HumProblem, y0) -> TrajectoryField:
    return solve_forward(prob.opd, y0)


def gramian_apply(prob: HumProblem, phiT) -> np.ndarray:
    """y_phi(T) for the controlled run started at zero; Lambda phi = -y_phi(T)."""
    psi = solve_adjoint(prob.opd, phiT)
    src = prob.source(prob.control_from_adjoint(psi))
    y = solve_forward(prob.opd, np.zeros_like(np.asarray(phiT, dtype=float)), src)
    return y.terminal


@dataclass
class PenaltyRun:
    k: float
    v: TrajectoryField
    y: TrajectoryField
    psi: TrajectoryField
    Jk: float
    terminal_norm: float
    weighted_control_norm: float
    cg_iters: int
    cg_residual: float
    closure: float
    phiT: np.ndarray = field(repr=False, default=None)

    def summary(self) -> dict:
        return {
            "k": self.k, "Jk": self.Jk, "terminal_norm": self.terminal_norm,
            "weighted_control_norm": self.weighted_control_norm,
            "cg_iters": self.cg_iters, "cg_residual": self.cg_residual, "closure": self.closure,
        }


def conjugate_gradient(apply, b: np.ndarray, dot, k: float, tol: float, maxiter: int):
    """CG for a symmetric positive definite ``apply``.

    Stops when k ||b - A x|| <= tol ||x||, i.e. when the optimality closure
    ||phi - k y(T)|| / ||phi|| reaches ``tol``.
    """
    x = np.zeros_like(b)
    r = b.copy()
    p = r.copy()
    rr = dot(r, r)
    if rr == 0.0:
        return x, 0, 0.0, True
    for it in range(1, maxiter + 1):
        Ap = apply(p)
        alpha = rr / dot(p, Ap)
        x = x + alpha * p
        r = r - alpha * Ap
        rr_new = dot(r, r)
        res = k * np.sqrt(rr_new) / max(np.sqrt(dot(x, x)), np.finfo(float).tiny)
        if res <= tol:
            return x, it, float(res), True
        p = r + (rr_new / rr) * p
        rr = rr_new
    return x, maxiter, float(res), False


def reconstruct(prob: HumProblem, phiT: np.ndarray, y0, rho=None):
    """(psi, v, y) from the adjoint terminal datum phiT."""
    psi = solve_adjoint(prob.opd, phiT)
    v = prob.control_from_adjoint(psi, rho)
    y = solve_forward(prob.opd, y0, prob.source(v))
    return psi, v, y


def solve_penalized(prob: HumProblem, y0, k: float, cg_tol: float = 1e-10, cg_max: int = 2000) -> PenaltyRun:
    if not k > 0:
        raise ValueError("penalty k must be positive")
    g = prob.grid
    y0 = np.asarray(y0, dtype=float)
    shape = y0.shape
    dot = lambda a, b: g.dx * float(np.dot(a, b))  # noqa: E731

    def apply(phi):
        return -gramian_apply(prob, phi.reshape(shape)).ravel() + phi / k

    b = free_solution(prob, y0).terminal.ravel()
    phi, iters, res, ok = conjugate_gradient(apply, b, dot, k, cg_tol, cg_max)
    phiT = phi.reshape(shape)
    psi, v, y = reconstruct(prob, phiT, y0)
    W = prob.weighted_norm(psi)
    tn = float(np.sqrt(inner(y.terminal, y.terminal, g.dx)))
    phin = np.sqrt(inner(phiT, phiT, g.dx))
    closure = float(np.sqrt(inner(phiT - k * y.terminal, phiT - k * y.terminal, g.dx)) / phin) if phin > 0 else 0.0
    run = PenaltyRun(k=k, v=v, y=y, psi=psi, Jk=0.5 * W + 0.5 * k * tn ** 2, terminal_norm=tn,
                     weighted_control_norm=W, cg_iters=iters, cg_residual=res, closure=closure, phiT=phiT)
    if not ok:
        raise NotConverged(f"CG stopped after {iters} iterations with closure residual {res:.3g}",
                           diagnostics=run.summary())
    if closure > 10.0 * cg_tol:
        raise NotConverged(f"optimality closure {closure:.3g} exceeds {10 * cg_tol:.3g}",
                           diagnostics=run.summary())
    return run


def cost_identity_check(run: PenaltyRun, y0, eps: float = 1e-300) -> float:
    g = run.y.grid
    half = 0.5 * inner(y0, run.psi.initial, g.dx)
    return abs(run.Jk - half) / max(run.Jk, eps)


def adjoint_zero_bound_probe(run: PenaltyRun, y0) -> float:
    g = run.y.grid
    ny = np.sqrt(inner(y0, y0, g.dx))
    if ny == 0.0:
        return 0.0
    return float(np.sqrt(inner(run.psi.initial, run.psi.initial, g.dx)) / ny)


def regularity_norm(prob: HumProblem, run: PenaltyRun, K: float) -> float:
    """sum dt dx exp(2 K s1 alpha*) |v|^2, evaluated in log space."""
    g, w = prob.grid, prob.weights
    t = g.t[1:-1]
    astar, _ = eval_star_weights(w, t)
    logrho = log_weight(w, w.s1, w.exponent, t[:, None], g.x[None, :])
    logfac = 2.0 * K * w.s1 * astar[:, None] + 2.0 * logrho
    fac = np.where(logfac < -690.0, 0.0, np.exp(np.minimum(logfac, 700.0)))
    psi_prev = run.psi.values[:-2]  # v^k pairs with psi^{k-1}
    integrand = fac[:, None, :] * prob.theta[None, None, :] ** 2 * psi_prev ** 2
    return float(g.dt * g.dx * np.sum(integrand))


@dataclass
class SweepReport:
    runs: list
    failures: dict
    terminal_nonincreasing: bool
    terminal_strictly_decreasing: bool
    penalty_bound_ok: bool
    cost_nondecreasing: bool

    def summary(self) -> dict:
        return {
            "runs": [r.summary() for r in self.runs],
            "failures": {str(k): v for k, v in self.failures.items()},
            "terminal_nonincreasing": self.terminal_nonincreasing,
            "terminal_strictly_decreasing": self.terminal_strictly_decreasing,
            "penalty_bound_ok": self.penalty_bound_ok,
            "cost_nondecreasing": self.cost_nondecreasing,
        }


def penalty_sweep(prob: HumProblem, y0, ks=K_SCHEDULE, cg_tol: float = 1e-10, cg_max: int = 2000,
                  threads: int = 1) -> SweepReport:
    ks = list(ks)
    if not ks or any(b <= a for a, b in zip(ks, ks[1:])):
        raise ValueError("ks must be nonempty and increasing")

    def one(k):
        try:
            return solve_penalized(prob, y0, k, cg_tol, cg_max)
        except FictitiousControlError as exc:
            return exc

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, ks))
    else:
        results = [one(k) for k in ks]
    runs = [r for r in results if isinstance(r, PenaltyRun)]
    failures = {k: str(r) for k, r in zip(ks, results) if not isinstance(r, PenaltyRun)}
    tn = [r.terminal_norm for r in runs]
    J = [r.Jk for r in runs]
    return SweepReport(
        runs=runs, failures=failures,
        terminal_nonincreasing=all(b <= a for a, b in zip(tn, tn[1:])),
        terminal_strictly_decreasing=all(b < a for a, b in zip(tn, tn[1:])),
        penalty_bound_ok=all(r.terminal_norm <= np.sqrt(2.0 * r.Jk / r.k) * (1 + 1e-12) for r in runs),
        cost_nondecreasing=all(b >= a * (1 - 1e-9) for a, b in zip(J, J[1:])),
    )


@dataclass
class ObservabilityProbe:
    samples: int
    ratios: list
    inf_flags: int

    @property
    def max_ratio(self) -> float:
        return max(self.ratios) if self.ratios else float("nan")


def observability_ratio(prob: HumProblem, psiT) -> float:
    """||psi(0)||^2 / sum dt dx rho 1_{omega_0} |psi|^2; +inf if the denominator underflows."""
    g = prob.grid
    psi = solve_adjoint(prob.opd, psiT)
    num = inner(psi.initial, psi.initial, g.dx)
    mask = prob.cutoffs.indicator(g.x, 0)
    den = g.dt * g.dx * float(np.sum(prob.rho[:, None, :] * mask[None, None, :] * psi.values ** 2))
    if den <= 0.0:
        return float("inf")
    return num / den


def observability_probe(prob: HumProblem, samples: int, seed=0) -> ObservabilityProbe:
    if samples < 1:
        raise ValueError("samples must be at least 1")
    rng = np.random.default_rng(seed)
    ratios = [observability_ratio(prob, rng.standard_normal((prob.sys.m, prob.grid.Nx)))
              for _ in range(samples)]
    return ObservabilityProbe(samples=samples, ratios=ratios, inf_flags=sum(np.isinf(r) for r in ratios))
