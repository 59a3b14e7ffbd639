"""Implicit Euler solver for the coupled system on [0, L] and its exact discrete adjoint.

State vectors are component-major: entry p * Nx + i holds component p at the
interior node x_i = (i + 1) dx.  With M the semi-discrete operator and
S = I - dt M,

    forward:  y^{k+1} = S^{-1} (y^k + dt r^{k+1})
    adjoint:  psi^k   = S^{-T} psi^{k+1},

so that <y^N, psi^N> - <y^0, psi^0> = sum_{k=1}^{N} dt <r^k, psi^{k-1}> holds
to round-off.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DimensionMismatch, Diverged, IllConditionedStep
from .model import CoupledSystem

PECLET_MAX = 2.0


@dataclass(frozen=True)
class Grid:
    Nx: int
    Nt: int
    L: float = 1.0
    T: float = 1.0

    def __post_init__(self):
        if self.Nx < 3 or self.Nt < 2:
            raise ValueError(f"grid too small: Nx={self.Nx}, Nt={self.Nt}")
        if not (self.L > 0 and self.T > 0):
            raise ValueError("L and T must be positive")

    @property
    def dx(self) -> float:
        return self.L / (self.Nx + 1)

    @property
    def dt(self) -> float:
        return self.T / self.Nt

    @property
    def x(self) -> np.ndarray:
        return self.dx * np.arange(1, self.Nx + 1)

    @property
    def t(self) -> np.ndarray:
        return self.dt * np.arange(self.Nt + 1)

    @classmethod
    def for_system(cls, sys: CoupledSystem, Nx: int, Nt: int) -> "Grid":
        return cls(Nx=Nx, Nt=Nt, L=sys.L, T=sys.T)

    def refined(self) -> "Grid":
        return Grid(Nx=2 * self.Nx + 1, Nt=2 * self.Nt, L=self.L, T=self.T)


@dataclass
class TrajectoryField:
    values: np.ndarray  # (Nt+1, m, Nx)
    grid: Grid

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 3 or v.shape[0] != self.grid.Nt + 1 or v.shape[2] != self.grid.Nx:
            raise DimensionMismatch(f"trajectory shape {v.shape} does not fit the grid")
        self.values = v

    @classmethod
    def zeros(cls, grid: Grid, m: int) -> "TrajectoryField":
        return cls(np.zeros((grid.Nt + 1, m, grid.Nx)), grid)

    @property
    def m(self) -> int:
        return self.values.shape[1]

    @property
    def initial(self) -> np.ndarray:
        return self.values[0]

    @property
    def terminal(self) -> np.ndarray:
        return self.values[-1]

    def norms(self) -> np.ndarray:
        """Discrete L2(Omega) norm of every time slice."""
        return np.sqrt(self.grid.dx * np.sum(self.values ** 2, axis=(1, 2)))

    def __add__(self, other):
        return TrajectoryField(self.values + other.values, self.grid)

    def __sub__(self, other):
        return TrajectoryField(self.values - other.values, self.grid)

    def __mul__(self, scalar):
        return TrajectoryField(scalar * self.values, self.grid)

    __rmul__ = __mul__

    def to_csv(self, path, label: str = "value") -> int:
        """Write rows (t, x, component, value); returns the row count."""
        g = self.grid
        tt, cc, xx = np.meshgrid(g.t, np.arange(1, self.m + 1), g.x, indexing="ij")
        rows = np.column_stack([tt.ravel(), xx.ravel(), cc.ravel(), self.values.ravel()])
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "x", "component", label])
            for t, x, c, v in rows:
                writer.writerow([repr(float(t)), repr(float(x)), int(c), repr(float(v))])
        return rows.shape[0]


def inner(u, v, dx: float) -> float:
    return float(dx * np.sum(np.asarray(u) * np.asarray(v)))


def laplacian_1d(Nx: int, dx: float) -> sp.csr_matrix:
    return sp.diags([np.ones(Nx - 1), -2.0 * np.ones(Nx), np.ones(Nx - 1)], [-1, 0, 1], format="csr") / dx ** 2


def central_difference_1d(Nx: int, dx: float) -> sp.csr_matrix:
    return sp.diags([-np.ones(Nx - 1), np.ones(Nx - 1)], [-1, 1], format="csr") / (2.0 * dx)


@dataclass
class DiscreteOperator:
    sys: CoupledSystem
    grid: Grid
    M: sp.csr_matrix
    step: sp.csc_matrix
    lu: object
    peclet: float

    @property
    def size(self) -> int:
        return self.M.shape[0]

    def solve_step(self, rhs: np.ndarray) -> np.ndarray:
        return self.lu.solve(rhs)

    def solve_step_transposed(self, rhs: np.ndarray) -> np.ndarray:
        return self.lu.solve(rhs, trans="T")


def semidiscrete_operator(sys: CoupledSystem, grid: Grid) -> sp.csr_matrix:
    Nx, dx = grid.Nx, grid.dx
    lap = laplacian_1d(Nx, dx)
    d0 = central_difference_1d(Nx, dx)
    eye = sp.identity(Nx, format="csr")
    M = sp.kron(sp.diags(sys.diffusion), lap) + sp.kron(sp.csr_matrix(sys.G1), d0) + sp.kron(sp.csr_matrix(sys.A), eye)
    return M.tocsr()


def assemble(sys: CoupledSystem, grid: Grid) -> DiscreteOperator:
    if sys.n != 1:
        raise DimensionMismatch("the simulator handles n = 1 only")
    M = semidiscrete_operator(sys, grid)
    step = (sp.identity(M.shape[0], format="csc") - grid.dt * M).tocsc()
    try:
        lu = spla.splu(step)
    except RuntimeError as exc:
        raise IllConditionedStep(f"implicit step matrix factorization failed: {exc}") from exc
    dmin = float(np.min(sys.diffusion))
    peclet = float(np.max(np.abs(sys.G1)) * grid.dx / dmin) if dmin > 0 else float("inf")
    if peclet > PECLET_MAX:
        warnings.warn(f"grid Peclet number {peclet:.3g} exceeds {PECLET_MAX}", RuntimeWarning, stacklevel=2)
    return DiscreteOperator(sys=sys, grid=grid, M=M, step=step, lu=lu, peclet=peclet)


def _source_array(source, grid: Grid, m: int) -> Optional[np.ndarray]:
    if source is None:
        return None
    arr = source.values if isinstance(source, TrajectoryField) else np.asarray(source, dtype=float)
    if arr.shape != (grid.Nt + 1, m, grid.Nx):
        raise DimensionMismatch(f"source shape {arr.shape} does not fit the grid")
    return arr


def solve_forward(opd: DiscreteOperator, y0, source=None) -> TrajectoryField:
    g, m = opd.grid, opd.sys.m
    y0 = np.asarray(y0, dtype=float)
    if y0.shape != (m, g.Nx):
        raise DimensionMismatch(f"initial state shape {y0.shape}, expected {(m, g.Nx)}")
    r = _source_array(source, g, m)
    out = np.empty((g.Nt + 1, m, g.Nx))
    out[0] = y0
    y = y0.ravel()
    for k in range(g.Nt):
        rhs = y if r is None else y + g.dt * r[k + 1].ravel()
        y = opd.solve_step(rhs)
        out[k + 1] = y.reshape(m, g.Nx)
    if not np.all(np.isfinite(out)):
        raise Diverged("forward solve produced non-finite values")
    return TrajectoryField(out, g)


def solve_adjoint(opd: DiscreteOperator, psiT) -> TrajectoryField:
    g, m = opd.grid, opd.sys.m
    psiT = np.asarray(psiT, dtype=float)
    if psiT.shape != (m, g.Nx):
        raise DimensionMismatch(f"terminal state shape {psiT.shape}, expected {(m, g.Nx)}")
    out = np.empty((g.Nt + 1, m, g.Nx))
    out[-1] = psiT
    psi = psiT.ravel()
    for k in range(g.Nt - 1, -1, -1):
        psi = opd.solve_step_transposed(psi)
        out[k] = psi.reshape(m, g.Nx)
    if not np.all(np.isfinite(out)):
        raise Diverged("adjoint solve produced non-finite values")
    return TrajectoryField(out, g)


def duality_pairing(y: TrajectoryField, psi: TrajectoryField, source=None) -> tuple[float, float]:
    """(<y^N, psi^N> - <y^0, psi^0>, sum_k dt <r^k, psi^{k-1}>)."""
    g = y.grid
    lhs = inner(y.terminal, psi.terminal, g.dx) - inner(y.initial, psi.initial, g.dx)
    r = _source_array(source, g, y.m)
    rhs = 0.0 if r is None else g.dt * g.dx * float(np.sum(r[1:] * psi.values[:-1]))
    return lhs, rhs


def duality_defect(opd: DiscreteOperator, y0, source, psiT) -> float:
    y = solve_forward(opd, y0, source)
    psi = solve_adjoint(opd, psiT)
    lhs, rhs = duality_pairing(y, psi, source)
    return abs(lhs - rhs)


def _matrix_norm(M: np.ndarray) -> float:
    return max(np.linalg.norm(M, 1), np.linalg.norm(M, np.inf))


def energy_constant(sys: CoupledSystem) -> float:
    """C = 2 (1 + ||A||) + ||G||^2 / min eig D, norms taken as max(1-norm, inf-norm)."""
    dmin = min(np.linalg.eigvalsh(d).min() for d in sys.D)
    gnorm = max(_matrix_norm(sys.G[:, :, i]) for i in range(sys.n))
    return 2.0 * (1.0 + _matrix_norm(sys.A)) + gnorm ** 2 / dmin


def energy_certificate(sys: CoupledSystem, traj: TrajectoryField, C: Optional[float] = None,
                       rtol: float = 1e-8) -> tuple[float, bool]:
    """Check that k -> exp(C t_k) ||psi^k||^2 is nondecreasing."""
    C = energy_constant(sys) if C is None else float(C)
    e = np.exp(C * traj.grid.t) * traj.norms() ** 2
    monotone = bool(np.all(e[1:] >= e[:-1] * (1.0 - rtol)))
    return C, monotone
