"""Compose the fictitious control with the algebraic right inverse.

Given the fictitious source f = theta v driving all m equations, the operator
B produces (y_hat, u_hat) with L(y_hat, u_hat) = f.  Then y = y_tilde - y_hat
and u = -u_hat solve the original system with controls on the first c
equations only.

Spatial derivatives are repeated centered differences: d^r is D2^(r // 2)
applied after D1^(r % 2), with the Dirichlet zeros padded in.  Time
derivatives use np.gradient with second-order one-sided ends.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra.operator import DifferentialOperator
from .errors import DimensionMismatch, GridTooCoarse
from .model import CoupledSystem
from .pde import DiscreteOperator, Grid, TrajectoryField, assemble


def _d1(f: np.ndarray, dx: float) -> np.ndarray:
    g = np.pad(f, [(0, 0)] * (f.ndim - 1) + [(1, 1)])
    return (g[..., 2:] - g[..., :-2]) / (2.0 * dx)


def _d2(f: np.ndarray, dx: float) -> np.ndarray:
    g = np.pad(f, [(0, 0)] * (f.ndim - 1) + [(1, 1)])
    return (g[..., 2:] - 2.0 * f + g[..., :-2]) / dx ** 2


def spatial_derivative(f: np.ndarray, order: int, dx: float) -> np.ndarray:
    out = np.asarray(f, dtype=float)
    if order % 2:
        out = _d1(out, dx)
    for _ in range(order // 2):
        out = _d2(out, dx)
    return out


def time_derivative(f: np.ndarray, dt: float) -> np.ndarray:
    return np.gradient(f, dt, axis=0, edge_order=2)


def stencil_reach(order: int) -> int:
    """Grid cells touched on each side by the order-r stencil."""
    return order // 2 + order % 2


def _footprint(values: np.ndarray) -> np.ndarray:
    return np.flatnonzero(np.any(values != 0.0, axis=(0, 1)))


def synthesize_reduced(sys: CoupledSystem, B_op: DifferentialOperator, theta_v: TrajectoryField,
                       grid: Grid) -> tuple[TrajectoryField, TrajectoryField]:
    """(y_hat, u_hat) = B(theta v) on the grid, zero outside the stencil reach of supp(theta v)."""
    m, c = sys.m, sys.c
    if B_op.in_dim != m or B_op.out_dim != m + c or B_op.n != 1:
        raise DimensionMismatch(f"operator is {B_op.out_dim}x{B_op.in_dim}, expected {m + c}x{m} with n = 1")
    f = theta_v.values
    if f.shape != (grid.Nt + 1, m, grid.Nx):
        raise DimensionMismatch(f"theta_v shape {f.shape} does not fit the grid")
    order = B_op.max_space_order
    reach = stencil_reach(order)
    if grid.Nx < order + 3:
        raise GridTooCoarse(f"Nx={grid.Nx} cannot hold a stencil for derivatives of order {order}")
    idx = _footprint(f)
    if idx.size:
        a, b = sys.omega
        lo, hi = idx[0] - reach, idx[-1] + reach
        if lo < 0 or hi >= grid.Nx or grid.x[lo] <= a or grid.x[hi] >= b:
            raise GridTooCoarse(f"stencil reach {reach} leaves the control region at dx={grid.dx:g}")

    cache: dict = {}

    def deriv(comp: int, time: int, r: int) -> np.ndarray:
        key = (comp, time, r)
        if key not in cache:
            if time:
                cache[key] = time_derivative(deriv(comp, 0, r), grid.dt)
            else:
                cache[key] = spatial_derivative(f[:, comp, :], r, grid.dx)
        return cache[key]

    out = np.zeros((grid.Nt + 1, m + c, grid.Nx))
    for (o, i, k, alpha), v in B_op.coeffs.items():
        out[:, o, :] += v * deriv(i, k, alpha[0])
    y_hat = TrajectoryField(out[:, :m, :], grid)
    u_hat = TrajectoryField(out[:, m:, :], grid)
    return y_hat, u_hat


def _actuated(u: np.ndarray, m: int) -> np.ndarray:
    """B u as an m-component field: controls land on the first c equations."""
    out = np.zeros(u.shape[:1] + (m,) + u.shape[2:])
    out[:, : u.shape[1]] = u
    return out


def _apply_M(opd: DiscreteOperator, values: np.ndarray) -> np.ndarray:
    flat = values.reshape(values.shape[0], -1)
    return (opd.M @ flat.T).T.reshape(values.shape)


def verify_algebraic_residual(sys: CoupledSystem, y_hat: TrajectoryField, u_hat: TrajectoryField,
                              theta_v: TrajectoryField, grid: Grid, opd: DiscreteOperator = None) -> float:
    """max |(y_hat^k - y_hat^(k-1)) / dt - M y_hat^k - B u_hat^k - theta v^k| over k = 1..Nt.

    The time difference is the solver's backward step while y_hat was
    synthesized with centered differences, so the residual is O(dt) plus the
    O(dx^2) commutator error of the spatial stencils.
    """
    opd = assemble(sys, grid) if opd is None else opd
    yh = y_hat.values
    res = (yh[1:] - yh[:-1]) / grid.dt - _apply_M(opd, yh[1:]) \
        - _actuated(u_hat.values[1:], sys.m) - theta_v.values[1:]
    return float(np.max(np.abs(res)))


@dataclass
class ComposedSolution:
    y_hat: TrajectoryField
    u_hat: TrajectoryField
    y: TrajectoryField
    u: TrajectoryField
    residual_uncontrolled: float
    residual_controlled: float
    scheme_residual_uncontrolled: float
    scheme_residual_controlled: float
    terminal_norm: float
    fictitious_terminal_norm: float
    hat_terminal_norm: float
    hat_initial_norm: float
    support_violation: float

    @property
    def control_components(self) -> int:
        return self.u.m

    def summary(self) -> dict:
        return {
            "residual_uncontrolled": self.residual_uncontrolled,
            "residual_controlled": self.residual_controlled,
            "scheme_residual_uncontrolled": self.scheme_residual_uncontrolled,
            "scheme_residual_controlled": self.scheme_residual_controlled,
            "terminal_norm": self.terminal_norm,
            "fictitious_terminal_norm": self.fictitious_terminal_norm,
            "hat_terminal_norm": self.hat_terminal_norm,
            "hat_initial_norm": self.hat_initial_norm,
            "support_violation": self.support_violation,
            "control_components": self.control_components,
        }


def _norm(field: np.ndarray, dx: float) -> float:
    return float(np.sqrt(dx * np.sum(field ** 2)))


def combine_and_verify(sys: CoupledSystem, y_tilde: TrajectoryField, y_hat: TrajectoryField,
                       u_hat: TrajectoryField, grid: Grid, opd: DiscreteOperator = None) -> ComposedSolution:
    """y = y_tilde - y_hat, u = -u_hat, checked against the state equation.

    Two residuals are reported, each split into the controlled rows (first c)
    and the uncontrolled ones, which carry no control term at all:

    - the PDE residual (y^(k+1) - y^(k-1)) / (2 dt) - M y^k - B u^k at
      interior steps, a second-order reference for the time derivative that
      exposes the O(dt) error of the solver;
    - the scheme residual (y^k - y^(k-1)) / dt - M y^k - B u^k, the implicit
      Euler equation itself, which y_tilde satisfies exactly.
    """
    if u_hat.m != sys.c or y_hat.m != sys.m or y_tilde.m != sys.m:
        raise DimensionMismatch("component counts do not match the system")
    opd = assemble(sys, grid) if opd is None else opd
    y = y_tilde - y_hat
    u = u_hat * -1.0
    yv, bu = y.values, _actuated(u.values, sys.m)
    pde = (yv[2:] - yv[:-2]) / (2.0 * grid.dt) - _apply_M(opd, yv[1:-1]) - bu[1:-1]
    scheme = (yv[1:] - yv[:-1]) / grid.dt - _apply_M(opd, yv[1:]) - bu[1:]
    c = sys.c

    def split(res):
        unc = float(np.max(np.abs(res[:, c:]))) if c < sys.m else 0.0
        con = float(np.max(np.abs(res[:, :c]))) if c > 0 else 0.0
        return unc, con

    res_unc, res_con = split(pde)
    sch_unc, sch_con = split(scheme)
    a, b = sys.omega
    outside = (grid.x <= a) | (grid.x >= b)
    uh = u_hat.values
    viol = max(float(np.max(np.abs(uh[:, :, outside]), initial=0.0)),
               float(np.max(np.abs(uh[0]))), float(np.max(np.abs(uh[-1]))))
    return ComposedSolution(
        y_hat=y_hat, u_hat=u_hat, y=y, u=u,
        residual_uncontrolled=res_unc, residual_controlled=res_con,
        scheme_residual_uncontrolled=sch_unc, scheme_residual_controlled=sch_con,
        terminal_norm=_norm(y.terminal, grid.dx),
        fictitious_terminal_norm=_norm(y_tilde.terminal, grid.dx),
        hat_terminal_norm=_norm(y_hat.terminal, grid.dx),
        hat_initial_norm=_norm(y_hat.initial, grid.dx),
        support_violation=viol,
    )
