import warnings

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from fictitious_control import CoupledSystem
from fictitious_control.errors import DimensionMismatch
from fictitious_control.pde import (Grid, TrajectoryField, assemble, duality_defect, duality_pairing,
                                    energy_certificate, energy_constant, inner, solve_adjoint,
                                    solve_forward)

from conftest import random_system


def heat(m=1, d=1.0, T=0.1):
    return CoupledSystem.one_dimensional(d * np.ones(m), np.zeros((m, m)), np.zeros((m, m)), m, T=T)


def test_heat_stencil():
    g = Grid(5, 10)
    opd = assemble(heat(), g)
    M = opd.M.toarray() * g.dx ** 2
    np.testing.assert_allclose(np.diag(M), -2.0)
    np.testing.assert_allclose(np.diag(M, 1), 1.0)
    np.testing.assert_allclose(np.diag(M, -1), 1.0)


def test_uncoupled_block_diagonal():
    sys = CoupledSystem.one_dimensional([1.0, 2.0], np.zeros((2, 2)), np.zeros((2, 2)), 2)
    M = assemble(sys, Grid(6, 4)).M.toarray()
    assert not M[:6, 6:].any() and not M[6:, :6].any()


def test_transpose_identity():
    sys = random_system(3, 2)
    opd = assemble(sys, Grid(20, 10, T=sys.T))
    rng = np.random.default_rng(0)
    u, v = rng.standard_normal((2, opd.size))
    assert abs(u @ (opd.M @ v) - (opd.M.T @ u) @ v) <= 1e-14 * np.abs(opd.M).sum()


def test_forward_zero():
    sys = random_system(2, 1)
    g = Grid(10, 5, T=sys.T)
    y = solve_forward(assemble(sys, g), np.zeros((2, 10)))
    assert not y.values.any()


def test_heat_kernel_oracle():
    sys = heat(T=0.1)
    g = Grid(100, 200, T=0.1)
    y = solve_forward(assemble(sys, g), np.sin(np.pi * g.x)[None, :])
    exact = np.exp(-np.pi ** 2 * g.t)[:, None] * np.sin(np.pi * g.x)[None, :]
    err = np.max(np.abs(y.values[:, 0] - exact)) / np.max(np.abs(exact))
    assert err <= 0.05


def test_manufactured_refinement():
    # y = exp(-t) sin(pi x) with source chosen to match exactly
    sys = CoupledSystem.one_dimensional([0.5], np.array([[0.3]]), np.array([[0.2]]), 1, T=0.5)

    def error(Nx, Nt):
        g = Grid(Nx, Nt, T=0.5)
        t, x = g.t[:, None], g.x[None, :]
        y = np.exp(-t) * np.sin(np.pi * x)
        r = (-1 + 0.5 * np.pi ** 2 - 0.2) * y - 0.3 * np.pi * np.exp(-t) * np.cos(np.pi * x)
        sol = solve_forward(assemble(sys, g), y[0][None], r[:, None, :])
        return np.max(np.abs(sol.values[:, 0] - y))

    e1, e2 = error(39, 40), error(79, 80)
    assert e1 / e2 >= 1.8


def test_linearity():
    sys = random_system(2, 1)
    g = Grid(15, 20, T=sys.T)
    opd = assemble(sys, g)
    y0 = np.random.default_rng(1).standard_normal((2, 15))
    np.testing.assert_allclose(solve_forward(opd, 3.5 * y0).values, 3.5 * solve_forward(opd, y0).values,
                               rtol=1e-13, atol=1e-14)


def test_adjoint_zero_and_self_adjoint_case():
    A = np.array([[0.3, 0.1], [0.1, -0.2]])
    sys = CoupledSystem.one_dimensional([0.7, 0.7], np.zeros((2, 2)), A, 2, T=0.3)
    g = Grid(20, 30, T=0.3)
    opd = assemble(sys, g)
    assert not solve_adjoint(opd, np.zeros((2, 20))).values.any()
    psiT = np.random.default_rng(2).standard_normal((2, 20))
    back = solve_adjoint(opd, psiT).values
    fwd = solve_forward(opd, psiT).values
    np.testing.assert_allclose(back[::-1], fwd, atol=1e-12)


def test_adjoint_gronwall_bound():
    sys = random_system(3, 2, seed=5, d=np.array([0.5, 0.8, 1.0]))
    g = Grid(40, 60, T=sys.T)
    psi = solve_adjoint(assemble(sys, g), np.random.default_rng(3).standard_normal((3, 40)))
    C = energy_constant(sys)
    n = psi.norms()
    assert np.all(n <= np.exp(C * (g.T - g.t)) * n[-1] * (1 + 1e-12))


def test_shape_errors():
    sys = random_system(2, 1)
    opd = assemble(sys, Grid(10, 5, T=sys.T))
    with pytest.raises(DimensionMismatch):
        solve_forward(opd, np.zeros((3, 10)))
    with pytest.raises(DimensionMismatch):
        solve_adjoint(opd, np.zeros((2, 9)))


def test_peclet_warning():
    sys = CoupledSystem.one_dimensional([1e-3], np.array([[1.0]]), np.zeros((1, 1)), 1)
    with pytest.warns(RuntimeWarning):
        assemble(sys, Grid(10, 5))


def _draw(rng, m, g):
    return (rng.standard_normal((m, g.Nx)), rng.standard_normal((g.Nt + 1, m, g.Nx)),
            rng.standard_normal((m, g.Nx)))


def test_duality_zero_source():
    sys = random_system(3, 2, seed=4)
    g = Grid(50, 100, T=sys.T)
    opd = assemble(sys, g)
    rng = np.random.default_rng(0)
    for _ in range(5):
        y0, _, psiT = _draw(rng, 3, g)
        assert duality_defect(opd, y0, None, psiT) <= 1e-12
    assert duality_defect(opd, np.zeros((3, 50)), None, np.zeros((3, 50))) == 0.0


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_naive_adjoint_breaks_duality():
    # strong advection, adjoint advection discretized by upwinding instead of transposition
    G = np.array([[8.0, 4.0], [-6.0, 8.0]])
    sys = CoupledSystem.one_dimensional([0.05, 0.05], G, np.zeros((2, 2)), 2, T=0.2)
    g = Grid(50, 100, T=0.2)
    opd = assemble(sys, g)
    Nx, dx = g.Nx, g.dx
    lap = sp.diags([np.ones(Nx - 1), -2 * np.ones(Nx), np.ones(Nx - 1)], [-1, 0, 1]) / dx ** 2
    back = sp.diags([-np.ones(Nx - 1), np.ones(Nx)], [-1, 0]) / dx
    naive = sp.kron(sp.diags(sys.diffusion), lap) - sp.kron(sp.csr_matrix(G.T), back)
    step = sp.identity(2 * Nx, format="csc") - g.dt * naive.tocsc()
    rng = np.random.default_rng(0)
    y0, r, psiT = _draw(rng, 2, g)
    y = solve_forward(opd, y0, r)
    psi = np.empty((g.Nt + 1, 2 * Nx)); psi[-1] = psiT.ravel()
    for k in range(g.Nt - 1, -1, -1):
        psi[k] = sp.linalg.spsolve(step, psi[k + 1])
    psi = TrajectoryField(psi.reshape(g.Nt + 1, 2, Nx), g)
    lhs, rhs = duality_pairing(y, psi, r)
    assert abs(lhs - rhs) >= 0.1 * abs(lhs)
    assert duality_defect(opd, y0, r, psiT) <= 1e-12


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000))
def test_superposition(seed):
    sys = random_system(2, 1, seed=seed)
    g = Grid(12, 16, T=sys.T)
    opd = assemble(sys, g)
    rng = np.random.default_rng(seed)
    a, b = rng.standard_normal((2, 2, 12))
    ya, yb, yab = (solve_forward(opd, v) for v in (a, b, a + b))
    np.testing.assert_allclose(yab.values, ya.values + yb.values, atol=1e-12)


def test_energy_certificate_cases():
    sys = heat(m=2, T=0.2)
    g = Grid(30, 40, T=0.2)
    opd = assemble(sys, g)
    psi = solve_adjoint(opd, np.random.default_rng(0).standard_normal((2, 30)))
    assert energy_certificate(sys, psi, C=0.0)[1]
    assert energy_certificate(sys, solve_adjoint(opd, np.zeros((2, 30))))[1]
    coupled = random_system(3, 2, seed=9)
    gc = Grid(40, 80, T=coupled.T)
    opc = assemble(coupled, gc)
    rng = np.random.default_rng(1)
    for _ in range(20):
        assert energy_certificate(coupled, solve_adjoint(opc, rng.standard_normal((3, 40))))[1]


def test_csv_row_count(tmp_path):
    g = Grid(4, 3)
    traj = TrajectoryField(np.arange(4 * 2 * 4, dtype=float).reshape(4, 2, 4), g)
    n = traj.to_csv(tmp_path / "y.csv")
    lines = (tmp_path / "y.csv").read_text().strip().splitlines()
    assert n == (g.Nt + 1) * g.Nx * 2 == len(lines) - 1
