import numpy as np
import pytest

from conftest import random_system
from fictitious_control.algebra import extract_inverse_operator, pipeline_order
from fictitious_control.algebra.operator import DifferentialOperator
from fictitious_control.compose import (
    combine_and_verify, spatial_derivative, stencil_reach, synthesize_reduced, verify_algebraic_residual,
)
from fictitious_control.errors import DimensionMismatch, GridTooCoarse
from fictitious_control.pde import Grid, TrajectoryField, assemble, solve_forward


def _smooth_source(grid, m, center=0.5, width=0.05):
    """theta v stand-in: a smooth space-time bump well inside omega."""
    x, t = grid.x, grid.t
    bx = np.exp(-((x - center) / width) ** 2)
    bx[np.abs(x - center) > 3 * width] = 0.0
    bt = np.sin(np.pi * t / grid.T) ** 8
    amps = np.linspace(1.0, -0.5, m)
    return TrajectoryField(bt[:, None, None] * amps[None, :, None] * bx[None, None, :], grid)


@pytest.fixture(scope="module")
def setup():
    sys = random_system(4, 3, seed=7)
    B = extract_inverse_operator(sys, pipeline_order(sys))
    return sys, B


def test_stencils_second_order_accurate():
    errs = {r: [] for r in range(1, 5)}
    for Nx in (99, 199):
        grid = Grid(Nx=Nx, Nt=2)
        x = grid.x
        f = np.sin(2 * np.pi * x) * np.sin(np.pi * x) ** 6  # vanishes to high order at the ends
        for r in range(1, 5):
            ref = np.polynomial.chebyshev.Chebyshev.interpolate(
                lambda z: np.sin(2 * np.pi * z) * np.sin(np.pi * z) ** 6, 60, domain=[0, 1]).deriv(r)(x)
            errs[r].append(np.abs(spatial_derivative(f, r, grid.dx) - ref).max())
    for r, (e1, e2) in errs.items():
        assert 3.5 < e1 / e2 < 4.5, r
    assert [stencil_reach(r) for r in range(5)] == [0, 1, 1, 2, 2]


def test_zero_source_gives_zero(setup):
    sys, B = setup
    grid = Grid(Nx=60, Nt=20)
    f = TrajectoryField.zeros(grid, sys.m)
    yh, uh = synthesize_reduced(sys, B, f, grid)
    assert not yh.values.any() and not uh.values.any()
    assert verify_algebraic_residual(sys, yh, uh, f, grid) == 0.0


def test_fully_actuated_case_is_trivial():
    sys = random_system(2, 2, seed=1)
    B = extract_inverse_operator(sys)
    grid = Grid(Nx=60, Nt=40)
    f = _smooth_source(grid, 2)
    yh, uh = synthesize_reduced(sys, B, f, grid)
    assert not yh.values.any()
    np.testing.assert_array_equal(uh.values, -f.values)
    assert verify_algebraic_residual(sys, yh, uh, f, grid) == 0.0
    opd = assemble(sys, grid)
    y_tilde = solve_forward(opd, np.zeros((2, grid.Nx)), f)
    comp = combine_and_verify(sys, y_tilde, yh, uh, grid, opd)
    np.testing.assert_array_equal(comp.u.values, f.values)
    assert comp.scheme_residual_controlled <= 1e-10 * np.abs(f.values).max()
    assert comp.residual_uncontrolled == 0.0


def test_linearity(setup):
    sys, B = setup
    grid = Grid(Nx=80, Nt=30)
    f = _smooth_source(grid, sys.m)
    y1, u1 = synthesize_reduced(sys, B, f, grid)
    y2, u2 = synthesize_reduced(sys, B, f * 2.5, grid)
    np.testing.assert_allclose(y2.values, 2.5 * y1.values, rtol=1e-13, atol=1e-13)
    np.testing.assert_allclose(u2.values, 2.5 * u1.values, rtol=1e-13, atol=1e-11)


def test_outputs_inherit_support(setup):
    sys, B = setup
    grid = Grid(Nx=120, Nt=40)
    f = _smooth_source(grid, sys.m)
    yh, uh = synthesize_reduced(sys, B, f, grid)
    nz = np.flatnonzero(np.any(f.values != 0, axis=(0, 1)))
    reach = stencil_reach(B.max_space_order)
    mask = np.ones(grid.Nx, bool)
    mask[nz[0] - reach: nz[-1] + reach + 1] = False
    assert not uh.values[:, :, mask].any() and not yh.values[:, :, mask].any()
    # bt vanishes at both ends, so do y_hat and u_hat
    assert np.abs(yh.values[[0, -1]]).max() <= 1e-12 * np.abs(yh.values).max()
    assert np.abs(uh.values[[0, -1]]).max() < 1e-8 * np.abs(uh.values).max()


def test_uncontrolled_rows_exact_in_scheme(setup):
    sys, B = setup
    grid = Grid(Nx=120, Nt=80)
    f = _smooth_source(grid, sys.m)
    opd = assemble(sys, grid)
    y_tilde = solve_forward(opd, np.zeros((sys.m, grid.Nx)), f)
    yh, uh = synthesize_reduced(sys, B, f, grid)
    comp = combine_and_verify(sys, y_tilde, yh, uh, grid, opd)
    scale = np.abs(f.values).max() / grid.dx ** 2
    assert comp.scheme_residual_uncontrolled <= 1e-12 * scale
    assert comp.u.m == 3
    assert comp.support_violation <= 1e-8 * np.abs(uh.values).max()
    assert comp.hat_initial_norm == 0.0


def test_algebraic_residual_first_order_in_time(setup):
    sys, B = setup
    res = []
    for Nx, Nt in ((100, 100), (201, 200)):
        grid = Grid(Nx=Nx, Nt=Nt)
        f = _smooth_source(grid, sys.m)
        yh, uh = synthesize_reduced(sys, B, f, grid)
        res.append(verify_algebraic_residual(sys, yh, uh, f, grid))
    assert res[0] / res[1] >= 1.8


def test_grid_too_coarse(setup):
    sys, B = setup
    grid = Grid(Nx=30, Nt=10)
    f = _smooth_source(grid, sys.m)
    # footprint reaching the edge of omega
    wide = TrajectoryField(np.ones_like(f.values), grid)
    with pytest.raises(GridTooCoarse):
        synthesize_reduced(sys, B, wide, grid)
    tiny = Grid(Nx=3, Nt=10)
    with pytest.raises(GridTooCoarse):
        synthesize_reduced(sys, B, TrajectoryField.zeros(tiny, sys.m), tiny)


def test_shape_checks(setup):
    sys, B = setup
    grid = Grid(Nx=40, Nt=10)
    with pytest.raises(DimensionMismatch):
        synthesize_reduced(sys, DifferentialOperator(2, 2), TrajectoryField.zeros(grid, 4), grid)
    with pytest.raises(DimensionMismatch):
        synthesize_reduced(sys, B, TrajectoryField.zeros(Grid(Nx=41, Nt=10), 4), grid)
