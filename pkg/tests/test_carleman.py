import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fictitious_control.carleman import (
    S_MARGIN, WeightConfig, admissible_s, build_cutoffs, build_eta0, build_weights, carleman_functional,
    compute_s1, eval_rho, eval_star_weights, eval_weights, explicit_s_term, log_regularity_constant,
    log_weight, smoothstep, weight, weight_bound_diagnostics,
)
from fictitious_control.errors import DegenerateRegion, OutOfRange


@pytest.fixture
def eta():
    cut = build_cutoffs((0.3, 0.7), 0)
    return build_eta0(1.0, cut.omegas[-1], 0)


@pytest.fixture
def w1(eta):
    return build_weights(WeightConfig(p=0), eta, 1.0)


# eta0 -------------------------------------------------------------------------

def test_eta_vanishes_on_boundary_and_peaks_at_one(eta):
    assert eta(0.0) == pytest.approx(0.0, abs=1e-14)
    assert eta(1.0) == pytest.approx(0.0, abs=1e-12)
    xs = np.linspace(0, 1, 5001)[1:-1]
    assert np.all(eta(xs) > 0)
    assert eta.sup_norm == 1.0
    assert eta(eta.center) == pytest.approx(1.0, abs=1e-15)
    assert np.max(eta(xs)) <= 1.0 + 1e-15


def test_eta_gradient_bounded_below_outside_inner_region(eta):
    xs = np.linspace(0, 1, 20001)
    a, b = eta.excluded
    out = (xs <= a) | (xs >= b)
    assert eta.kappa > 0
    assert np.min(np.abs(eta.derivative(xs[out]))) >= eta.kappa * (1 - 1e-9)
    # the only critical point is the centre
    assert eta.derivative(eta.center) == pytest.approx(0.0, abs=1e-12)


def test_eta_rejects_region_touching_boundary():
    with pytest.raises(OutOfRange):
        build_eta0(1.0, (0.0, 0.3), 0)


@pytest.mark.parametrize("center", [0.2, 0.5, 0.8])
def test_eta_off_centre(center):
    e = build_eta0(1.0, (center - 0.05, center + 0.05), 0)
    assert e.kappa > 0
    assert e(e.center) == pytest.approx(1.0)


# weights ----------------------------------------------------------------------

def test_xi_and_alpha_closed_form(eta):
    w = build_weights(WeightConfig(sigma=1.0), eta, 1.0)
    alpha, xi = eval_weights(w, 0.5, eta.center)
    assert xi == pytest.approx(1024.0 * np.exp(11.0), rel=1e-13)
    assert alpha == pytest.approx(1024.0 * (np.exp(12.0) - np.exp(11.0)), rel=1e-13)


def test_star_weights_dominate(w1):
    t = np.linspace(0.01, 0.99, 50)
    x = np.linspace(0, 1, 40)
    astar, xistar = eval_star_weights(w1, t)
    a, xi = eval_weights(w1, t[:, None], x[None, :])
    assert np.all(astar[:, None] >= a * (1 - 1e-14))
    assert np.all(xistar[:, None] <= xi * (1 + 1e-14))


def test_weights_reject_closed_endpoints(w1):
    with pytest.raises(OutOfRange):
        eval_weights(w1, 0.0, 0.5)
    with pytest.raises(OutOfRange):
        eval_star_weights(w1, 1.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 0.49), st.floats(0.0, 1.0))
def test_weights_symmetric_in_time(t, x):
    eta = build_eta0(1.0, (0.45, 0.55), 0)
    w = build_weights(WeightConfig(sigma=1.0), eta, 1.0)
    a1, x1 = eval_weights(w, t, x)
    a2, x2 = eval_weights(w, 1.0 - t, x)
    assert a1 == pytest.approx(a2, rel=1e-12)
    assert x1 == pytest.approx(x2, rel=1e-12)


def test_sigma_one_gives_s1_two(eta):
    assert build_weights(WeightConfig(sigma=1.0), eta, 1.0).s1 == 2.0


def test_explicit_term_against_dense_grid(eta):
    xs = np.linspace(0, 1, 200001)
    e = eta(xs)
    ratio = (10 + e) / (np.exp(12.0) - np.exp(10 + e))
    oracle = 3 ** 5 * 7 / 4 ** 10 * ratio.max()
    assert explicit_s_term(eta, 1.0, 0) == pytest.approx(oracle, rel=1e-6)


def test_compute_s1_is_max_of_parts(eta):
    r = compute_s1(WeightConfig(), eta, 1.0)
    assert r.s1 == max(r.s0, r.explicit)
    assert r.s0 == r.admissible
    big = compute_s1(WeightConfig(s0_override=1e3), eta, 1.0)
    assert big.s1 == 1e3


def test_rho_zero_at_endpoints_and_bounded(w1):
    x = np.linspace(0, 1, 200)
    t = np.linspace(0, 1, 200)
    rho = eval_rho(w1, t[:, None], x[None, :])
    assert np.all(rho[0] == 0) and np.all(rho[-1] == 0)
    assert rho.max() <= 1.0


def test_admissible_s_is_nearly_sharp(eta):
    # halving s lets rho exceed one at mid-horizon
    s = admissible_s(eta, 1.0, 1.0, 0) / S_MARGIN
    w = build_weights(WeightConfig(sigma="auto"), eta, 1.0)
    x = np.linspace(0, 1, 401)
    assert np.exp(log_weight(w, 0.5 * s, 7, 0.5, x)).max() > 1.0
    assert np.exp(log_weight(w, s, 7, 0.5, x)).max() <= 1.0 + 1e-12


def test_rho_minimum_over_middle_interval_at_endpoints(w1):
    t = np.linspace(0.25, 0.75, 201)
    for x in np.linspace(0, 1, 11):
        lw = log_weight(w1, w1.s1, w1.exponent, t, x)
        assert np.argmin(lw) in (0, len(t) - 1)


def test_weight_snaps_underflow_to_zero(w1):
    assert weight(w1, 1e3, 7, 1e-3, 0.5) == 0.0


def test_regularity_constant_finite_for_half(w1):
    assert np.isfinite(log_regularity_constant(w1, 0.5))


def test_regularity_constant_infinite_when_alpha_star_too_large(w1):
    # K alpha* >= alpha at the maximum of eta once K is close to one
    a0 = np.exp(12.0) - np.exp(10.0)
    a_min = np.exp(12.0) - np.exp(11.0)
    K = 0.5 * (a_min / a0 + 1.0)
    assert np.isinf(log_regularity_constant(w1, K))


# cutoffs ----------------------------------------------------------------------

def test_smoothstep_endpoint_derivatives_vanish():
    order = 3
    z = np.linspace(0, 1, 4001)
    f = smoothstep(z, order)
    assert f[0] == 0 and f[-1] == pytest.approx(1.0)
    assert np.all(np.diff(f) >= -1e-15)
    # f(z) = O(z^(order+1)) at 0 and 1 - f = O((1-z)^(order+1)) at 1
    eps = 1e-3
    assert smoothstep(2 * eps, order) / smoothstep(eps, order) == pytest.approx(2 ** (order + 1), rel=1e-2)
    assert (1 - smoothstep(1 - 2 * eps, order)) / (1 - smoothstep(1 - eps, order)) == pytest.approx(
        2 ** (order + 1), rel=1e-2)


def test_cutoff_geometry():
    cut = build_cutoffs((0.3, 0.7), 2)
    assert len(cut.omegas) == 5
    for (a0, b0), (a1, b1) in zip(cut.omegas, cut.omegas[1:]):
        assert a0 < a1 < b1 < b0
    x = np.linspace(0, 1, 2001)
    th = cut.theta(x)
    assert np.all((th >= 0) & (th <= 1))
    a, b = cut.omegas[0]
    assert np.all(th[(x >= a) & (x <= b)] == 1.0)
    assert np.all(th[(x <= cut.support[0]) | (x >= cut.support[1])] == 0.0)
    assert cut.omega[0] < cut.support[0] and cut.support[1] < cut.omega[1]


def test_cutoff_rejects_tiny_region():
    with pytest.raises(DegenerateRegion):
        build_cutoffs((0.5, 0.51), 0, dx=0.01)
    with pytest.raises(DegenerateRegion):
        build_cutoffs((0.5, 0.5), 0)


# functional -------------------------------------------------------------------

def _sample(t, x, T):
    return np.sin(np.pi * x)[None, :] * (t * (T - t))[:, None]


def test_functional_zero_and_quadratic(w1):
    t = np.linspace(0, 1, 81)
    x = np.linspace(0, 1, 61)[1:-1]
    u = _sample(t, x, 1.0)
    s = w1.s1
    assert carleman_functional(w1, s, 1.0, np.zeros_like(u), t, x) == 0.0
    base = carleman_functional(w1, s, 1.0, u, t, x)
    assert base > 0
    assert carleman_functional(w1, s, 1.0, 2 * u, t, x) == pytest.approx(4 * base, rel=1e-12)


def test_functional_matches_refined_oracle(w1):
    s, lam = w1.s1, 1.0
    t = np.linspace(0, 1, 401)
    x = np.linspace(0, 1, 402)[1:-1]
    approx = carleman_functional(w1, s, lam, _sample(t, x, 1.0), t, x)
    # oracle: analytic gradient, much finer Simpson quadrature
    from scipy.integrate import simpson
    tf = np.linspace(0, 1, 2001)
    xf = np.linspace(0, 1, 2001)
    Tg, Xg = np.meshgrid(tf, xf, indexing="ij")
    amp = (tf * (1 - tf))[:, None]
    u2 = (np.sin(np.pi * Xg) * amp) ** 2
    g2 = (np.pi * np.cos(np.pi * Xg) * amp) ** 2
    f = s ** 3 * lam ** 4 * weight(w1, s, 3, Tg, Xg) * u2 + s * lam ** 2 * weight(w1, s, 1, Tg, Xg) * g2
    oracle = simpson(simpson(f, x=xf, axis=1), x=tf)
    assert approx == pytest.approx(oracle, rel=1e-2)


# derivative bounds ------------------------------------------------------------

@pytest.mark.parametrize("r", [0, 1, 2])
def test_weight_bounds_finite(w1, r):
    rep = weight_bound_diagnostics(w1, 7.0, r)
    assert rep.finite
    if r == 0:
        assert rep.space_constant == pytest.approx(1.0)


def test_weight_bound_order_checked(w1):
    with pytest.raises(OutOfRange):
        weight_bound_diagnostics(w1, 7.0, 3)


def test_weight_config_validation():
    with pytest.raises(OutOfRange):
        WeightConfig(lam=0.5)
    with pytest.raises(OutOfRange):
        WeightConfig(K=1.0)
    with pytest.raises(OutOfRange):
        WeightConfig(sigma=-1.0)
