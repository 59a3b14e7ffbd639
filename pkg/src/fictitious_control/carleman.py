"""Carleman weights, cutoffs and weighted functionals on an interval.

With tau(t) = t^5 (T - t)^5 and M = sup eta0,

    alpha = (exp(12 lam M) - exp(lam (10 M + eta0))) / tau
    xi    = exp(lam (10 M + eta0)) / tau
    rho   = exp(-2 s1 alpha) xi^(2p + 7).

All weighted quantities are evaluated in log space; anything below 1e-300
snaps to zero, and the t = 0, T slices are zero by limit.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from typing import Optional, Union

import numpy as np
from numpy.polynomial import Polynomial

from .errors import ConstructionFailed, DegenerateRegion, OutOfRange

UNDERFLOW = 1e-300
LOG_UNDERFLOW = np.log(UNDERFLOW)
OMEGA0_RATIO = 0.6
SHRINK = 0.8
SUPPORT_RATIO = 0.9
S_MARGIN = 1.0 + 1e-6


@dataclass(frozen=True)
class WeightConfig:
    lam: float = 1.0
    sigma: Union[float, str] = "auto"
    p: int = 0
    s0_override: Optional[float] = None
    K: float = 0.5
    C_generic: float = 1.0
    lambda_min: float = 1.0

    def __post_init__(self):
        if not self.lambda_min > 0 or self.lam < self.lambda_min:
            raise OutOfRange(f"lambda={self.lam} below lambda_min={self.lambda_min}")
        if not 0 < self.K < 1:
            raise OutOfRange(f"K={self.K} outside (0, 1)")
        if self.sigma != "auto" and not float(self.sigma) > 0:
            raise OutOfRange(f"sigma={self.sigma} must be positive or 'auto'")
        if self.p < 0:
            raise OutOfRange("p must be nonnegative")
        if not self.C_generic > 0:
            raise OutOfRange("C_generic must be positive")

    @property
    def exponent(self) -> int:
        return 2 * self.p + 7


# eta0 -----------------------------------------------------------------------

@dataclass(frozen=True)
class EtaFunction:
    """eta0(x) = P(x / L) for a polynomial P on [0, 1]."""

    poly: Polynomial
    L: float
    center: float
    excluded: tuple[float, float]
    kappa: float
    sup_norm: float = 1.0

    def __call__(self, x):
        return self.poly(np.asarray(x, dtype=float) / self.L)

    def derivative(self, x, order: int = 1):
        return self.poly.deriv(order)(np.asarray(x, dtype=float) / self.L) / self.L ** order

    @property
    def coefficients(self) -> np.ndarray:
        return self.poly.coef.copy()


def build_eta0(L: float, omega_inner, p: int, grid: int = 10_000) -> EtaFunction:
    """Polynomial eta0 with simple zeros at 0 and L and one critical point.

    eta0' = (x_c - x) W(x) with W = I2 (x/L)^j - I1 (1 - x/L)^j, where the
    constants make eta0(L) = eta0(0) = 0 and W > 0 on (0, L).  The critical
    point x_c is the midpoint of ``omega_inner``.
    """
    a, b = float(omega_inner[0]), float(omega_inner[1])
    if not 0.0 < a < b < L:
        raise OutOfRange(f"omega_inner=({a}, {b}) not strictly inside (0, {L})")
    sc = 0.5 * (a + b) / L
    j = 1
    while not (1.0 / (j + 2) < sc < (j + 1.0) / (j + 2)):
        j += 1
    s = Polynomial([0.0, 1.0])
    lin = Polynomial([sc, -1.0])
    up, down = s ** j, (1 - s) ** j
    I1 = (up * lin).integ()(1.0) - (up * lin).integ()(0.0)
    I2 = (down * lin).integ()(1.0) - (down * lin).integ()(0.0)
    deriv = lin * (I2 * up - I1 * down)
    poly = deriv.integ(lbnd=0.0)
    poly = poly / poly(sc)

    xs = np.union1d(np.linspace(0.0, L, grid), [a, b])
    outside = (xs <= a) | (xs >= b)
    vals = poly(xs / L)
    slopes = np.abs(poly.deriv()(xs / L) / L)
    kappa = float(slopes[outside].min()) if outside.any() else float("nan")
    if not kappa > 0 or vals[1:-1].min() <= 0 or abs(poly(1.0)) > 1e-12:
        raise ConstructionFailed(f"eta0 construction failed (kappa={kappa})")
    # the maximum sits at the critical point, where poly equals 1
    return EtaFunction(poly=poly, L=L, center=sc * L, excluded=(a, b), kappa=kappa,
                       sup_norm=float(poly(sc)))


# weights ----------------------------------------------------------------------

@dataclass(frozen=True)
class S1Result:
    s1: float
    sigma: float
    s0: float
    explicit: float
    admissible: float


@dataclass(frozen=True)
class CarlemanWeights:
    eta: EtaFunction
    lam: float
    sigma: float
    T: float
    p: int
    s1: float

    @property
    def M(self) -> float:
        return self.eta.sup_norm

    @property
    def exponent(self) -> int:
        return 2 * self.p + 7

    def log_tau(self, t):
        t = np.asarray(t, dtype=float)
        return 5.0 * (np.log(t) + np.log(self.T - t))

    def numerators(self, x):
        """(alpha * tau, log(xi * tau)) as functions of x."""
        e = self.lam * (10.0 * self.M + self.eta(x))
        return np.exp(12.0 * self.lam * self.M) - np.exp(e), e


def _check_open(t, T):
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0.0) or np.any(t >= T):
        raise OutOfRange("weights are defined only for 0 < t < T")
    return t


def eval_weights(w: CarlemanWeights, t, x):
    t = _check_open(t, w.T)
    a, loge = w.numerators(x)
    lt = w.log_tau(t)
    return a * np.exp(-lt), np.exp(loge - lt)


def eval_star_weights(w: CarlemanWeights, t):
    t = _check_open(t, w.T)
    lt = w.log_tau(t)
    a0 = np.exp(12.0 * w.lam * w.M) - np.exp(10.0 * w.lam * w.M)
    return a0 * np.exp(-lt), np.exp(10.0 * w.lam * w.M - lt)


def log_weight(w: CarlemanWeights, s: float, power: float, t, x):
    """log(exp(-2 s alpha) xi^power), -inf at t in {0, T}."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    t, x = np.broadcast_arrays(t, x)
    out = np.full(t.shape, -np.inf)
    inside = (t > 0.0) & (t < w.T)
    if inside.any():
        a, loge = w.numerators(x[inside])
        lt = w.log_tau(t[inside])
        out[inside] = -2.0 * s * a * np.exp(-lt) + power * (loge - lt)
    return out


def weight(w: CarlemanWeights, s: float, power: float, t, x):
    lw = log_weight(w, s, power, t, x)
    return np.where(lw < LOG_UNDERFLOW, 0.0, np.exp(np.minimum(lw, 700.0)))


def eval_rho(w: CarlemanWeights, t, x):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0) or np.any(t > w.T):
        raise OutOfRange("rho is defined for 0 <= t <= T")
    return weight(w, w.s1, w.exponent, t, x)


def admissible_s(eta: EtaFunction, T: float, lam: float, p: int, samples: int = 2001) -> float:
    """Smallest s (times a small margin) with rho <= 1 and rho increasing in tau.

    With u = 1/tau >= u_min = 4^5 / T^10, log rho = -2 s a u + q (log b + log u)
    is nonincreasing on [u_min, inf) and nonpositive at u_min once
    s >= q max(1, log u_min + log b) / (2 a u_min).
    """
    q = 2 * p + 7
    M = eta.sup_norm
    eta_vals = np.linspace(0.0, M, samples)
    a = np.exp(12.0 * lam * M) - np.exp(lam * (10.0 * M + eta_vals))
    logb = lam * (10.0 * M + eta_vals)
    log_umin = 5.0 * np.log(4.0) - 10.0 * np.log(T)
    umin = np.exp(log_umin)
    s = q * np.maximum(1.0, log_umin + logb) / (2.0 * a * umin)
    return S_MARGIN * float(s.max())


def explicit_s_term(eta: EtaFunction, lam: float, p: int, grid: int = 2001) -> float:
    M = eta.sup_norm
    xs = np.linspace(0.0, eta.L, grid)
    e = eta(xs)
    ratio = (10.0 * M + e) / (np.exp(12.0 * lam * M) - np.exp(lam * (10.0 * M + e)))
    return 3.0 ** 5 * (2 * p + 7) * lam / 4.0 ** 10 * float(ratio.max())


def compute_s1(cfg: WeightConfig, eta: EtaFunction, T: float, lam: Optional[float] = None) -> S1Result:
    """s1 = max(s0, explicit term); s0 defaults to the rho-admissible threshold."""
    lam = cfg.lam if lam is None else lam
    adm = admissible_s(eta, T, lam, cfg.p)
    s0 = adm if cfg.s0_override is None else float(cfg.s0_override)
    explicit = explicit_s_term(eta, lam, cfg.p)
    s1 = max(s0, explicit)
    return S1Result(s1=s1, sigma=s1 / (T ** 5 + T ** 10), s0=s0, explicit=explicit, admissible=adm)


def build_weights(cfg: WeightConfig, eta: EtaFunction, T: float) -> CarlemanWeights:
    """Weights with s1 = sigma (T^5 + T^10), or the rho-admissible s when sigma='auto'."""
    if cfg.sigma == "auto":
        s1 = admissible_s(eta, T, cfg.lam, cfg.p)
        if cfg.s0_override is not None:
            s1 = max(s1, float(cfg.s0_override))
        sigma = s1 / (T ** 5 + T ** 10)
    else:
        sigma = float(cfg.sigma)
        s1 = sigma * (T ** 5 + T ** 10)
    return CarlemanWeights(eta=eta, lam=cfg.lam, sigma=sigma, T=T, p=cfg.p, s1=s1)


def log_regularity_constant(w: CarlemanWeights, K: float, nt: int = 400, nx: int = 200) -> float:
    """log C_K with exp(2 K s1 alpha*) <= C_K xi^(-2p-7) exp(2 s1 alpha).

    Finite exactly when K alpha* < alpha everywhere; returns +inf otherwise.
    The supremum over t is taken in closed form in u = 1/tau.
    """
    q = w.exponent
    xs = np.linspace(0.0, w.eta.L, nx)
    a, loge = w.numerators(xs)
    a0 = np.exp(12.0 * w.lam * w.M) - np.exp(10.0 * w.lam * w.M)
    c = 2.0 * w.s1 * (a - K * a0)
    if np.any(c <= 0.0):
        return float("inf")
    umin = 4.0 ** 5 / w.T ** 10
    u = np.maximum(umin, q / c)
    vals = -c * u + q * (loge + np.log(u))
    # grid cross-check over t in (0, T)
    ts = np.linspace(0.0, w.T, nt + 2)[1:-1]
    lt = w.log_tau(ts)[:, None]
    grid_vals = -c[None, :] * np.exp(-lt) + q * (loge[None, :] - lt)
    return float(max(vals.max(), grid_vals.max()))


# cutoffs ----------------------------------------------------------------------

def smoothstep(z, order: int):
    """Polynomial step of degree 2 order + 1; derivatives 1..order vanish at 0 and 1."""
    z = np.clip(np.asarray(z, dtype=float), 0.0, 1.0)
    N = order
    acc = np.zeros_like(z)
    for k in range(N + 1):
        acc += comb(N + k, k) * comb(2 * N + 1, N - k) * (-z) ** k
    return z ** (N + 1) * acc


@dataclass(frozen=True)
class CutoffFamily:
    omega: tuple[float, float]
    omegas: tuple[tuple[float, float], ...]  # omega_0 .. omega_{p+2}
    support: tuple[float, float]
    order: int

    @property
    def center(self) -> float:
        return 0.5 * (self.omega[0] + self.omega[1])

    def theta(self, x):
        x = np.asarray(x, dtype=float)
        h0 = 0.5 * (self.omegas[0][1] - self.omegas[0][0])
        hs = 0.5 * (self.support[1] - self.support[0])
        z = (hs - np.abs(x - self.center)) / (hs - h0)
        return smoothstep(z, self.order)

    def indicator(self, x, i: int = 0):
        a, b = self.omegas[i]
        x = np.asarray(x, dtype=float)
        return ((x > a) & (x < b)).astype(float)


def build_cutoffs(omega, p: int, dx: Optional[float] = None) -> CutoffFamily:
    """Nested intervals omega_i shrinking toward the centre of omega, and theta.

    omega_0 has 0.6 times the half-width of omega, each further omega_i 0.8
    times the previous one; theta ramps from 1 on omega_0 to 0 at 0.9 times
    the half-width of omega.
    """
    a, b = float(omega[0]), float(omega[1])
    if not a < b:
        raise DegenerateRegion(f"empty control region ({a}, {b})")
    c0 = 0.5 * (a + b)
    h = 0.5 * (b - a)
    h0 = OMEGA0_RATIO * h
    omegas = tuple((c0 - h0 * SHRINK ** i, c0 + h0 * SHRINK ** i) for i in range(p + 3))
    h_theta = SUPPORT_RATIO * h
    fam = CutoffFamily(omega=(a, b), omegas=omegas, support=(c0 - h_theta, c0 + h_theta), order=p + 2)
    if dx is not None:
        innermost = omegas[-1][1] - omegas[-1][0]
        if innermost < 10.0 * dx:
            raise DegenerateRegion(
                f"control region too small for nesting depth {p + 3} at dx={dx:g}")
    return fam


# functionals -----------------------------------------------------------------

def _trapz2(f, t, x):
    return float(np.trapezoid(np.trapezoid(f, x, axis=-1), t))


def carleman_functional(w: CarlemanWeights, s: float, lam: float, values, t, x) -> float:
    """I(s, lam; u) for u sampled as values[k, comp, i] at (t_k, x_i).

    ``x`` are interior nodes of a uniform grid; the Dirichlet zeros are added
    before differentiating and integrating.
    """
    u = np.asarray(values, dtype=float)
    if u.ndim == 2:
        u = u[:, None, :]
    x = np.asarray(x, dtype=float)
    dx = x[1] - x[0]
    xf = np.concatenate([[x[0] - dx], x, [x[-1] + dx]])
    uf = np.pad(u, ((0, 0), (0, 0), (1, 1)))
    grad = np.gradient(uf, dx, axis=-1)
    T, X = np.meshgrid(t, xf, indexing="ij")
    w3 = weight(w, s, 3.0, T, X)
    w1 = weight(w, s, 1.0, T, X)
    zero_mass = (np.sum(uf ** 2, axis=1), np.sum(grad ** 2, axis=1))
    return s ** 3 * lam ** 4 * _trapz2(w3 * zero_mass[0], t, xf) + s * lam ** 2 * _trapz2(w1 * zero_mass[1], t, xf)


@dataclass
class WeightBoundReport:
    a: float
    r: int
    time_constant: float
    space_constant: float
    finite: bool = field(init=False)

    def __post_init__(self):
        self.finite = bool(np.isfinite(self.time_constant) and np.isfinite(self.space_constant))


def weight_bound_diagnostics(w: CarlemanWeights, a: float, r: int, nt: int = 400, nx: int = 400,
                             times=None) -> WeightBoundReport:
    """Empirical constants of the time and space derivative bounds of xi^a e^(-2 s1 alpha).

    time:  sup |d_t f| / (T xi^(6/5) f),  space: sup |d_x^r f| / (xi^r f),
    with f = xi^a exp(-2 s1 alpha) and derivatives by centered differences.
    """
    if not 0 <= r <= w.p + 2:
        raise OutOfRange(f"r={r} outside 0..{w.p + 2}")
    ts = np.linspace(0.0, w.T, nt + 2)[1:-1] if times is None else np.asarray(times, dtype=float)
    xs = np.linspace(0.0, w.eta.L, nx)
    dt = ts[1] - ts[0]
    dx = xs[1] - xs[0]
    Tg, Xg = np.meshgrid(ts, xs, indexing="ij")
    logf = log_weight(w, w.s1, a, Tg, Xg)
    _, xi = eval_weights(w, Tg, Xg)
    # d_t f / f = d_t log f exactly
    dlog_t = np.gradient(logf, dt, axis=0)
    time_c = float(np.max(np.abs(dlog_t) / (w.T * xi ** 1.2)))
    # h_k = d_x^k f / f obeys h_{k+1} = d_x h_k + (d_x log f) h_k
    dlog_x = np.gradient(logf, dx, axis=1)
    h = np.ones_like(logf)
    for _ in range(r):
        h = np.gradient(h, dx, axis=1) + dlog_x * h
    space_c = float(np.max(np.abs(h) / xi ** r))
    return WeightBoundReport(a=a, r=r, time_constant=time_c, space_constant=space_c)
