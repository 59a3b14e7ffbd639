"""Coupled parabolic control system: definition, validation, actuation.

The system is

    dy/dt = div(D grad y) + G . grad y + A y + 1_omega B u     in (0, T) x Omega
    y = 0 on the boundary,

with ``m`` equations in ``n`` space dimensions and ``c`` controls acting on
the first ``c`` equations.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch

ELLIPTICITY_TOL = 1e-12


@dataclass(frozen=True)
class CoupledSystem:
    """Constant-coefficient coupled system.

    Array layouts:
      ``D``: (m, n, n), one symmetric diffusion matrix per equation;
      ``G``: (m, m, n), ``G[p, k]`` is the vector g_pk;
      ``A``: (m, m).
    """

    m: int
    n: int
    c: int
    D: np.ndarray
    G: np.ndarray
    A: np.ndarray
    T: float = 1.0
    L: float = 1.0
    omega: tuple[float, float] = (0.3, 0.7)

    def __post_init__(self):
        D = np.asarray(self.D, dtype=float)
        G = np.asarray(self.G, dtype=float)
        A = np.asarray(self.A, dtype=float)
        m, n = int(self.m), int(self.n)
        if m < 1 or n < 1:
            raise DimensionMismatch(f"m={m}, n={n} must be positive")
        if not 1 <= self.c <= m:
            raise DimensionMismatch(f"c={self.c} outside 1..{m}")
        if D.shape != (m, n, n):
            raise DimensionMismatch(f"D has shape {D.shape}, expected {(m, n, n)}")
        if G.shape != (m, m, n):
            raise DimensionMismatch(f"G has shape {G.shape}, expected {(m, m, n)}")
        if A.shape != (m, m):
            raise DimensionMismatch(f"A has shape {A.shape}, expected {(m, m)}")
        for name, arr in (("D", D), ("G", G), ("A", A)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "omega", (float(self.omega[0]), float(self.omega[1])))

    @classmethod
    def one_dimensional(cls, d, G, A, c, **kwargs) -> "CoupledSystem":
        """Build an n = 1 system from scalar diffusions and an m x m ``G``."""
        d = np.asarray(d, dtype=float).ravel()
        m = d.size
        G = np.asarray(G, dtype=float).reshape(m, m, 1)
        return cls(m=m, n=1, c=c, D=d.reshape(m, 1, 1), G=G, A=np.asarray(A, float), **kwargs)

    @property
    def h(self) -> int:
        return (self.m - self.c) * (self.n + 1)

    @property
    def diffusion(self) -> np.ndarray:
        """Scalar diffusion coefficients (n = 1 only)."""
        if self.n != 1:
            raise DimensionMismatch("scalar diffusion requested for n > 1")
        return self.D[:, 0, 0].copy()

    @property
    def G1(self) -> np.ndarray:
        """First-order couplings as an m x m matrix (n = 1 only)."""
        if self.n != 1:
            raise DimensionMismatch("scalar couplings requested for n > 1")
        return self.G[:, :, 0].copy()

    def with_coefficients(self, **changes) -> "CoupledSystem":
        fields = dict(m=self.m, n=self.n, c=self.c, D=self.D, G=self.G, A=self.A,
                      T=self.T, L=self.L, omega=self.omega)
        fields.update(changes)
        return CoupledSystem(**fields)

    def to_dict(self) -> dict:
        return {
            "m": self.m, "n": self.n, "c": self.c,
            "D": self.D.tolist(), "G": self.G.tolist(), "A": self.A.tolist(),
            "T": self.T, "L": self.L, "omega": list(self.omega),
        }


@dataclass(frozen=True)
class Violation:
    label: str
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    ellipticity_constant: float
    violations: tuple[Violation, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return not self.violations

    def labels(self) -> list[str]:
        return [v.label for v in self.violations]


def validate_system(sys: CoupledSystem) -> ValidationReport:
    findings = []
    eigmins = []
    for p, d in enumerate(sys.D):
        if not np.allclose(d, d.T, rtol=0.0, atol=ELLIPTICITY_TOL):
            findings.append(Violation("symmetry", f"d_{p + 1} is not symmetric"))
        eigmins.append(np.linalg.eigvalsh(0.5 * (d + d.T)).min())
    const = float(min(eigmins))
    if const <= ELLIPTICITY_TOL:
        findings.append(Violation("ellipticity", f"smallest diffusion eigenvalue {const:g} is not positive"))
    a, b = sys.omega
    if not (0.0 < a < b < sys.L):
        findings.append(Violation("omega", f"omega=({a}, {b}) not strictly interior to (0, {sys.L})"))
    if not sys.T > 0:
        findings.append(Violation("horizon", f"T={sys.T} must be positive"))
    if not np.all(np.isfinite(sys.G)) or not np.all(np.isfinite(sys.A)):
        findings.append(Violation("finite", "non-finite coupling coefficients"))
    return ValidationReport(ellipticity_constant=const, violations=tuple(findings))


@dataclass(frozen=True)
class ActuationMatrix:
    """B = (Id_c ; 0) of shape m x c."""

    m: int
    c: int

    def __post_init__(self):
        if not 1 <= self.c <= self.m:
            raise DimensionMismatch(f"c={self.c} outside 1..{self.m}")

    def matrix(self) -> np.ndarray:
        return np.eye(self.m, self.c)


def apply_actuation(B: ActuationMatrix, u, axis: int = 0) -> np.ndarray:
    """Embed a c-component field into m components (zeros below row c).

    ``axis`` is the component axis of ``u``.
    """
    u = np.asarray(u, dtype=float)
    if u.ndim == 0 or u.shape[axis] != B.c:
        raise DimensionMismatch(f"expected {B.c} components along axis {axis}, got shape {u.shape}")
    shape = list(u.shape)
    shape[axis] = B.m
    out = np.zeros(shape)
    idx = [slice(None)] * u.ndim
    idx[axis] = slice(0, B.c)
    out[tuple(idx)] = u
    return out
