"""Constant-coefficient differential operators acting on polynomial fields.

A polynomial in (t, x_1..x_n) is a coefficient array ``c[a, b_1, .., b_n]``
for t^a x^b, as used by ``numpy.polynomial.polynomial``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as npoly

from ..errors import DimensionMismatch

Key = tuple  # (out, in, time_order, alpha)


@dataclass
class DifferentialOperator:
    out_dim: int
    in_dim: int
    n: int = 1
    coeffs: dict = field(default_factory=dict)

    def __post_init__(self):
        for (o, i, k, alpha), v in self.coeffs.items():
            if not (0 <= o < self.out_dim and 0 <= i < self.in_dim):
                raise DimensionMismatch(f"term ({o}, {i}) outside {self.out_dim}x{self.in_dim}")
            if k not in (0, 1) or len(alpha) != self.n:
                raise ValueError(f"bad term key {(o, i, k, alpha)}")
            if not np.isfinite(v):
                raise ValueError("non-finite coefficient")

    def add(self, out: int, inp: int, time: int, alpha, value: float):
        alpha = tuple(int(a) for a in alpha)
        if len(alpha) != self.n:
            raise ValueError(f"multi-index {alpha} has wrong length")
        key = (out, inp, time, alpha)
        v = self.coeffs.get(key, 0.0) + float(value)
        if v == 0.0:
            self.coeffs.pop(key, None)
        else:
            self.coeffs[key] = v

    @property
    def max_time_order(self) -> int:
        return max((k for (_, _, k, _) in self.coeffs), default=0)

    @property
    def max_space_order(self) -> int:
        return max((sum(a) for (_, _, _, a) in self.coeffs), default=0)

    def rows(self, out: int):
        return {(i, k, a): v for (o, i, k, a), v in self.coeffs.items() if o == out}

    def scaled(self, factor: float) -> "DifferentialOperator":
        return DifferentialOperator(self.out_dim, self.in_dim, self.n,
                                    {k: factor * v for k, v in self.coeffs.items()})


def differentiate(poly: np.ndarray, time: int, alpha) -> np.ndarray:
    out = np.asarray(poly, dtype=float)
    if time:
        out = npoly.polyder(out, m=time, axis=0)
    for i, a in enumerate(alpha):
        if a:
            out = npoly.polyder(out, m=a, axis=i + 1)
    return out


def poly_add(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    shape = tuple(max(a, b) for a, b in zip(p.shape, q.shape))
    out = np.zeros(shape)
    out[tuple(slice(0, s) for s in p.shape)] += p
    out[tuple(slice(0, s) for s in q.shape)] += q
    return out


def apply_operator_polynomial(op: DifferentialOperator, inputs) -> list[np.ndarray]:
    inputs = [np.asarray(q, dtype=float) for q in inputs]
    if len(inputs) != op.in_dim:
        raise DimensionMismatch(f"operator takes {op.in_dim} inputs, got {len(inputs)}")
    for q in inputs:
        if q.ndim != op.n + 1:
            raise DimensionMismatch(f"polynomial array must have {op.n + 1} axes")
    out = [np.zeros((1,) * (op.n + 1)) for _ in range(op.out_dim)]
    for (o, i, k, alpha), v in op.coeffs.items():
        out[o] = poly_add(out[o], v * differentiate(inputs[i], k, alpha))
    return out


def max_abs_coefficient(polys) -> float:
    return max((float(np.max(np.abs(q))) if q.size else 0.0 for q in polys), default=0.0)
