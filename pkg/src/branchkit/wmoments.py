"""Moments of the martingale limit W from the functional equation
phi_j(lam s) = f^j(phi(s)), solved order by order with truncated series."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import JointTable, ModelSpec, SpectralData
from .series import TruncatedSeries


class MomentError(ArithmeticError):
    pass


@dataclass(frozen=True)
class WMomentTable:
    """``moments[i, n] = E((W^(i))^n)`` for n = 0..max_order."""

    moments: np.ndarray

    @property
    def max_order(self) -> int:
        return self.moments.shape[1] - 1

    @property
    def k(self) -> int:
        return self.max_order // 2

    def variance(self, i: int, j: int) -> float:
        """Var((W^(i))^j), needs order 2j."""
        return float(self.moments[i, 2 * j] - self.moments[i, j] ** 2)


def univariate_pgf_derivatives(law, point: float, order: int) -> np.ndarray:
    return law.derivatives(point, order)


def compose_offspring_series(model: ModelSpec, parent: int,
                             phi: Sequence[TruncatedSeries]) -> TruncatedSeries:
    """Series of f^parent(phi_1(s), ..., phi_d(s))."""
    orders = {p.order for p in phi}
    if len(orders) != 1:
        raise ValueError(f"truncation order mismatch among phi series: {sorted(orders)}")
    if len(phi) != model.d:
        raise ValueError(f"expected {model.d} series, got {len(phi)}")
    order = orders.pop()
    law = model.laws[parent]
    if isinstance(law, JointTable):
        out = TruncatedSeries.constant(0.0, order)
        for v, p in zip(law.vectors, law.probs):
            term = TruncatedSeries.constant(p, order)
            for j, e in enumerate(v):
                if e:
                    term = term * phi[j] ** int(e)
            out = out + term
        return out
    out = TruncatedSeries.constant(1.0, order)
    for cell, series in zip(law.cells, phi):
        x0 = float(np.real(series[0]))
        out = out * series.compose(cell.derivatives(x0, order))
    return out


def w_moments(model: ModelSpec, spec: SpectralData, max_order: int = 4) -> WMomentTable:
    """E((W^(i))^n), i < d, n <= max_order, normalised so that E(W^(i)) = u_i.

    Writing a[j, n] for the order-n Taylor coefficient of phi_j, equating
    order-n coefficients gives (lam^n I - M) a_n = r_n, where r_n collects
    every contribution of lower-order coefficients. f(phi) is affine in a_n,
    so r_n and M are read off by probing with a_n = 0 and a_n = e_l.
    """
    if max_order < 1:
        raise ValueError("max_order must be >= 1")
    d, lam = model.d, spec.lam
    a = np.zeros((d, max_order + 1))
    a[:, 0] = 1.0
    a[:, 1] = -spec.u

    def top_coeffs(n, top):
        phi = []
        for l in range(d):
            c = a[l, : n + 1].copy()
            c[n] = top[l]
            phi.append(TruncatedSeries(c))
        return np.array([compose_offspring_series(model, j, phi)[n] for j in range(d)])

    for n in range(2, max_order + 1):
        r = top_coeffs(n, np.zeros(d))
        lin = np.empty((d, d))
        for l in range(d):
            lin[:, l] = top_coeffs(n, np.eye(d)[l]) - r
        system = lam**n * np.eye(d) - lin
        if np.linalg.cond(system) > 1e12:
            raise MomentError(f"order-{n} system is singular (lam^n close to lam); "
                              "is the model supercritical?")
        a[:, n] = np.linalg.solve(system, r)

    moments = np.empty_like(a)
    for n in range(max_order + 1):
        moments[:, n] = (-1) ** n * math.factorial(n) * a[:, n]
    if not np.all(np.isfinite(moments)) or np.any(moments <= 0):
        raise MomentError("non-positive or non-finite W moment")
    return WMomentTable(moments)
