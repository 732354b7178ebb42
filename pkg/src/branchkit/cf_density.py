"""Density of W^(j) from its characteristic function.

The characteristic function y -> phi_j(iy) = E exp(-iyW^(j)) is seeded near
zero by its Taylor polynomial, pushed outwards ring by ring with
phi_j(lam s) = f^j(phi(s)), then inverted on a uniform grid with an FFT.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .model import ModelSpec, pgf_vector
from .wmoments import WMomentTable

DEFAULT_Z = 1e-2
DEFAULT_N = 64
DEFAULT_M = 2**16
MIN_REACH = 100.0
TAIL_TOL = 1e-3
MAX_RINGS = 400


class SeedAccuracyError(ValueError):
    pass


class InversionError(RuntimeError):
    pass


@dataclass(frozen=True)
class CFGrid:
    """Ring l holds phi(i y lam^l) for the ring-0 abscissas ``y``; shape (2N, d)."""

    y: np.ndarray
    rings: tuple
    z: float
    lam: float

    @property
    def L(self) -> int:
        return len(self.rings)

    @property
    def reach(self) -> float:
        return self.z * self.lam**self.L

    def abscissas(self, l: int) -> np.ndarray:
        return self.y * self.lam**l


def ring_abscissas(z: float, lam: float, N: int) -> np.ndarray:
    """N points on (z, lam z] and their mirror images on [-lam z, -z)."""
    pos = np.linspace(z, lam * z, N + 1)[1:]
    return np.concatenate([-pos[::-1], pos])


def taylor_seed(table: WMomentTable, j: int, z: float, N: int, lam: float) -> np.ndarray:
    """Order-2k Taylor values of phi_j(iy) on ring 0, ordered as ``ring_abscissas``."""
    order = table.max_order
    mom = table.moments[j]
    remainder = (abs(z * lam)) ** (order + 1) * mom[order] / math.factorial(order + 1)
    if remainder >= 1e-8:
        raise SeedAccuracyError(f"Taylor remainder bound {remainder:.3g} >= 1e-8; use a smaller z")
    y = ring_abscissas(z, lam, N)
    s = -1j * y
    out = np.zeros(y.shape, dtype=complex)
    for n in range(order + 1):
        out += mom[n] * s**n / math.factorial(n)
    return out


def seed_grid(table: WMomentTable, z: float, N: int, lam: float) -> CFGrid:
    d = table.moments.shape[0]
    ring0 = np.stack([taylor_seed(table, j, z, N, lam) for j in range(d)], axis=-1)
    return CFGrid(ring_abscissas(z, lam, N), (ring0,), z, lam)


def propagate_cf(model: ModelSpec, grid: CFGrid, L: int) -> CFGrid:
    """Extend ``grid`` to L rings; ring l is f applied to ring l-1."""
    rings = list(grid.rings)
    while len(rings) < L:
        nxt = pgf_vector(model, rings[-1])
        if np.max(np.abs(nxt)) > 1 + 1e-6:
            raise InversionError("|phi| exceeds 1: seed error is propagating")
        rings.append(nxt)
    return replace(grid, rings=tuple(rings[:L]))


def auto_rings(model: ModelSpec, grid: CFGrid, q: np.ndarray,
               min_reach: float = MIN_REACH, tail_tol: float = TAIL_TOL,
               max_rings: int = MAX_RINGS) -> CFGrid:
    """Smallest L with lam^L z >= min_reach and max |phi - q| < tail_tol on the outer ring."""
    while True:
        if grid.reach >= min_reach and np.max(np.abs(grid.rings[-1] - q)) < tail_tol:
            return grid
        if grid.L >= max_rings:
            raise InversionError(f"characteristic function did not decay within {max_rings} rings")
        grid = propagate_cf(model, grid, grid.L + 1)


@dataclass(frozen=True)
class DensityGrid:
    """Continuous part of the law of W^(j) on x = x0 + dx * arange(len(values)).

    ``values`` integrates to about 1 - atom; ``atom`` = P(W^(j) = 0) = q_j.
    """

    x0: float
    dx: float
    values: np.ndarray
    atom: float
    type_index: int
    clipped_mass: float = 0.0
    imag_residue: float = field(default=0.0, compare=False)

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.values.size)

    @property
    def mass(self) -> float:
        return float(self.dx * self.values.sum())

    @property
    def mean(self) -> float:
        return float(self.dx * (self.x * self.values).sum())


def interpolated_cf(grid: CFGrid, j: int, xi: np.ndarray) -> np.ndarray:
    ys = np.concatenate([grid.abscissas(l) for l in range(grid.L)] + [np.zeros(1)])
    vals = np.concatenate([r[:, j] for r in grid.rings] + [np.ones(1, dtype=complex)])
    order = np.argsort(ys, kind="stable")
    ys, vals = ys[order], vals[order]
    return np.interp(xi, ys, vals.real) + 1j * np.interp(xi, ys, vals.imag)


def invert_density(grid: CFGrid, q: np.ndarray, j: int, M: int = DEFAULT_M,
                   max_imag_ratio: float = 1e-2) -> DensityGrid:
    """Discretised Fourier inversion of phi_j(i xi) - q_j over [-a, a], a = lam^L z."""
    if M < 2 or M & (M - 1):
        raise ValueError("M must be a power of two")
    a = grid.reach
    dxi = 2 * a / M
    xi = -a + dxi * np.arange(M)
    g = interpolated_cf(grid, j, xi) - q[j]
    dx = 2 * np.pi / (M * dxi)
    half = M // 2
    x = dx * np.arange(half)
    w = (dxi / (2 * np.pi)) * M * np.fft.ifft(g)[:half] * np.exp(-1j * a * x)
    re, im = w.real, w.imag
    ratio = np.max(np.abs(im)) / max(np.max(np.abs(re)), 1e-300)
    if ratio > max_imag_ratio:
        raise InversionError(f"imaginary residue {ratio:.3g} of the real part; "
                             "increase the reach or the grid size")
    clipped = float(-dx * re[re < 0].sum())
    values = np.clip(re, 0.0, None)
    return DensityGrid(0.0, dx, values, float(q[j]), j, clipped, float(ratio))


def point_mass(value: float, atom: float, j: int) -> DensityGrid:
    """Degenerate stand-in for W^(j) = value on {W > 0}."""
    return DensityGrid(value, 1.0, np.array([1.0 - atom]), atom, j)


def sample_w(density: DensityGrid, n: int, rng: np.random.Generator) -> np.ndarray:
    """Composition sampling: 0 with probability ``atom``, else a grid point
    drawn with probability proportional to the density value there."""
    out = np.zeros(n)
    if n == 0 or density.atom >= 1.0:
        return out
    live = rng.random(n) >= density.atom
    m = int(live.sum())
    if m:
        cdf = np.cumsum(density.values)
        idx = np.searchsorted(cdf, rng.random(m) * cdf[-1], side="right")
        out[live] = density.x0 + density.dx * np.minimum(idx, cdf.size - 1)
    return out


def density_set(model: ModelSpec, table: WMomentTable, lam: float, q: np.ndarray,
                z: float = DEFAULT_Z, N: int = DEFAULT_N, L: int | None = None,
                M: int = DEFAULT_M) -> list[DensityGrid]:
    """Densities of W^(j) for every type j.

    A model whose W has zero variance (all-deterministic growth) has no
    density; each W^(j) is then returned as a point mass at E(W^(j)).
    """
    var = table.moments[:, 2] - table.moments[:, 1] ** 2
    if np.all(var <= 1e-12 * table.moments[:, 1] ** 2):
        return [point_mass(float(table.moments[j, 1]), float(q[j]), j) for j in range(model.d)]
    grid = propagate_cf(model, seed_grid(table, z, N, lam), 1)
    grid = auto_rings(model, grid, q) if L is None else propagate_cf(model, grid, L)
    return [invert_density(grid, q, j, M) for j in range(model.d)]
