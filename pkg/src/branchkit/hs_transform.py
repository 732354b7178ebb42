"""Harris-Sevastyanov transform of a supercritical process and the
coalescence-probability bounds built on it."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng as rngmod
from .model import ModelSpec, pgf_vector
from .wmoments import WMomentTable

MAX_REJECTIONS = 10**6


class DegenerateTransformError(ValueError):
    pass


class RejectionError(RuntimeError):
    pass


class EpsilonRangeError(ValueError):
    pass


def hs_pgf_eval(model: ModelSpec, q: np.ndarray, parent: int, s) -> np.ndarray:
    """F^parent(s) = (f^parent(s*(1-q) + q) - q_parent) / (1 - q_parent)."""
    q = np.asarray(q, dtype=float)
    if 1.0 - q[parent] < 1e-12:
        raise DegenerateTransformError(f"1 - q[{parent}] is numerically zero")
    s = np.asarray(s, dtype=float)
    x = s * (1.0 - q) + q
    return (np.real(pgf_vector(model, x)[..., parent]) - q[parent]) / (1.0 - q[parent])


def sample_y1_batch(model: ModelSpec, q: np.ndarray, parent: int, n: int,
                    rng: np.random.Generator):
    """n draws of Y_1 from a type-``parent`` founder, shape (n, d).

    Offspring are drawn from the original law and each type-j child is kept
    with probability 1 - q_j; draws with no kept child are rejected. The
    accepted vector has pgf F^parent exactly. Also returns the number of
    attempts used.
    """
    q = np.asarray(q, dtype=float)
    if 1.0 - q[parent] < 1e-12:
        raise DegenerateTransformError(f"1 - q[{parent}] is numerically zero")
    law = model.laws[parent]
    keep = 1.0 - q
    out = []
    have = attempts = misses = 0
    while have < n:
        need = n - have
        batch = max(16, int(1.2 * need / (1.0 - q[parent])) + 8)
        kids = law.sample(rng, batch)
        thinned = rng.binomial(kids, keep)
        alive = thinned.sum(axis=1) > 0
        if not np.any(alive):
            misses += batch
            attempts += batch
            if misses >= MAX_REJECTIONS:
                raise RejectionError(f"{misses} consecutive rejections; q[{parent}] is close to 1")
            continue
        # count attempts only up to the last accepted draw we keep
        idx = np.flatnonzero(alive)[:need]
        attempts += int(idx[-1]) + 1
        misses = 0
        out.append(thinned[idx])
        have += idx.size
    return np.concatenate(out)[:n], attempts


def sample_y1(model: ModelSpec, q: np.ndarray, parent: int, rng: np.random.Generator) -> np.ndarray:
    return sample_y1_batch(model, q, parent, 1, rng)[0][0]


@dataclass(frozen=True)
class HSBoundInputs:
    sup_q: float
    e_sup_y: float
    e_sup_y_se: float
    e_sup_inv_y: float
    e_sup_inv_y_se: float
    n: int


def _sup_block(model, q, n, rng):
    sizes = np.stack([sample_y1_batch(model, q, i, n, rng)[0].sum(axis=1)
                      for i in range(model.d)], axis=1)
    return sizes.max(axis=1).astype(float), (1.0 / sizes).max(axis=1)


def estimate_sup_moments(model: ModelSpec, q: np.ndarray, n: int, seed: int,
                         threads: int = 1) -> HSBoundInputs:
    """Monte Carlo E(sup_i |Y_1^i|) and E(sup_i 1/|Y_1^i|), one independent
    Y_1 per founder type in each replicate."""
    if n < 1000:
        raise ValueError("n must be >= 1000")
    sizes = rngmod.block_sizes(n, 4096)
    parts = rngmod.map_blocks(lambda b, g: _sup_block(model, q, sizes[b], g),
                              seed, "hs/sup", range(len(sizes)), threads)
    big = np.concatenate([p[0] for p in parts])
    inv = np.concatenate([p[1] for p in parts])
    return HSBoundInputs(float(np.max(q)), float(big.mean()), float(big.std(ddof=1) / np.sqrt(n)),
                         float(inv.mean()), float(inv.std(ddof=1) / np.sqrt(n)), n)


@dataclass(frozen=True)
class BoundConstants:
    c1: float
    c2: float
    c3: float
    c4: float
    c5: float
    c6: float
    epsilon: float
    k: int
    sup_q: float


def epsilon_upper(table: WMomentTable, k: int) -> float:
    """Upper end of the admissible epsilon interval, min over i and j in {1, k} of E((W^i)^j)."""
    return float(np.min(table.moments[:, [1, k]]))


def default_epsilon(table: WMomentTable, k: int) -> float:
    return 0.5 * epsilon_upper(table, k)


def bound_constants(table: WMomentTable, q: np.ndarray, epsilon: float | None = None,
                    k: int = 2) -> BoundConstants:
    if k < 2:
        raise ValueError("k must be >= 2")
    if table.max_order < 2 * k:
        raise ValueError(f"moment table of order {table.max_order} cannot support k = {k}")
    hi = epsilon_upper(table, k)
    eps = default_epsilon(table, k) if epsilon is None else float(epsilon)
    if not 0.0 < eps < hi:
        raise EpsilonRangeError(f"epsilon must lie in (0, {hi:.12g}), got {eps}")
    mom = table.moments
    d = mom.shape[0]
    sup_q = float(np.max(q))
    c1 = (mom[:, k].max() + eps) / (mom[:, 1].min() - eps) ** k
    c2 = (mom[:, k].min() - eps) / (mom[:, 1].max() + eps) ** k
    var = sum(max(table.variance(i, j) for i in range(d)) for j in (1, k))
    c3 = max(var, 0.0) / (eps**2 * (1.0 - sup_q))
    c4 = (c1 + c3) * (1.0 - sup_q) ** -2
    c5 = c2 * (1.0 - sup_q) ** k
    c6 = c2 * c3 * (1.0 - sup_q) ** -2
    return BoundConstants(float(c1), float(c2), float(c3), float(c4), float(c5), float(c6),
                          eps, k, sup_q)


@dataclass(frozen=True)
class BoundCurve:
    t: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    lower_raw: np.ndarray
    upper_raw: np.ndarray

    @property
    def gap(self) -> np.ndarray:
        return self.upper - self.lower


def corollary_bounds(constants: BoundConstants, inputs: HSBoundInputs, t) -> BoundCurve:
    """Lower and upper bounds on lim P(X_{T,k} < t | |Z_T| >= k) from
    E(sup 1/|Y_1|) and E(sup |Y_1|); reported values are clamped to [0, 1]."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    k = constants.k
    lower = 1.0 - constants.c4 * inputs.e_sup_inv_y**t
    upper = (1.0 - constants.c5 * inputs.e_sup_y ** (-t * (k - 1))
             + constants.c6 * inputs.e_sup_inv_y ** (t * k))
    return BoundCurve(t, np.clip(lower, 0, 1), np.clip(upper, 0, 1), lower, upper)
