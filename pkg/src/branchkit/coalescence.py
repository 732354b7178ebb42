"""Limiting coalescence probability: Monte Carlo estimator over sampled
W-values, harmonic moments of |Z_t| and the bounds that use them."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate, special

from . import rng as rngmod
from .cf_density import DensityGrid, sample_w
from .hs_transform import BoundConstants, BoundCurve
from .model import ModelSpec, pgf_vector
from .simulate import run_population_batch


class QuadratureError(RuntimeError):
    pass


class DiscardRateError(RuntimeError):
    pass


def iterate_pgf(model: ModelSpec, t: int, s) -> np.ndarray:
    """(f_t^i(s))_i by t nested applications of f."""
    if t < 0:
        raise ValueError("t must be >= 0")
    x = np.asarray(s)
    for _ in range(t):
        x = pgf_vector(model, x)
    return x


@dataclass(frozen=True)
class HarmonicMoment:
    t: int
    r: int
    value: float
    conditioning: str = "at_t"


def _tail_cutoff(r: int, tol: float = 1e-14) -> float:
    # the integrand is at most u^(r-1) e^(-u) / Gamma(r) once |Z_t| >= 1
    U = 8.0
    while special.gammaincc(r, U) > tol:
        U *= 1.25
    return U


def harmonic_moment_gamma(model: ModelSpec, t: int, r: int, conditioning: str = "at_t",
                          q: np.ndarray | None = None, root: int | None = None,
                          rel_tol: float = 1e-10) -> HarmonicMoment:
    """E(1/|Z_t|^r | |Z_t| > 0) through the Gamma-function integral of the pgf.

    With ``conditioning="at_infinity"`` (needs ``q``) the same integral with
    f_t(e^-u q) in place of f_t(0) gives E(1/|Z_t|^r | |Z_inf| > 0) exactly.
    """
    if r < 1 or t < 1:
        raise ValueError("need r >= 1 and t >= 1")
    i0 = model.root if root is None else root
    ones = np.ones(model.d)
    p0 = float(iterate_pgf(model, t, np.zeros(model.d))[i0])
    if conditioning == "at_t":
        def gap(u):
            return float(iterate_pgf(model, t, np.exp(-u) * ones)[i0]) - p0
        norm = 1.0 - p0
    elif conditioning == "at_infinity":
        if q is None:
            raise ValueError("at_infinity conditioning needs the extinction vector")
        q = np.asarray(q, dtype=float)

        def gap(u):
            e = np.exp(-u)
            return float(iterate_pgf(model, t, e * ones)[i0] - iterate_pgf(model, t, e * q)[i0])
        norm = 1.0 - q[i0]
    else:
        raise ValueError(f"unknown conditioning {conditioning!r}")

    def integrand(u):
        return u ** (r - 1) * gap(u)

    U = _tail_cutoff(r)
    total = 0.0
    for lo, hi in ((0.0, 1.0), (1.0, U)):
        val, err, *_ = integrate.quad(integrand, lo, hi, epsabs=1e-15, epsrel=rel_tol,
                                      limit=200, full_output=1)
        if err > max(1e-12, 10 * rel_tol * abs(val)):
            raise QuadratureError(f"quadrature error estimate {err:.3g} on [{lo}, {hi}]")
        total += val
    return HarmonicMoment(t, r, total / (special.gamma(r) * norm), conditioning)


def harmonic_bounds(hm: dict[int, HarmonicMoment], constants: BoundConstants,
                    sup_q: float) -> tuple[float, float]:
    """Bounds on lim P(X_{T,k} < t | |Z_T| >= k) from harmonic moments of |Z_t|
    conditioned on |Z_t| > 0, keyed by r (needs 1, k-1 and k).

    Moments conditioned on survival at t are converted to moments conditioned
    on eventual survival with the factor (1 - sup q), always in the direction
    that keeps each bound valid. Raw (unclamped) values are returned.
    """
    k = constants.k
    for r in (1, k - 1, k):
        if r not in hm or hm[r].conditioning != "at_t":
            raise ValueError(f"need the at_t harmonic moment of order {r}")
    slack = 1.0 - sup_q
    h1_hi = hm[1].value / slack
    hk1_lo = hm[k - 1].value * slack
    hk_hi = hm[k].value / slack
    lower = 1.0 - (constants.c1 + constants.c3) * h1_hi
    upper = 1.0 - constants.c2 * (hk1_lo - constants.c3 * hk_hi)
    return lower, upper


def harmonic_bound_curve(model: ModelSpec, ts: Sequence[int], constants: BoundConstants) -> BoundCurve:
    k = constants.k
    lo, hi = [], []
    for t in ts:
        hm = {r: harmonic_moment_gamma(model, t, r) for r in sorted({1, k - 1, k})}
        a, b = harmonic_bounds(hm, constants, constants.sup_q)
        lo.append(a)
        hi.append(b)
    lo, hi = np.array(lo), np.array(hi)
    return BoundCurve(np.asarray(ts, dtype=float), np.clip(lo, 0, 1), np.clip(hi, 0, 1), lo, hi)


# ---------------------------------------------------------------------------
# estimator


@dataclass(frozen=True)
class CoalescenceEstimate:
    t: int
    k: int
    p_hat: float
    std_err: float
    n_used: int
    n_discarded: int


def coalescence_statistics(model: ModelSpec, densities: Sequence[DensityGrid], t: int, k: int,
                           n: int, rng: np.random.Generator):
    """For n simulated Z_t, the statistic sum(W^k) / (sum W)^k over the
    generation-t families, nan for discarded replicates."""
    counts, _ = run_population_batch(model, t, n, rng)
    sum_w = np.zeros(n)
    sum_wk = np.zeros(n)
    for i in range(model.d):
        c = counts[:, i]
        total = int(c.sum())
        if total == 0:
            continue
        w = sample_w(densities[i], total, rng)
        owner = np.repeat(np.arange(n), c)
        sum_w += np.bincount(owner, weights=w, minlength=n)
        sum_wk += np.bincount(owner, weights=w**k, minlength=n)
    a = np.full(n, np.nan)
    ok = (counts.sum(axis=1) > 0) & (sum_w > 0)
    a[ok] = sum_wk[ok] / sum_w[ok] ** k
    return a


def theorem_estimate(model: ModelSpec, densities: Sequence[DensityGrid], t: int, k: int, n: int,
                     seed: int, threads: int = 1, block: int = rngmod.BLOCK,
                     max_discard_rate: float = 0.999) -> CoalescenceEstimate:
    """1 - mean of sum(W^k)/(sum W)^k over n accepted replicates.

    Replicates are discarded when Z_t = 0 or every sampled W is 0. Blocks are
    consumed in index order, so the first n accepted values do not depend on
    the number of threads.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    purpose = f"theorem/{t}/{k}"
    accepted: list[np.ndarray] = []
    have = attempts = 0
    next_block = 0
    wave = max(1, threads)
    while have < n:
        blocks = range(next_block, next_block + wave)
        parts = rngmod.map_blocks(
            lambda b, g: coalescence_statistics(model, densities, t, k, block, g),
            seed, purpose, blocks, threads)
        next_block += wave
        for a in parts:
            ok = np.flatnonzero(~np.isnan(a))
            take = ok[: n - have]
            if take.size:
                attempts += int(take[-1]) + 1 if have + take.size >= n else a.size
                accepted.append(a[take])
                have += take.size
            else:
                attempts += a.size
            if have >= n:
                break
        if attempts > 1000 and have < (1 - max_discard_rate) * attempts:
            raise DiscardRateError(f"{attempts - have} of {attempts} replicates discarded")
    a = np.concatenate(accepted)
    p_hat = 1.0 - float(a.mean())
    se = float(a.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return CoalescenceEstimate(t, k, p_hat, se, n, attempts - n)
