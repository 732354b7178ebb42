"""Finite-type Galton-Watson models: offspring laws, generating functions,
mean matrix, Perron data and extinction probabilities.

Type indices passed to functions are 0-based. ``ModelSpec.root_type`` keeps
the 1-based convention of the model files.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np


class ModelError(ValueError):
    """Invalid model definition."""


class ConvergenceError(RuntimeError):
    """An iterative scheme did not reach its tolerance."""


class DomainError(ValueError):
    """Generating function argument outside the closed unit polydisc."""


# ---------------------------------------------------------------------------
# univariate laws


@dataclass(frozen=True)
class Poisson:
    rate: float

    def __post_init__(self):
        if not (self.rate >= 0 and math.isfinite(self.rate)):
            raise ModelError(f"Poisson rate must be finite and >= 0, got {self.rate}")

    @property
    def mean(self) -> float:
        return float(self.rate)

    def pgf(self, s):
        return np.exp(self.rate * (s - 1.0))

    def derivatives(self, x: float, order: int) -> np.ndarray:
        return np.array([self.rate**m * math.exp(self.rate * (x - 1.0))
                         for m in range(order + 1)])

    def sample(self, rng, size):
        return rng.poisson(self.rate, size=size)

    def sample_sum(self, rng, n):
        # sum of n iid Poisson(mu) is Poisson(n mu)
        return rng.poisson(self.rate * np.asarray(n, dtype=float))


@dataclass(frozen=True)
class Binomial:
    trials: int
    success: float

    def __post_init__(self):
        if int(self.trials) != self.trials or self.trials < 0:
            raise ModelError(f"Binomial trials must be a nonnegative int, got {self.trials}")
        if not 0.0 <= self.success <= 1.0:
            raise ModelError(f"Binomial success must lie in [0, 1], got {self.success}")

    @property
    def mean(self) -> float:
        return self.trials * self.success

    def pgf(self, s):
        return (1.0 - self.success + self.success * s) ** self.trials

    def derivatives(self, x: float, order: int) -> np.ndarray:
        n, p = self.trials, self.success
        base = 1.0 - p + p * x
        out = np.zeros(order + 1)
        for m in range(min(order, n) + 1):
            out[m] = _falling(n, m) * p**m * base ** (n - m)
        return out

    def sample(self, rng, size):
        return rng.binomial(self.trials, self.success, size=size)

    def sample_sum(self, rng, n):
        return rng.binomial(self.trials * np.asarray(n, dtype=np.int64), self.success)


@dataclass(frozen=True)
class Geometric:
    """Number of failures before the first success: support {0, 1, 2, ...}."""

    success: float

    def __post_init__(self):
        if not 0.0 < self.success <= 1.0:
            raise ModelError(f"Geometric success must lie in (0, 1], got {self.success}")

    @property
    def mean(self) -> float:
        return (1.0 - self.success) / self.success

    def pgf(self, s):
        p = self.success
        return p / (1.0 - (1.0 - p) * s)

    def derivatives(self, x: float, order: int) -> np.ndarray:
        p = self.success
        c = 1.0 - p
        den = 1.0 - c * x
        return np.array([p * math.factorial(m) * c**m / den ** (m + 1)
                         for m in range(order + 1)])

    def sample(self, rng, size):
        return rng.geometric(self.success, size=size) - 1

    def sample_sum(self, rng, n):
        n = np.asarray(n, dtype=np.int64)
        out = np.zeros(n.shape, dtype=np.int64)
        live = n > 0
        if self.success == 1.0:
            return out
        if np.any(live):
            out[live] = rng.negative_binomial(n[live], self.success)
        return out


@dataclass(frozen=True)
class Constant:
    value: int

    def __post_init__(self):
        if int(self.value) != self.value or self.value < 0:
            raise ModelError(f"Constant value must be a nonnegative int, got {self.value}")

    @property
    def mean(self) -> float:
        return float(self.value)

    def pgf(self, s):
        return np.asarray(s) ** int(self.value)

    def derivatives(self, x: float, order: int) -> np.ndarray:
        c = int(self.value)
        out = np.zeros(order + 1)
        for m in range(min(order, c) + 1):
            out[m] = _falling(c, m) * x ** (c - m)
        return out

    def sample(self, rng, size):
        return np.full(size, int(self.value), dtype=np.int64)

    def sample_sum(self, rng, n):
        return int(self.value) * np.asarray(n, dtype=np.int64)


UnivariateLaw = Union[Poisson, Binomial, Geometric, Constant]


def _falling(x: int, m: int) -> int:
    out = 1
    for j in range(m):
        out *= x - j
    return out


# ---------------------------------------------------------------------------
# offspring laws


@dataclass(frozen=True)
class ProductForm:
    """Independent child counts per type, one univariate law per child type."""

    cells: tuple

    def __init__(self, cells: Sequence[UnivariateLaw]):
        object.__setattr__(self, "cells", tuple(cells))

    @property
    def d(self) -> int:
        return len(self.cells)

    def means(self) -> np.ndarray:
        return np.array([c.mean for c in self.cells])

    def pgf(self, s):
        s = np.asarray(s)
        out = 1.0
        for j, cell in enumerate(self.cells):
            out = out * cell.pgf(s[..., j])
        return out

    def sample(self, rng, n: int) -> np.ndarray:
        """Offspring vectors of ``n`` individual parents, shape (n, d)."""
        out = np.empty((n, self.d), dtype=np.int64)
        for j, cell in enumerate(self.cells):
            out[:, j] = cell.sample(rng, n)
        return out

    def sample_sum(self, rng, n) -> np.ndarray:
        """Total offspring of ``n`` parents (``n`` may be an array)."""
        n = np.asarray(n, dtype=np.int64)
        return np.stack([cell.sample_sum(rng, n) for cell in self.cells], axis=-1)


@dataclass(frozen=True)
class JointTable:
    """Finite joint law given as (offspring vector, probability) rows."""

    vectors: np.ndarray
    probs: np.ndarray

    def __init__(self, rows: Sequence[tuple[Sequence[int], float]]):
        if len(rows) == 0:
            raise ModelError("table law needs at least one row")
        vecs = np.array([list(v) for v, _ in rows], dtype=np.int64)
        probs = np.array([float(p) for _, p in rows])
        if vecs.ndim != 2:
            raise ModelError("table rows must share one dimension")
        if np.any(vecs < 0):
            raise ModelError("table offspring counts must be nonnegative")
        if np.any(probs < 0):
            raise ModelError("table probabilities must be nonnegative")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ModelError(f"table probabilities sum to {probs.sum()!r}, not 1")
        vecs.setflags(write=False)
        probs.setflags(write=False)
        object.__setattr__(self, "vectors", vecs)
        object.__setattr__(self, "probs", probs)

    def __eq__(self, other):
        return (isinstance(other, JointTable)
                and np.array_equal(self.vectors, other.vectors)
                and np.array_equal(self.probs, other.probs))

    def __hash__(self):
        return hash((self.vectors.tobytes(), self.probs.tobytes()))

    @property
    def d(self) -> int:
        return self.vectors.shape[1]

    def means(self) -> np.ndarray:
        return self.probs @ self.vectors

    def pgf(self, s):
        s = np.asarray(s)
        out = 0.0
        for v, p in zip(self.vectors, self.probs):
            term = p
            for j, e in enumerate(v):
                if e:
                    term = term * s[..., j] ** int(e)
            out = out + term * np.ones(s.shape[:-1])
        return out

    def sample(self, rng, n: int) -> np.ndarray:
        idx = rng.choice(len(self.probs), size=n, p=self.probs)
        return self.vectors[idx]

    def sample_sum(self, rng, n) -> np.ndarray:
        n = np.asarray(n, dtype=np.int64)
        counts = rng.multinomial(n, self.probs)
        return counts @ self.vectors


OffspringLaw = Union[ProductForm, JointTable]


@dataclass(frozen=True)
class ModelSpec:
    d: int
    laws: tuple
    root_type: int = 1
    name: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "laws", tuple(self.laws))
        if self.d < 1:
            raise ModelError("d must be >= 1")
        if len(self.laws) != self.d:
            raise ModelError(f"expected {self.d} offspring laws, got {len(self.laws)}")
        for i, law in enumerate(self.laws):
            if law.d != self.d:
                raise ModelError(f"law of parent type {i + 1} has dimension {law.d}, expected {self.d}")
        if not 1 <= self.root_type <= self.d:
            raise ModelError(f"root_type must lie in [1, {self.d}], got {self.root_type}")

    @property
    def root(self) -> int:
        """0-based index of the founder type."""
        return self.root_type - 1


def single_type(law: UnivariateLaw | JointTable) -> ModelSpec:
    """Convenience constructor for d = 1."""
    if isinstance(law, JointTable):
        return ModelSpec(1, (law,))
    return ModelSpec(1, (ProductForm([law]),))


def poisson_model(rates, root_type: int = 1, name: str = "") -> ModelSpec:
    rates = np.asarray(rates, dtype=float)
    laws = [ProductForm([Poisson(float(r)) for r in row]) for row in rates]
    return ModelSpec(len(laws), laws, root_type, name)


# ---------------------------------------------------------------------------
# operations


def mean_matrix(model: ModelSpec) -> np.ndarray:
    """m[i, j] = expected number of type-j children of a type-i parent."""
    return np.array([law.means() for law in model.laws], dtype=float)


def pgf_eval(model: ModelSpec, parent: int, s):
    """Evaluate f^parent at ``s``; the last axis of ``s`` indexes types.

    Works for real or complex arguments with every |s_j| <= 1.
    """
    s = np.asarray(s)
    if s.shape[-1] != model.d:
        raise ValueError(f"argument has {s.shape[-1]} coordinates, model has {model.d} types")
    if np.any(np.abs(s) > 1.0 + 1e-12):
        raise DomainError("pgf argument outside the closed unit polydisc")
    return model.laws[parent].pgf(s)


def pgf_vector(model: ModelSpec, s):
    """All components (f^1(s), ..., f^d(s)), stacked on the last axis."""
    s = np.asarray(s)
    return np.stack([pgf_eval(model, i, s) for i in range(model.d)], axis=-1)


def is_irreducible(m: np.ndarray) -> bool:
    d = m.shape[0]
    reach = (m > 0) | np.eye(d, dtype=bool)
    # boolean transitive closure by repeated squaring
    for _ in range(max(1, int(math.ceil(math.log2(d))) + 1)):
        reach = reach | ((reach.astype(np.int64) @ reach.astype(np.int64)) > 0)
    return bool(np.all(reach))


@dataclass(frozen=True)
class SpectralData:
    lam: float
    u: np.ndarray
    nu: np.ndarray


def spectral(m, tol: float = 1e-12, max_iter: int = 100_000) -> SpectralData:
    """Perron root and eigenvectors with u.1 = 1 and u.nu = 1.

    Power iteration runs on M + I, which shares the Perron vectors of M and is
    primitive whenever M is irreducible, so periodic matrices converge too.
    """
    m = np.asarray(m, dtype=float)
    d = m.shape[0]
    if not is_irreducible(m):
        raise ModelError("mean matrix is not irreducible")
    shifted = m + np.eye(d)

    def power(a):
        v = np.full(d, 1.0 / d)
        rho = 0.0
        for _ in range(max_iter):
            w = a @ v
            rho_new = w.sum() / v.sum()
            w /= w.sum()
            if np.max(np.abs(w - v)) <= tol * np.max(np.abs(w)) and abs(rho_new - rho) <= tol * rho_new:
                return rho_new, w
            v, rho = w, rho_new
        raise ConvergenceError(f"power iteration did not converge in {max_iter} iterations")

    rho_r, u = power(shifted)
    _, nu = power(shifted.T)
    lam = rho_r - 1.0
    u = u / u.sum()
    nu = nu / (u @ nu)
    return SpectralData(float(lam), u, nu)


def extinction(model: ModelSpec, tol: float = 1e-12, max_iter: int = 1_000_000) -> np.ndarray:
    """Minimal fixed point of q = f(q) by iterating f from 0."""
    q = np.zeros(model.d)
    for _ in range(max_iter):
        q_next = np.real(pgf_vector(model, q))
        if np.max(np.abs(q_next - q)) < tol:
            q = q_next
            break
        q = q_next
    else:
        raise ConvergenceError(f"extinction iteration did not converge in {max_iter} steps")
    if np.any(q >= 1.0 - 1e-9):
        warnings.warn("extinction probability numerically 1: model is not supercritical",
                      RuntimeWarning, stacklevel=2)
    return q


@dataclass(frozen=True)
class Classification:
    irreducible: bool
    supercritical: bool
    moment_order_ok: bool

    def __iter__(self):
        return iter((self.irreducible, self.supercritical, self.moment_order_ok))


def classify(model: ModelSpec) -> Classification:
    m = mean_matrix(model)
    irreducible = is_irreducible(m)
    if irreducible:
        lam = spectral(m).lam
    else:
        lam = float(np.max(np.abs(np.linalg.eigvals(m))))
    # every supported family has finite moments of all orders
    return Classification(irreducible, bool(lam > 1.0 + 1e-12), True)
