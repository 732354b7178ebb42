"""Forward simulation of population vectors and of generation-t ancestry."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng as rngmod
from .model import ModelSpec, SpectralData

POPULATION_CAP = 10**12


class InsufficientDataError(RuntimeError):
    pass


@dataclass(frozen=True)
class PopulationState:
    counts: np.ndarray
    generation: int
    capped: bool = False

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def step_batch(counts: np.ndarray, model: ModelSpec, rng: np.random.Generator):
    """One generation for a batch of populations, ``counts`` of shape (B, d).

    Offspring of the n_i type-i parents are drawn in aggregate: the sum of n
    iid offspring vectors has a closed-form law for every supported family.
    Rows that exceed the population cap are flagged and frozen.
    """
    counts = np.asarray(counts, dtype=np.int64)
    nxt = np.zeros_like(counts)
    for i, law in enumerate(model.laws):
        n = counts[:, i]
        if np.any(n):
            nxt += law.sample_sum(rng, n)
    capped = np.any(nxt > POPULATION_CAP, axis=1)
    if np.any(capped):
        nxt[capped] = counts[capped]
    return nxt, capped


def step(state: PopulationState, model: ModelSpec, rng: np.random.Generator) -> PopulationState:
    if state.capped:
        return PopulationState(state.counts, state.generation + 1, True)
    nxt, capped = step_batch(state.counts[None, :], model, rng)
    return PopulationState(nxt[0], state.generation + 1, bool(capped[0]))


def founder(model: ModelSpec) -> np.ndarray:
    z0 = np.zeros(model.d, dtype=np.int64)
    z0[model.root] = 1
    return z0


def run_population(model: ModelSpec, T: int, rng: np.random.Generator) -> list[PopulationState]:
    if T < 0:
        raise ValueError("T must be >= 0")
    states = [PopulationState(founder(model), 0)]
    for _ in range(T):
        states.append(step(states[-1], model, rng))
    return states


def run_population_batch(model: ModelSpec, T: int, n: int, rng: np.random.Generator):
    """Final counts (n, d) of n independent runs and their capped flags."""
    counts = np.tile(founder(model), (n, 1))
    capped = np.zeros(n, dtype=bool)
    for _ in range(T):
        counts, c = step_batch(counts, model, rng)
        capped |= c
    return counts, capped


def simulate_final_counts(model: ModelSpec, T: int, n: int, seed: int,
                          purpose: str = "population", threads: int = 1):
    """Generation-T counts of n runs, reproducible for any thread count."""
    sizes = rngmod.block_sizes(n)
    parts = rngmod.map_blocks(lambda b, g: run_population_batch(model, T, sizes[b], g),
                              seed, purpose, range(len(sizes)), threads)
    counts = np.concatenate([p[0] for p in parts]) if parts else np.zeros((0, model.d), np.int64)
    capped = np.concatenate([p[1] for p in parts]) if parts else np.zeros(0, bool)
    return counts, capped


def normalized_population(counts: np.ndarray, T: int, spec: SpectralData) -> np.ndarray:
    """lam^-T |Z_T| / (nu . 1).

    With u.1 = 1 and u.nu = 1, lam^-T |Z_T^i| tends to (nu . 1) W^(i) where
    E W^(i) = u_i, hence the division.
    """
    return np.asarray(counts).sum(axis=-1) / (spec.lam**T * spec.nu.sum())


# ---------------------------------------------------------------------------
# genealogy


@dataclass(frozen=True)
class GenealogyFrame:
    """Per-individual type and 0-based index of its generation-``t_anchor`` ancestor."""

    types: np.ndarray
    ancestors: np.ndarray
    t_anchor: int
    n_anchor: int
    capped: bool = False

    def __len__(self):
        return int(self.ancestors.size)


def _individual_step(types, ancestors, model: ModelSpec, rng):
    new_types, new_anc = [], []
    for i, law in enumerate(model.laws):
        idx = np.flatnonzero(types == i)
        if idx.size == 0:
            continue
        kids = law.sample(rng, idx.size)
        for j in range(model.d):
            a = np.repeat(ancestors[idx], kids[:, j])
            new_anc.append(a)
            new_types.append(np.full(a.size, j, dtype=np.int8))
    if not new_anc:
        return np.zeros(0, np.int8), np.zeros(0, ancestors.dtype)
    return np.concatenate(new_types), np.concatenate(new_anc)


def run_genealogy(model: ModelSpec, t: int, T: int, rng: np.random.Generator,
                  max_individuals: int = 10**9) -> GenealogyFrame:
    """Simulate to generation t, label its individuals, then carry labels to T."""
    if not 0 <= t < T:
        raise ValueError("need 0 <= t < T")
    state = PopulationState(founder(model), 0)
    for _ in range(t):
        state = step(state, model, rng)
    n_anchor = state.total
    types = np.repeat(np.arange(model.d, dtype=np.int8), state.counts)
    ancestors = np.arange(n_anchor, dtype=np.int32 if n_anchor < 2**31 else np.int64)
    if state.capped:
        return GenealogyFrame(types, ancestors, t, n_anchor, True)
    for _ in range(t, T):
        if ancestors.size == 0:
            break
        types, ancestors = _individual_step(types, ancestors, model, rng)
        if ancestors.size > max_individuals:
            return GenealogyFrame(types, ancestors, t, n_anchor, True)
    return GenealogyFrame(types, ancestors, t, n_anchor)


@dataclass(frozen=True)
class DirectEstimate:
    p_hat: float
    std_err: float
    n_effective: int
    n_capped: int = 0


def sample_individuals(frame: GenealogyFrame, k: int, rng: np.random.Generator) -> np.ndarray:
    """Positions of k distinct generation-T individuals, uniformly at random."""
    return rng.choice(len(frame), size=k, replace=False)


def _coalesced_flags(model, t, T, k, n, rng):
    """1.0 where the k sampled individuals descend from different generation-t
    ancestors, 0.0 where they share one, nan if |Z_T| < k."""
    out = np.full(n, np.nan)
    capped = 0
    for r in range(n):
        frame = run_genealogy(model, t, T, rng)
        if frame.capped:
            capped += 1
            continue
        if len(frame) < k:
            continue
        anc = frame.ancestors[sample_individuals(frame, k, rng)]
        out[r] = float(np.any(anc != anc[0]))
    return out, capped


def mrca_direct_estimate(model: ModelSpec, t: int, T: int, k: int, n_runs: int,
                         seed: int, threads: int = 1, min_effective: int = 100) -> DirectEstimate:
    """Estimate lim P(X_{T,k} < t | |Z_T| >= k) by tracking generation-t ancestry."""
    if k < 2:
        raise ValueError("k must be >= 2")
    sizes = rngmod.block_sizes(n_runs, 64)
    parts = rngmod.map_blocks(lambda b, g: _coalesced_flags(model, t, T, k, sizes[b], g),
                              seed, f"genealogy/{t}/{T}/{k}", range(len(sizes)), threads)
    flags = np.concatenate([p[0] for p in parts])
    n_capped = sum(p[1] for p in parts)
    flags = flags[~np.isnan(flags)]
    n_eff = int(flags.size)
    if n_eff < min_effective:
        raise InsufficientDataError(f"only {n_eff} runs reached |Z_T| >= {k}")
    p = float(flags.mean())
    # Agresti-Coull: stays positive when every run agrees
    p_adj = (flags.sum() + 2.0) / (n_eff + 4.0)
    se = float(np.sqrt(p_adj * (1.0 - p_adj) / (n_eff + 4.0)))
    return DirectEstimate(p, se, n_eff, n_capped)
