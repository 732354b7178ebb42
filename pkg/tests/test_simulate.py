import numpy as np
import pytest

from branchkit import rng as rngmod
from branchkit import simulate as sim
from branchkit.model import Constant, Poisson, single_type


def test_deterministic_population_sizes(doubling, rng):
    states = sim.run_population(doubling, 12, rng)
    assert [s.total for s in states] == [2**g for g in range(13)]
    counts, capped = sim.run_population_batch(doubling, 10, 7, rng)
    assert np.all(counts[:, 0] == 1024) and not capped.any()


def test_population_cap(rng):
    model = single_type(Constant(1000))
    states = sim.run_population(model, 6, rng)
    assert states[4].total == 10**12 and not states[4].capped
    assert states[5].capped and states[6].capped
    assert states[6].total == 10**12


def test_batch_mean_growth(slight, rng):
    from branchkit.model import mean_matrix
    m = mean_matrix(slight)
    counts, _ = sim.run_population_batch(slight, 4, 40_000, rng)
    expected = sim.founder(slight) @ np.linalg.matrix_power(m, 4)
    se = counts.std(axis=0) / np.sqrt(40_000)
    assert np.all(np.abs(counts.mean(axis=0) - expected) < 5 * se)


def test_final_counts_thread_invariant(slight):
    a = sim.simulate_final_counts(slight, 8, 1000, seed=9, threads=1)
    b = sim.simulate_final_counts(slight, 8, 1000, seed=9, threads=8)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
    c = sim.simulate_final_counts(slight, 8, 1000, seed=10, threads=1)
    assert not np.array_equal(a[0], c[0])


def test_streams_depend_on_purpose_and_index():
    x = rngmod.stream(1, "a", 0).random()
    assert x == rngmod.stream(1, "a", 0).random()
    assert x != rngmod.stream(1, "b", 0).random()
    assert x != rngmod.stream(1, "a", 1).random()
    assert rngmod.block_sizes(600) == [256, 256, 88]
    assert rngmod.block_sizes(0) == []


def test_genealogy_frame_partitions(slight, rng):
    for _ in range(20):
        frame = sim.run_genealogy(slight, 4, 9, rng)
        if frame.n_anchor == 0:
            assert len(frame) == 0
            continue
        assert frame.ancestors.min(initial=0) >= 0
        assert frame.ancestors.max(initial=-1) < frame.n_anchor
        per_anchor = np.bincount(frame.ancestors, minlength=frame.n_anchor)
        assert per_anchor.sum() == len(frame) == frame.types.size


def test_genealogy_deterministic_tree(doubling, rng):
    frame = sim.run_genealogy(doubling, 3, 7, rng)
    assert frame.n_anchor == 8 and len(frame) == 128
    assert np.all(np.bincount(frame.ancestors) == 16)


def test_genealogy_cap(rng):
    frame = sim.run_genealogy(single_type(Constant(10)), 1, 6, rng, max_individuals=10**4)
    assert frame.capped


def test_uniform_individual_sampling(doubling, rng):
    frame = sim.run_genealogy(doubling, 1, 5, rng)
    n, k, reps = len(frame), 3, 20_000
    hits = np.zeros(n)
    for _ in range(reps):
        pick = sim.sample_individuals(frame, k, rng)
        assert len(set(pick.tolist())) == k
        hits[pick] += 1
    p = k / n
    assert np.all(np.abs(hits / reps - p) < 4 * np.sqrt(p * (1 - p) / reps))


def test_direct_estimate_closed_form(doubling):
    t, T = 3, 13
    exact = 1 - (2 ** (T - t) - 1) / (2**T - 1)
    assert exact == pytest.approx(7168 / 8191, abs=1e-15)
    est = sim.mrca_direct_estimate(doubling, t, T, 2, 1000, seed=4)
    assert est.n_effective == 1000
    assert abs(est.p_hat - exact) < 4 * est.std_err


def test_direct_estimate_at_founder(slight):
    est = sim.mrca_direct_estimate(slight, 0, 6, 2, 300, seed=4)
    assert est.p_hat == 0.0


def test_direct_estimate_thread_invariant(slight):
    a = sim.mrca_direct_estimate(slight, 2, 7, 2, 300, seed=4, threads=1)
    b = sim.mrca_direct_estimate(slight, 2, 7, 2, 300, seed=4, threads=4)
    assert a == b


def test_insufficient_data():
    dying = single_type(Poisson(0.3))
    with pytest.raises(sim.InsufficientDataError):
        sim.mrca_direct_estimate(dying, 1, 4, 2, 200, seed=1)


def test_argument_checks(slight, rng):
    with pytest.raises(ValueError):
        sim.run_genealogy(slight, 5, 5, rng)
    with pytest.raises(ValueError):
        sim.mrca_direct_estimate(slight, 1, 3, 1, 200, seed=1)
    with pytest.raises(ValueError):
        sim.run_population(slight, -1, rng)
