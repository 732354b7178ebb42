import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from branchkit import hs_transform as hs
from branchkit.model import Constant, ModelSpec, ProductForm, extinction, mean_matrix
from branchkit.model import pgf_vector, single_type, spectral, Poisson
from branchkit.wmoments import w_moments


def table_for(model, order=4):
    return w_moments(model, spectral(mean_matrix(model)), order)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 1))
def test_binary_closed_form(binary, s):
    q = extinction(binary)
    assert hs.hs_pgf_eval(binary, q, 0, [s]) == pytest.approx((s + s * s) / 2, abs=1e-12)


def test_normalisation_and_no_extinction(slight, steep):
    for model in (slight, steep):
        q = extinction(model)
        for i in range(2):
            assert hs.hs_pgf_eval(model, q, i, np.ones(2)) == pytest.approx(1.0, abs=1e-12)
            assert hs.hs_pgf_eval(model, q, i, np.zeros(2)) == pytest.approx(0.0, abs=1e-12)


def test_identity_when_extinction_impossible(doubling):
    q = extinction(doubling)
    for s in (0.0, 0.3, 0.9):
        assert hs.hs_pgf_eval(doubling, q, 0, [s]) == pytest.approx(s * s)


def test_degenerate_transform():
    with pytest.raises(hs.DegenerateTransformError):
        hs.hs_pgf_eval(single_type(Poisson(2.0)), np.array([1.0]), 0, [0.5])


@pytest.mark.parametrize("model_name", ["slight", "steep"])
def test_gradient_identity(model_name, request):
    model = request.getfixturevalue(model_name)
    q = extinction(model)
    m = mean_matrix(model)
    h = 1e-6
    for i in range(2):
        for j in range(2):
            s = np.ones(2)
            s[j] -= h
            fd = (1.0 - hs.hs_pgf_eval(model, q, i, s)) / h
            expected = (1 - q[j]) / (1 - q[i]) * m[i, j]
            assert fd == pytest.approx(expected, rel=1e-5, abs=1e-6)


def test_binary_sampler_law(binary, rng):
    q = extinction(binary)
    y, attempts = hs.sample_y1_batch(binary, q, 0, 100_000, rng)
    sizes = y.sum(axis=1)
    assert set(np.unique(sizes)) <= {1, 2}
    assert abs(np.mean(sizes == 1) - 0.5) < 4 * np.sqrt(0.25 / 1e5)
    rate = 100_000 / attempts
    assert abs(rate - 2 / 3) < 4 * np.sqrt(rate * (1 - rate) / attempts)


@pytest.mark.parametrize("model_name", ["slight", "steep"])
def test_acceptance_rate_and_empirical_pgf(model_name, request, rng):
    model = request.getfixturevalue(model_name)
    q = extinction(model)
    for i in range(2):
        y, attempts = hs.sample_y1_batch(model, q, i, 100_000, rng)
        assert np.all(y.sum(axis=1) >= 1)
        rate = 100_000 / attempts
        assert abs(rate - (1 - q[i])) < 4 * np.sqrt(rate * (1 - rate) / attempts)
        vals = 0.5 ** y.sum(axis=1)
        se = vals.std() / np.sqrt(vals.size)
        assert abs(vals.mean() - hs.hs_pgf_eval(model, q, i, np.full(2, 0.5))) < 4 * se


def test_two_generation_iterate_identity(slight, rng):
    q = extinction(slight)
    n = 50_000
    first, _ = hs.sample_y1_batch(slight, q, slight.root, n, rng)
    second = np.zeros_like(first)
    for i in range(2):
        total = int(first[:, i].sum())
        kids, _ = hs.sample_y1_batch(slight, q, i, total, rng)
        owner = np.repeat(np.arange(n), first[:, i])
        for j in range(2):
            second[:, j] += np.bincount(owner, weights=kids[:, j], minlength=n).astype(int)
    probes = [np.array(p) for p in ([0.5, 0.5], [0.2, 0.9], [0.9, 0.1], [0.7, 0.7], [0.0, 0.8])]
    for s in probes:
        x = s * (1 - q) + q
        f2 = pgf_vector(slight, pgf_vector(slight, x))[slight.root]
        expected = (f2 - q[slight.root]) / (1 - q[slight.root])
        vals = np.prod(s ** second, axis=1)
        assert abs(vals.mean() - expected) < 4 * vals.std() / np.sqrt(n) + 1e-12


def test_sup_moments_examples(binary, doubling):
    r = hs.estimate_sup_moments(binary, extinction(binary), 20_000, seed=1)
    assert abs(r.e_sup_inv_y - 0.75) < 4 * r.e_sup_inv_y_se
    assert abs(r.e_sup_y - 1.5) < 4 * r.e_sup_y_se
    r = hs.estimate_sup_moments(doubling, extinction(doubling), 1000, seed=1)
    assert (r.e_sup_y, r.e_sup_inv_y) == (2.0, 0.5)
    own = ModelSpec(2, (ProductForm([Constant(2), Constant(0)]),
                        ProductForm([Constant(0), Constant(2)])))
    assert hs.estimate_sup_moments(own, np.zeros(2), 1000, seed=1).e_sup_y == 2.0
    with pytest.raises(ValueError):
        hs.estimate_sup_moments(binary, extinction(binary), 10, seed=1)


def test_sup_moments_thread_invariant(slight):
    q = extinction(slight)
    a = hs.estimate_sup_moments(slight, q, 10_000, seed=5, threads=1)
    b = hs.estimate_sup_moments(slight, q, 10_000, seed=5, threads=4)
    assert a == b
    assert 0 < a.e_sup_inv_y <= 1 and a.e_sup_y >= 1


def test_constants_deterministic_model(doubling):
    tab = table_for(doubling)
    for eps in (0.1, 0.5, 0.9):
        c = hs.bound_constants(tab, extinction(doubling), eps, 2)
        assert c.c3 == pytest.approx(0.0, abs=1e-9)
        assert c.c1 == pytest.approx((1 + eps) / (1 - eps) ** 2)
        assert c.c2 == pytest.approx((1 - eps) / (1 + eps) ** 2)


def test_constants_poisson2():
    model = single_type(Poisson(2.0))
    tab = table_for(model)
    q = extinction(model)
    c = hs.bound_constants(tab, q, 0.25, 2)
    var_w2 = tab.moments[0, 4] - 4.0
    assert c.c3 == pytest.approx((1.0 + var_w2) / (0.25**2 * (1 - q[0])))
    assert c.c4 == pytest.approx((c.c1 + c.c3) / (1 - q[0]) ** 2)
    assert c.c5 == pytest.approx(c.c2 * (1 - q[0]) ** 2)
    assert c.c6 == pytest.approx(c.c2 * c.c3 / (1 - q[0]) ** 2)


def test_epsilon_range(slight, steep):
    tab = table_for(slight)
    q = extinction(slight)
    hi = hs.epsilon_upper(tab, 2)
    with pytest.raises(hs.EpsilonRangeError, match="epsilon must lie"):
        hs.bound_constants(tab, q, hi, 2)
    with pytest.raises(hs.EpsilonRangeError):
        hs.bound_constants(tab, q, 0.0, 2)
    assert hs.bound_constants(tab, q).epsilon == pytest.approx(hi / 2)
    # here the binding moment is E(W^2) of type 2, so C2's numerator vanishes
    tab2 = table_for(steep)
    hi2 = hs.epsilon_upper(tab2, 2)
    assert hi2 == pytest.approx(tab2.moments[1, 2])
    near = hs.bound_constants(tab2, extinction(steep), hi2 * (1 - 1e-9), 2)
    assert near.c2 == pytest.approx(0.0, abs=1e-9)
    assert np.isfinite([near.c1, near.c3, near.c4, near.c6]).all()


def test_corollary_bounds_shape(doubling):
    tab = table_for(doubling)
    c = hs.bound_constants(tab, extinction(doubling), 0.2, 2)
    inputs = hs.HSBoundInputs(0.0, 2.0, 0.0, 0.5, 0.0, 1000)
    t = np.arange(1, 30)
    curve = hs.corollary_bounds(c, inputs, t)
    assert np.allclose(curve.lower_raw, 1 - c.c4 * 2.0**-t)
    assert np.allclose(curve.upper_raw, 1 - c.c5 * 2.0**-t + c.c6 * 4.0**-t)
    assert np.all(np.diff(curve.lower) >= 0) and np.all(np.diff(curve.upper) >= -1e-15)
    assert curve.lower[-1] == pytest.approx(1.0, abs=1e-6)
    assert curve.upper[-1] == pytest.approx(1.0, abs=1e-6)
    exact = 1 - 2.0**-t
    assert np.all(curve.lower_raw <= exact) and np.all(exact <= curve.upper_raw + 1e-15)
    both = (curve.lower_raw >= 0) & (curve.upper_raw <= 1)
    assert np.all(curve.lower[both] <= curve.upper[both])
