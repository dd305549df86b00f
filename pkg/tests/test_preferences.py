import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special as sp

from nore.numerics import adam_step
from nore.preferences import (
    BASELINE,
    MECHANISMS,
    NORE,
    PEPPER,
    Memory,
    MemoryBuffer,
    NoreBlocks,
    PreferenceStore,
    dirichlet_log_mean,
    dirichlet_mean,
    encode_memories,
    make_mechanism,
    nore_sweep,
    nore_update,
    pepper_update,
    preference_entropy,
    preference_logp,
    preference_probs,
)

from helpers import check_param_grads


def one_hot_state(cats, dims, k):
    s = np.zeros((dims, cats))
    s[:, k] = 1.0
    return s


def random_buffer(rng, n=6, dims=3, cats=4):
    return MemoryBuffer([Memory(np.eye(cats)[rng.integers(0, cats, dims)], "real")
                         for _ in range(n)])


def uniform_buffer(n=5, cats=4):
    # dims == categories with one dim per category: the dims-average is exactly uniform
    return MemoryBuffer([Memory(np.eye(cats), "imagined") for _ in range(n)])


# -- Dirichlet -------------------------------------------------------------------

def test_dirichlet_mean_examples():
    np.testing.assert_allclose(dirichlet_mean([1, 1, 1, 1]), [0.25] * 4)
    np.testing.assert_allclose(dirichlet_mean([2, 1, 1]), [0.5, 0.25, 0.25])
    np.testing.assert_allclose(dirichlet_mean([3.5, 0.5]), [0.875, 0.125])


def test_dirichlet_log_mean_examples():
    np.testing.assert_allclose(dirichlet_log_mean([2, 2]), [1 - 11 / 6] * 2, atol=1e-12)
    np.testing.assert_allclose(dirichlet_log_mean([1, 1]), [-1, -1], atol=1e-12)


def test_dirichlet_oracles_on_1000_inputs():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        d = rng.uniform(0.05, 50, size=rng.integers(2, 8))
        np.testing.assert_allclose(dirichlet_log_mean(d), sp.digamma(d) - sp.digamma(d.sum()),
                                   rtol=0, atol=1e-10)
        np.testing.assert_allclose(dirichlet_mean(d), d / d.sum(), rtol=0, atol=1e-15)


def test_dirichlet_log_mean_harmonic_oracle_for_integers():
    rng = np.random.default_rng(1)
    H = np.concatenate([[0.0], np.cumsum(1.0 / np.arange(1, 400))])
    for _ in range(200):
        d = rng.integers(1, 40, size=4)
        np.testing.assert_allclose(dirichlet_log_mean(d), H[d - 1] - H[d.sum() - 1], atol=1e-10)


@given(st.lists(st.floats(0.01, 100), min_size=2, max_size=10))
def test_jensen_gap(d):
    assert np.all(dirichlet_log_mean(d) <= np.log(dirichlet_mean(d)) + 1e-12)


def test_dirichlet_rejects_non_positive():
    with pytest.raises(ValueError):
        dirichlet_mean([1, 0])
    with pytest.raises(ValueError):
        dirichlet_log_mean([1, -1])


# -- memories ------------------------------------------------------------------

def test_encode_memories_counts():
    rng = np.random.default_rng(0)
    real = [one_hot_state(4, 2, i % 4) for i in range(10)]
    imagined = [one_hot_state(4, 2, 0) for _ in range(5)]
    buf = encode_memories(real, imagined, rng)
    assert len(buf) == 8 and buf.n_real == 3
    assert len(encode_memories([], imagined, rng)) == 5
    with pytest.raises(ValueError):
        encode_memories([], [], rng)


def test_encode_memories_deterministic_order():
    real = [one_hot_state(4, 2, i % 4) for i in range(10)]
    imagined = [one_hot_state(4, 2, 3) for _ in range(5)]
    a = encode_memories(real, imagined, np.random.default_rng(3))
    b = encode_memories(real, imagined, np.random.default_rng(3))
    assert [m.source for m in a] == [m.source for m in b]
    np.testing.assert_array_equal(a.aggregated(), b.aggregated())


# -- Pepper --------------------------------------------------------------------

def test_pepper_toy_case():
    store = PreferenceStore(np.ones(2), alpha=1.0, beta=1.0, mechanism=PEPPER)
    buf = MemoryBuffer([Memory(np.array([[1.0, 0.0]]), "real")])
    pepper_update(store, buf)
    np.testing.assert_allclose(store.d, [2, 1])
    np.testing.assert_allclose(dirichlet_mean(store.d), [2 / 3, 1 / 3])


def test_pepper_locality():
    store = PreferenceStore(np.ones(4), alpha=0.5, beta=0.9, mechanism=PEPPER)
    pepper_update(store, MemoryBuffer([Memory(one_hot_state(4, 3, 2), "real")] * 4))
    np.testing.assert_allclose(store.d[[0, 1, 3]], 0.9)
    assert store.d[2] == pytest.approx(0.9 + 0.5 * 4)


def test_pepper_uniform_buffer_preserves_uniform():
    store = PreferenceStore.uniform(4, PEPPER, alpha=0.3, beta=1.0)
    for _ in range(10):
        pepper_update(store, uniform_buffer())
    np.testing.assert_allclose(np.exp(preference_logp(store)), 0.25, atol=1e-9)


def test_pepper_entropy_non_increasing_with_repeated_exposure():
    store = PreferenceStore.uniform(5, PEPPER, alpha=0.2, beta=1.0)
    rng = np.random.default_rng(0)
    series = []
    for _ in range(30):
        states = [one_hot_state(5, 2, k) for k in rng.choice(5, size=8, p=[.5, .2, .1, .1, .1])]
        pepper_update(store, MemoryBuffer([Memory(s, "real") for s in states]))
        series.append(-(dirichlet_mean(store.d) * np.log(dirichlet_mean(store.d))).sum())
    # exposure concentrated on one category keeps sharpening the distribution
    assert series[-1] < series[0]


# -- preference_logp -------------------------------------------------------------

def test_preference_logp_examples():
    for mech in MECHANISMS:
        np.testing.assert_allclose(preference_logp(PreferenceStore.uniform(6, mech)),
                                   -math.log(6), atol=1e-12)
    lp = preference_logp(PreferenceStore(np.array([1.0, 0.0]), 0.1, 0.9, NORE))
    np.testing.assert_allclose(lp, [-0.3133, -1.3133], atol=1e-4)
    lp = preference_logp(PreferenceStore(np.array([3.0, 1.0]), 0.1, 1.0, PEPPER))
    assert abs(np.exp(lp).sum() - 1) < 1e-12


def test_preference_probs_per_mechanism():
    pep = PreferenceStore(np.array([3.0, 1.0]), 0.1, 1.0, PEPPER)
    np.testing.assert_allclose(preference_probs(pep), [0.75, 0.25])
    # the planner scores against the digamma form, a different weighting
    assert not np.allclose(np.exp(preference_logp(pep)), [0.75, 0.25])
    nore = PreferenceStore(np.array([1.0, 0.0]), 0.1, 0.9, NORE)
    np.testing.assert_allclose(preference_probs(nore), np.exp(preference_logp(nore)))
    np.testing.assert_allclose(preference_probs(PreferenceStore.uniform(4, BASELINE)), 0.25)


def test_store_validation():
    with pytest.raises(ValueError):
        PreferenceStore(np.ones(3), 0.1, 0.9, "reward")
    with pytest.raises(ValueError):
        PreferenceStore(np.array([1.0, 0.0]), 0.1, 1.0, PEPPER)


# -- NORE ------------------------------------------------------------------------

def test_nore_alpha_zero_beta_one_leaves_store():
    rng = np.random.default_rng(0)
    blocks = NoreBlocks(4, rng, hidden=8)
    store = PreferenceStore(rng.normal(size=4), alpha=0.0, beta=1.0, mechanism=NORE)
    before = store.d.copy()
    nore_update(store, blocks, random_buffer(rng), rng)
    np.testing.assert_array_equal(store.d, before)


def test_nore_per_memory_drift_bounded_by_alpha():
    rng = np.random.default_rng(1)
    blocks = NoreBlocks(4, rng, hidden=8)
    sweep = nore_sweep(np.ones(4), blocks, random_buffer(rng, n=20), 0.1, 1.0, rng)
    steps = np.diff(np.array(sweep.trace), axis=0)
    assert np.abs(steps).max() <= 0.1 + 1e-12
    assert len(sweep.trace) == 21


def test_nore_entropy_gradient_matches_finite_differences():
    rng = np.random.default_rng(2)
    blocks = NoreBlocks(3, rng, hidden=4)
    blocks.w = np.array([0.1, -0.2, 0.05])
    buf = random_buffer(rng, n=4, dims=2, cats=3)
    d0 = np.array([0.3, -0.1, 0.4])

    def loss():
        sweep = nore_sweep(d0, blocks, buf, 0.5, 0.9, np.random.default_rng(7))
        return -preference_entropy(sweep.d)

    assert check_param_grads(blocks.params, loss) < 1e-4


def test_nore_adam_step_raises_entropy():
    rng = np.random.default_rng(3)
    blocks = NoreBlocks(4, rng, hidden=8, lr=1e-3)
    buf = random_buffer(rng, n=10)
    d0 = np.array([2.0, 0.0, -1.0, 0.5])

    def entropy():
        return float(preference_entropy(
            nore_sweep(d0, blocks, buf, 0.5, 0.9, np.random.default_rng(5)).d).data)

    before = entropy()
    blocks.params.zero_grad()
    (-preference_entropy(nore_sweep(d0, blocks, buf, 0.5, 0.9, np.random.default_rng(5)).d)).backward()
    adam_step(blocks.params, lr=blocks.lr)
    assert entropy() > before


def test_nore_symmetric_init_keeps_uniform():
    rng = np.random.default_rng(0)
    blocks = NoreBlocks(4, rng, hidden=8, stochastic=False)
    for p in blocks.params.values():
        p.data[...] = 0.0
    store = PreferenceStore.uniform(4, NORE, alpha=0.1, beta=0.9)
    for _ in range(3):
        nore_update(store, blocks, uniform_buffer(), rng)
    np.testing.assert_allclose(np.exp(preference_logp(store)), 0.25, atol=1e-12)


def test_nore_same_seed_same_result():
    def run():
        rng = np.random.default_rng(11)
        mech = make_mechanism(NORE, 4, rng)
        for _ in range(3):
            mech.update(random_buffer(rng), rng)
        return mech.snapshot()

    np.testing.assert_array_equal(run(), run())


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(MECHANISMS))
def test_updates_keep_length_and_finiteness(seed, name):
    rng = np.random.default_rng(seed)
    mech = make_mechanism(name, 4, rng)
    for _ in range(3):
        mech.update(random_buffer(rng, n=int(rng.integers(1, 8))), rng)
        snap = mech.snapshot()
        assert snap.shape == (4,) and np.all(np.isfinite(snap))
        assert abs(np.exp(mech.logp()).sum() - 1) < 1e-9


def test_mechanisms_share_one_interface():
    rng = np.random.default_rng(0)
    buf = random_buffer(rng)
    for name in MECHANISMS:
        mech = make_mechanism(name, 4, rng)
        assert mech.name == name
        mech.update(buf, rng)
        assert mech.logp().shape == (4,) and mech.probs().shape == (4,)
    baseline = make_mechanism(BASELINE, 4, rng)
    baseline.update(buf, rng)
    np.testing.assert_allclose(baseline.logp(), -math.log(4))
    with pytest.raises(ValueError):
        make_mechanism("hebb", 4, rng)
    with pytest.raises(ValueError):
        baseline.update(MemoryBuffer(), rng)
