import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nore.planner import (
    CandidatePolicy,
    GBreakdown,
    PlannerConfig,
    choose_candidate,
    evaluate_policies,
    expected_free_energy,
    observation_entropy,
    preference_divergence,
    select_action,
    term1_obs_entropy,
    term2_preference_divergence,
    term3_info_gain,
)
from nore.world_model import RssmConfig, WorldModel


def small_model(seed=0, zero=False):
    m = WorldModel(RssmConfig(obs_size=8, state_dims=3, state_categories=4, deter_size=6,
                              hidden_size=6, ensemble_size=3, ensemble_hidden=5,
                              dtype="float64", seed=seed))
    if zero:
        for p in m.params.values():
            p.data[...] = 0.0
    return m


UNIFORM4 = np.full(4, -math.log(4))


def test_term1_examples():
    assert observation_entropy(np.full(10, 0.5)) == pytest.approx(10 * math.log(2))
    assert observation_entropy(np.array([0.0, 1.0, 1.0])) == 0.0
    assert observation_entropy(np.array([0.25])) == pytest.approx(0.5623, abs=1e-4)
    m = small_model(zero=True)
    st_ = m.initial_state(2)
    np.testing.assert_allclose(term1_obs_entropy(m, st_.h, st_.s), 8 * math.log(2))


def test_term2_uniform_prior_and_preferences_cancel():
    rng = np.random.default_rng(0)
    vals, _ = term2_preference_divergence(np.zeros((50, 3, 4)), UNIFORM4, rng)
    assert np.abs(vals).max() <= 1e-9


def test_term2_hand_case():
    prior = np.log(np.array([[[0.8, 0.2]]]))
    val = preference_divergence(prior, np.array([[0]]), np.log([0.5, 0.5]))
    assert val[0] == pytest.approx(math.log(0.8) - math.log(0.5), abs=1e-12)
    assert val[0] == pytest.approx(0.4700, abs=1e-4)


def test_term2_one_hot_preference_on_sample():
    prior = np.log(np.array([[[0.6, 0.4]]]))
    with np.errstate(divide="ignore"):
        one_hot_pref = np.log([1.0, 0.0])
    val = preference_divergence(prior, np.array([[0]]), one_hot_pref)
    assert val[0] == pytest.approx(math.log(0.6))
    uniform = preference_divergence(prior, np.array([[0]]), np.log([0.5, 0.5]))
    assert val[0] < uniform[0]


def test_term2_prefers_states_hitting_preferred_category():
    # two-state chain: identical uniform prior, preferences concentrated on category 0
    prior = np.zeros((1, 2))[None].repeat(5, axis=0)
    pref = np.log([0.9, 0.1])
    often = np.array([[0], [0], [0], [1], [0]])
    rarely = np.array([[1], [1], [0], [1], [1]])
    assert preference_divergence(prior, often, pref).sum() < preference_divergence(prior, rarely, pref).sum()


def test_term2_rejects_unnormalised_preferences():
    with pytest.raises(ValueError):
        term2_preference_divergence(np.zeros((1, 3, 4)), np.zeros(4), np.random.default_rng(0))


def test_term3_identical_ensemble_is_zero():
    m = small_model()
    m.clone_ensemble_from(1)
    rng = np.random.default_rng(0)
    h, s = rng.normal(size=(7, 6)), np.eye(4)[rng.integers(0, 4, (7, 3))]
    np.testing.assert_array_equal(term3_info_gain(m, h, s), 0.0)


def test_uniform_model_total_is_horizon_times_single_step():
    m = small_model(zero=True)
    start = m.initial_state(1)
    one = expected_free_energy(m, [0], start, UNIFORM4, np.random.default_rng(0))
    many = expected_free_energy(m, [0, 1, 2, 3, 1], start, UNIFORM4, np.random.default_rng(0))
    assert float(many.total) == pytest.approx(5 * float(one.total), abs=1e-9)
    assert float(one.total) == pytest.approx(8 * math.log(2), abs=1e-9)


def test_breakdown_resums():
    m = small_model()
    rng = np.random.default_rng(1)
    acts = rng.integers(0, 4, (10, 6))
    bd = evaluate_policies(m, acts, m.initial_state(1), UNIFORM4, rng, weights=(1.0, 0.5, 2.0))
    manual = (bd.term1 + 0.5 * bd.term2 - 2.0 * bd.term3).sum(axis=1)
    np.testing.assert_allclose(bd.total, manual, atol=1e-9)
    row = bd.row(3)
    assert row.summary()["G"] == pytest.approx(bd.total[3], abs=1e-9)


def test_policy_validation():
    with pytest.raises(ValueError):
        CandidatePolicy([])
    with pytest.raises(ValueError):
        CandidatePolicy([0, 4])


def test_select_single_candidate():
    m = small_model()
    res = select_action(m, m.initial_state(1), UNIFORM4, np.random.default_rng(0),
                        candidates=np.array([[2, 0, 1]]))
    assert res.action == 2 and res.index == 0


def test_argmin_of_hand_set_values():
    assert choose_candidate(np.array([2.0, 1.0]), np.random.default_rng(0)) == 1
    with pytest.raises(ValueError):
        choose_candidate(np.array([]), np.random.default_rng(0))


def test_ties_broken_uniformly():
    rng = np.random.default_rng(0)
    picks = np.bincount([choose_candidate(np.zeros(4), rng) for _ in range(10_000)], minlength=4)
    sigma = math.sqrt(10_000 * 0.25 * 0.75)
    assert np.all(np.abs(picks - 2500) < 4 * sigma)


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=30), st.floats(-1e3, 1e3),
       st.integers(0, 1000))
def test_argmin_invariant_to_constant_shift(totals, c, seed):
    t = np.round(np.array(totals), 3)   # keep ties exact under the shift
    a = choose_candidate(t, np.random.default_rng(seed))
    b = choose_candidate(t + c, np.random.default_rng(seed))
    assert t[a] == t.min() and (t + c)[b] == (t + c).min()
    if np.sum(t == t.min()) == 1:
        assert a == b


def test_softmax_mode_favours_low_g():
    rng = np.random.default_rng(0)
    picks = [choose_candidate(np.array([0.0, 3.0]), rng, "softmax", 1.0) for _ in range(4000)]
    assert np.mean(np.array(picks) == 0) == pytest.approx(1 / (1 + math.exp(-3)), abs=0.03)


def test_evaluation_does_not_mutate_model_or_preferences():
    m = small_model()
    pref = np.log(np.array([0.4, 0.3, 0.2, 0.1]))
    pref_before = pref.copy()
    before = m.checksum()
    select_action(m, m.initial_state(1), pref, np.random.default_rng(0),
                  PlannerConfig(horizon=4, n_candidates=8))
    assert m.checksum() == before
    np.testing.assert_array_equal(pref, pref_before)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000))
def test_selection_seed_deterministic(seed):
    m = small_model()
    cfg = PlannerConfig(horizon=3, n_candidates=6)
    a = select_action(m, m.initial_state(1), UNIFORM4, np.random.default_rng(seed), cfg)
    b = select_action(m, m.initial_state(1), UNIFORM4, np.random.default_rng(seed), cfg)
    assert a.action == b.action
    np.testing.assert_array_equal(a.totals, b.totals)


def test_config_validation():
    with pytest.raises(ValueError):
        PlannerConfig(mode="greedy")
    with pytest.raises(ValueError):
        PlannerConfig(horizon=0)
    assert PlannerConfig.exploration().obs_entropy_weight == 0.0
    assert isinstance(GBreakdown(np.zeros(2), np.zeros(2), np.zeros(2)).total, float | np.floating)
