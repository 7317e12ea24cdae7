import math

import numpy as np
import pytest

from invopt.errors import ConfigError, ProtocolError
from invopt.geometry import Segment
from invopt.learners import (
    MetaGradInverseLearner,
    OgdLearner,
    OnsInverseLearner,
    OnsState,
    exp_weights_update,
    metagrad_grid,
    metagrad_prior,
    ons_init,
    ons_step,
    prior_weights,
)
from invopt.losses import Observation, SurrogateParams, surrogate_eval
from invopt.region import BallRegion, BoxRegion
from invopt.sim import AdaptiveSegments, RandomVertexSets, make_instance, run_experiment

BALL2 = BallRegion(np.zeros(2), 1.0)


def test_gamma_at_largest_eta():
    s = OnsState(BALL2, 1 / (5 * 3.0), 3.0)
    assert s.gamma == pytest.approx(25 / 49, rel=1e-14)


def test_gamma_tends_to_one_for_small_eta():
    s = OnsState(BALL2, 1e-9, 1.0)
    assert 1 - 1e-6 < s.gamma < 1


def test_epsilon_formula():
    s = ons_init(BALL2, 2, 2.0, 1.0, 0.1)
    assert s.epsilon == pytest.approx(2 / (4 * s.gamma**2), rel=1e-15)
    assert np.array_equal(s.matrix, s.epsilon * np.eye(2))
    assert np.array_equal(s.iterate, [0, 0])


def test_init_validation():
    with pytest.raises(ConfigError):
        OnsState(BALL2, 0.5, 1.0)  # eta > 1/(5H)
    with pytest.raises(ConfigError):
        OnsState(BALL2, 0.1, 1.0, w1=[2, 0])
    with pytest.raises(ConfigError):
        ons_init(BALL2, 3, 2.0, 1.0, 0.1)


def test_zero_gradient_leaves_state():
    s = OnsState(BALL2, 0.1, 1.0, w1=[0.2, 0.1])
    A, w = s.matrix.copy(), s.iterate.copy()
    ons_step(s, np.zeros(2))
    assert np.array_equal(s.matrix, A) and np.array_equal(s.iterate, w)


def test_scalar_step_unconstrained():
    s = OnsState(BallRegion([0.0], 1e6), 0.1, 1.0, W=2.0, w1=[0.3])
    g = 0.7
    want = 0.3 - (1 / s.gamma) * g / (s.epsilon + g * g)
    s.step([g])
    assert s.iterate[0] == pytest.approx(want, rel=1e-14)


def test_three_step_trajectory_matches_reference():
    # reference: explicit inverse and an SLSQP projection onto the disk, computed once
    ref = [[0.9901740405359067, -0.13984051433256608],
           [0.9237489524904771, 0.22544639988548373],
           [0.9246470545096882, 0.3808251890126988]]
    s = OnsState(BALL2, 0.1, 2.0, W=2.0, w1=[0.9, 0.0])
    for g, want in zip([[-0.5, 0.2], [0.1, -0.4], [-0.3, -0.3]], ref):
        s.step(np.array(g))
        assert np.allclose(s.iterate, want, atol=1e-7)


def test_matrix_stays_above_epsilon():
    rng = np.random.default_rng(0)
    s = OnsState(BallRegion(np.zeros(4), 1.0), 0.05, 4.0)
    for t in range(300):
        s.step(rng.normal(size=4))
        if t % 100 == 0:
            assert np.linalg.eigvalsh(s.matrix)[0] >= s.epsilon - 1e-9
            assert np.allclose(s.matrix, s.matrix.T, atol=1e-12)
        assert s.region.contains(s.iterate)


def _obs(a, b, chosen):
    seg = Segment(a, b)
    return Observation(seg, seg.endpoint_a if chosen == 0 else seg.endpoint_b)


def test_ons_learner_no_update_when_agreeing():
    L = OnsInverseLearner(BALL2, 2.0)
    c = L.predict()  # zero vector; ties pick endpoint a
    L.update(_obs([1, 0], [-1, 0], 0))
    assert np.array_equal(L.predict(), c)


def test_ons_learner_one_round_by_hand():
    B = 2.0
    L = OnsInverseLearner(BALL2, B)
    L.predict()
    L.update(_obs([0, 0.5], [0, -0.5], 1))  # predicted a, agent chose b
    g = np.array([0, 1.0])  # xhat - x
    eta, gamma, eps = L.eta, L.state.gamma, L.state.epsilon
    # gradient fed to ONS is eta*g; A = eps I + eta^2 g g^T, and g is an eigenvector
    want = -(1 / gamma) * eta * g / (eps + eta**2 * (g @ g))
    assert np.allclose(L.predict(), want, atol=1e-15)


def test_protocol_order_enforced():
    L = OnsInverseLearner(BALL2, 2.0)
    with pytest.raises(ProtocolError):
        L.update(_obs([1, 0], [-1, 0], 0))
    L.predict()
    with pytest.raises(ProtocolError):
        L.predict()


def test_grid_examples():
    assert metagrad_grid(0.2, 16) == [1.0, 0.5, 0.25]
    assert metagrad_grid(3.0, 1) == [1 / 15]
    assert len(metagrad_grid(1.0, 10**6)) == 11
    assert len(metagrad_grid(1.0, 2**20)) == 11
    assert len(metagrad_grid(1.0, 2**20 + 1)) == 12


def test_prior_examples():
    assert np.allclose(metagrad_prior(16), [2 / 3, 2 / 9, 1 / 9], atol=1e-15)
    assert metagrad_prior(1) == [1.0]
    for T in (1, 2, 10, 100, 10**4, 10**6):
        p = metagrad_prior(T)
        assert abs(math.fsum(p) - 1.0) <= 1e-12
        assert max(p) == p[0]


def test_exp_weights_update_arithmetic():
    prior = np.array(prior_weights(2))
    post = np.exp(exp_weights_update(np.log(prior), [0.1, 0.2]))
    want = prior * np.exp([-0.1, -0.2])
    assert np.allclose(post, want / want.sum(), rtol=1e-14)


def test_metagrad_prediction_formula():
    mg = MetaGradInverseLearner(BALL2, 1.0, 16)
    for e, w in zip(mg.experts, ([0.5, 0], [0, 0.5], [-0.2, -0.2])):
        e.iterate = np.array(w)
    rng = np.random.default_rng(4)
    mg.log_weights = np.log(rng.dirichlet(np.ones(3)))
    p, eta = mg.weights, mg.grid
    want = sum(eta[i] * p[i] * mg.experts[i].iterate for i in range(3)) / sum(eta * p)
    assert np.allclose(mg.predict(), want, atol=1e-15)


def test_metagrad_two_balanced_experts_give_midpoint():
    mg = MetaGradInverseLearner(BALL2, 1.0, 4)  # grid (0.2, 0.1)
    mg.experts[0].iterate = np.array([0.4, 0.0])
    mg.experts[1].iterate = np.array([0.0, 0.4])
    mg.log_weights = np.log(np.array([1 / 3, 2 / 3]))  # eta1 p1 = eta2 p2
    assert np.allclose(mg.predict(), [0.2, 0.2], atol=1e-15)


def test_metagrad_weights_follow_surrogate_losses():
    mg = MetaGradInverseLearner(BALL2, 2.0, 100)
    for e, w in zip(mg.experts, np.random.default_rng(1).uniform(-0.3, 0.3, size=(len(mg.experts), 2))):
        e.iterate = w
    prior = mg.log_weights.copy()
    chat = mg.predict()
    obs = _obs([0.5, 0], [-0.5, 0], 1 if chat[0] >= 0 else 0)
    g = (obs.action_set.argmax(chat) - obs.chosen_action)
    f = [surrogate_eval(SurrogateParams(e.eta, chat, g), e.iterate) for e in mg.experts]
    mg.update(obs)
    want = np.exp(prior) * np.exp(-np.array(f))
    assert np.allclose(mg.weights, want / want.sum(), rtol=1e-12)


def test_metagrad_zero_gradient_is_noop():
    mg = MetaGradInverseLearner(BALL2, 2.0, 100)
    w = mg.log_weights.copy()
    its = [e.iterate.copy() for e in mg.experts]
    mg.predict()
    mg.update(_obs([1, 0], [-1, 0], 0))
    assert np.array_equal(mg.log_weights, w)
    assert all(np.array_equal(a, e.iterate) for a, e in zip(its, mg.experts))


def test_single_expert_metagrad_matches_ons():
    spec = make_instance(RandomVertexSets(3), 300, seed=2)
    ons = run_experiment(spec, OnsInverseLearner(spec.region, spec.B, W=spec.D))
    mg = run_experiment(spec, MetaGradInverseLearner(spec.region, spec.B, spec.T, grid=[1 / (5 * spec.B)], W=spec.D))
    assert np.max(np.abs(ons.chat - mg.chat)) <= 1e-12


def test_ogd_steps():
    box = BoxRegion([-10, -10], [10, 10])
    L = OgdLearner(box, 2.0, 1.0, w1=[0.5, 0.5])
    L.predict()
    L.update(_obs([1, 0], [-1, 0], 0))  # prediction picks a, agent a: no change
    assert np.array_equal(L.predict(), [0.5, 0.5])
    L.update(_obs([0, 1], [0, -1], 1))  # mistake at t=2: step 2/sqrt(2)
    assert np.allclose(L.predict(), np.array([0.5, 0.5]) - (2 / math.sqrt(2)) * np.array([0, 2.0]), atol=1e-15)


def test_ogd_regret_at_least_ons_on_adaptive_segments():
    spec = make_instance(AdaptiveSegments(5), 10_000, seed=0)
    ogd = run_experiment(spec, "ogd")
    ons = run_experiment(spec, "ons")
    assert ogd.final("R") >= ons.final("R")
