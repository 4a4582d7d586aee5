import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metaban.envs import ArmSet, SyntheticEnv, SyntheticSpec, normalize_rows
from metaban.errors import StateError
from metaban.grouping import GroupConfig
from metaban.harness.simulate import simulate
from metaban.learners import TrainConfig, user_loss
from metaban.net import NetworkConfig, NetworkParams, forward, gradient, init_params
from metaban.policy import (
    LinUCB,
    LinUCBConfig,
    MetaBan,
    MetaBanConfig,
    NeuralUCB,
    NeuralUCBConfig,
)
from metaban.policy.base import select_arm
from metaban.policy.neural_ucb import _Model
from metaban.policy.ucb import UcbConfig, meta_ucb, user_ucb_term


def arms(rng, k, d):
    return normalize_rows(rng.normal(size=(k, d)))


class TestSelectArm:
    def test_lowest_index_tie(self):
        assert select_arm([0.2, 0.5, 0.5]) == 1

    def test_single_arm(self):
        assert select_arm([-3.0]) == 0

    def test_rejects_nan_and_empty(self):
        with pytest.raises(FloatingPointError):
            select_arm([0.1, np.nan])
        with pytest.raises(ValueError):
            select_arm([])

    @settings(max_examples=100)
    @given(s=st.lists(st.floats(-10, 10), min_size=1, max_size=10), c=st.floats(-5, 5))
    def test_shift_invariance(self, s, c):
        s = np.round(np.array(s), 3)
        assert select_arm(s + c) == select_arm(s)


class TestUserUcb:
    def test_worked_value(self):
        v = user_ucb_term(1, 2, 10, UcbConfig(eps1=0.01, delta=0.1, c=1, C=1))
        expect = math.sqrt(0.02) + 6 / math.sqrt(2) + math.sqrt(2 * math.log(100))
        assert v == pytest.approx(expect, rel=1e-12)
        assert v == pytest.approx(7.419, abs=5e-4)

    def test_vanishes(self):
        cfg = UcbConfig(eps1=0.0, c=0.0)
        assert all(user_ucb_term(mu, 0, 10, cfg) == 0.0 for mu in (1, 5, 100))

    def test_requires_update(self):
        with pytest.raises(StateError):
            user_ucb_term(0, 2, 10, UcbConfig())

    @settings(max_examples=100)
    @given(mu=st.integers(1, 10_000), k=st.integers(1, 50))
    def test_strictly_decreasing(self, mu, k):
        cfg = UcbConfig()
        assert user_ucb_term(mu + 1, 2, k, cfg) < user_ucb_term(mu, 2, k, cfg)

    @pytest.mark.parametrize("kw", [dict(beta=-1), dict(delta=0.0), dict(delta=1.0), dict(c=-1)])
    def test_config_validation(self, kw):
        with pytest.raises(ValueError):
            UcbConfig(**kw)


class TestMetaUcb:
    def hand(self):
        cfg = NetworkConfig(2, 2)
        return NetworkParams.from_layers(cfg, [np.array([[1.0, -1.0], [2.0, 0.0]]), np.array([[3.0, -1.0]])])

    def test_identical_params(self):
        p = self.hand()
        x = np.array([0.6, 0.8])
        cfg = UcbConfig(z=0.3)
        assert meta_ucb(x, p, p, 2, 5, cfg) == pytest.approx(0.3 + user_ucb_term(2, 2, 5, cfg))

    def test_perturbed_copy(self):
        # raise the output weight of the active hidden unit by 1: only the
        # W1 row-1 gradient changes, from -x to 0 in the active unit's inputs
        p = self.hand()
        q = NetworkParams.from_layers(p.config, [p.layers[0], np.array([[3.0, 0.0]])])
        x = np.array([0.6, 0.8])
        # hidden pre-activations (-0.2, 1.2): unit 1 active; dW1[1] = W2[1] * x
        assert np.linalg.norm(gradient(p, x) - gradient(q, x)) == pytest.approx(1.0)
        cfg = UcbConfig(beta=2.0, z=0.0, eps1=0.0, c=0.0)
        assert meta_ucb(x, q, p, 1, 3, cfg) == pytest.approx(2.0 + 3 * 2 / math.sqrt(2))

    def test_shape_mismatch(self):
        p = self.hand()
        with pytest.raises(ValueError):
            meta_ucb(np.array([1.0, 0.0]), p, init_params(NetworkConfig(2, 3)), 1, 2, UcbConfig())


class TestLinUCB:
    def test_fresh_score_is_alpha(self):
        pol = LinUCB(["u"], 3, LinUCBConfig(alpha=0.7, lam=1.0))
        d = pol.choose(ArmSet(1, "u", np.eye(3)))
        np.testing.assert_allclose(d.total, 0.7)
        assert d.chosen == 0

    def test_closed_form_after_one_update(self):
        lam, x, r = 0.5, np.array([0.6, 0.8]), 0.9
        pol = LinUCB(["u"], 2, LinUCBConfig(alpha=0.0, lam=lam))
        pol.warm_start("u", x, r)
        A = lam * np.eye(2) + np.outer(x, x)
        np.testing.assert_allclose(pol.theta("u"), np.linalg.solve(A, r * x), rtol=1e-12)
        np.testing.assert_allclose(pol.A_inv["u"], np.linalg.inv(A), rtol=1e-12)

    def test_many_updates_match_inverse(self):
        rng = np.random.default_rng(0)
        pol = LinUCB(["u"], 4, LinUCBConfig(lam=0.1))
        A, b = 0.1 * np.eye(4), np.zeros(4)
        for x in arms(rng, 30, 4):
            r = float(rng.uniform())
            pol.warm_start("u", x, r)
            A += np.outer(x, x)
            b += r * x
        np.testing.assert_allclose(pol.theta("u"), np.linalg.solve(A, b), rtol=1e-8)

    def test_protocol_errors(self):
        pol = LinUCB(["u"], 2)
        with pytest.raises(StateError):
            pol.learn("u", 0, 1.0)
        pol.choose(ArmSet(1, "u", np.eye(2)))
        with pytest.raises(ValueError):
            pol.learn("u", 1, 1.0)
        with pytest.raises(ValueError):
            pol.choose(ArmSet(1, "v", np.eye(2)))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            LinUCBConfig(lam=0.0)


class TestNeuralUCB:
    def test_diagonal_bonus_hand(self):
        pol = NeuralUCB(["u"], 2, cfg=NeuralUCBConfig(width=1, alpha=2.0))
        model = _Model(pol.theta0, 1.0)
        model.A = np.array([1.0, 4.0])
        assert pol.bonus(model, np.array([[3.0, 4.0]]))[0] == pytest.approx(2.0 * math.sqrt(13))

    def test_isotropic_start(self):
        pol = NeuralUCB(["u"], 3, cfg=NeuralUCBConfig(width=4, alpha=0.5, lam=4.0))
        model = _Model(pol.theta0, 4.0)
        g = gradient(pol.theta0, np.array([1.0, 0.0, 0.0]))
        assert pol.bonus(model, g[None])[0] == pytest.approx(0.5 * np.linalg.norm(g) / 2.0)

    def test_ind_single_user_equals_one(self):
        env_spec = SyntheticSpec(n_users=1, n_groups=1, d=3, k=4, noise=0.1)
        cfg = NeuralUCBConfig(width=8, J=3)
        traces = []
        for variant in ("ONE", "IND"):
            env = SyntheticEnv(env_spec)
            pol = NeuralUCB(env.users, env.dim, variant, cfg, seed=2)
            traces.append([(r.arm, r.reward) for r in simulate(env, pol, 30)])
        assert traces[0] == traces[1]

    def test_ind_keeps_separate_models(self):
        pol = NeuralUCB(["a", "b"], 2, "IND", NeuralUCBConfig(width=4, J=2))
        pol.warm_start("a", np.array([1.0, 0.0]), 1.0)
        pol.warm_start("b", np.array([0.0, 1.0]), 0.0)
        assert len(pol.models) == 2
        one = NeuralUCB(["a", "b"], 2, "ONE", NeuralUCBConfig(width=4, J=2))
        one.warm_start("a", np.array([1.0, 0.0]), 1.0)
        one.warm_start("b", np.array([0.0, 1.0]), 0.0)
        assert len(one.models) == 1 and len(one.models[None].r) == 2

    def test_design_accumulates_chosen_gradient(self):
        pol = NeuralUCB(["u"], 2, cfg=NeuralUCBConfig(width=4, lam=1.0, J=1))
        pol.warm_start("u", np.array([1.0, 0.0]), 0.5)
        model = pol.models[None]
        A_before = model.A.copy()
        d = pol.choose(ArmSet(1, "u", np.array([[0.6, 0.8], [0.0, 1.0]])))
        x = np.array([[0.6, 0.8], [0.0, 1.0]])[d.chosen]
        g = gradient(model.params, x)
        pol.learn("u", d.chosen, 0.2)
        np.testing.assert_allclose(model.A, A_before + g * g)

    def test_missing_warm_start(self):
        pol = NeuralUCB(["u"], 2, cfg=NeuralUCBConfig(width=4))
        with pytest.raises(StateError):
            pol.choose(ArmSet(1, "u", np.eye(2)))

    def test_unknown_variant(self):
        with pytest.raises(ValueError):
            NeuralUCB(["u"], 2, "BOTH")


def small_metaban(**kw):
    base = dict(width=8, J2=2, eta2=0.01, alpha=0.1, train=TrainConfig(J1=3))
    base.update(kw)
    return MetaBanConfig(**base)


@pytest.fixture
def warm_metaban():
    env = SyntheticEnv(SyntheticSpec(n_users=6, n_groups=2, d=3, k=4, noise=0.05, seed=1))
    pol = MetaBan(env.users, env.dim, small_metaban(), seed=0)
    for u, x, r in env.warm_start():
        pol.warm_start(u, x, r)
    return env, pol


class TestMetaBan:
    def test_requires_warm_start(self):
        pol = MetaBan([0, 1], 3, small_metaban())
        pol.warm_start(0, np.array([1.0, 0.0, 0.0]), 0.5)
        with pytest.raises(StateError):
            pol.choose(ArmSet(1, 0, np.eye(3)))

    def test_decision_shapes(self, warm_metaban):
        env, pol = warm_metaban
        rnd = env.step(1)
        d = pol.choose(rnd.arm_set)
        assert d.exploit.shape == d.ucb.shape == d.total.shape == (4,)
        assert len(d.groups) == 4
        assert all(rnd.arm_set.user in g.members for g in d.groups)
        assert d.chosen == select_arm(d.total)
        np.testing.assert_allclose(d.total, d.exploit + 0.1 * d.ucb)

    def test_single_arm(self, warm_metaban):
        _, pol = warm_metaban
        assert pol.choose(ArmSet(1, 0, np.array([[1.0, 0.0, 0.0]]))).chosen == 0

    def test_choose_is_side_effect_free(self, warm_metaban):
        env, pol = warm_metaban
        rnd = env.step(1)
        snap = {u: (s.theta, s.mu, s.n_obs) for u, s in pol.states.items()}
        meta = pol.meta.params
        a = pol.choose(rnd.arm_set)
        b = pol.choose(rnd.arm_set)
        assert {u: (s.theta, s.mu, s.n_obs) for u, s in pol.states.items()} == snap
        assert pol.meta.params == meta
        np.testing.assert_array_equal(a.total, b.total)

    def test_zero_alpha_is_greedy(self, warm_metaban):
        env, pol = warm_metaban
        pol.cfg = small_metaban(alpha=0.0)
        d = pol.choose(env.step(1).arm_set)
        assert d.chosen == int(np.argmax(d.exploit))

    def test_learn_updates_only_served_user(self, warm_metaban):
        env, pol = warm_metaban
        rnd = env.step(1)
        u = rnd.arm_set.user
        before = {v: (s.theta, s.mu, s.n_obs) for v, s in pol.states.items()}
        d = pol.choose(rnd.arm_set)
        pol.learn(u, d.chosen, float(rnd.realized[d.chosen]))
        for v, (theta, mu, n) in before.items():
            s = pol.states[v]
            if v == u:
                assert s.n_obs == n + 1 and s.mu == mu + 1
            else:
                assert (s.theta, s.mu, s.n_obs) == (theta, mu, n)
        assert pol.meta is d.meta

    def test_learn_twice_rejected(self, warm_metaban):
        env, pol = warm_metaban
        rnd = env.step(1)
        d = pol.choose(rnd.arm_set)
        pol.learn(rnd.arm_set.user, d.chosen, 0.5)
        with pytest.raises(StateError):
            pol.learn(rnd.arm_set.user, d.chosen, 0.5)

    def test_mismatched_feedback(self, warm_metaban):
        env, pol = warm_metaban
        rnd = env.step(1)
        d = pol.choose(rnd.arm_set)
        with pytest.raises(ValueError):
            pol.learn(rnd.arm_set.user, (d.chosen + 1) % 4, 0.5)

    def test_identical_groups_share_meta(self, warm_metaban):
        env, pol = warm_metaban
        pol.cfg = small_metaban(group=GroupConfig(5.0, 0.99))
        d = pol.choose(env.step(1).arm_set)
        keys = [g.members for g in d.groups]
        assert len(set(keys)) == 1

    def test_never_served_user_keeps_first_snapshot(self):
        env = SyntheticEnv(SyntheticSpec(n_users=4, n_groups=2, d=3, k=3, seed=2))
        pol = MetaBan(env.users, env.dim, small_metaban(), seed=0)
        for u, x, r in env.warm_start():
            pol.warm_start(u, x, r)
        frozen = {u: (s.theta, s.mu) for u, s in pol.states.items()}
        served = set()
        for t in range(1, 15):
            rnd = env.step(t)
            if rnd.arm_set.user == 3:
                continue
            served.add(rnd.arm_set.user)
            d = pol.choose(rnd.arm_set)
            pol.learn(rnd.arm_set.user, d.chosen, float(rnd.realized[d.chosen]))
        assert pol.states[3].theta == frozen[3][0] and pol.states[3].mu == 1
        assert served

    def test_user_loss_non_increasing_after_learn(self):
        rng = np.random.default_rng(3)
        cfg = small_metaban(width=20, user_init="initial",
                            train=TrainConfig(eta1=0.05, J1=200, snapshot_mode="latest"))
        pol = MetaBan(["u"], 3, cfg, seed=1)
        X = arms(rng, 11, 3)
        for x in X[:10]:
            pol.warm_start("u", x, float(x[0] ** 2))
        prev = pol.states["u"].latest
        d = pol.choose(ArmSet(1, "u", X[10:]))
        pol.learn("u", 0, float(X[10, 0] ** 2))
        s = pol.states["u"]
        assert user_loss(s.latest, s.history) <= user_loss(prev, s.history) + 1e-12

    def test_seed_determinism(self):
        spec = SyntheticSpec(n_users=4, n_groups=2, d=3, k=3, noise=0.1, seed=4)
        runs = []
        for _ in range(2):
            env = SyntheticEnv(spec)
            pol = MetaBan(env.users, env.dim, small_metaban(train=TrainConfig(J1=2, minibatch="subset")), seed=5)
            runs.append([(r.arm, r.reward, r.group_exact) for r in simulate(env, pol, 10)])
        assert runs[0] == runs[1]

    def test_config_validation(self):
        with pytest.raises(ValueError):
            MetaBanConfig(alpha=-1)
        with pytest.raises(ValueError):
            MetaBanConfig(served_weight=-1)
        with pytest.raises(ValueError):
            MetaBanConfig(user_init="x")
