import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metaban.grouping import (
    GroupAssignment,
    GroupConfig,
    group_accuracy,
    infer_group,
    infer_groups_matrix,
)


class TestThreshold:
    def test_default_value(self):
        assert GroupConfig().threshold == pytest.approx(0.32)

    @pytest.mark.parametrize("nu,gamma,tau", [(1.1, 0.4, 0.4 / 11), (2.0, 0.5, 0.25), (5.0, 0.0, 0.0)])
    def test_formula(self, nu, gamma, tau):
        assert GroupConfig(nu, gamma).threshold == pytest.approx(tau)

    @pytest.mark.parametrize("nu,gamma", [(1.0, 0.4), (0.5, 0.4), (5.0, -0.1), (5.0, 1.0)])
    def test_rejects_invalid(self, nu, gamma):
        with pytest.raises(ValueError):
            GroupConfig(nu, gamma)

    @settings(max_examples=100)
    @given(a=st.floats(1.01, 100), b=st.floats(1.01, 100), gamma=st.floats(0, 0.99, allow_subnormal=False))
    def test_monotone_in_nu(self, a, b, gamma):
        lo, hi = sorted((a, b))
        assert GroupConfig(lo, gamma).threshold <= GroupConfig(hi, gamma).threshold
        assert GroupConfig(hi, gamma).threshold < gamma or gamma == 0


class TestInferGroup:
    def test_hand_example(self):
        preds = {"a": 0.5, "b": 0.6, "c": 0.9, "d": 0.2}
        g = infer_group(preds, "a", GroupConfig(2.0, 0.4))  # tau = 0.2
        assert g.members == frozenset({"a", "b"})
        assert len(g) == 2 and g.user == "a"

    def test_boundary_inclusive(self):
        g = infer_group({"a": 0.0, "b": 0.25}, "a", GroupConfig(2.0, 0.5))
        assert g.members == {"a", "b"}

    def test_zero_threshold_keeps_exact_ties(self):
        g = infer_group({"a": 0.3, "b": 0.3, "c": 0.30001}, "a", GroupConfig(5.0, 0.0))
        assert g.members == {"a", "b"}

    def test_missing_user(self):
        with pytest.raises(ValueError):
            infer_group({"a": 0.1}, "b", GroupConfig())

    def test_assignment_requires_user(self):
        with pytest.raises(ValueError):
            GroupAssignment("a", 0, frozenset({"b"}))

    @settings(max_examples=100)
    @given(preds=st.lists(st.floats(-2, 2), min_size=1, max_size=12),
           data=st.data(), gamma=st.floats(0, 0.99), nu=st.floats(1.01, 20))
    def test_matrix_matches_mapping(self, preds, data, gamma, nu):
        u = data.draw(st.integers(0, len(preds) - 1))
        cfg = GroupConfig(nu, gamma)
        g = infer_group(dict(enumerate(preds)), u, cfg)
        mask = infer_groups_matrix(np.array(preds)[:, None], u, cfg.threshold)[0]
        assert g.members == frozenset(np.flatnonzero(mask).tolist())
        assert u in g.members

    @settings(max_examples=100)
    @given(preds=st.lists(st.floats(0, 1), min_size=2, max_size=12),
           gamma=st.floats(0, 0.99), a=st.floats(1.01, 20), b=st.floats(1.01, 20))
    def test_group_grows_with_nu(self, preds, gamma, a, b):
        lo, hi = sorted((a, b))
        p = dict(enumerate(preds))
        assert infer_group(p, 0, GroupConfig(lo, gamma)).members <= infer_group(p, 0, GroupConfig(hi, gamma)).members


class TestRecovery:
    def test_exact_recovery_under_gap(self):
        # true rewards with gap 0.5, prediction error below gamma / nu recovers the partition
        rng = np.random.default_rng(0)
        cfg = GroupConfig(5.0, 0.5)
        levels = np.array([0.0, 0.5, 1.0])
        latent = rng.integers(0, 3, size=30)
        for _ in range(50):
            err = rng.uniform(-0.5 / 5 / 2, 0.5 / 5 / 2, size=30)
            preds = levels[latent] + err
            g = infer_group(dict(enumerate(preds)), 0, cfg)
            truth = frozenset(np.flatnonzero(latent == latent[0]).tolist())
            assert group_accuracy(g, truth) == (1.0, 1.0)

    def test_accuracy_partial(self):
        g = GroupAssignment("a", 0, frozenset({"a", "b", "c"}))
        exact, jac = group_accuracy(g, {"a", "b", "d"})
        assert exact == 0.0 and jac == pytest.approx(0.5)

    def test_matrix_shape(self):
        preds = np.array([[0.1, 0.9], [0.15, 0.1], [0.8, 0.85]])
        mask = infer_groups_matrix(preds, 0, 0.1)
        np.testing.assert_array_equal(mask, [[True, True, False], [True, False, True]])
