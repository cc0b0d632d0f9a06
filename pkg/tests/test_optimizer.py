import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairprior.optimizer import BudgetExhausted, OptimizerSettings, minimize


def budget(K, eps=0.01):
    return K * 5 * math.ceil(math.log2(2 / eps)) + 5


class TestSettings:
    def test_defaults(self):
        s = OptimizerSettings()
        assert (s.partitions, s.contraction, s.tolerance, s.max_evaluations) == (2, 2.0, 0.01, 10_000)

    @pytest.mark.parametrize(
        "kwargs", [dict(partitions=0), dict(contraction=1.0), dict(tolerance=0), dict(max_evaluations=0)]
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            OptimizerSettings(**kwargs)


class TestMinimize:
    def test_constant_loss_returns_center(self):
        res = minimize(lambda x: 1.0, [0, 0], [1, 1])
        np.testing.assert_array_equal(res.x, [0.5, 0.5])
        assert res.fun == 1.0

    def test_quadratic(self):
        res = minimize(lambda x: (x[0] - 0.3) ** 2 + (x[1] - 0.3) ** 2, [0, 0], [1, 1])
        np.testing.assert_allclose(res.x, [0.3, 0.3], atol=0.02)

    def test_linear_goes_to_edge(self):
        res = minimize(lambda x: x[0], [0], [1])
        assert res.x[0] <= 0.02
        # the first sweep already reaches the boundary
        assert res.trace[0][0][0] in (0.0, 0.5) and min(p[0] for p, _ in res.trace[:5]) == 0.0

    def test_candidates_stay_in_box(self):
        seen = []

        def loss(x):
            seen.append(x.copy())
            return float(np.sum((x - [0.95, -0.95]) ** 2))

        minimize(loss, [-1, -1], [1, 1])
        seen = np.array(seen)
        assert seen.min() >= -1 and seen.max() <= 1

    def test_each_point_evaluated_once(self):
        calls = []
        res = minimize(lambda x: calls.append(tuple(x)) or float(np.sum(x**2)), [-1, -1], [1, 1])
        assert len(calls) == len(set(calls)) == res.evaluations

    def test_vectorized_matches_scalar(self):
        f = lambda x: np.sum((np.atleast_2d(x) - [0.2, 0.7, 0.4]) ** 2, axis=1)  # noqa: E731
        scalar = minimize(lambda x: float(f(x)[0]), [0] * 3, [1] * 3)
        batch = minimize(f, [0] * 3, [1] * 3, vectorized=True)
        np.testing.assert_array_equal(scalar.x, batch.x)
        assert scalar.evaluations == batch.evaluations

    def test_budget_error_carries_best(self):
        with pytest.raises(BudgetExhausted) as err:
            minimize(lambda x: float(np.sum(x**2)), [-1] * 3, [1] * 3, OptimizerSettings(max_evaluations=7))
        assert err.value.best.evaluations <= 7

    def test_bad_box(self):
        with pytest.raises(ValueError):
            minimize(lambda x: 0.0, [1, 0], [0, 1])

    def test_returned_loss_beats_final_sweep(self):
        res = minimize(lambda x: float(np.sin(5 * x[0]) + (x[1] - 0.5) ** 2), [0, 0], [1, 1])
        last = [v for _, v in res.trace[-5:]]
        assert res.fun <= min(last)

    def test_deterministic(self):
        f = lambda x: float(np.cos(3 * x[0]) * np.sin(2 * x[1]))  # noqa: E731
        a, b = minimize(f, [0, 0], [2, 2]), minimize(f, [0, 0], [2, 2])
        np.testing.assert_array_equal(a.x, b.x)
        assert [v for _, v in a.trace] == [v for _, v in b.trace]


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_separable_quadratics_interior(K, seed):
    # curvature of at least 1 and minima 0.05 away from the faces
    rng = np.random.default_rng(seed)
    target = rng.uniform(0.05, 0.95, K)
    scale = rng.uniform(1, 4, K)
    res = minimize(lambda x: float(np.sum(scale * (x - target) ** 2)), np.zeros(K), np.ones(K))
    np.testing.assert_allclose(res.x, target, atol=0.02)
    assert res.evaluations <= budget(K)
    running = np.minimum.accumulate([v for _, v in res.trace])
    assert np.all(np.diff(running) <= 0)


def test_clamping_near_a_face_stops_early():
    # beside a face the clamped sweep has fewer distinct points, so its loss
    # spread drops under the tolerance while the search range is still wide
    res = minimize(lambda x: float((x[0] - 0.03) ** 2), [0], [1])
    assert res.x[0] == 0.0
    assert abs(res.x[0] - 0.03) > 0.02


def test_shallow_losses_stop_at_coarse_resolution():
    # the tolerance is on loss values, so flat losses terminate with wide rectangles
    res = minimize(lambda x: float(0.1 * (x[0] - 0.845) ** 2), [0], [1])
    assert abs(res.x[0] - 0.845) > 0.02
