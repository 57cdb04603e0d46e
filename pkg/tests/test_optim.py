import asyncio

import numpy as np
import pytest

from feedback_capacity.optim import (
    constrained_ascent,
    forward_gradient,
    gather_bounded,
    projected_gradient_norm,
    quasi_newton_ascent,
)

CENTER = np.array([1.0, -2.0, 0.5])


def concave(points):
    return -np.sum((points - CENTER) ** 2, axis=1)


def test_forward_gradient_of_quadratic():
    x = np.array([0.0, 0.0, 0.0])
    value, grad = forward_gradient(concave, x)
    assert value == pytest.approx(-np.sum(CENTER**2))
    assert np.allclose(grad, 2.0 * CENTER, atol=1e-5)


def test_quasi_newton_ascent_finds_maximum():
    result = quasi_newton_ascent(concave, np.zeros(3))
    assert np.allclose(result.x, CENTER, atol=1e-5)
    assert result.value == pytest.approx(0.0, abs=1e-9)
    assert list(result.trace.columns) == ["iteration", "value"]


def test_quasi_newton_ascent_with_bounds():
    result = quasi_newton_ascent(concave, np.zeros(3), bounds=[(None, 0.0)] * 3)
    assert result.x[0] == pytest.approx(0.0, abs=1e-8)
    assert result.x[1] == pytest.approx(-2.0, abs=1e-5)
    assert result.stationarity < 1e-4


def test_quasi_newton_ascent_without_parameters():
    result = quasi_newton_ascent(lambda p: np.full(p.shape[0], 3.0), np.zeros(0))
    assert result.value == 3.0
    assert result.iterations == 0


def test_constrained_ascent_respects_budget():
    # stay inside the unit ball
    budget = lambda p: 1.0 - np.sum(p**2, axis=1)
    result = constrained_ascent(concave, budget, np.zeros(3))
    assert np.sum(result.x**2) <= 1.0 + 1e-8
    assert np.allclose(result.x, CENTER / np.linalg.norm(CENTER), atol=1e-4)


def test_projected_gradient_norm_drops_blocked_components():
    x = np.array([0.0, 1.0])
    grad = np.array([-3.0, 0.5])
    assert projected_gradient_norm(x, grad, [(0.0, None), (None, None)]) == pytest.approx(0.5)
    assert projected_gradient_norm(x, grad, None) == pytest.approx(3.0)


def test_gather_bounded_keeps_order_and_errors():
    def boom():
        raise ValueError("nope")

    results = asyncio.run(gather_bounded([lambda: 1, boom, lambda: 3], workers=2))
    assert results[0] == 1 and results[2] == 3
    assert isinstance(results[1], ValueError)
