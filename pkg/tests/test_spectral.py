import numpy as np
import pytest

from feedback_capacity.errors import InvalidInputError, PreconditionError
from feedback_capacity.model import NoiseModel, frequency_grid, spectral_density
from feedback_capacity.spectral import (
    FirStrategy,
    _delay_basis,
    _rate_power_batch,
    fir_from_dict,
    fir_to_dict,
    optimize_fir,
    rate_and_power,
    waterfill_capacity,
)
from feedback_capacity.stationary_sdp import solve_capacity


def test_fir_strategy_validation():
    assert FirStrategy([], 1.0).L == 0
    with pytest.raises(InvalidInputError):
        FirStrategy([0.1], 0.0)
    with pytest.raises(InvalidInputError):
        FirStrategy([np.nan], 1.0)


def test_zero_filter_on_white_noise(white_model):
    rate, power = rate_and_power(white_model, FirStrategy([], white_model.P))
    assert rate == pytest.approx(0.5 * np.log2(1.0 + white_model.P), abs=1e-12)
    assert power == pytest.approx(white_model.P, abs=1e-12)


def test_zero_filter_on_colored_noise(arma_model):
    rate, power = rate_and_power(arma_model, FirStrategy([], arma_model.P))
    density = spectral_density(arma_model, frequency_grid(4096))
    expected = 0.5 * np.mean(np.log2((arma_model.P + density) / density))
    assert rate == pytest.approx(expected, rel=1e-12)
    assert power == pytest.approx(arma_model.P, abs=1e-12)
    assert rate <= solve_capacity(arma_model).C


def test_single_tap_power_binds(arma_model):
    density = spectral_density(arma_model, frequency_grid(4096))
    V = arma_model.P - 0.1**2 * np.mean(density)
    _, power = rate_and_power(arma_model, FirStrategy([0.1], V))
    assert power == pytest.approx(arma_model.P, abs=1e-10)


def test_rate_invariant_under_grid_reflection(arma_model):
    rng = np.random.default_rng(4)
    theta = frequency_grid(512)
    taps = rng.normal(scale=0.2, size=(3, 5))
    V = np.full(3, 0.4)
    forward = _rate_power_batch(
        spectral_density(arma_model, theta), _delay_basis(theta, 5), taps, V
    )
    reflected = _rate_power_batch(
        spectral_density(arma_model, -theta), _delay_basis(-theta, 5), taps, V
    )
    assert np.allclose(forward[0], reflected[0], atol=1e-13)
    assert np.allclose(forward[1], reflected[1], atol=1e-13)


def test_rate_and_power_preconditions(arma_model):
    with pytest.raises(PreconditionError):
        rate_and_power(arma_model, FirStrategy([], 1.0), quad_points=128)
    with pytest.raises(PreconditionError):
        rate_and_power(NoiseModel([[1.1]], [[1.0]], [[1.0]], 1.0), FirStrategy([], 1.0))


@pytest.mark.parametrize("L", [0, 1, 4])
def test_optimize_fir_white_noise(white_model, L):
    strategy = optimize_fir(white_model, L, restarts=2)
    rate, power = rate_and_power(white_model, strategy)
    assert rate == pytest.approx(0.5 * np.log2(1.0 + white_model.P), abs=1e-8)
    assert power <= white_model.P + 1e-10
    if L == 0:
        assert strategy.V == pytest.approx(white_model.P)


def test_optimize_fir_rejects_long_filters(arma_model):
    with pytest.raises(PreconditionError):
        optimize_fir(arma_model, 65)


def test_optimize_fir_monotone_under_zero_padding(arma_model):
    shorter = optimize_fir(arma_model, 2, restarts=2)
    longer = optimize_fir(arma_model, 3, restarts=1, warm_start=shorter)
    assert rate_and_power(arma_model, longer)[0] >= rate_and_power(arma_model, shorter)[0] - 1e-9


def test_optimize_fir_approaches_capacity(arma_model):
    cert = solve_capacity(arma_model)
    strategy = optimize_fir(arma_model, 16, restarts=2)
    rate, power = rate_and_power(arma_model, strategy)
    assert power <= arma_model.P + 1e-9
    assert strategy.V >= 1e-9
    assert rate >= cert.C - 0.02
    assert rate <= cert.C + 1e-6


def test_random_feasible_strategies_never_beat_capacity(arma_model):
    cert = solve_capacity(arma_model)
    density = spectral_density(arma_model, frequency_grid(4096))
    rng = np.random.default_rng(99)
    for _ in range(200):
        L = int(rng.integers(0, 9))
        b = rng.normal(scale=0.3, size=L)
        basis = _delay_basis(frequency_grid(4096), L)
        used = float(np.mean(np.abs(b @ basis) ** 2 * density)) if L else 0.0
        if used >= arma_model.P:
            b *= np.sqrt(0.5 * arma_model.P / used)
            used *= 0.5 * arma_model.P / used
        V = (arma_model.P - used) * rng.uniform(0.1, 1.0)
        rate, power = rate_and_power(arma_model, FirStrategy(b, V))
        assert power <= arma_model.P + 1e-10
        assert rate <= cert.C + 1e-6


def test_waterfilling(white_model, arma_model):
    assert waterfill_capacity(white_model) == pytest.approx(0.5 * np.log2(2.0), abs=1e-10)
    nofb = waterfill_capacity(arma_model)
    flat, _ = rate_and_power(arma_model, FirStrategy([], arma_model.P))
    assert flat - 1e-10 <= nofb <= solve_capacity(arma_model).C + 1e-8
    assert waterfill_capacity(arma_model, P=4.0) > nofb


def test_strategy_json_codec():
    strategy = FirStrategy([0.1, -0.2], 0.7)
    back = fir_from_dict(fir_to_dict(strategy))
    assert np.array_equal(back.b, strategy.b)
    assert back.V == strategy.V
    with pytest.raises(InvalidInputError):
        fir_from_dict({"b": 0.1, "V": 1.0})
    with pytest.raises(InvalidInputError):
        fir_from_dict({"b": [0.1]})
