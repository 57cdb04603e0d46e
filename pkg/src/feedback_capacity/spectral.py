"""Frequency-domain evaluation of linear feedback strategies x_k = B(z) z_k + v_k.

For a strictly causal FIR filter B(z) = sum_{l=1..L} b_l z^{-l} and innovation
variance V, the achievable rate and the transmit power are

    rate  = (1/2pi) int 1/2 log2((V + |B + 1|^2 S_z) / S_z) dtheta
    power = V + (1/2pi) int |B|^2 S_z dtheta

both evaluated with the trapezoid rule on a shared grid.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import optimize

from .errors import InvalidInputError, NumericalDomainError, PreconditionError
from .model import NoiseModel, frequency_grid, is_stable, spectral_density
from .optim import quasi_newton_ascent

logger = logging.getLogger(__name__)

MIN_QUAD_POINTS = 256
MAX_TAPS = 64
V_FLOOR = 1e-9


@dataclass(frozen=True)
class FirStrategy:
    b: np.ndarray
    V: float

    def __post_init__(self):
        b = np.atleast_1d(np.asarray(self.b, dtype=float)).reshape(-1)
        if not np.all(np.isfinite(b)):
            raise InvalidInputError("FIR taps must be finite", "b")
        if not (np.isfinite(self.V) and self.V > 0):
            raise InvalidInputError(f"V must be positive, got {self.V}", "V")
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "V", float(self.V))

    @property
    def L(self) -> int:
        return self.b.size

    def padded(self, L: int) -> "FirStrategy":
        if L < self.L:
            raise InvalidInputError(f"Cannot pad {self.L} taps down to {L}", "L")
        return FirStrategy(np.concatenate([self.b, np.zeros(L - self.L)]), self.V)


def _density_on_grid(model: NoiseModel, quad_points: int) -> Tuple[np.ndarray, np.ndarray]:
    if quad_points < MIN_QUAD_POINTS:
        raise PreconditionError(f"quad_points must be >= {MIN_QUAD_POINTS}, got {quad_points}")
    if not is_stable(model.F):
        raise PreconditionError("Spectral evaluation needs a stable F")
    theta = frequency_grid(quad_points)
    density = spectral_density(model, theta)
    if np.any(density <= 0.0):
        raise NumericalDomainError("Spectral density vanishes on the quadrature grid")
    return theta, density


def _delay_basis(theta: np.ndarray, L: int) -> np.ndarray:
    """E[l-1, j] = exp(-i l theta_j), so B(e^{i theta}) = b @ E."""
    lags = np.arange(1, L + 1)
    return np.exp(-1j * lags[:, None] * theta[None, :])


def _rate_power_batch(density, basis, taps, V):
    response = taps @ basis if taps.shape[1] else np.zeros((taps.shape[0], density.size))
    quad = np.mean(np.abs(response) ** 2 * density, axis=1)
    arg = V[:, None] + np.abs(response + 1.0) ** 2 * density
    rate = np.mean(0.5 * np.log2(np.maximum(arg, 1e-300) / density), axis=1)
    return rate, V + quad, quad, np.min(arg, axis=1)


def rate_and_power(
    model: NoiseModel, strat: FirStrategy, quad_points: int = 4096
) -> Tuple[float, float]:
    theta, density = _density_on_grid(model, quad_points)
    basis = _delay_basis(theta, strat.L)
    rate, power, _, min_arg = _rate_power_batch(
        density, basis, strat.b[None, :], np.array([strat.V])
    )
    if min_arg[0] <= 0.0:
        raise NumericalDomainError("Rate integrand argument is not positive on the grid")
    return float(rate[0]), float(power[0])


def optimize_fir(
    model: NoiseModel,
    L: int,
    quad_points: int = 4096,
    restarts: int = 4,
    warm_start: Optional[FirStrategy] = None,
    seed: int = 0,
    max_iter: int = 500,
) -> FirStrategy:
    """Maximize the FIR rate under the power integral.

    The budget always binds at the optimum, so V is eliminated as
    V = P - power(b); taps whose filtered power exceeds P - V_FLOOR are scaled
    back onto that boundary before evaluation.
    """
    if not 0 <= L <= MAX_TAPS:
        raise PreconditionError(f"L must lie in [0, {MAX_TAPS}], got {L}")
    theta, density = _density_on_grid(model, quad_points)
    basis = _delay_basis(theta, L)
    cap = model.P - V_FLOOR

    def project(taps):
        response = taps @ basis if L else np.zeros((taps.shape[0], density.size))
        quad = np.mean(np.abs(response) ** 2 * density, axis=1)
        scale = np.sqrt(cap / np.maximum(quad, cap))
        return taps * scale[:, None], np.maximum(model.P - quad * scale**2, V_FLOOR)

    def objective(taps):
        taps, V = project(taps)
        return _rate_power_batch(density, basis, taps, V)[0]

    rng = np.random.default_rng(seed)
    starts = [np.zeros(L)]
    if warm_start is not None:
        starts.insert(0, warm_start.padded(L).b)
    while len(starts) < max(1, restarts):
        starts.append(rng.normal(scale=0.1, size=L))

    best = None
    for x0 in starts:
        result = quasi_newton_ascent(objective, x0, max_iter=max_iter)
        if result.line_search_failed:
            logger.debug(f"FIR restart stopped in line search: {result.message}")
        if best is None or result.value > best.value:
            best = result

    taps, V = project(best.x[None, :])
    strategy = FirStrategy(taps[0], float(V[0]))
    logger.info(
        f"FIR L={L}: rate {best.value:.6f} bits, stationarity {best.stationarity:.2e}"
    )
    return strategy


def waterfill_capacity(
    model: NoiseModel, P: Optional[float] = None, quad_points: int = 4096
) -> float:
    """Capacity without feedback: water-filling of P over the noise spectrum."""
    P = model.P if P is None else float(P)
    if not P > 0:
        raise InvalidInputError(f"P must be positive, got {P}", "P")
    _, density = _density_on_grid(model, quad_points)

    def excess(level):
        return np.mean(np.maximum(level - density, 0.0)) - P

    level = optimize.brentq(excess, float(np.min(density)), float(np.max(density)) + P, xtol=1e-14)
    return float(np.mean(0.5 * np.log2(np.maximum(level, density) / density)))


def fir_to_dict(strat: FirStrategy) -> dict:
    return {"b": strat.b.tolist(), "V": strat.V}


def fir_from_dict(data: dict) -> FirStrategy:
    if not isinstance(data, dict) or "b" not in data or "V" not in data:
        raise InvalidInputError("FIR strategy must be an object with fields 'b' and 'V'")
    if not isinstance(data["b"], list):
        raise InvalidInputError("b must be a flat array of taps", "b")
    try:
        b = np.array(data["b"], dtype=float)
    except (TypeError, ValueError) as e:
        raise InvalidInputError(f"b must contain numbers: {e}", "b") from e
    try:
        V = float(data["V"])
    except (TypeError, ValueError) as e:
        raise InvalidInputError(f"V must be a number, got {data['V']!r}", "V") from e
    return FirStrategy(b, V)
