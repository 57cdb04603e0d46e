import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd

from .errors import ConvergenceError, NumericalDomainError, PreconditionError
from .model import NoiseModel, frequency_grid, is_detectable, is_stable, spectral_density

logger = logging.getLogger(__name__)

LOG2_2PIE = np.log2(2.0 * np.pi * np.e)


@dataclass
class RiccatiSolution:
    S: np.ndarray
    K_gain: np.ndarray
    innov_var: float
    iterations: int
    residual: float
    trace: Optional[pd.DataFrame] = None


@dataclass
class EntropyRate:
    h_bits: float
    szego_nats: float
    minimum_phase: bool


def _symmetrize(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def riccati_step(S: np.ndarray, model: NoiseModel) -> np.ndarray:
    """One step of the error-covariance recursion of the Kalman filter for z."""
    F, G, H = model.F, model.G, model.H
    cross = F @ S @ H.T + G
    innov = float((H @ S @ H.T)[0, 0]) + 1.0
    S_next = F @ S @ F.T + G @ G.T - (cross @ cross.T) / innov
    return _symmetrize(S_next)


def riccati_stationary(
    model: NoiseModel,
    S0: Optional[np.ndarray] = None,
    tol: float = 1e-12,
    max_iter: int = 100_000,
    trace: bool = False,
) -> RiccatiSolution:
    """Fixed-point iteration of riccati_step until the Frobenius defect drops below tol."""
    if not is_detectable(model.H, model.F):
        raise PreconditionError("(H, F) is not detectable; the Riccati iteration has no limit")

    S = np.zeros((model.m, model.m)) if S0 is None else _symmetrize(np.asarray(S0, float))
    rows = []
    defect = np.inf
    iterations = 0
    while iterations < max_iter:
        S_next = riccati_step(S, model)
        defect = float(np.linalg.norm(S_next - S, "fro"))
        S = S_next
        iterations += 1
        if trace:
            rows.append(
                {
                    "k": iterations,
                    "defect": defect,
                    "innov_var": float((model.H @ S @ model.H.T)[0, 0]) + 1.0,
                }
            )
        if defect < tol:
            break
    else:
        raise ConvergenceError(
            f"Riccati iteration did not converge in {max_iter} steps (defect {defect:.3e})",
            residual=defect,
            iterations=iterations,
        )

    residual = float(np.linalg.norm(riccati_step(S, model) - S, "fro"))
    innov_var = float((model.H @ S @ model.H.T)[0, 0]) + 1.0
    gain = (model.F @ S @ model.H.T + model.G) / innov_var
    logger.debug(
        f"Stationary Riccati solution after {iterations} iterations, innov_var={innov_var:.6g}"
    )
    return RiccatiSolution(
        S=S,
        K_gain=gain,
        innov_var=innov_var,
        iterations=iterations,
        residual=residual,
        trace=pd.DataFrame(rows, columns=["k", "defect", "innov_var"]) if trace else None,
    )


def entropy_finite(model: NoiseModel, n: int, S1: Optional[np.ndarray] = None) -> float:
    """h(z^n) in bits, summing the Kalman innovation entropies from S_1 (default 0)."""
    if n < 1:
        raise PreconditionError(f"n must be >= 1, got {n}")
    S = np.zeros((model.m, model.m)) if S1 is None else np.asarray(S1, dtype=float)
    total = 0.0
    for _ in range(n):
        innov = float((model.H @ S @ model.H.T)[0, 0]) + 1.0
        total += 0.5 * (LOG2_2PIE + np.log2(innov))
        S = riccati_step(S, model)
    return total


def entropy_rate_spectral(model: NoiseModel, quad_points: int = 4096) -> EntropyRate:
    """Entropy rate of z from the log-integral of its spectral density."""
    if quad_points < 64:
        raise PreconditionError(f"quad_points must be >= 64, got {quad_points}")
    if not is_stable(model.F):
        raise PreconditionError("Spectral entropy rate needs a stable F")

    density = spectral_density(model, frequency_grid(quad_points))
    if np.any(density <= 0.0):
        raise NumericalDomainError("Spectral density vanishes on the quadrature grid")
    szego = float(np.mean(np.log(density)))
    minimum_phase = szego <= 1e-8
    if not minimum_phase:
        logger.warning(
            f"Noise model is not minimum phase: Szego term {szego:.6g} nats > 0"
        )
    h_bits = 0.5 * LOG2_2PIE + 0.5 * szego / np.log(2.0)
    return EntropyRate(h_bits=h_bits, szego_nats=szego, minimum_phase=minimum_phase)
