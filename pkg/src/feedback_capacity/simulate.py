"""Monte-Carlo check of a certified stationary strategy.

The transmitter's estimation error follows

    s~_{k+1} = (F - Gamma (X + H)) s~_k + (G - Gamma) u_k - Gamma v_k
    y~_k     = (X + H) s~_k + v_k + u_k
    x_k      = X s~_k + v_k

which is simulated as a discrete state-space system driven by (u_k, v_k).
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd
from scipy import signal

from .errors import InstabilityError, PreconditionError
from .model import NoiseModel
from .stationary_sdp import CapacityCertificate

logger = logging.getLogger(__name__)

MIN_STEPS = 10_000
BURN_IN = 1_000
BLOW_UP = 1e12
TRACE_ROWS = 100_000
N_BATCHES = 100


@dataclass
class SimReport:
    steps: int
    Y_hat: float
    power_hat: float
    se_Y: float
    se_power: float
    seed: int
    lag1_autocorr: float
    state_cov: np.ndarray
    generator: str = "PCG64"
    trace: Optional[pd.DataFrame] = None


def _batch_se(values: np.ndarray) -> float:
    """Standard error of the mean from non-overlapping batch means."""
    usable = values[: values.size - values.size % N_BATCHES]
    means = usable.reshape(N_BATCHES, -1).mean(axis=1)
    return float(np.std(means, ddof=1) / np.sqrt(N_BATCHES))


def closed_loop_system(model: NoiseModel, cert: CapacityCertificate):
    """(A, B, C, D) with inputs (u, v) and outputs (y~, x)."""
    X = np.asarray(cert.X, dtype=float).reshape(1, model.m)
    Gamma = np.asarray(cert.Gamma, dtype=float).reshape(model.m, 1)
    Xh = X + model.H
    A = model.F - Gamma @ Xh
    B = np.hstack([model.G - Gamma, -Gamma])
    C = np.vstack([Xh, X])
    D = np.array([[1.0, 1.0], [0.0, 1.0]])
    return A, B, C, D


def simulate_stationary(
    model: NoiseModel,
    cert: CapacityCertificate,
    steps: int = 1_000_000,
    seed: int = 0,
    trace: bool = False,
) -> SimReport:
    if not cert.certified:
        raise PreconditionError("Simulation needs a certified capacity certificate")
    if steps < MIN_STEPS:
        raise PreconditionError(f"steps must be >= {MIN_STEPS}, got {steps}")

    rng = np.random.default_rng(seed)
    total = steps + BURN_IN
    inputs = np.column_stack(
        [rng.standard_normal(total), np.sqrt(cert.V) * rng.standard_normal(total)]
    )
    A, B, C, D = closed_loop_system(model, cert)
    _, outputs, states = signal.dlsim((A, B, C, D, 1), inputs)
    states = np.asarray(states).reshape(total, model.m)
    if not np.all(np.isfinite(states)) or np.max(np.abs(states)) > BLOW_UP:
        raise InstabilityError(
            "Closed-loop error state blew up; the certificate does not describe a stable loop"
        )

    y = outputs[BURN_IN:, 0]
    x = outputs[BURN_IN:, 1]
    s = states[BURN_IN:]
    y_sq, x_sq = y**2, x**2
    report = SimReport(
        steps=steps,
        Y_hat=float(np.mean(y_sq)),
        power_hat=float(np.mean(x_sq)),
        se_Y=_batch_se(y_sq),
        se_power=_batch_se(x_sq),
        seed=seed,
        lag1_autocorr=float(np.dot(y[1:], y[:-1]) / np.dot(y, y)),
        state_cov=s.T @ s / steps,
        generator=type(rng.bit_generator).__name__,
    )
    if trace:
        rows = min(steps, TRACE_ROWS)
        report.trace = pd.DataFrame(
            {"k": np.arange(1, rows + 1), "x_k": x[:rows], "y_k": y[:rows]}
        )
    logger.info(
        f"Simulated {steps} steps (seed {seed}): Y_hat={report.Y_hat:.6f} "
        f"(predicted {cert.Y:.6f}), power_hat={report.power_hat:.6f} (predicted {cert.power_used:.6f})"
    )
    return report
