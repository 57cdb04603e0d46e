"""Noise model, system-theoretic predicates and spectral density.

The noise is the output of the finite-order system

    s_{k+1} = F s_k + G u_k,   z_k = H s_k + u_k,   u_k ~ N(0, 1),

and the channel has an average power budget P.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np
from scipy import linalg

from .errors import InvalidInputError, NumericalDomainError

logger = logging.getLogger(__name__)

TOL_EIG = 1e-10
TOL_RANK = 1e-10

ArrayLike = Union[float, np.ndarray]


def _as_matrix(value, shape, name: str) -> np.ndarray:
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError) as e:
        raise InvalidInputError(f"{name} is not a numeric array: {e}", name) from e
    if arr.size != shape[0] * shape[1]:
        raise InvalidInputError(
            f"{name} has {arr.size} entries, expected {shape[0]}x{shape[1]}", name
        )
    if arr.ndim == 2 and arr.shape != shape:
        raise InvalidInputError(f"{name} has shape {arr.shape}, expected {shape}", name)
    arr = arr.reshape(shape)
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains NaN or Inf entries", name)
    return arr


@dataclass(frozen=True)
class NoiseModel:
    F: np.ndarray
    G: np.ndarray
    H: np.ndarray
    P: float

    def __post_init__(self):
        try:
            F = np.array(self.F, dtype=float)
        except (TypeError, ValueError) as e:
            raise InvalidInputError(f"F is not a numeric matrix: {e}", "F") from e
        if F.ndim == 0:
            F = F.reshape(1, 1)
        if F.ndim != 2 or F.shape[0] != F.shape[1] or F.shape[0] < 1:
            raise InvalidInputError(f"F must be a square matrix, got shape {F.shape}", "F")
        m = F.shape[0]
        object.__setattr__(self, "F", _as_matrix(F, (m, m), "F"))
        object.__setattr__(self, "G", _as_matrix(self.G, (m, 1), "G"))
        object.__setattr__(self, "H", _as_matrix(self.H, (1, m), "H"))
        try:
            P = float(self.P)
        except (TypeError, ValueError) as e:
            raise InvalidInputError(f"P is not a number: {self.P!r}", "P") from e
        if not np.isfinite(P) or P <= 0:
            raise InvalidInputError(f"P must be a positive finite number, got {P}", "P")
        object.__setattr__(self, "P", P)

    @property
    def m(self) -> int:
        return self.F.shape[0]

    def with_power(self, P: float) -> "NoiseModel":
        return NoiseModel(self.F, self.G, self.H, P)


@dataclass(frozen=True)
class Arma11Params:
    """Parameters of z_k + beta z_{k-1} = u_k + alpha u_{k-1} with power budget P."""

    alpha: float
    beta: float
    P: float
    sigma: int = field(init=False)

    def __post_init__(self):
        if not -1.0 <= self.alpha <= 1.0:
            raise InvalidInputError(f"alpha must lie in [-1, 1], got {self.alpha}", "alpha")
        if not -1.0 < self.beta < 1.0:
            raise InvalidInputError(f"beta must lie in (-1, 1), got {self.beta}", "beta")
        if not self.P > 0:
            raise InvalidInputError(f"P must be positive, got {self.P}", "P")
        object.__setattr__(self, "sigma", int(np.sign(self.beta - self.alpha)))

    @classmethod
    def from_values(cls, alpha: float, beta: float, P: float) -> "Arma11Params":
        return cls(float(alpha), float(beta), float(P))


def _check_square(F: np.ndarray, name: str = "F") -> np.ndarray:
    F = np.atleast_2d(np.asarray(F, dtype=float))
    if F.ndim != 2 or F.shape[0] != F.shape[1]:
        raise InvalidInputError(f"{name} must be square, got shape {F.shape}", name)
    return F


def _rank(M: np.ndarray) -> int:
    s = linalg.svdvals(M)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > TOL_RANK * s[0]))


def spectral_radius(F: np.ndarray) -> float:
    F = _check_square(F)
    return float(np.max(np.abs(linalg.eigvals(F))))


def is_stable(F: np.ndarray) -> bool:
    return spectral_radius(F) < 1.0 - TOL_EIG


def is_controllable(F: np.ndarray, G: np.ndarray) -> bool:
    """PBH test: rank [F - lambda I, G] = m at every eigenvalue of F."""
    F = _check_square(F)
    G = np.atleast_2d(np.asarray(G, dtype=float))
    m = F.shape[0]
    if G.shape[0] != m:
        raise InvalidInputError(f"G must have {m} rows, got shape {G.shape}", "G")
    for lam in linalg.eigvals(F):
        pencil = np.hstack([F - lam * np.eye(m), G.astype(complex)])
        if _rank(pencil) < m:
            return False
    return True


def is_detectable(H: np.ndarray, F: np.ndarray) -> bool:
    """PBH test on the modes with |lambda| >= 1: rank [F - lambda I; H] = m."""
    F = _check_square(F)
    H = np.atleast_2d(np.asarray(H, dtype=float))
    m = F.shape[0]
    if H.shape[1] != m:
        raise InvalidInputError(f"H must have {m} columns, got shape {H.shape}", "H")
    for lam in linalg.eigvals(F):
        if abs(lam) < 1.0 - TOL_EIG:
            continue
        pencil = np.vstack([F - lam * np.eye(m), H.astype(complex)])
        if _rank(pencil) < m:
            return False
    return True


def arma11_to_statespace(p: Arma11Params) -> NoiseModel:
    return NoiseModel(
        F=[[-p.beta]], G=[[1.0]], H=[[p.alpha - p.beta]], P=p.P
    )


def statespace_to_arma11(model: NoiseModel) -> Optional[Arma11Params]:
    """Recover (alpha, beta) from a first-order model with G = 1, or None."""
    if model.m != 1 or model.G[0, 0] != 1.0:
        return None
    beta = -model.F[0, 0]
    alpha = model.H[0, 0] + beta
    try:
        return Arma11Params(float(alpha), float(beta), model.P)
    except InvalidInputError:
        return None


def frequency_grid(quad_points: int) -> np.ndarray:
    """Nodes of the composite trapezoid rule on [-pi, pi] for periodic integrands.

    The endpoint is dropped because it coincides with -pi, so the rule is the
    plain mean of the integrand over the returned nodes.
    """
    return -np.pi + 2.0 * np.pi * np.arange(quad_points) / quad_points


def transfer_function(model: NoiseModel, theta: ArrayLike) -> np.ndarray:
    """1 + H (e^{i theta} I - F)^{-1} G evaluated on an array of frequencies."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    w = np.exp(1j * theta)
    eig = linalg.eigvals(model.F)
    gap = np.min(np.abs(w[:, None] - eig[None, :]))
    if gap < 1e-12:
        raise NumericalDomainError(
            "Resolvent is singular: F has an eigenvalue on the unit circle"
        )
    m = model.m
    pencil = w[:, None, None] * np.eye(m)[None, :, :] - model.F[None, :, :]
    rhs = np.broadcast_to(model.G.astype(complex), (theta.size, m, 1))
    resolvent_g = np.linalg.solve(pencil, rhs)
    return 1.0 + (model.H[None, :, :] @ resolvent_g)[:, 0, 0]


def spectral_density(model: NoiseModel, theta: ArrayLike) -> ArrayLike:
    """S_z(e^{i theta}) = |1 + H (e^{i theta} I - F)^{-1} G|^2."""
    values = np.abs(transfer_function(model, theta)) ** 2
    if np.ndim(theta) == 0:
        return float(values[0])
    return values


def stationary_variance(model: NoiseModel) -> float:
    """E[z_k^2] of the stationary noise; requires a stable F."""
    if not is_stable(model.F):
        raise NumericalDomainError("Stationary variance needs a stable F")
    state_cov = linalg.solve_discrete_lyapunov(model.F, model.G @ model.G.T)
    return float((model.H @ state_cov @ model.H.T)[0, 0] + 1.0)


def model_from_dict(data: dict) -> NoiseModel:
    if not isinstance(data, dict):
        raise InvalidInputError("Model file must contain a JSON object")
    for key in ("F", "G", "H", "P"):
        if key not in data:
            raise InvalidInputError(f"Model file is missing field '{key}'", key)

    F = np.array(data["F"], dtype=object)
    if F.ndim != 2 or F.shape[0] != F.shape[1]:
        raise InvalidInputError("F must be a square row-major matrix (list of rows)", "F")
    m = F.shape[0]
    vectors = {}
    for key in ("G", "H"):
        value = data[key]
        if not isinstance(value, list) or len(value) != m:
            length = len(value) if isinstance(value, list) else "n/a"
            raise InvalidInputError(
                f"{key} must be a flat array of length {m}, got length {length}", key
            )
        if any(isinstance(v, list) for v in value):
            raise InvalidInputError(f"{key} must be a flat array of numbers", key)
        try:
            vectors[key] = np.array(value, dtype=float)
        except (TypeError, ValueError) as e:
            raise InvalidInputError(f"{key} must contain only numbers: {e}", key) from e
    if isinstance(data["P"], bool) or not isinstance(data["P"], (int, float)):
        raise InvalidInputError("P must be a number", "P")
    return NoiseModel(
        F=data["F"],
        G=vectors["G"].reshape(m, 1),
        H=vectors["H"].reshape(1, m),
        P=data["P"],
    )


def load_model(path: Union[str, Path]) -> NoiseModel:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise InvalidInputError(f"Cannot read model file {path}: {e}") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise InvalidInputError(f"Model file {path} is not valid JSON: {e}") from e
    model = model_from_dict(data)
    logger.debug(f"Loaded model with m={model.m}, P={model.P} from {path}")
    return model


def model_to_dict(model: NoiseModel) -> dict:
    return {
        "F": model.F.tolist(),
        "G": model.G[:, 0].tolist(),
        "H": model.H[0, :].tolist(),
        "P": model.P,
    }
