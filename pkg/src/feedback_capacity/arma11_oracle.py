"""Closed-form feedback capacity of first-order ARMA noise.

C = -log2(r) where r is the unique positive real root of

    (alpha^2 + beta^2 P) r^4 + 2 sigma (alpha + beta P) r^3
        + (P + 1 - alpha^2) r^2 - 2 sigma alpha r - 1 = 0,   sigma = sign(beta - alpha).
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import OracleAmbiguityError
from .model import Arma11Params

logger = logging.getLogger(__name__)

IMAG_TOL = 1e-9
POSITIVE_TOL = 1e-12
LEADING_TOL = 1e-14


@dataclass
class Arma11Capacity:
    C_bits: float
    r: float
    roots: np.ndarray
    coefficients: np.ndarray
    residual: float


def quartic_coefficients(p: Arma11Params) -> np.ndarray:
    """(a4, a3, a2, a1, a0), highest degree first."""
    a, b, P, s = p.alpha, p.beta, p.P, p.sigma
    return np.array(
        [
            a * a + b * b * P,
            2.0 * s * (a + b * P),
            P + 1.0 - a * a,
            -2.0 * s * a,
            -1.0,
        ]
    )


def _polynomial_roots(coefficients: np.ndarray) -> np.ndarray:
    scale = np.max(np.abs(coefficients))
    lead = 0
    while lead < coefficients.size - 1 and abs(coefficients[lead]) <= LEADING_TOL * scale:
        lead += 1
    trimmed = coefficients[lead:]
    if trimmed.size < 2:
        return np.array([], dtype=complex)
    if lead:
        logger.debug(f"Quartic degrades to degree {trimmed.size - 1}")
    return linalg.eigvals(linalg.companion(trimmed))


def _polish(coefficients: np.ndarray, r: float, steps: int = 3) -> float:
    derivative = np.polyder(coefficients)
    for _ in range(steps):
        slope = np.polyval(derivative, r)
        if slope == 0.0:
            break
        r_next = r - np.polyval(coefficients, r) / slope
        if not r_next > 0:
            break
        r = r_next
    return float(r)


def arma11_capacity(p: Arma11Params) -> Arma11Capacity:
    coefficients = quartic_coefficients(p)
    roots = _polynomial_roots(coefficients)
    admissible = roots[(np.abs(roots.imag) <= IMAG_TOL) & (roots.real > POSITIVE_TOL)]
    if admissible.size != 1:
        raise OracleAmbiguityError(
            f"Expected exactly one positive real root for alpha={p.alpha}, beta={p.beta}, "
            f"P={p.P}; found {admissible.size}",
            roots,
        )

    r = _polish(coefficients, float(admissible[0].real))
    residual = abs(float(np.polyval(coefficients, r)))
    bound = 1e-10 * (1.0 + np.sum(np.abs(coefficients)))
    if residual > bound:
        logger.warning(f"Quartic root residual {residual:.3e} exceeds {bound:.3e}")
    return Arma11Capacity(
        C_bits=float(-np.log2(r)),
        r=r,
        roots=roots,
        coefficients=coefficients,
        residual=residual,
    )
