import os
from dataclasses import dataclass
from typing import Optional

from dotenv import find_dotenv, load_dotenv

from .errors import InvalidInputError

DEFAULT_QUAD_POINTS = 4096


def _env_int(name: str, default: int, minimum: int = 1) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        value = int(raw)
    except ValueError as e:
        raise InvalidInputError(f"{name} must be an integer, got '{raw}'", name) from e
    if value < minimum:
        raise InvalidInputError(f"{name} must be >= {minimum}, got {value}", name)
    return value


def _env_float(name: str, default: float) -> float:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        value = float(raw)
    except ValueError as e:
        raise InvalidInputError(f"{name} must be a number, got '{raw}'", name) from e
    if not value > 0:
        raise InvalidInputError(f"{name} must be positive, got {value}", name)
    return value


@dataclass(frozen=True)
class Settings:
    quad_points: int = DEFAULT_QUAD_POINTS
    sdp_solver: str = "CLARABEL"
    sdp_tol: float = 1e-9
    lmi_margin: float = 1e-8
    restarts: int = 8
    workers: int = 4
    log_level: str = "INFO"
    log_file: Optional[str] = None

    @classmethod
    def from_env(cls) -> "Settings":
        """Build settings from the environment, reading a .env file first if present."""
        load_dotenv(find_dotenv(usecwd=True))
        return cls(
            quad_points=_env_int("FEEDCAP_QUAD_POINTS", DEFAULT_QUAD_POINTS, minimum=64),
            sdp_solver=os.getenv("FEEDCAP_SDP_SOLVER", "CLARABEL").upper(),
            sdp_tol=_env_float("FEEDCAP_SDP_TOL", 1e-9),
            lmi_margin=_env_float("FEEDCAP_LMI_MARGIN", 1e-8),
            restarts=_env_int("FEEDCAP_RESTARTS", 8),
            workers=_env_int("FEEDCAP_WORKERS", 4),
            log_level=os.getenv("FEEDCAP_LOG_LEVEL", "INFO").upper(),
            log_file=os.getenv("FEEDCAP_LOG_FILE") or None,
        )
