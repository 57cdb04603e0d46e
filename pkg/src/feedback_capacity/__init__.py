"""Feedback capacity of Gaussian channels with finite-order state-space noise."""

from .arma11_oracle import Arma11Capacity, arma11_capacity
from .config import Settings
from .errors import FeedcapError
from .finite_horizon import (
    CoverPombraInstance,
    HorizonOptions,
    HorizonTrajectory,
    build_noise_covariance,
    cp_bruteforce,
    optimize_horizon,
    rollout,
)
from .kalman_entropy import entropy_finite, entropy_rate_spectral, riccati_stationary
from .model import Arma11Params, NoiseModel, arma11_to_statespace, load_model
from .simulate import SimReport, simulate_stationary
from .spectral import FirStrategy, optimize_fir, rate_and_power, waterfill_capacity
from .stationary_sdp import CapacityCertificate, build_sdp, solve_capacity

__all__ = [
    "Arma11Capacity",
    "Arma11Params",
    "CapacityCertificate",
    "CoverPombraInstance",
    "FeedcapError",
    "FirStrategy",
    "HorizonOptions",
    "HorizonTrajectory",
    "NoiseModel",
    "Settings",
    "SimReport",
    "arma11_capacity",
    "arma11_to_statespace",
    "build_noise_covariance",
    "build_sdp",
    "cp_bruteforce",
    "entropy_finite",
    "entropy_rate_spectral",
    "load_model",
    "optimize_fir",
    "optimize_horizon",
    "rate_and_power",
    "riccati_stationary",
    "rollout",
    "simulate_stationary",
    "solve_capacity",
    "waterfill_capacity",
]
