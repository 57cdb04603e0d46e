"""Finite-horizon feedback capacity C_n.

The optimal strategy over n transmissions is x_k = X_k s~_k + v_k with
s~_k = s_k - E[s_k | y^{k-1}] and v_k ~ N(0, V_k). Starting from Sigma_1 = 0,

    Y_k       = (X_k + H) Sigma_k (X_k + H)^T + V_k + 1
    Gamma_k   = (F Sigma_k (X_k + H)^T + G) / Y_k
    Sigma_k+1 = F Sigma_k F^T + G G^T - Gamma_k Y_k Gamma_k^T
    C_n       = (1 / 2n) sum_k log2 Y_k

The Cover-Pombra formulation over (B_n, V_n) is kept as an independent,
brute-force oracle for small n.
"""

import asyncio
import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np
import pandas as pd
from scipy import linalg

from .config import Settings
from .errors import (
    FeedcapError,
    InvalidInputError,
    NumericalDomainError,
    OptimizationError,
    PreconditionError,
)
from .model import NoiseModel
from .optim import AscentResult, constrained_ascent, gather_bounded, quasi_newton_ascent
from .stationary_sdp import CapacityCertificate, solve_capacity

logger = logging.getLogger(__name__)

MAX_HORIZON = 10_000
MAX_ORACLE_HORIZON = 6
POWER_HEADROOM = 1e-9
STATIONARY_TOL = 1e-4


@dataclass
class HorizonTrajectory:
    n: int
    X_seq: np.ndarray
    V_seq: np.ndarray
    Sigma_seq: np.ndarray
    Y_seq: np.ndarray
    Gamma_seq: np.ndarray
    powers: np.ndarray
    avg_power: float
    C_n: float
    stationarity: Optional[float] = None
    traces: List[pd.DataFrame] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "k": np.arange(1, self.n + 1),
                "Y_k": self.Y_seq,
                "power_k": self.powers,
                "log2Y_k": np.log2(self.Y_seq),
            }
        )

    def convergence_frame(self) -> pd.DataFrame:
        if not self.traces:
            return pd.DataFrame(columns=["restart", "iteration", "value"])
        return pd.concat(self.traces, ignore_index=True)


@dataclass
class CoverPombraInstance:
    n: int
    Z: np.ndarray
    P: float

    def __post_init__(self):
        Z = np.asarray(self.Z, dtype=float)
        if Z.shape != (self.n, self.n):
            raise InvalidInputError(f"Z must be {self.n}x{self.n}, got {Z.shape}", "Z")
        if not np.allclose(Z, Z.T, atol=1e-12):
            raise InvalidInputError("Z must be symmetric", "Z")
        if np.min(linalg.eigvalsh(Z)) < -1e-10:
            raise InvalidInputError("Z must be positive semidefinite", "Z")
        if np.min(np.diag(Z)) < 1.0 - 1e-12:
            raise InvalidInputError("Z diagonal must be >= 1 (unit innovation floor)", "Z")
        if not self.P > 0:
            raise InvalidInputError(f"P must be positive, got {self.P}", "P")
        self.Z = Z


@dataclass
class CoverPombraSolution:
    C_n: float
    B: np.ndarray
    V: np.ndarray
    stationarity: float
    restarts: int


@dataclass
class HorizonOptions:
    restarts: int = 8
    power_constraint: str = "per_step"
    max_iter: int = 300
    seed: int = 0
    warm_start: Optional[HorizonTrajectory] = None
    stationary: Optional[CapacityCertificate] = None
    workers: int = 4
    settings: Optional[Settings] = None


def rollout(model: NoiseModel, X_seq, V_seq) -> HorizonTrajectory:
    """Run the forward recursion for a given strategy; the budget is reported, not enforced."""
    V = np.asarray(V_seq, dtype=float).reshape(-1)
    n = V.size
    if n < 1:
        raise InvalidInputError("V_seq must contain at least one step", "V_seq")
    X = np.asarray(X_seq, dtype=float)
    if X.size != n * model.m:
        raise InvalidInputError(
            f"X_seq must hold {n} row vectors of length {model.m}", "X_seq"
        )
    X = X.reshape(n, model.m)
    if np.any(V < 0):
        raise InvalidInputError("V_seq entries must be >= 0", "V_seq")

    F, G, H, m = model.F, model.G, model.H, model.m
    Sigma = np.zeros((m, m))
    sigmas = np.zeros((n, m, m))
    Y = np.zeros(n)
    gammas = np.zeros((n, m))
    powers = np.zeros(n)
    for k in range(n):
        sigmas[k] = Sigma
        Xk = X[k : k + 1]
        Xh = Xk + H
        Y[k] = float((Xh @ Sigma @ Xh.T)[0, 0]) + V[k] + 1.0
        if not Y[k] > 0:
            raise NumericalDomainError(f"Non-positive output innovation variance at step {k + 1}")
        Gamma = (F @ Sigma @ Xh.T + G) / Y[k]
        gammas[k] = Gamma[:, 0]
        powers[k] = float((Xk @ Sigma @ Xk.T)[0, 0]) + V[k]
        Sigma = F @ Sigma @ F.T + G @ G.T - Y[k] * (Gamma @ Gamma.T)
        Sigma = 0.5 * (Sigma + Sigma.T)

    return HorizonTrajectory(
        n=n,
        X_seq=X.copy(),
        V_seq=V.copy(),
        Sigma_seq=sigmas,
        Y_seq=Y,
        Gamma_seq=gammas,
        powers=powers,
        avg_power=float(np.mean(powers)),
        C_n=float(np.sum(np.log2(Y)) / (2.0 * n)),
    )


def check_trajectory(model: NoiseModel, traj: HorizonTrajectory) -> dict:
    """Residuals of the defining identities along a trajectory."""
    F, G, H = model.F, model.G, model.H
    yrec = riccrec = 0.0
    for k in range(traj.n):
        Sigma = traj.Sigma_seq[k]
        Xh = traj.X_seq[k : k + 1] + H
        Y = float((Xh @ Sigma @ Xh.T)[0, 0]) + traj.V_seq[k] + 1.0
        yrec = max(yrec, abs(Y - traj.Y_seq[k]))
        if k + 1 < traj.n:
            Gamma = traj.Gamma_seq[k][:, None]
            nxt = F @ Sigma @ F.T + G @ G.T - traj.Y_seq[k] * (Gamma @ Gamma.T)
            riccrec = max(riccrec, float(np.max(np.abs(nxt - traj.Sigma_seq[k + 1]))))
    sumcap = abs(traj.C_n - float(np.sum(np.log2(traj.Y_seq))) / (2.0 * traj.n))
    min_eig = min(float(np.min(linalg.eigvalsh(S))) for S in traj.Sigma_seq)
    return {
        "sigma1": float(np.max(np.abs(traj.Sigma_seq[0]))),
        "yrec": yrec,
        "riccrec": riccrec,
        "sumcap": sumcap,
        "min_sigma_eig": min_eig,
    }


def _batched_recursion(model: NoiseModel, n: int, X: np.ndarray, V: Optional[np.ndarray]):
    """Run the recursion on a batch of strategies at once.

    X has shape (B, n, m). With V None, each X_k is scaled back onto the per-step
    budget and V_k takes the remaining power; otherwise V (B, n) is used as given.
    Returns (C_n, X, V, powers), all batched.
    """
    F, GGt, g, h, P = model.F, model.G @ model.G.T, model.G[:, 0], model.H[0], model.P
    batch, m = X.shape[0], model.m
    X = X.copy()
    V = None if V is None else np.asarray(V, dtype=float)
    V_out = np.zeros((batch, n))
    powers = np.zeros((batch, n))
    Sigma = np.zeros((batch, m, m))
    total = np.zeros(batch)
    cap = P * (1.0 - POWER_HEADROOM)
    for k in range(n):
        Xk = X[:, k, :]
        q = np.einsum("bi,bij,bj->b", Xk, Sigma, Xk)
        if V is None:
            scale = np.sqrt(cap / np.maximum(q, cap))
            Xk = Xk * scale[:, None]
            X[:, k, :] = Xk
            q = q * scale**2
            Vk = P - q
        else:
            Vk = V[:, k]
        V_out[:, k] = Vk
        powers[:, k] = q + Vk
        Xh = Xk + h
        Y = np.einsum("bi,bij,bj->b", Xh, Sigma, Xh) + Vk + 1.0
        cross = np.einsum("ij,bjk,bk->bi", F, Sigma, Xh) + g
        Sigma = (
            np.einsum("ij,bjk,lk->bil", F, Sigma, F)
            + GGt
            - np.einsum("bi,bj->bij", cross, cross) / Y[:, None, None]
        )
        total += np.log2(np.maximum(Y, 1e-300))
    return total / (2.0 * n), X, V_out, powers


def _seed_strategies(model: NoiseModel, n: int, opts: HorizonOptions) -> List[np.ndarray]:
    m = model.m
    rng = np.random.default_rng(opts.seed)
    seeds: List[np.ndarray] = []

    stationary_X = None
    cert = opts.stationary
    if cert is None and opts.restarts > 1:
        try:
            cert = solve_capacity(model, opts.settings)
        except FeedcapError as e:
            logger.warning(f"No stationary seed available: {e}")
    if cert is not None:
        stationary_X = np.asarray(cert.X, dtype=float).reshape(m)

    if opts.warm_start is not None:
        warm = np.asarray(opts.warm_start.X_seq, dtype=float).reshape(-1, m)[:n]
        pad_row = stationary_X if stationary_X is not None else warm[-1]
        pad = np.tile(pad_row, (n - warm.shape[0], 1))
        seeds.append(np.vstack([warm, pad]))
    if stationary_X is not None:
        seeds.append(np.tile(stationary_X, (n, 1)))
    seeds.append(np.zeros((n, m)))

    base = np.tile(stationary_X, (n, 1)) if stationary_X is not None else np.zeros((n, m))
    while len(seeds) < max(1, opts.restarts):
        seeds.append(base + rng.normal(scale=0.3, size=(n, m)) * (1.0 + np.abs(base)))
    return seeds[: max(1, opts.restarts)]


def _ascend_from(model: NoiseModel, n: int, X0: np.ndarray, opts: HorizonOptions) -> AscentResult:
    m = model.m
    if opts.power_constraint == "per_step":

        def objective(params):
            return _batched_recursion(model, n, params.reshape(-1, n, m), None)[0]

        return quasi_newton_ascent(objective, X0.reshape(-1), max_iter=opts.max_iter)

    _, Xp, Vp, _ = _batched_recursion(model, n, X0[None], None)
    start = np.concatenate([Xp[0].reshape(-1), Vp[0]])

    def split(params):
        return params[:, : n * m].reshape(-1, n, m), params[:, n * m :]

    def objective(params):
        X, V = split(params)
        return _batched_recursion(model, n, X, V)[0]

    def budget(params):
        X, V = split(params)
        return model.P - np.mean(_batched_recursion(model, n, X, V)[3], axis=1)

    bounds = [(None, None)] * (n * m) + [(0.0, None)] * n
    return constrained_ascent(objective, budget, start, bounds=bounds, max_iter=opts.max_iter)


def _to_trajectory(model: NoiseModel, n: int, result: AscentResult, opts: HorizonOptions) -> HorizonTrajectory:
    m = model.m
    if opts.power_constraint == "per_step":
        _, X, V, _ = _batched_recursion(model, n, result.x.reshape(1, n, m), None)
        traj = rollout(model, X[0], V[0])
    else:
        traj = rollout(model, result.x[: n * m], np.maximum(result.x[n * m :], 0.0))
    traj.stationarity = result.stationarity
    return traj


async def optimize_horizon_async(
    model: NoiseModel, n: int, opts: Optional[HorizonOptions] = None
) -> HorizonTrajectory:
    """Maximize C_n over (X_1..X_n, V_1..V_n) from several seeds, run concurrently."""
    opts = opts or HorizonOptions()
    if not 1 <= n <= MAX_HORIZON:
        raise PreconditionError(f"n must lie in [1, {MAX_HORIZON}], got {n}")
    if opts.power_constraint not in ("per_step", "average"):
        raise InvalidInputError(
            f"power_constraint must be 'per_step' or 'average', got {opts.power_constraint!r}",
            "power_constraint",
        )

    seeds = _seed_strategies(model, n, opts)
    thunks: List[Callable[[], AscentResult]] = [
        (lambda X0=X0: _ascend_from(model, n, X0, opts)) for X0 in seeds
    ]
    results = await gather_bounded(thunks, opts.workers)

    best: Optional[HorizonTrajectory] = None
    traces = []
    failed = 0
    for idx, result in enumerate(results):
        if isinstance(result, BaseException):
            logger.warning(f"Horizon restart {idx} raised: {result}")
            failed += 1
            continue
        if result.line_search_failed and result.stationarity > STATIONARY_TOL:
            logger.warning(f"Horizon restart {idx} stopped in line search: {result.message}")
            failed += 1
        trace = result.trace.copy()
        trace.insert(0, "restart", idx)
        traces.append(trace)
        traj = _to_trajectory(model, n, result, opts)
        if opts.power_constraint == "average" and traj.avg_power > model.P + 1e-8:
            logger.warning(f"Horizon restart {idx} ended outside the power budget")
            failed += 1
            continue
        if best is None or traj.C_n > best.C_n:
            best = traj

    if best is None or failed == len(results):
        raise OptimizationError(f"All {len(results)} horizon restarts failed", best)
    best.traces = traces
    logger.info(f"C_{n} = {best.C_n:.6f} bits ({opts.power_constraint} power constraint)")
    return best


def optimize_horizon(
    model: NoiseModel, n: int, opts: Optional[HorizonOptions] = None
) -> HorizonTrajectory:
    return asyncio.run(optimize_horizon_async(model, n, opts))


def build_noise_covariance(model: NoiseModel, n: int) -> CoverPombraInstance:
    """Covariance of z^n for the model started at s_1 = 0.

    z = T u with T unit lower triangular, T[k, l] = H F^(k-l-1) G for l < k.
    """
    if n < 1:
        raise PreconditionError(f"n must be >= 1, got {n}")
    markov = np.zeros(n)
    state = model.G.copy()
    for lag in range(1, n):
        markov[lag] = float((model.H @ state)[0, 0])
        state = model.F @ state
    T = np.eye(n)
    for k in range(n):
        for l in range(k):
            T[k, l] = markov[k - l]
    Z = T @ T.T
    return CoverPombraInstance(n=n, Z=0.5 * (Z + Z.T), P=model.P)


def _cover_pombra_objective(instance: CoverPombraInstance, innovation: str):
    n, Z, P = instance.n, instance.Z, instance.P
    b_rows, b_cols = np.tril_indices(n, k=-1)
    if innovation == "full":
        l_rows, l_cols = np.tril_indices(n)
    else:
        l_rows = l_cols = np.arange(n)
    nb = b_rows.size
    z_factor = linalg.cholesky(Z, lower=True)
    logdet_z = np.linalg.slogdet(Z)[1]
    eye = np.eye(n)

    def unpack(params):
        batch = params.shape[0]
        B = np.zeros((batch, n, n))
        L = np.zeros((batch, n, n))
        B[:, b_rows, b_cols] = params[:, :nb]
        L[:, l_rows, l_cols] = params[:, nb:]
        used = np.sum((B @ z_factor) ** 2, axis=(1, 2)) + np.sum(L**2, axis=(1, 2))
        scale = np.sqrt(n * P / np.maximum(used, 1e-300))
        return B * scale[:, None, None], L * scale[:, None, None]

    def objective(params):
        B, L = unpack(params)
        IB = eye + B
        M = L @ np.swapaxes(L, 1, 2) + IB @ Z @ np.swapaxes(IB, 1, 2)
        sign, logdet = np.linalg.slogdet(M)
        return np.where(sign > 0, (logdet - logdet_z) / (2.0 * n * np.log(2.0)), -np.inf)

    n_params = nb + l_rows.size
    white = np.zeros(n_params)
    white[nb:][l_rows == l_cols] = np.sqrt(P)
    return objective, unpack, n_params, white


def cp_bruteforce(
    instance: CoverPombraInstance,
    restarts: int = 8,
    innovation: str = "diagonal",
    seed: int = 0,
    max_iter: int = 500,
) -> CoverPombraSolution:
    """Brute-force sup of (1/2n) log det(V + (B+I) Z (B+I)^T) / det Z under Tr(B Z B^T + V) <= nP.

    The budget is met with equality by rescaling (B, V-factor) jointly; with
    innovation="diagonal" V is diagonal, with "full" V = L L^T for lower-triangular L.
    """
    if instance.n > MAX_ORACLE_HORIZON:
        raise PreconditionError(f"Cover-Pombra oracle is limited to n <= {MAX_ORACLE_HORIZON}")
    if innovation not in ("diagonal", "full"):
        raise InvalidInputError(f"innovation must be 'diagonal' or 'full', got {innovation!r}", "innovation")

    objective, unpack, n_params, white = _cover_pombra_objective(instance, innovation)
    rng = np.random.default_rng(seed)
    starts = [white] + [
        white + rng.normal(scale=0.5, size=n_params) for _ in range(max(0, restarts - 1))
    ]
    best: Optional[AscentResult] = None
    for x0 in starts:
        result = quasi_newton_ascent(objective, x0, max_iter=max_iter)
        if best is None or result.value > best.value:
            best = result
    B, L = unpack(best.x[None, :])
    solution = CoverPombraSolution(
        C_n=float(best.value),
        B=B[0],
        V=L[0] @ L[0].T,
        stationarity=best.stationarity,
        restarts=len(starts),
    )
    logger.debug(
        f"Cover-Pombra n={instance.n}: {solution.C_n:.8f} bits, stationarity {solution.stationarity:.2e}"
    )
    return solution
