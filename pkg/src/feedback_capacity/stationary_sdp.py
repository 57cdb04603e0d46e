"""Stationary feedback capacity as a semidefinite program.

Decision variables are K = X Sigma (1 x m), Sigma (symmetric m x m) and the
innovation variance Y of the channel output. The program is

    maximize Y
    s.t. [[P, K], [K^T, Sigma]] > 0
         [[F Sigma F^T - Sigma + G G^T, F K^T + F Sigma H^T + G],
          [(.)^T,                       Y                     ]] >= 0
         Y = K H^T + H K^T + H Sigma H^T + P + 1

and the capacity is (1/2) log2 Y. The optimal strategy x_k = X s~_k + v_k is
recovered from the solution and checked against the stability and positivity
properties it must have.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import cvxpy as cp
import numpy as np
from scipy import linalg

from .config import Settings
from .errors import (
    CertificationError,
    ConvergenceError,
    DegenerateStrategyError,
    SolverStatusError,
)
from .model import NoiseModel, is_controllable, is_detectable, spectral_radius

logger = logging.getLogger(__name__)

CERT_MARGIN = 1e-9
RICCATI_TOL = 1e-8
SIGMA_FLOOR = 1e-10
V_FLOOR = 1e-12
MARGIN_LADDER = (1e-6, 1e-5, 1e-4)


@dataclass
class SdpProblem:
    """Standard-form description: every LMI block is A0 + sum_i x_i A_i."""

    m: int
    P: float
    variable_names: List[str]
    lmi_constants: List[np.ndarray]
    lmi_coefficients: List[np.ndarray]
    eq_coefficients: np.ndarray
    eq_rhs: float
    objective: np.ndarray
    margin: float

    @property
    def n_variables(self) -> int:
        return len(self.variable_names)

    @property
    def lmi_sizes(self) -> List[int]:
        return [A0.shape[0] for A0 in self.lmi_constants]

    def unpack(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray, float]:
        m = self.m
        K = np.asarray(x[:m], dtype=float).reshape(1, m)
        Sigma = np.zeros((m, m))
        idx = m
        for i in range(m):
            for j in range(i, m):
                Sigma[i, j] = Sigma[j, i] = x[idx]
                idx += 1
        return K, Sigma, float(x[idx])

    def lmi_value(self, index: int, x: np.ndarray) -> np.ndarray:
        return self.lmi_constants[index] + np.tensordot(x, self.lmi_coefficients[index], axes=1)

    def to_dict(self) -> dict:
        return {
            "variables": self.variable_names,
            "objective": self.objective.tolist(),
            "lmis": [
                {
                    "size": A0.shape[0],
                    "constant": A0.tolist(),
                    "coefficients": A.tolist(),
                    "margin": self.margin if k == 0 else 0.0,
                }
                for k, (A0, A) in enumerate(zip(self.lmi_constants, self.lmi_coefficients))
            ],
            "equality": {"coefficients": self.eq_coefficients.tolist(), "rhs": self.eq_rhs},
        }


@dataclass
class CapacityCertificate:
    Y: float
    C: float
    K: np.ndarray
    Sigma: np.ndarray
    X: np.ndarray
    V: float
    Gamma: np.ndarray
    residual_riccati: float
    closed_loop_radius: float
    power_used: float
    certified: bool
    failures: List[str] = field(default_factory=list)
    solver_status: str = ""
    lmi_margin: float = 0.0


@dataclass
class StrategyEvaluation:
    Y: float
    power: float
    Sigma: np.ndarray
    Gamma: np.ndarray
    iterations: int


def _sym_basis(m: int, i: int, j: int) -> np.ndarray:
    E = np.zeros((m, m))
    E[i, j] = E[j, i] = 1.0
    return E


def build_sdp(model: NoiseModel, margin: float = 1e-8, slack: float = 0.0) -> SdpProblem:
    """Assemble the capacity SDP in standard form.

    `slack` adds process noise e_k ~ N(0, slack * I) to the state, replacing
    G G^T by G G^T + slack * I in the Riccati block.
    """
    if not is_controllable(model.F, model.G):
        logger.warning("(F, G) is not controllable; the certificate will be marked uncertified")
    if not is_detectable(model.H, model.F):
        logger.warning("(H, F) is not detectable; the certificate will be marked uncertified")

    F, G, H, P, m = model.F, model.G, model.H, model.P, model.m
    names = [f"K[{j}]" for j in range(m)]
    sigma_pairs = [(i, j) for i in range(m) for j in range(i, m)]
    names += [f"Sigma[{i},{j}]" for i, j in sigma_pairs]
    names.append("Y")
    nvar = len(names)
    size = m + 1

    # [[P, K], [K^T, Sigma]]
    A0_power = np.zeros((size, size))
    A0_power[0, 0] = P
    A_power = np.zeros((nvar, size, size))
    for j in range(m):
        A_power[j, 0, 1 + j] = A_power[j, 1 + j, 0] = 1.0
    for idx, (i, j) in enumerate(sigma_pairs, start=m):
        A_power[idx, 1:, 1:] = _sym_basis(m, i, j)

    # Riccati block
    A0_ricc = np.zeros((size, size))
    A0_ricc[:m, :m] = G @ G.T + slack * np.eye(m)
    A0_ricc[:m, m] = G[:, 0]
    A0_ricc[m, :m] = G[:, 0]
    A_ricc = np.zeros((nvar, size, size))
    for j in range(m):
        A_ricc[j, :m, m] = F[:, j]
        A_ricc[j, m, :m] = F[:, j]
    for idx, (i, j) in enumerate(sigma_pairs, start=m):
        E = _sym_basis(m, i, j)
        A_ricc[idx, :m, :m] = F @ E @ F.T - E
        col = (F @ E @ H.T)[:, 0]
        A_ricc[idx, :m, m] = col
        A_ricc[idx, m, :m] = col
    A_ricc[nvar - 1, m, m] = 1.0

    # Y - 2 K H^T - H Sigma H^T = P + 1
    eq = np.zeros(nvar)
    eq[:m] = -2.0 * H[0, :]
    for idx, (i, j) in enumerate(sigma_pairs, start=m):
        eq[idx] = -float((H @ _sym_basis(m, i, j) @ H.T)[0, 0])
    eq[nvar - 1] = 1.0

    objective = np.zeros(nvar)
    objective[nvar - 1] = 1.0
    return SdpProblem(
        m=m,
        P=P,
        variable_names=names,
        lmi_constants=[A0_power, A0_ricc],
        lmi_coefficients=[A_power, A_ricc],
        eq_coefficients=eq,
        eq_rhs=P + 1.0,
        objective=objective,
        margin=margin,
    )


def _solver_options(solver: str, tol: float) -> dict:
    if solver == "CLARABEL":
        return {"tol_gap_abs": tol, "tol_gap_rel": tol, "tol_feas": tol}
    if solver == "SCS":
        return {"eps_abs": tol, "eps_rel": tol, "max_iters": 200_000}
    return {}


def _solve_standard_form(
    problem: SdpProblem, settings: Settings, y_floor: Optional[float] = None
) -> Tuple[np.ndarray, str]:
    """Solve stage 1 (maximize Y) or, given y_floor, stage 2 (maximize tr Sigma with Y >= y_floor)."""
    x = cp.Variable(problem.n_variables)
    blocks = [
        A0 + sum(x[i] * A[i] for i in range(problem.n_variables))
        for A0, A in zip(problem.lmi_constants, problem.lmi_coefficients)
    ]
    size = problem.m + 1
    constraints = [
        blocks[0] >> problem.margin * np.eye(size),
        blocks[1] >> 0,
        problem.eq_coefficients @ x == problem.eq_rhs,
    ]
    if y_floor is None:
        objective = cp.Maximize(problem.objective @ x)
    else:
        constraints.append(x[problem.n_variables - 1] >= y_floor)
        trace_weights = np.zeros(problem.n_variables)
        idx = problem.m
        for i in range(problem.m):
            for j in range(i, problem.m):
                if i == j:
                    trace_weights[idx] = 1.0
                idx += 1
        objective = cp.Maximize(trace_weights @ x)

    prob = cp.Problem(objective, constraints)
    try:
        prob.solve(solver=settings.sdp_solver, **_solver_options(settings.sdp_solver, settings.sdp_tol))
    except cp.error.SolverError as e:
        raise SolverStatusError(f"SDP solver {settings.sdp_solver} failed: {e}", "solver_error") from e

    if prob.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) or x.value is None:
        raise SolverStatusError(f"SDP not solved to optimality: {prob.status}", str(prob.status))
    if prob.status == cp.OPTIMAL_INACCURATE:
        logger.warning("SDP solver reports an inaccurate optimum")
    return np.asarray(x.value, dtype=float), str(prob.status)


def _certify(
    model: NoiseModel, K, Sigma, Y, X, V, Gamma
) -> Tuple[List[str], float, float, float]:
    F, G, H, P = model.F, model.G, model.H, model.P
    failures = []

    y_formula = float((2.0 * K @ H.T + H @ Sigma @ H.T)[0, 0]) + P + 1.0
    if abs(Y - y_formula) > 1e-8 * max(1.0, abs(Y)):
        failures.append(f"equality constraint violated: Y={Y:.12g}, formula={y_formula:.12g}")

    power_block = np.block([[np.array([[P]]), K], [K.T, Sigma]])
    if np.min(linalg.eigvalsh(power_block)) < CERT_MARGIN:
        failures.append("power LMI margin below 1e-9")

    riccati = F @ Sigma @ F.T - Sigma + G @ G.T - Y * (Gamma @ Gamma.T)
    riccati = 0.5 * (riccati + riccati.T)
    if np.min(linalg.eigvalsh(riccati)) < -RICCATI_TOL:
        failures.append("Riccati inequality violated beyond -1e-8")
    residual = float(np.linalg.norm(riccati, "fro"))

    radius = spectral_radius(F - Gamma @ (X + H))
    if not radius < 1.0:
        failures.append(f"closed loop not stable: spectral radius {radius:.6g}")

    if np.min(linalg.eigvalsh(Sigma)) <= SIGMA_FLOOR:
        failures.append("Sigma is not positive definite")

    power_used = float((X @ Sigma @ X.T)[0, 0]) + V
    if not V > 0:
        failures.append(f"innovation power V={V:.3e} is not positive")
    if power_used > P + 1e-8:
        failures.append(f"power budget exceeded: {power_used:.12g} > {P}")
    return failures, residual, radius, power_used


def _recover(
    model: NoiseModel, problem: SdpProblem, x: np.ndarray, status: str
) -> CapacityCertificate:
    """Strategy (X, V, Gamma) from an SDP point, with the certificate checks applied."""
    K, Sigma, Y = problem.unpack(x)
    if np.min(linalg.eigvalsh(Sigma)) >= SIGMA_FLOOR:
        X = linalg.solve(Sigma, K.T, assume_a="sym").T
    else:
        X = K @ linalg.pinv(Sigma, atol=SIGMA_FLOOR)
    V = model.P - float((X @ K.T)[0, 0])
    if V <= V_FLOOR:
        raise DegenerateStrategyError(
            f"Recovered innovation power V={V:.3e} is not positive",
            {"K": K, "Sigma": Sigma, "Y": Y, "status": status, "margin": problem.margin},
        )
    Gamma = (model.F @ K.T + model.F @ Sigma @ model.H.T + model.G) / Y

    failures, residual, radius, power_used = _certify(model, K, Sigma, Y, X, V, Gamma)
    return CapacityCertificate(
        Y=Y,
        C=0.5 * float(np.log2(Y)),
        K=K,
        Sigma=Sigma,
        X=X,
        V=V,
        Gamma=Gamma,
        residual_riccati=residual,
        closed_loop_radius=radius,
        power_used=power_used,
        certified=not failures,
        failures=failures,
        solver_status=status,
        lmi_margin=problem.margin,
    )


def _candidate_points(
    problem: SdpProblem, settings: Settings, tighten: bool
) -> List[Tuple[np.ndarray, str]]:
    """Stage-two point first when it is accurate and keeps the stage-one optimum, then stage one."""
    x1, status1 = _solve_standard_form(problem, settings)
    candidates = [(x1, status1)]
    if not tighten:
        return candidates
    y_star = problem.unpack(x1)[2]
    try:
        x2, status2 = _solve_standard_form(
            problem, settings, y_floor=y_star - 1e-8 * (1.0 + abs(y_star))
        )
    except SolverStatusError as e:
        logger.warning(f"Tightening stage failed ({e.status}); keeping the stage-one optimum")
        return candidates
    y2 = problem.unpack(x2)[2]
    if status2 != cp.OPTIMAL:
        logger.warning(f"Tightening stage returned {status2}; keeping the stage-one optimum")
    elif abs(y2 - y_star) > 1e-6 * (1.0 + abs(y_star)):
        logger.warning(f"Tightening stage moved Y from {y_star:.12g} to {y2:.12g}; discarded")
    else:
        candidates.insert(0, (x2, status2))
    return candidates


def solve_capacity(
    model: NoiseModel,
    settings: Optional[Settings] = None,
    tighten: bool = True,
    slack: float = 0.0,
    strict: bool = False,
) -> CapacityCertificate:
    """Solve the capacity SDP, recover the stationary strategy and certify it.

    The optimum has V close to zero, so the strategy is recovered at a small
    margin on the power LMI. When no candidate point certifies, the program is
    re-solved with the margins in MARGIN_LADDER before giving up.
    """
    settings = settings or Settings()
    controllable = is_controllable(model.F, model.G)
    detectable = is_detectable(model.H, model.F)

    if controllable:
        margins = [settings.lmi_margin] + [m for m in MARGIN_LADDER if m > settings.lmi_margin]
    else:
        # a stable uncontrollable mode forces Sigma to be singular, so no margin is imposed
        margins = [0.0]

    cert: Optional[CapacityCertificate] = None
    last_error: Optional[Exception] = None
    for margin in margins:
        problem = build_sdp(model, margin=margin, slack=slack)
        try:
            candidates = _candidate_points(problem, settings, tighten)
        except SolverStatusError as e:
            logger.warning(f"SDP at LMI margin {margin:.0e} failed: {str(e)}")
            last_error = e
            continue
        for x, status in candidates:
            try:
                candidate = _recover(model, problem, x, status)
            except DegenerateStrategyError as e:
                logger.warning(str(e))
                last_error = e
                continue
            if cert is None or (candidate.certified and not cert.certified):
                cert = candidate
            if candidate.certified:
                break
        if cert is not None and cert.certified:
            break
        logger.warning(f"No certified strategy at LMI margin {margin:.0e}")

    if cert is None:
        raise last_error
    if not controllable:
        cert.failures.append("(F, G) is not controllable")
    if not detectable:
        cert.failures.append("(H, F) is not detectable")
    cert.certified = not cert.failures

    if cert.failures:
        logger.error(f"Capacity certificate failed checks: {'; '.join(cert.failures)}")
        if strict:
            raise CertificationError("Certificate invariants violated", cert)
    else:
        logger.info(
            f"Certified capacity C={cert.C:.6f} bits (Y={cert.Y:.8g}, LMI margin {cert.lmi_margin:.0e})"
        )
    return cert


def evaluate_nonconvex_point(
    model: NoiseModel,
    X: np.ndarray,
    V: float,
    tol: float = 1e-13,
    max_iter: int = 100_000,
) -> StrategyEvaluation:
    """Stationary Y and power of the strategy x_k = X s~_k + v_k, v_k ~ N(0, V)."""
    F, G, H = model.F, model.G, model.H
    Xh = np.asarray(X, dtype=float).reshape(1, model.m) + H
    Sigma = np.zeros((model.m, model.m))
    defect = np.inf
    for iteration in range(1, max_iter + 1):
        Y = float((Xh @ Sigma @ Xh.T)[0, 0]) + V + 1.0
        Gamma = (F @ Sigma @ Xh.T + G) / Y
        Sigma_next = F @ Sigma @ F.T + G @ G.T - Y * (Gamma @ Gamma.T)
        Sigma_next = 0.5 * (Sigma_next + Sigma_next.T)
        if not np.all(np.isfinite(Sigma_next)) or np.max(np.abs(Sigma_next)) > 1e12:
            raise ConvergenceError("Strategy Riccati recursion diverged", np.inf, iteration)
        defect = float(np.linalg.norm(Sigma_next - Sigma, "fro"))
        Sigma = Sigma_next
        if defect <= tol * (1.0 + float(np.linalg.norm(Sigma, "fro"))):
            break
    else:
        raise ConvergenceError(
            f"Strategy Riccati recursion did not converge in {max_iter} steps",
            defect,
            max_iter,
        )
    Y = float((Xh @ Sigma @ Xh.T)[0, 0]) + V + 1.0
    Gamma = (F @ Sigma @ Xh.T + G) / Y
    X = Xh - H
    return StrategyEvaluation(
        Y=Y,
        power=float((X @ Sigma @ X.T)[0, 0]) + V,
        Sigma=Sigma,
        Gamma=Gamma,
        iterations=iteration,
    )


def certificate_to_dict(cert: CapacityCertificate) -> dict:
    return {
        "Y": cert.Y,
        "C_bits": cert.C,
        "K": cert.K.tolist(),
        "Sigma": cert.Sigma.tolist(),
        "X": cert.X.tolist(),
        "V": cert.V,
        "Gamma": cert.Gamma.tolist(),
        "residual_riccati": cert.residual_riccati,
        "closed_loop_radius": cert.closed_loop_radius,
        "power_used": cert.power_used,
        "certified": cert.certified,
        "failures": list(cert.failures),
        "lmi_margin": cert.lmi_margin,
    }
