"""Shared numerical optimization helpers.

Objectives are written as *batch* functions: they take a stack of parameter
vectors with shape (B, d) and return B values, so the forward-difference
gradient costs one vectorized call instead of d separate ones.
"""

import asyncio
import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple, TypeVar, Union

import numpy as np
import pandas as pd
from scipy import optimize

logger = logging.getLogger(__name__)

BatchFunction = Callable[[np.ndarray], np.ndarray]
Bounds = Optional[Sequence[Tuple[Optional[float], Optional[float]]]]
T = TypeVar("T")

FD_REL_STEP = 1e-7


def forward_gradient(
    batch_fun: BatchFunction, x: np.ndarray, rel_step: float = FD_REL_STEP
) -> Tuple[float, np.ndarray]:
    """Value and forward-difference gradient with step rel_step * (1 + |x_i|)."""
    x = np.asarray(x, dtype=float)
    h = rel_step * (1.0 + np.abs(x))
    points = np.vstack([x[None, :], x[None, :] + np.diag(h)])
    values = np.asarray(batch_fun(points), dtype=float)
    return float(values[0]), (values[1:] - values[0]) / h


def projected_gradient_norm(x: np.ndarray, grad: np.ndarray, bounds: Bounds) -> float:
    """Infinity norm of the ascent gradient with components blocked by active bounds removed."""
    g = np.array(grad, dtype=float)
    if bounds is not None:
        for i, (lo, hi) in enumerate(bounds):
            if lo is not None and x[i] <= lo + 1e-12 and g[i] < 0:
                g[i] = 0.0
            if hi is not None and x[i] >= hi - 1e-12 and g[i] > 0:
                g[i] = 0.0
    return float(np.max(np.abs(g))) if g.size else 0.0


@dataclass
class AscentResult:
    x: np.ndarray
    value: float
    stationarity: float
    iterations: int
    line_search_failed: bool
    message: str
    trace: pd.DataFrame = field(default_factory=pd.DataFrame)


def quasi_newton_ascent(
    batch_objective: BatchFunction,
    x0: np.ndarray,
    bounds: Bounds = None,
    max_iter: int = 500,
) -> AscentResult:
    """Maximize a batch objective with L-BFGS-B and forward-difference gradients."""
    x0 = np.asarray(x0, dtype=float)
    if x0.size == 0:
        value = float(batch_objective(x0[None, :])[0])
        return AscentResult(x0, value, 0.0, 0, False, "no free parameters",
                            pd.DataFrame([{"iteration": 0, "value": value}]))

    rows: List[dict] = []
    last = {}

    def fun(x):
        value, grad = forward_gradient(batch_objective, x)
        last["value"] = value
        return -value, -grad

    def callback(xk):
        rows.append({"iteration": len(rows) + 1, "value": last.get("value", np.nan)})

    start_value, _ = forward_gradient(batch_objective, x0)
    rows.append({"iteration": 0, "value": start_value})
    res = optimize.minimize(
        fun,
        x0,
        jac=True,
        method="L-BFGS-B",
        bounds=bounds,
        callback=callback,
        options={"maxiter": max_iter, "ftol": 1e-15, "gtol": 1e-10},
    )
    x = np.asarray(res.x, dtype=float)
    value, grad = forward_gradient(batch_objective, x)
    if value < start_value:
        x, value = x0, start_value
        _, grad = forward_gradient(batch_objective, x)
    message = str(res.message)
    return AscentResult(
        x=x,
        value=value,
        stationarity=projected_gradient_norm(x, grad, bounds),
        iterations=int(res.nit),
        line_search_failed="ABNORMAL" in message.upper(),
        message=message,
        trace=pd.DataFrame(rows, columns=["iteration", "value"]),
    )


def constrained_ascent(
    batch_objective: BatchFunction,
    batch_constraint: BatchFunction,
    x0: np.ndarray,
    bounds: Bounds = None,
    max_iter: int = 500,
) -> AscentResult:
    """Maximize subject to batch_constraint(x) >= 0 with SLSQP and forward differences."""
    x0 = np.asarray(x0, dtype=float)
    rows: List[dict] = []

    def fun(x):
        value, grad = forward_gradient(batch_objective, x)
        return -value, -grad

    def cons_fun(x):
        return float(batch_constraint(x[None, :])[0])

    def cons_jac(x):
        return forward_gradient(batch_constraint, x)[1]

    def callback(xk):
        rows.append({"iteration": len(rows) + 1,
                     "value": float(batch_objective(xk[None, :])[0])})

    start_value = float(batch_objective(x0[None, :])[0])
    rows.append({"iteration": 0, "value": start_value})
    res = optimize.minimize(
        fun,
        x0,
        jac=True,
        method="SLSQP",
        bounds=bounds,
        constraints=[{"type": "ineq", "fun": cons_fun, "jac": cons_jac}],
        callback=callback,
        options={"maxiter": max_iter, "ftol": 1e-14},
    )
    x = np.asarray(res.x, dtype=float)
    feasible = cons_fun(x) >= -1e-10
    value, grad = forward_gradient(batch_objective, x)
    start_feasible = cons_fun(x0) >= -1e-10
    if (not feasible or value < start_value) and start_feasible:
        x, value = x0, start_value
        _, grad = forward_gradient(batch_objective, x)
    message = str(res.message)
    return AscentResult(
        x=x,
        value=value,
        stationarity=projected_gradient_norm(x, grad, bounds),
        iterations=int(res.nit),
        line_search_failed=not res.success and "line search" in message.lower(),
        message=message,
        trace=pd.DataFrame(rows, columns=["iteration", "value"]),
    )


async def gather_bounded(
    thunks: Sequence[Callable[[], T]], workers: int
) -> List[Union[T, BaseException]]:
    """Run blocking callables in threads, at most `workers` at a time, keeping input order."""
    semaphore = asyncio.Semaphore(max(1, workers))

    async def run_one(thunk):
        async with semaphore:
            return await asyncio.to_thread(thunk)

    return await asyncio.gather(*(run_one(t) for t in thunks), return_exceptions=True)
