import numpy as np
import pytest

from feedback_capacity.errors import InvalidInputError, PreconditionError
from feedback_capacity.finite_horizon import (
    CoverPombraInstance,
    HorizonOptions,
    build_noise_covariance,
    check_trajectory,
    cp_bruteforce,
    optimize_horizon,
    rollout,
)
from feedback_capacity.model import NoiseModel
from feedback_capacity.stationary_sdp import solve_capacity


def half_log(P):
    return 0.5 * np.log2(1.0 + P)


def test_rollout_single_step(arma_model):
    traj = rollout(arma_model, [[3.7]], [arma_model.P])
    assert traj.Y_seq[0] == pytest.approx(arma_model.P + 1.0)
    assert traj.C_n == pytest.approx(half_log(arma_model.P))
    assert np.array_equal(traj.Sigma_seq[0], np.zeros((1, 1)))


def test_rollout_white_noise_two_steps(white_model):
    traj = rollout(white_model, np.zeros((2, 1)), [1.0, 1.0])
    assert traj.C_n == pytest.approx(half_log(1.0))
    assert traj.avg_power == pytest.approx(1.0)


def test_rollout_rejects_bad_inputs(arma_model):
    with pytest.raises(InvalidInputError):
        rollout(arma_model, np.zeros((3, 1)), [1.0, 1.0])
    with pytest.raises(InvalidInputError):
        rollout(arma_model, np.zeros((2, 1)), [1.0, -0.1])


def test_rollout_identities_hold_for_random_inputs(random_models):
    rng = np.random.default_rng(12)
    for model in random_models(6, seed=13):
        n = 15
        X = rng.normal(size=(n, model.m))
        V = rng.uniform(0.0, model.P, size=n)
        traj = rollout(model, X, V)
        residuals = check_trajectory(model, traj)
        assert residuals["sigma1"] == 0.0
        assert residuals["yrec"] <= 1e-10
        assert residuals["riccrec"] <= 1e-10
        assert residuals["sumcap"] <= 1e-10
        assert residuals["min_sigma_eig"] >= -1e-10
        assert np.all(traj.Y_seq >= 1.0)


def test_stationary_strategy_gap_shrinks_like_one_over_n(arma_model):
    cert = solve_capacity(arma_model)
    gaps = {}
    for n in (50, 200, 2000):
        traj = rollout(arma_model, np.tile(cert.X, (n, 1)), np.full(n, cert.V))
        assert traj.C_n <= cert.C + 1e-9
        gaps[n] = cert.C - traj.C_n
    assert gaps[50] > gaps[200] > gaps[2000]
    assert gaps[2000] <= 0.25 * gaps[200]
    assert gaps[2000] <= 0.01


def test_trajectory_frame(arma_model):
    traj = rollout(arma_model, np.zeros((4, 1)), np.ones(4))
    frame = traj.to_frame()
    assert list(frame.columns) == ["k", "Y_k", "power_k", "log2Y_k"]
    assert frame["k"].tolist() == [1, 2, 3, 4]
    assert np.allclose(frame["log2Y_k"], np.log2(frame["Y_k"]))


def test_optimize_horizon_single_step(arma_model):
    traj = optimize_horizon(arma_model, 1, HorizonOptions(restarts=2))
    assert traj.V_seq[0] == pytest.approx(arma_model.P)
    assert traj.C_n == pytest.approx(half_log(arma_model.P), abs=1e-12)


@pytest.mark.parametrize("n", [2, 5])
def test_optimize_horizon_white_noise(white_model, n):
    traj = optimize_horizon(white_model, n, HorizonOptions(restarts=2))
    assert traj.C_n == pytest.approx(half_log(white_model.P), abs=1e-9)


def test_optimize_horizon_respects_per_step_budget(arma_model):
    traj = optimize_horizon(arma_model, 6, HorizonOptions(restarts=3))
    assert np.all(traj.powers <= arma_model.P + 1e-8)
    assert traj.avg_power <= arma_model.P + 1e-8
    assert traj.stationarity is not None
    assert set(traj.convergence_frame()["restart"]) == {0, 1, 2}


def test_optimize_horizon_average_budget(arma_model):
    traj = optimize_horizon(arma_model, 4, HorizonOptions(restarts=2, power_constraint="average"))
    per_step = optimize_horizon(arma_model, 4, HorizonOptions(restarts=2))
    assert traj.avg_power <= arma_model.P + 1e-8
    assert traj.C_n >= per_step.C_n - 1e-5


def test_optimize_horizon_preconditions(arma_model):
    with pytest.raises(PreconditionError):
        optimize_horizon(arma_model, 0)
    with pytest.raises(PreconditionError):
        optimize_horizon(arma_model, 10_001)
    with pytest.raises(InvalidInputError):
        optimize_horizon(arma_model, 2, HorizonOptions(power_constraint="peak"))


def test_warm_start_is_monotone(arma_model):
    cert = solve_capacity(arma_model)
    first = optimize_horizon(arma_model, 8, HorizonOptions(restarts=2, stationary=cert))
    second = optimize_horizon(
        arma_model, 9, HorizonOptions(restarts=1, warm_start=first, stationary=cert)
    )
    assert second.C_n >= first.C_n - 1e-9


def test_noise_covariance_examples(arma_model, white_model):
    assert np.array_equal(build_noise_covariance(arma_model, 1).Z, [[1.0]])
    Z = build_noise_covariance(arma_model, 2).Z
    assert Z[0, 0] == pytest.approx(1.0)
    assert Z[1, 0] == pytest.approx(0.95)
    assert Z[0, 1] == pytest.approx(0.95)
    assert Z[1, 1] == pytest.approx(0.95**2 + 1.0)
    assert np.allclose(build_noise_covariance(white_model, 4).Z, np.eye(4))


def test_noise_covariance_diagonal_matches_state_covariance(random_models):
    for model in random_models(3, seed=17):
        Z = build_noise_covariance(model, 6).Z
        S = np.zeros((model.m, model.m))
        for k in range(6):
            assert Z[k, k] == pytest.approx(float((model.H @ S @ model.H.T)[0, 0]) + 1.0)
            S = model.F @ S @ model.F.T + model.G @ model.G.T
        assert np.min(np.linalg.eigvalsh(Z)) >= -1e-10


def test_cover_pombra_instance_validation():
    with pytest.raises(InvalidInputError):
        CoverPombraInstance(2, np.array([[1.0, 0.5], [0.4, 1.0]]), 1.0)
    with pytest.raises(InvalidInputError):
        CoverPombraInstance(1, np.array([[0.5]]), 1.0)
    with pytest.raises(InvalidInputError):
        CoverPombraInstance(1, np.array([[1.0]]), 0.0)


def test_cover_pombra_single_step():
    instance = CoverPombraInstance(1, np.array([[2.0]]), 3.0)
    assert cp_bruteforce(instance, restarts=2).C_n == pytest.approx(0.5 * np.log2(1.0 + 3.0 / 2.0))


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_cover_pombra_white_noise(n):
    instance = CoverPombraInstance(n, np.eye(n), 1.5)
    assert cp_bruteforce(instance, restarts=3).C_n == pytest.approx(half_log(1.5), abs=1e-8)


def test_cover_pombra_limits(arma_model):
    with pytest.raises(PreconditionError):
        cp_bruteforce(CoverPombraInstance(7, np.eye(7), 1.0))
    with pytest.raises(InvalidInputError):
        cp_bruteforce(build_noise_covariance(arma_model, 2), innovation="banded")


def test_cover_pombra_budget_is_met(arma_model):
    instance = build_noise_covariance(arma_model, 3)
    solution = cp_bruteforce(instance, restarts=2, innovation="full")
    power = np.trace(solution.B @ instance.Z @ solution.B.T + solution.V)
    assert power == pytest.approx(3 * arma_model.P, rel=1e-9)
    assert np.allclose(np.triu(solution.B), 0.0)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_oracle_triangulation_on_colored_noise(arma_model, n):
    cp = cp_bruteforce(build_noise_covariance(arma_model, n), restarts=4, innovation="full")
    average = optimize_horizon(arma_model, n, HorizonOptions(restarts=4, power_constraint="average"))
    per_step = optimize_horizon(arma_model, n, HorizonOptions(restarts=4))
    assert abs(cp.C_n - average.C_n) <= 1e-4
    assert cp.C_n >= per_step.C_n - 1e-4


def test_diagonal_innovation_is_a_restriction(arma_model):
    instance = build_noise_covariance(arma_model, 3)
    diagonal = cp_bruteforce(instance, restarts=3)
    full = cp_bruteforce(instance, restarts=3, innovation="full")
    assert diagonal.C_n <= full.C_n + 1e-6
    assert np.allclose(diagonal.V, np.diag(np.diag(diagonal.V)))


@pytest.mark.slow
def test_finite_horizon_converges_to_stationary_capacity(arma_model):
    cert = solve_capacity(arma_model)
    values = []
    previous = None
    for n in (25, 50, 100, 200):
        opts = HorizonOptions(restarts=3, stationary=cert, warm_start=previous)
        previous = optimize_horizon(arma_model, n, opts)
        values.append(previous.C_n)
    assert all(b >= a - 1e-6 for a, b in zip(values, values[1:]))
    assert cert.C - values[-1] <= 0.01
    assert values[-1] <= cert.C + 1e-3
