import json

import numpy as np
import pytest

from feedback_capacity.model import (
    Arma11Params,
    NoiseModel,
    arma11_to_statespace,
    is_controllable,
    is_detectable,
    model_to_dict,
    spectral_radius,
)


def make_random_model(rng: np.random.Generator, m: int) -> NoiseModel:
    """Random stable, controllable, detectable model with state dimension m."""
    while True:
        F = rng.normal(size=(m, m))
        F *= rng.uniform(0.2, 0.9) / spectral_radius(F)
        G = rng.normal(size=(m, 1))
        H = rng.normal(size=(1, m))
        if is_controllable(F, G) and is_detectable(H, F):
            return NoiseModel(F, G, H, float(rng.uniform(0.5, 5.0)))


@pytest.fixture
def arma_params():
    return Arma11Params(alpha=0.7, beta=-0.25, P=1.0)


@pytest.fixture
def arma_model(arma_params):
    return arma11_to_statespace(arma_params)


@pytest.fixture
def white_model():
    return NoiseModel(F=[[0.0]], G=[[1.0]], H=[[0.0]], P=1.0)


@pytest.fixture
def random_models():
    def factory(count: int, seed: int = 0, dims=(1, 2, 3)):
        rng = np.random.default_rng(seed)
        return [make_random_model(rng, dims[i % len(dims)]) for i in range(count)]

    return factory


@pytest.fixture
def model_file(tmp_path):
    def write(model_or_dict, name: str = "model.json"):
        data = model_or_dict if isinstance(model_or_dict, dict) else model_to_dict(model_or_dict)
        path = tmp_path / name
        path.write_text(json.dumps(data), encoding="utf-8")
        return str(path)

    return write
