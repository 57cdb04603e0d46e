from ..arma11_oracle import arma11_capacity
from ..model import NoiseModel, statespace_to_arma11
from .base_method import CapacityMethod


class PolyMethod(CapacityMethod):
    """Closed-form quartic; only defined for first-order ARMA models."""

    def __init__(self, settings=None):
        super().__init__("poly", "C_poly_bits", settings)

    def applies_to(self, model: NoiseModel) -> bool:
        return statespace_to_arma11(model) is not None

    def _compute(self, model: NoiseModel) -> float:
        return arma11_capacity(statespace_to_arma11(model)).C_bits
