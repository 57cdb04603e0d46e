from ..model import NoiseModel
from ..spectral import optimize_fir, rate_and_power
from .base_method import CapacityMethod

DEFAULT_TAPS = 16


class FirMethod(CapacityMethod):
    def __init__(self, settings=None, taps: int = DEFAULT_TAPS):
        super().__init__("fir", "C_fir_bits", settings)
        self.taps = taps

    def _compute(self, model: NoiseModel) -> float:
        quad = self.settings.quad_points
        strategy = optimize_fir(model, self.taps, quad_points=quad)
        rate, _ = rate_and_power(model, strategy, quad)
        return rate
