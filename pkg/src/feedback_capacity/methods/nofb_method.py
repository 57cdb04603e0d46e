from ..model import NoiseModel
from ..spectral import waterfill_capacity
from .base_method import CapacityMethod


class NofbMethod(CapacityMethod):
    def __init__(self, settings=None):
        super().__init__("nofb", "C_nofb_bits", settings)

    def _compute(self, model: NoiseModel) -> float:
        return waterfill_capacity(model, quad_points=self.settings.quad_points)
