from ..model import NoiseModel
from ..stationary_sdp import solve_capacity
from .base_method import CapacityMethod


class SdpMethod(CapacityMethod):
    def __init__(self, settings=None):
        super().__init__("sdp", "C_sdp_bits", settings)

    def _compute(self, model: NoiseModel) -> float:
        cert = solve_capacity(model, self.settings)
        if not cert.certified:
            self.logger.warning(
                f"Uncertified SDP value at P={model.P}: {'; '.join(cert.failures)}"
            )
        return cert.C
