from typing import Dict, Type

from .base_method import CapacityMethod
from .fir_method import FirMethod
from .nofb_method import NofbMethod
from .poly_method import PolyMethod
from .sdp_method import SdpMethod

METHODS: Dict[str, Type[CapacityMethod]] = {
    "sdp": SdpMethod,
    "poly": PolyMethod,
    "fir": FirMethod,
    "nofb": NofbMethod,
}

__all__ = ["CapacityMethod", "SdpMethod", "PolyMethod", "FirMethod", "NofbMethod", "METHODS"]
