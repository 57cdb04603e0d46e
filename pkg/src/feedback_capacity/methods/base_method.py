import asyncio
import logging
from abc import ABC, abstractmethod
from typing import Optional

from ..config import Settings
from ..errors import FeedcapError
from ..model import NoiseModel


class CapacityMethod(ABC):
    def __init__(self, method_name: str, column: str, settings: Optional[Settings] = None):
        self.logger = logging.getLogger(f"{self.__class__.__name__}")
        self.method_name = method_name
        self.column = column
        self.settings = settings or Settings()

    def applies_to(self, model: NoiseModel) -> bool:
        return True

    @abstractmethod
    def _compute(self, model: NoiseModel) -> float:
        """Method-specific capacity (or rate) in bits per channel use."""

    def compute(self, model: NoiseModel) -> Optional[float]:
        if not self.applies_to(model):
            return None
        try:
            value = self._compute(model)
        except FeedcapError as e:
            self.logger.error(f"{self.method_name} failed at P={model.P}: {str(e)}")
            return None
        self.logger.debug(f"{self.method_name}: {value:.10f} bits at P={model.P}")
        return value

    async def compute_async(
        self, model: NoiseModel, semaphore: asyncio.Semaphore
    ) -> Optional[float]:
        async with semaphore:
            return await asyncio.to_thread(self.compute, model)
