from abc import ABC, abstractmethod
from typing import TYPE_CHECKING, Any

if TYPE_CHECKING:
    from sim.metrics import Metrics
    from sim.trace import Trace


class TraceSink(ABC):
    @abstractmethod
    def write_run(self, document: dict[str, Any], trace: "Trace", metrics: "Metrics") -> None:
        pass

    @abstractmethod
    def close(self) -> None:
        """Clean up any resources."""
