from abc import ABC, abstractmethod
from typing import Any


class ConfigLoader(ABC):
    """Fetches a raw scenario document; validation happens in ``config.schema``."""

    def __init__(self, source: str) -> None:
        self.source = source

    @abstractmethod
    def load(self) -> dict[str, Any]: ...

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.source!r})"
