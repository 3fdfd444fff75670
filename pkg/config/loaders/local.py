import json
from pathlib import Path
from typing import Any

import yaml

from .base import ConfigLoader

JSON_SUFFIXES = {".json"}


class LocalConfigLoader(ConfigLoader):
    def __init__(self, path: str) -> None:
        super().__init__(path)
        self.path = Path(path)

    def load(self) -> dict[str, Any]:
        if not self.path.exists():
            msg = f"Scenario file not found: {self.path}"
            raise FileNotFoundError(msg)

        text = self.path.read_text(encoding="utf-8")
        if not text.strip():
            msg = f"Scenario file is empty or contains only whitespace: {self.path}"
            raise ValueError(msg)

        try:
            scenario = json.loads(text) if self.path.suffix.lower() in JSON_SUFFIXES else yaml.safe_load(text)
        except json.JSONDecodeError as e:
            msg = f"Invalid JSON in scenario file {self.path}: {e}"
            raise ValueError(msg) from e
        except yaml.YAMLError as e:
            msg = f"Invalid YAML in scenario file {self.path}: {e}"
            raise ValueError(msg) from e

        if not isinstance(scenario, dict):
            msg = f"Scenario file must contain an object at the top level: {self.path}"
            raise ValueError(msg)
        return scenario
