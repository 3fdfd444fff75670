from typing import Any

import requests
import yaml
from tenacity import retry, retry_if_exception_type, stop_after_attempt, wait_exponential

from .base import ConfigLoader


class HTTPConfigLoader(ConfigLoader):
    def __init__(self, url: str) -> None:
        super().__init__(url)
        self.url = url

    @retry(
        stop=stop_after_attempt(3),
        wait=wait_exponential(multiplier=1, min=1, max=5),
        retry=retry_if_exception_type(requests.RequestException),
        reraise=True,
    )
    def _fetch(self) -> str:
        resp = requests.get(self.url, timeout=10)
        resp.raise_for_status()
        return resp.text

    def load(self) -> dict[str, Any]:
        try:
            text = self._fetch()
        except requests.RequestException as e:
            msg = f"Failed to fetch scenario from {self.url}: {e}"
            raise ConnectionError(msg) from e

        if not text.strip():
            msg = f"Empty response from scenario URL: {self.url}"
            raise ValueError(msg)

        try:
            # JSON is a subset of YAML, so one parser covers both documents.
            scenario = yaml.safe_load(text)
        except yaml.YAMLError as e:
            msg = f"Invalid scenario document from URL {self.url}: {e}"
            raise ValueError(msg) from e

        if not isinstance(scenario, dict):
            msg = f"Scenario from URL must contain an object at the top level: {self.url}"
            raise ValueError(msg)
        return scenario
