from typing import TYPE_CHECKING, Any
from urllib.parse import urlparse

from config.loaders.http import HTTPConfigLoader
from config.loaders.local import LocalConfigLoader
from logging_config import get_logger

if TYPE_CHECKING:
    from config.loaders.base import ConfigLoader

logger = get_logger(__name__)


def get_loader(source: str) -> "ConfigLoader":
    parsed = urlparse(source)
    if parsed.scheme in {"http", "https"}:
        logger.info("Using HTTPConfigLoader for scenario source: %s", source)
        return HTTPConfigLoader(source)
    logger.info("Using LocalConfigLoader for scenario source: %s", source)
    return LocalConfigLoader(source)


def load_scenario(source: str) -> dict[str, Any]:
    """Load the raw scenario document behind ``source`` (local path or http(s) URL)."""
    loader = get_loader(source)
    document = loader.load()
    logger.info("Loaded scenario %r via %r", document.get("name"), loader)
    return document
