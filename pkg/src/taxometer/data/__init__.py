"""Bundled fixture data."""

from importlib import resources
from pathlib import Path


def sample_taxonomy_path() -> Path:
    """Path of the bundled 50-concept food sample taxonomy."""
    return Path(str(resources.files(__package__).joinpath("sample_taxonomy.json")))
