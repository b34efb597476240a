"""HTTP inference sidecar for taxometer's model gateway."""

from .app import create_app
from .config import Settings

__version__ = "0.1.0"

__all__ = ["Settings", "create_app", "__version__"]
