"""Environment-driven settings."""

from __future__ import annotations

import os
from dataclasses import dataclass

BACKEND_ENV = "TAXOMETER_SIDECAR_BACKEND"
EMBED_MODEL_ENV = "TAXOMETER_SIDECAR_EMBED_MODEL"
NLI_MODEL_ENV = "TAXOMETER_SIDECAR_NLI_MODEL"
FILL_MASK_MODEL_ENV = "TAXOMETER_SIDECAR_FILLMASK_MODEL"
MAX_BATCH_ENV = "TAXOMETER_SIDECAR_MAX_BATCH"
PORT_ENV = "TAXOMETER_SIDECAR_PORT"

DEFAULT_EMBED_MODEL = "sentence-transformers/all-MiniLM-L6-v2"
DEFAULT_NLI_MODEL = "facebook/bart-large-mnli"
DEFAULT_FILL_MASK_MODEL = "bert-base-uncased"


@dataclass(frozen=True)
class Settings:
    """Runtime configuration; ``backend`` is "real" (transformer models) or
    "stub" (deterministic hash models for offline development and tests)."""

    backend: str = "real"
    embed_model: str = DEFAULT_EMBED_MODEL
    nli_model: str = DEFAULT_NLI_MODEL
    fill_mask_model: str = DEFAULT_FILL_MASK_MODEL
    max_batch: int = 256
    port: int = 8321

    @classmethod
    def from_env(cls) -> "Settings":
        return cls(
            backend=os.environ.get(BACKEND_ENV, "real"),
            embed_model=os.environ.get(EMBED_MODEL_ENV, DEFAULT_EMBED_MODEL),
            nli_model=os.environ.get(NLI_MODEL_ENV, DEFAULT_NLI_MODEL),
            fill_mask_model=os.environ.get(FILL_MASK_MODEL_ENV, DEFAULT_FILL_MASK_MODEL),
            max_batch=int(os.environ.get(MAX_BATCH_ENV, "256")),
            port=int(os.environ.get(PORT_ENV, "8321")),
        )
