"""Run the sidecar with uvicorn: ``python -m taxometer_sidecar``."""

from __future__ import annotations

import argparse

import uvicorn

from .app import create_app
from .config import Settings


def main() -> None:
    settings = Settings.from_env()
    parser = argparse.ArgumentParser(
        prog="taxometer-sidecar",
        description="Inference sidecar serving /v1/embed, /v1/nli, /v1/fill_mask, /v1/health.",
    )
    parser.add_argument("--host", default="0.0.0.0")
    parser.add_argument("--port", type=int, default=settings.port)
    parser.add_argument(
        "--backend",
        choices=("real", "stub"),
        default=settings.backend,
        help="model backend (default from TAXOMETER_SIDECAR_BACKEND)",
    )
    args = parser.parse_args()
    settings = Settings(
        backend=args.backend,
        embed_model=settings.embed_model,
        nli_model=settings.nli_model,
        fill_mask_model=settings.fill_mask_model,
        max_batch=settings.max_batch,
        port=args.port,
    )
    uvicorn.run(create_app(settings), host=args.host, port=args.port)


if __name__ == "__main__":
    main()
