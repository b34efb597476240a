"""Model backends: real transformer models or deterministic stubs.

The wire prompt carries the canonical ``[MASK]`` slot; each backend maps it
to its own model's mask token. All inference runs in deterministic eval
mode and is serialized by a single lock (single-writer model execution);
request-level concurrency is handled by the HTTP layer.
"""

from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass

import numpy as np

from .config import Settings

CANONICAL_MASK = "[MASK]"


class BackendUnavailable(RuntimeError):
    """The configured model stack cannot be loaded."""


@dataclass
class Candidate:
    token: str
    score: float


class ModelBackend:
    """One object bundling the three model capabilities."""

    kind = "abstract"

    def __init__(self, settings: Settings):
        self.settings = settings
        self._lock = threading.Lock()

    def model_names(self) -> dict[str, str]:
        raise NotImplementedError

    def embed(self, texts: list[str]) -> tuple[np.ndarray, int]:
        """(unit-norm vectors in input order, truncated-text count)."""
        raise NotImplementedError

    def nli(self, pairs: list[tuple[str, str]]) -> list[tuple[float, float, float]]:
        """(contradicts, neutral, entails) per pair, in order."""
        raise NotImplementedError

    def fill_mask(self, prompt: str, k: int) -> list[Candidate]:
        """Up to k candidates, scores descending; ``prompt`` contains exactly
        one canonical mask slot."""
        raise NotImplementedError


class StubBackend(ModelBackend):
    """Deterministic hash-based stand-ins; no ML dependencies.

    Useful for offline development, wire-contract tests, and driving the
    gateway's HTTP provider in integration tests. Pure function of input.
    """

    kind = "stub"
    dim = 32

    _VOCAB = (
        "food", "fruit", "vegetable", "meat", "tool", "animal", "plant",
        "drink", "dish", "thing", "substance", "object", "category",
    )

    def model_names(self) -> dict[str, str]:
        return {"embed": "stub-embed", "nli": "stub-nli", "fill_mask": "stub-fill-mask"}

    def _digest(self, *parts: str) -> bytes:
        return hashlib.sha256("\x00".join(parts).encode("utf-8")).digest()

    def embed(self, texts: list[str]) -> tuple[np.ndarray, int]:
        with self._lock:
            vectors = np.empty((len(texts), self.dim))
            for i, text in enumerate(texts):
                seed = int.from_bytes(self._digest("embed", text)[:8], "big")
                rng = np.random.default_rng(seed)
                v = rng.standard_normal(self.dim)
                vectors[i] = v / np.linalg.norm(v)
            return vectors, 0

    def nli(self, pairs: list[tuple[str, str]]) -> list[tuple[float, float, float]]:
        with self._lock:
            out = []
            for premise, hypothesis in pairs:
                digest = self._digest("nli", premise, hypothesis)
                u = int.from_bytes(digest[:8], "big") / 2**64
                v = int.from_bytes(digest[8:16], "big") / 2**64
                lo, hi = sorted((u, v))
                out.append((lo, hi - lo, 1.0 - hi))
            return out

    def fill_mask(self, prompt: str, k: int) -> list[Candidate]:
        with self._lock:
            scored = []
            for token in self._VOCAB:
                digest = self._digest("mask", prompt, token)
                scored.append(Candidate(token, int.from_bytes(digest[:8], "big") / 2**64))
            scored.sort(key=lambda c: -c.score)
            return scored[:k]


class RealBackend(ModelBackend):
    """Pretrained transformer models, loaded lazily and run in eval mode."""

    kind = "real"

    def __init__(self, settings: Settings):
        super().__init__(settings)
        self._embedder = None
        self._nli_model = None
        self._nli_tokenizer = None
        self._fill_pipeline = None

    def model_names(self) -> dict[str, str]:
        return {
            "embed": self.settings.embed_model,
            "nli": self.settings.nli_model,
            "fill_mask": self.settings.fill_mask_model,
        }

    def _load_embedder(self):
        if self._embedder is None:
            try:
                from sentence_transformers import SentenceTransformer
            except ImportError as exc:
                raise BackendUnavailable(f"sentence-transformers not installed: {exc}") from exc
            self._embedder = SentenceTransformer(self.settings.embed_model)
            self._embedder.eval()
        return self._embedder

    def _load_nli(self):
        if self._nli_model is None:
            try:
                import torch
                from transformers import AutoModelForSequenceClassification, AutoTokenizer
            except ImportError as exc:
                raise BackendUnavailable(f"transformers/torch not installed: {exc}") from exc
            self._nli_tokenizer = AutoTokenizer.from_pretrained(self.settings.nli_model)
            self._nli_model = AutoModelForSequenceClassification.from_pretrained(self.settings.nli_model)
            self._nli_model.eval()
        return self._nli_model, self._nli_tokenizer

    def _load_fill(self):
        if self._fill_pipeline is None:
            try:
                from transformers import pipeline
            except ImportError as exc:
                raise BackendUnavailable(f"transformers not installed: {exc}") from exc
            self._fill_pipeline = pipeline("fill-mask", model=self.settings.fill_mask_model)
        return self._fill_pipeline

    def embed(self, texts: list[str]) -> tuple[np.ndarray, int]:
        model = self._load_embedder()
        with self._lock:
            vectors = model.encode(
                texts,
                normalize_embeddings=True,
                convert_to_numpy=True,
                show_progress_bar=False,
            )
            tokenizer = model.tokenizer
            limit = model.max_seq_length
            truncated = sum(
                1 for text in texts if len(tokenizer.encode(text, add_special_tokens=True)) > limit
            )
            return np.asarray(vectors, dtype=np.float64).reshape(len(texts), -1), truncated

    def nli(self, pairs: list[tuple[str, str]]) -> list[tuple[float, float, float]]:
        import torch

        model, tokenizer = self._load_nli()
        label_index = {
            label.lower(): idx for idx, label in model.config.id2label.items()
        }
        contradiction = label_index.get("contradiction", 0)
        neutral = label_index.get("neutral", 1)
        entailment = label_index.get("entailment", 2)
        out: list[tuple[float, float, float]] = []
        with self._lock, torch.no_grad():
            encoded = tokenizer(
                [p for p, _ in pairs],
                [h for _, h in pairs],
                padding=True,
                truncation=True,
                return_tensors="pt",
            )
            probabilities = torch.softmax(model(**encoded).logits, dim=-1)
            for row in probabilities:
                out.append((float(row[contradiction]), float(row[neutral]), float(row[entailment])))
        return out

    def fill_mask(self, prompt: str, k: int) -> list[Candidate]:
        pipe = self._load_fill()
        model_prompt = prompt.replace(CANONICAL_MASK, pipe.tokenizer.mask_token)
        with self._lock:
            results = pipe(model_prompt, top_k=max(k, 1))
        candidates = [Candidate(r["token_str"].strip(), float(r["score"])) for r in results]
        candidates.sort(key=lambda c: -c.score)
        return candidates[:k]


def build_backend(settings: Settings) -> ModelBackend:
    if settings.backend == "stub":
        return StubBackend(settings)
    if settings.backend == "real":
        return RealBackend(settings)
    raise BackendUnavailable(f"unknown backend {settings.backend!r} (expected 'real' or 'stub')")
