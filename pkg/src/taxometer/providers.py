"""Uniform access to the semantic models behind three interchangeable backends.

Every provider family (sentence similarity, NLI classification, fill-mask)
comes in three flavors sharing one interface:

* ``mock`` -- deterministic, dependency-free; embeddings are seeded hashes
  of the text, NLI judgments and mask candidates can be scripted. The mock
  is a pure function of (seed, input) and grounds the whole test suite.
* ``files`` -- precomputed score stores on disk for offline runs.
* ``http`` -- client for the inference sidecar's wire contract.

Results are cached per provider fingerprint, so switching models never
reuses stale scores. Caches are lock-guarded; providers tolerate concurrent
read access.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import (
    BackendUnavailableError,
    MalformedResponseError,
    MissingEmbeddingError,
    MissingJudgmentError,
    MissingPromptError,
    NoMaskError,
)

MASK_TOKEN = "[MASK]"

SIDECAR_URL_ENV = "TAXOMETER_SIDECAR_URL"
CACHE_DIR_ENV = "TAXOMETER_CACHE_DIR"

DEFAULT_EMBED_BATCH = 64
DEFAULT_NLI_BATCH = 32


@dataclass(frozen=True)
class RelationJudgment:
    """NLI probability triple for one premise/hypothesis pair."""

    p_contradicts: float
    p_neutral: float
    p_entails: float

    def __post_init__(self) -> None:
        probs = (self.p_contradicts, self.p_neutral, self.p_entails)
        if any(p < 0.0 or p > 1.0 for p in probs):
            raise ValueError(f"probabilities outside [0, 1]: {probs}")
        if abs(sum(probs) - 1.0) > 1e-4:
            raise ValueError(f"probabilities sum to {sum(probs)!r}, expected 1 +- 1e-4")


@dataclass(frozen=True)
class MaskCandidate:
    token: str
    score: float


def text_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


# -- similarity ----------------------------------------------------------------


class SimilarityProvider:
    """Sentence embeddings plus cosine similarities derived from them."""

    fingerprint: str = "similarity"

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        """One L2-normalized vector per text, in input order."""
        raise NotImplementedError

    def pair_similarities(self, pairs: Sequence[tuple[str, str]]) -> np.ndarray:
        """Cosine similarity per (text_a, text_b) pair."""
        if not pairs:
            return np.zeros(0)
        unique = sorted({t for pair in pairs for t in pair})
        vectors = dict(zip(unique, self.embed(unique)))
        return np.array([float(np.dot(vectors[a], vectors[b])) for a, b in pairs])

    def cross_similarities(self, texts_a: Sequence[str], texts_b: Sequence[str]) -> np.ndarray:
        """Cosine similarity matrix of shape (len(texts_a), len(texts_b))."""
        if not texts_a or not texts_b:
            return np.zeros((len(texts_a), len(texts_b)))
        unique = sorted(set(texts_a) | set(texts_b))
        matrix = self.embed(unique)
        index = {t: i for i, t in enumerate(unique)}
        rows = matrix[[index[t] for t in texts_a]]
        cols = matrix[[index[t] for t in texts_b]]
        return rows @ cols.T


class MockSimilarityProvider(SimilarityProvider):
    """Deterministic hash embeddings, optionally overridden pair scores.

    ``override(text_a, text_b)`` may return a similarity to use instead of
    the hash-embedding cosine, or None to fall back. Tests use overrides to
    build adversarial or idealized similarity structures (e.g. cosine equal
    to taxonomic similarity) without any model weights.
    """

    def __init__(
        self,
        seed: int = 0,
        dim: int = 64,
        override: Callable[[str, str], float | None] | None = None,
    ):
        self.seed = seed
        self.dim = dim
        self.override = override
        self.fingerprint = f"mock-similarity:seed={seed}:dim={dim}"
        if override is not None:
            self.fingerprint += ":overridden"
        self._cache: dict[str, np.ndarray] = {}
        self._lock = threading.Lock()

    def _vector(self, text: str) -> np.ndarray:
        with self._lock:
            cached = self._cache.get(text)
        if cached is not None:
            return cached
        digest = hashlib.sha256(f"{self.seed}\x00{text}".encode("utf-8")).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "big"))
        vector = rng.standard_normal(self.dim)
        vector /= np.linalg.norm(vector)
        with self._lock:
            self._cache[text] = vector
        return vector

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        return np.array([self._vector(t) for t in texts]).reshape(len(texts), self.dim)

    def _pair(self, a: str, b: str) -> float:
        if self.override is not None:
            value = self.override(a, b)
            if value is not None:
                return float(value)
        return float(np.dot(self._vector(a), self._vector(b)))

    def pair_similarities(self, pairs: Sequence[tuple[str, str]]) -> np.ndarray:
        if self.override is None:
            return super().pair_similarities(pairs)
        return np.array([self._pair(a, b) for a, b in pairs])

    def cross_similarities(self, texts_a: Sequence[str], texts_b: Sequence[str]) -> np.ndarray:
        if self.override is None:
            return super().cross_similarities(texts_a, texts_b)
        out = np.empty((len(texts_a), len(texts_b)))
        for i, a in enumerate(texts_a):
            for j, b in enumerate(texts_b):
                out[i, j] = self._pair(a, b)
        return out


class FilesSimilarityProvider(SimilarityProvider):
    """Embeddings from a line-delimited JSON store of {text_hash, text, vector}.

    Vectors are returned exactly as stored (no re-normalization), so an
    exported store reloads bitwise-equal.
    """

    def __init__(self, store: str | Path):
        self.store_path = Path(store)
        if not self.store_path.exists():
            raise BackendUnavailableError(f"embedding store not found: {self.store_path}")
        self._vectors: dict[str, np.ndarray] = {}
        raw = self.store_path.read_bytes()
        for lineno, line in enumerate(raw.decode("utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                self._vectors[record["text"]] = np.asarray(record["vector"], dtype=np.float64)
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise MalformedResponseError(f"{self.store_path}:{lineno}: {exc}") from exc
        self.fingerprint = f"files-similarity:{hashlib.sha256(raw).hexdigest()[:16]}"

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        vectors = []
        for text in texts:
            vector = self._vectors.get(text)
            if vector is None:
                raise MissingEmbeddingError(f"no stored embedding for text: {text!r}")
            vectors.append(vector)
        if not vectors:
            return np.zeros((0, 0))
        return np.array(vectors)


def export_embedding_store(provider: SimilarityProvider, texts: Iterable[str], target: str | Path) -> int:
    """Embed ``texts`` and write the store format FilesSimilarityProvider reads."""
    unique = sorted(set(texts))
    vectors = provider.embed(unique)
    with open(target, "w", encoding="utf-8") as fh:
        for text, vector in zip(unique, vectors):
            fh.write(
                json.dumps(
                    {"text_hash": text_hash(text), "text": text, "vector": [float(v) for v in vector]},
                    ensure_ascii=False,
                )
                + "\n"
            )
    return len(unique)


# -- NLI -------------------------------------------------------------------


class NLIProvider:
    """Premise/hypothesis classification into (contradicts, neutral, entails).

    ``judge`` results are cached by (premise, hypothesis) under the provider
    fingerprint; repeated identical queries hit the backend once. Concurrent
    callers asking for the same pair are deduplicated in flight: the second
    caller waits for the first instead of re-querying the backend.
    """

    fingerprint: str = "nli"

    def __init__(self) -> None:
        self._cache: dict[tuple[str, str], RelationJudgment] = {}
        self._pending: set[tuple[str, str]] = set()
        self._cond = threading.Condition()

    def judge(self, premise: str, hypothesis: str) -> RelationJudgment:
        return self.judge_batch([(premise, hypothesis)])[0]

    def judge_batch(self, pairs: Sequence[tuple[str, str]]) -> list[RelationJudgment]:
        for premise, hypothesis in pairs:
            if not premise or not hypothesis:
                raise ValueError("premise and hypothesis must be non-empty strings")
        remaining = list(dict.fromkeys(pairs))
        while remaining:
            to_compute: list[tuple[str, str]] = []
            with self._cond:
                still_waiting = []
                for pair in remaining:
                    if pair in self._cache:
                        continue
                    if pair in self._pending:
                        still_waiting.append(pair)
                    else:
                        self._pending.add(pair)
                        to_compute.append(pair)
                remaining = still_waiting
            if to_compute:
                try:
                    judged = self._judge_uncached(to_compute)
                    if len(judged) != len(to_compute):
                        raise MalformedResponseError(
                            f"backend returned {len(judged)} judgments for {len(to_compute)} pairs"
                        )
                except BaseException:
                    with self._cond:
                        self._pending.difference_update(to_compute)
                        self._cond.notify_all()
                    raise
                with self._cond:
                    self._cache.update(zip(to_compute, judged))
                    self._pending.difference_update(to_compute)
                    self._cond.notify_all()
            if remaining:
                with self._cond:
                    while any(pair in self._pending for pair in remaining):
                        self._cond.wait()
                # Loop again: waited-on pairs are now cached, or failed in the
                # other caller and must be claimed by this one.
        with self._cond:
            return [self._cache[p] for p in pairs]

    def _judge_uncached(self, pairs: Sequence[tuple[str, str]]) -> list[RelationJudgment]:
        raise NotImplementedError


UNIFORM_JUDGMENT = RelationJudgment(1 / 3, 1 / 3, 1 / 3)


class MockNLIProvider(NLIProvider):
    """Scripted judgments; unscripted pairs fall back to the uniform triple.

    ``table`` maps (premise, hypothesis) to a (contradicts, neutral,
    entails) triple; ``fn`` may compute one dynamically. ``backend_calls``
    counts pairs that actually reached the (fake) backend, for cache tests.
    """

    def __init__(
        self,
        table: dict[tuple[str, str], tuple[float, float, float]] | None = None,
        fn: Callable[[str, str], tuple[float, float, float] | None] | None = None,
        default: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3),
    ):
        super().__init__()
        self.table = dict(table or {})
        self.fn = fn
        self.default = default
        self.backend_calls = 0
        fingerprint_src = json.dumps(sorted((k, v) for k, v in self.table.items()), default=str)
        self.fingerprint = "mock-nli:" + hashlib.sha256(fingerprint_src.encode()).hexdigest()[:16]
        if fn is not None:
            self.fingerprint += ":fn"

    def _judge_uncached(self, pairs: Sequence[tuple[str, str]]) -> list[RelationJudgment]:
        out = []
        for premise, hypothesis in pairs:
            self.backend_calls += 1
            triple = self.table.get((premise, hypothesis))
            if triple is None and self.fn is not None:
                triple = self.fn(premise, hypothesis)
            if triple is None:
                triple = self.default
            out.append(RelationJudgment(*triple))
        return out

    @classmethod
    def hashed(cls, seed: int = 0) -> "MockNLIProvider":
        """Pseudo-random but fully deterministic judgments varying per pair.

        Derived from a sha256 of (seed, premise, hypothesis), so results are
        reproducible across processes; useful wherever a constant mock would
        make downstream correlations degenerate.
        """

        def fn(premise: str, hypothesis: str) -> tuple[float, float, float]:
            digest = hashlib.sha256(f"{seed}\x00{premise}\x00{hypothesis}".encode("utf-8")).digest()
            u = int.from_bytes(digest[:8], "big") / 2**64
            v = int.from_bytes(digest[8:16], "big") / 2**64
            lo, hi = sorted((u, v))
            return (lo, hi - lo, 1.0 - hi)

        provider = cls(fn=fn)
        provider.fingerprint = f"mock-nli-hashed:seed={seed}"
        return provider


class FilesNLIProvider(NLIProvider):
    """Judgments from a JSONL store of {premise, hypothesis, contradicts, neutral, entails}."""

    def __init__(self, store: str | Path):
        super().__init__()
        self.store_path = Path(store)
        if not self.store_path.exists():
            raise BackendUnavailableError(f"NLI store not found: {self.store_path}")
        raw = self.store_path.read_bytes()
        self._table: dict[tuple[str, str], RelationJudgment] = {}
        for lineno, line in enumerate(raw.decode("utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                key = (record["premise"], record["hypothesis"])
                self._table[key] = RelationJudgment(
                    record["contradicts"], record["neutral"], record["entails"]
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise MalformedResponseError(f"{self.store_path}:{lineno}: {exc}") from exc
        self.fingerprint = f"files-nli:{hashlib.sha256(raw).hexdigest()[:16]}"

    def _judge_uncached(self, pairs: Sequence[tuple[str, str]]) -> list[RelationJudgment]:
        out = []
        for pair in pairs:
            judgment = self._table.get(pair)
            if judgment is None:
                raise MissingJudgmentError(f"no stored judgment for pair: {pair!r}")
            out.append(judgment)
        return out


def export_nli_store(provider: NLIProvider, pairs: Iterable[tuple[str, str]], target: str | Path) -> int:
    """Judge ``pairs`` and write the store format FilesNLIProvider reads."""
    unique = sorted(set(pairs))
    judgments = provider.judge_batch(unique)
    with open(target, "w", encoding="utf-8") as fh:
        for (premise, hypothesis), j in zip(unique, judgments):
            fh.write(
                json.dumps(
                    {
                        "premise": premise,
                        "hypothesis": hypothesis,
                        "contradicts": j.p_contradicts,
                        "neutral": j.p_neutral,
                        "entails": j.p_entails,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
    return len(unique)


# -- fill-mask ----------------------------------------------------------------


class FillMaskProvider:
    """Top-k candidate tokens for a single-mask prompt."""

    fingerprint: str = "fill-mask"

    def fill_mask(self, prompt: str, k: int) -> list[MaskCandidate]:
        if prompt.count(MASK_TOKEN) != 1:
            raise NoMaskError(f"prompt must contain exactly one {MASK_TOKEN}: {prompt!r}")
        if k <= 0:
            return []
        candidates = self._fill_uncached(prompt, k)
        # Dedupe after lowercasing, keep best (first) score, descending order.
        seen: dict[str, MaskCandidate] = {}
        for cand in sorted(candidates, key=lambda c: -c.score):
            key = cand.token.lower()
            if key not in seen:
                seen[key] = cand
        return list(seen.values())[:k]

    def _fill_uncached(self, prompt: str, k: int) -> list[MaskCandidate]:
        raise NotImplementedError


class MockFillMaskProvider(FillMaskProvider):
    """Candidates from a fixed vocabulary or a per-prompt function."""

    def __init__(
        self,
        vocabulary: dict[str, float] | None = None,
        fn: Callable[[str], dict[str, float]] | None = None,
    ):
        self.vocabulary = dict(vocabulary or {})
        self.fn = fn
        src = json.dumps(sorted(self.vocabulary.items()))
        self.fingerprint = "mock-fill-mask:" + hashlib.sha256(src.encode()).hexdigest()[:16]
        if fn is not None:
            self.fingerprint += ":fn"

    def _fill_uncached(self, prompt: str, k: int) -> list[MaskCandidate]:
        vocab = self.fn(prompt) if self.fn is not None else self.vocabulary
        ranked = sorted(vocab.items(), key=lambda kv: (-kv[1], kv[0]))
        return [MaskCandidate(token, float(score)) for token, score in ranked]


class FilesFillMaskProvider(FillMaskProvider):
    """Candidates from a JSONL store of {prompt, candidates: [{token, score}]}."""

    def __init__(self, store: str | Path):
        self.store_path = Path(store)
        if not self.store_path.exists():
            raise BackendUnavailableError(f"fill-mask store not found: {self.store_path}")
        raw = self.store_path.read_bytes()
        self._table: dict[str, list[MaskCandidate]] = {}
        for lineno, line in enumerate(raw.decode("utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                self._table[record["prompt"]] = [
                    MaskCandidate(c["token"], float(c["score"])) for c in record["candidates"]
                ]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise MalformedResponseError(f"{self.store_path}:{lineno}: {exc}") from exc
        self.fingerprint = f"files-fill-mask:{hashlib.sha256(raw).hexdigest()[:16]}"

    def _fill_uncached(self, prompt: str, k: int) -> list[MaskCandidate]:
        candidates = self._table.get(prompt)
        if candidates is None:
            raise MissingPromptError(f"no stored candidates for prompt: {prompt!r}")
        return candidates


# -- HTTP backends (sidecar clients) ----------------------------------------


class _HttpClient:
    """Shared POST-with-retry plumbing for the sidecar wire contract."""

    def __init__(self, endpoint: str | None = None, retries: int = 3, backoff: float = 0.5, timeout: float = 60.0):
        endpoint = endpoint or os.environ.get(SIDECAR_URL_ENV)
        if not endpoint:
            raise BackendUnavailableError(
                f"no sidecar endpoint configured (pass endpoint= or set {SIDECAR_URL_ENV})"
            )
        self.endpoint = endpoint.rstrip("/")
        self.retries = retries
        self.backoff = backoff
        self.timeout = timeout
        self._session = None
        self._health: dict | None = None

    def _request(self, method: str, path: str, payload: dict | None = None) -> dict:
        import requests

        if self._session is None:
            self._session = requests.Session()
        url = f"{self.endpoint}{path}"
        last_error: Exception | None = None
        for attempt in range(self.retries):
            try:
                if method == "GET":
                    response = self._session.get(url, timeout=self.timeout)
                else:
                    response = self._session.post(url, json=payload, timeout=self.timeout)
                if response.status_code >= 500 or response.status_code == 503:
                    last_error = BackendUnavailableError(f"{url} -> {response.status_code}")
                elif response.status_code >= 400:
                    raise MalformedResponseError(f"{url} -> {response.status_code}: {response.text[:200]}")
                else:
                    try:
                        return response.json()
                    except ValueError as exc:
                        raise MalformedResponseError(f"{url}: non-JSON response") from exc
            except MalformedResponseError:
                raise
            except Exception as exc:  # connection errors, timeouts, 5xx
                last_error = exc
            if attempt + 1 < self.retries:
                time.sleep(self.backoff * (2**attempt))
        raise BackendUnavailableError(f"{url} unreachable after {self.retries} attempts: {last_error}")

    def health_fingerprint(self) -> str:
        if self._health is None:
            self._health = self._request("GET", "/v1/health")
        src = json.dumps(self._health.get("models", {}), sort_keys=True) + json.dumps(
            self._health.get("versions", {}), sort_keys=True
        )
        return hashlib.sha256(src.encode()).hexdigest()[:16]


class HttpSimilarityProvider(SimilarityProvider):
    """Embedding client for the sidecar's POST /v1/embed."""

    def __init__(self, endpoint: str | None = None, batch_size: int = DEFAULT_EMBED_BATCH, **kwargs):
        self._client = _HttpClient(endpoint, **kwargs)
        self.batch_size = batch_size
        self._fingerprint: str | None = None

    @property
    def fingerprint(self) -> str:
        if self._fingerprint is None:
            self._fingerprint = f"http-similarity:{self._client.health_fingerprint()}"
        return self._fingerprint

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        vectors: list[list[float]] = []
        for start in range(0, len(texts), self.batch_size):
            batch = list(texts[start : start + self.batch_size])
            body = self._client._request("POST", "/v1/embed", {"texts": batch})
            got = body.get("vectors")
            if not isinstance(got, list) or len(got) != len(batch):
                raise MalformedResponseError(
                    f"/v1/embed returned {len(got) if isinstance(got, list) else type(got)} vectors for {len(batch)} texts"
                )
            vectors.extend(got)
        if not vectors:
            return np.zeros((0, 0))
        return np.asarray(vectors, dtype=np.float64)


class HttpNLIProvider(NLIProvider):
    """NLI client for the sidecar's POST /v1/nli."""

    def __init__(self, endpoint: str | None = None, batch_size: int = DEFAULT_NLI_BATCH, **kwargs):
        super().__init__()
        self._client = _HttpClient(endpoint, **kwargs)
        self.batch_size = batch_size
        self._fingerprint: str | None = None

    @property
    def fingerprint(self) -> str:
        if self._fingerprint is None:
            self._fingerprint = f"http-nli:{self._client.health_fingerprint()}"
        return self._fingerprint

    def _judge_uncached(self, pairs: Sequence[tuple[str, str]]) -> list[RelationJudgment]:
        judgments: list[RelationJudgment] = []
        for start in range(0, len(pairs), self.batch_size):
            batch = pairs[start : start + self.batch_size]
            body = self._client._request(
                "POST",
                "/v1/nli",
                {"pairs": [{"premise": p, "hypothesis": h} for p, h in batch]},
            )
            got = body.get("judgments")
            if not isinstance(got, list) or len(got) != len(batch):
                raise MalformedResponseError(
                    f"/v1/nli returned {len(got) if isinstance(got, list) else type(got)} judgments for {len(batch)} pairs"
                )
            for item in got:
                try:
                    judgments.append(
                        RelationJudgment(item["contradicts"], item["neutral"], item["entails"])
                    )
                except (KeyError, TypeError, ValueError) as exc:
                    raise MalformedResponseError(f"/v1/nli judgment malformed: {item!r}") from exc
        return judgments


class HttpFillMaskProvider(FillMaskProvider):
    """Fill-mask client for the sidecar's POST /v1/fill_mask."""

    def __init__(self, endpoint: str | None = None, **kwargs):
        self._client = _HttpClient(endpoint, **kwargs)
        self._fingerprint: str | None = None

    @property
    def fingerprint(self) -> str:
        if self._fingerprint is None:
            self._fingerprint = f"http-fill-mask:{self._client.health_fingerprint()}"
        return self._fingerprint

    def _fill_uncached(self, prompt: str, k: int) -> list[MaskCandidate]:
        body = self._client._request("POST", "/v1/fill_mask", {"prompt": prompt, "k": k})
        got = body.get("candidates")
        if not isinstance(got, list):
            raise MalformedResponseError("/v1/fill_mask returned no candidate list")
        try:
            return [MaskCandidate(c["token"], float(c["score"])) for c in got]
        except (KeyError, TypeError) as exc:
            raise MalformedResponseError(f"/v1/fill_mask candidates malformed: {got!r}") from exc


# -- CLI/config helpers --------------------------------------------------------


def build_similarity_provider(spec: dict) -> SimilarityProvider:
    """Build from a config mapping like {"backend": "mock", "seed": 7}."""
    backend = spec.get("backend", "mock")
    if backend == "mock":
        return MockSimilarityProvider(seed=int(spec.get("seed", 0)), dim=int(spec.get("dim", 64)))
    if backend == "files":
        return FilesSimilarityProvider(spec["store"])
    if backend == "http":
        return HttpSimilarityProvider(spec.get("endpoint"))
    raise BackendUnavailableError(f"unknown similarity backend {backend!r}")


def build_nli_provider(spec: dict) -> NLIProvider:
    backend = spec.get("backend", "mock")
    if backend == "mock":
        if spec.get("variant") == "hashed":
            return MockNLIProvider.hashed(seed=int(spec.get("seed", 0)))
        return MockNLIProvider(default=tuple(spec.get("default", (1 / 3, 1 / 3, 1 / 3))))
    if backend == "files":
        return FilesNLIProvider(spec["store"])
    if backend == "http":
        return HttpNLIProvider(spec.get("endpoint"))
    raise BackendUnavailableError(f"unknown NLI backend {backend!r}")


def build_fill_mask_provider(spec: dict) -> FillMaskProvider | None:
    backend = spec.get("backend")
    if backend is None or backend == "none":
        return None
    if backend == "mock":
        return MockFillMaskProvider(vocabulary=spec.get("vocabulary", {}))
    if backend == "files":
        return FilesFillMaskProvider(spec["store"])
    if backend == "http":
        return HttpFillMaskProvider(spec.get("endpoint"))
    raise BackendUnavailableError(f"unknown fill-mask backend {backend!r}")
