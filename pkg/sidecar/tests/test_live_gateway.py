"""The taxometer gateway's http providers against a live sidecar.

Runs the same provider property suite against the mock providers and the
http providers backed by a real uvicorn server (stub models), so the two
backends are interchangeable wherever a provider is consumed.
"""

from __future__ import annotations

import socket
import threading
import time

import numpy as np
import pytest

taxometer = pytest.importorskip("taxometer", reason="primary package not installed")
uvicorn = pytest.importorskip("uvicorn")

from taxometer import MockNLIProvider, MockSimilarityProvider  # noqa: E402
from taxometer.providers import (  # noqa: E402
    HttpFillMaskProvider,
    HttpNLIProvider,
    HttpSimilarityProvider,
    MockFillMaskProvider,
)

from taxometer_sidecar import Settings, create_app  # noqa: E402


@pytest.fixture(scope="module")
def sidecar_url():
    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]
    config = uvicorn.Config(
        create_app(Settings(backend="stub")),
        host="127.0.0.1",
        port=port,
        log_level="warning",
    )
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 15
    import requests

    url = f"http://127.0.0.1:{port}"
    while time.time() < deadline:
        try:
            if requests.get(f"{url}/v1/health", timeout=1).status_code == 200:
                break
        except Exception:
            time.sleep(0.05)
    else:
        pytest.fail("sidecar did not come up")
    yield url
    server.should_exit = True
    thread.join(timeout=5)


def similarity_provider_properties(provider):
    """Contract every similarity provider must satisfy."""
    texts = ["an apple", "a pear", "a hammer", "an apple"]
    vectors = provider.embed(texts)
    assert vectors.shape[0] == 4
    # unit norm
    norms = np.linalg.norm(vectors, axis=1)
    assert np.allclose(norms, 1.0, atol=1e-6)
    # determinism and order preservation
    again = provider.embed(texts)
    assert np.allclose(vectors, again, atol=0)
    assert np.allclose(vectors[0], vectors[3], atol=0)
    # self-cosine is 1
    sims = provider.pair_similarities([("a thing", "a thing")])
    assert sims[0] == pytest.approx(1.0, abs=1e-6)
    # cross-similarity block agrees with pairwise scores
    cross = provider.cross_similarities(["an apple"], ["a pear"])
    pair = provider.pair_similarities([("an apple", "a pear")])
    assert cross[0, 0] == pytest.approx(pair[0], abs=1e-9)
    # fingerprint is stable and non-empty
    assert provider.fingerprint and provider.fingerprint == provider.fingerprint


def nli_provider_properties(provider):
    pairs = [("water is wet", "fire is a kind of water"), ("a hammer drives nails", "a hammer is a kind of tool")]
    judgments = provider.judge_batch(pairs)
    assert len(judgments) == 2
    for j in judgments:
        total = j.p_contradicts + j.p_neutral + j.p_entails
        assert abs(total - 1.0) <= 1e-4
    # cache: identical query returns the identical object/values
    again = provider.judge(*pairs[0])
    assert again == judgments[0]


def fill_mask_provider_properties(provider):
    candidates = provider.fill_mask("an apple is a kind of [MASK].", 5)
    assert 0 < len(candidates) <= 5
    scores = [c.score for c in candidates]
    assert scores == sorted(scores, reverse=True)
    assert len({c.token.lower() for c in candidates}) == len(candidates)
    from taxometer.errors import NoMaskError

    with pytest.raises(NoMaskError):
        provider.fill_mask("no mask", 3)


class TestMockProvidersSatisfyProperties:
    def test_similarity(self):
        similarity_provider_properties(MockSimilarityProvider(seed=5))

    def test_nli(self):
        nli_provider_properties(MockNLIProvider.hashed(seed=5))

    def test_fill_mask(self):
        fill_mask_provider_properties(
            MockFillMaskProvider({"food": 0.9, "tool": 0.5, "fruit": 0.7})
        )


class TestHttpProvidersAgainstLiveSidecar:
    def test_similarity(self, sidecar_url):
        similarity_provider_properties(HttpSimilarityProvider(sidecar_url))

    def test_nli(self, sidecar_url):
        nli_provider_properties(HttpNLIProvider(sidecar_url))

    def test_fill_mask(self, sidecar_url):
        fill_mask_provider_properties(HttpFillMaskProvider(sidecar_url))

    def test_fingerprint_identifies_models(self, sidecar_url):
        provider = HttpSimilarityProvider(sidecar_url)
        assert provider.fingerprint.startswith("http-similarity:")

    def test_csc_runs_over_http(self, sidecar_url):
        from taxometer import Concept, Taxonomy, csc

        t = Taxonomy.build(
            [Concept(f"c{i}", f"concept {i}", f"gloss {i}") for i in range(8)],
            [("c0", f"c{i}") for i in range(1, 4)] + [("c1", f"c{i}") for i in range(4, 8)],
        )
        result = csc(t, HttpSimilarityProvider(sidecar_url))
        assert -1.0 <= result.tau <= 1.0

    def test_nliv_runs_over_http(self, sidecar_url):
        from taxometer import Concept, Taxonomy, nliv

        t = Taxonomy.build(
            [Concept(f"c{i}", f"concept {i}", f"gloss {i}") for i in range(6)],
            [("c0", "c1"), ("c1", "c2"), ("c0", "c3"), ("c3", "c4"), ("c3", "c5")],
        )
        result = nliv(t, HttpNLIProvider(sidecar_url), "weak")
        assert 0.0 <= result.score <= 1.0
        assert result.scored_edges == 5
