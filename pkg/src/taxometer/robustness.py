"""Reference-free robustness metrics.

CSC correlates taxonomic similarity (Wu-Palmer over root paths) with the
semantic similarity of concept representations: under the assumption that
the two increase together, a higher rank correlation means a more robust
taxonomy. The semantic-proximity baseline (SP) instead checks leaf-sibling
groups for intruders: a group is clean when its least similar internal pair
is still closer than anything outside the group.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .correlation import CorrelationResult, kendall_tau_b
from .providers import SimilarityProvider
from .taxonomy import Taxonomy
from .text import representation_text

# Above this many natural concepts the pair universe is sampled instead of
# enumerated (SemEval-Verb alone has ~9.7e7 unordered pairs).
EXHAUSTIVE_LIMIT = 2000
DEFAULT_SAMPLE_SIZE = 2_000_000


@dataclass(frozen=True)
class PairSample:
    """Unordered natural-concept pairs CSC is evaluated on."""

    pairs: tuple[tuple[str, str], ...]
    policy: str

    @classmethod
    def exhaustive(cls, taxonomy: Taxonomy) -> "PairSample":
        ids = taxonomy.concept_ids
        pairs = tuple((ids[i], ids[j]) for i in range(len(ids)) for j in range(i + 1, len(ids)))
        return cls(pairs=pairs, policy="exhaustive")

    @classmethod
    def sampled(cls, taxonomy: Taxonomy, count: int, seed: int) -> "PairSample":
        """Uniform sample of distinct unordered pairs, without replacement."""
        ids = taxonomy.concept_ids
        n = len(ids)
        total = n * (n - 1) // 2
        if count >= total:
            sample = cls.exhaustive(taxonomy)
            return cls(pairs=sample.pairs, policy=f"sampled(count={count},seed={seed})")
        rng = random.Random(seed)
        chosen: set[int] = set()
        while len(chosen) < count:
            chosen.add(rng.randrange(total))
        pairs = tuple(_unrank_pair(ids, k) for k in sorted(chosen))
        return cls(pairs=pairs, policy=f"sampled(count={count},seed={seed})")

    @classmethod
    def for_taxonomy(cls, taxonomy: Taxonomy, seed: int = 0, sample_size: int = DEFAULT_SAMPLE_SIZE) -> "PairSample":
        if len(taxonomy.concept_ids) <= EXHAUSTIVE_LIMIT:
            return cls.exhaustive(taxonomy)
        return cls.sampled(taxonomy, sample_size, seed)


def _unrank_pair(ids: Sequence[str], k: int) -> tuple[str, str]:
    """k-th unordered pair in the (i < j) enumeration order, via exact ints."""
    n = len(ids)
    # Row i starts at offset i*n - i*(i+1)/2 - i ... solve by integer sqrt.
    # Count of pairs with first index < i is: i*(2n - i - 1) / 2.
    lo, hi = 0, n - 1
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if mid * (2 * n - mid - 1) // 2 <= k:
            lo = mid
        else:
            hi = mid - 1
    i = lo
    j = i + 1 + (k - i * (2 * n - i - 1) // 2)
    return ids[i], ids[j]


def concept_texts(taxonomy: Taxonomy) -> dict[str, str]:
    """Representation text per natural concept (gloss, falling back to name)."""
    return {
        cid: representation_text(taxonomy.concepts[cid].name, taxonomy.concepts[cid].description)
        for cid in taxonomy.concept_ids
    }


def csc(
    taxonomy: Taxonomy,
    provider: SimilarityProvider,
    sample: PairSample | None = None,
    *,
    seed: int = 0,
) -> CorrelationResult:
    """Kendall tau-b between Wu-Palmer and embedding-cosine similarity.

    Raises :class:`DegenerateInputError` (propagated from the correlation
    primitive) when the similarity side is constant, e.g. under a constant
    mock provider; batch callers report that as NA.
    """
    if sample is None:
        sample = PairSample.for_taxonomy(taxonomy, seed=seed)
    texts = concept_texts(taxonomy)
    taxonomic = np.array([taxonomy.wu_palmer(a, b) for a, b in sample.pairs])
    semantic = provider.pair_similarities([(texts[a], texts[b]) for a, b in sample.pairs])
    return kendall_tau_b(taxonomic, semantic)


@dataclass(frozen=True)
class SpResult:
    """Semantic-proximity outcome: ``ratio`` is None when no group exists."""

    ratio: float | None
    groups: int

    @property
    def is_na(self) -> bool:
        return self.ratio is None


def leaf_sibling_groups(taxonomy: Taxonomy) -> list[tuple[str, tuple[str, ...]]]:
    """(parent id, members) per group of >= 2 leaves sharing that parent.

    Grouping runs over the augmented graph, so natural-root leaves form a
    group under the pseudo-root; a leaf with several parents belongs to one
    group per parent.
    """
    by_parent: dict[str, list[str]] = {}
    for leaf in taxonomy.leaves:
        for parent in taxonomy.parents(leaf):
            by_parent.setdefault(parent, []).append(leaf)
    return [
        (parent, tuple(sorted(members)))
        for parent, members in sorted(by_parent.items())
        if len(members) >= 2
    ]


def semantic_proximity(taxonomy: Taxonomy, provider: SimilarityProvider) -> SpResult:
    """Rate of intruder-free leaf-sibling groups.

    A group is intruder-free when its minimum intra-group similarity is
    strictly greater than the minimum similarity from any member to any
    natural concept outside the group. Returns an NA result when the
    taxonomy has no leaf-sibling group of size >= 2.
    """
    groups = leaf_sibling_groups(taxonomy)
    if not groups:
        return SpResult(ratio=None, groups=0)

    texts = concept_texts(taxonomy)
    all_ids = taxonomy.concept_ids
    all_texts = [texts[cid] for cid in all_ids]
    column = {cid: i for i, cid in enumerate(all_ids)}

    clean = 0
    for _, members in groups:
        member_texts = [texts[m] for m in members]
        sims = provider.cross_similarities(member_texts, all_texts)
        member_cols = [column[m] for m in members]

        intra = sims[:, member_cols]
        mask = ~np.eye(len(members), dtype=bool)
        intra_min = float(np.min(intra[mask]))

        outside = np.ones(len(all_ids), dtype=bool)
        outside[member_cols] = False
        if not outside.any():
            # Every natural concept is in the group; no external similarity exists.
            continue
        external_min = float(np.min(sims[:, outside]))

        if intra_min > external_min:
            clean += 1
    return SpResult(ratio=clean / len(groups), groups=len(groups))
