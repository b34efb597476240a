"""Logical adequacy scoring (NLIV) via natural language inference.

Every natural edge is turned into a premise/hypothesis pair: the child's
gloss must entail (strong) or at least not contradict (weak) the hypothesis
"<child> is a kind of <parent>". A classification is a root walk to a
concept; its adequacy is the product of per-edge probabilities, normalized
by the geometric mean so deeper concepts are not penalized for depth alone.
The taxonomy score averages the normalized probability over all scored
concepts, treating the classification distribution as uniform.
"""

from __future__ import annotations

import json
import math
import os
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Sequence

from .errors import EmptyClassificationError, PseudoConceptError
from .providers import CACHE_DIR_ENV, NLIProvider, RelationJudgment
from .taxonomy import PSEUDO_ROOT_ID, Concept, Taxonomy
from .text import lemma

Mode = Literal["strong", "weak"]

STRONG: Mode = "strong"
WEAK: Mode = "weak"


@dataclass(frozen=True)
class RelationPrompt:
    """NLI inputs for one parent-child edge."""

    premise: str
    hypothesis: str
    parent_id: str
    child_id: str


def relation_prompt(parent: Concept, child: Concept) -> RelationPrompt:
    """Premise/hypothesis pair for an edge.

    The premise is the child's gloss; a concept without a gloss falls back
    to the tautological name sentence "<lemma> is a <lemma>" so the edge
    stays scorable. The hypothesis always has the shape
    "<child-lemma> is a kind of <parent-lemma>".
    """
    if parent.is_pseudo or child.is_pseudo:
        raise PseudoConceptError("pseudo nodes cannot appear in relation prompts")
    child_lemma = lemma(child.name)
    parent_lemma = lemma(parent.name)
    if child.description and child.description.strip():
        premise = child.description
    else:
        premise = f"{child_lemma} is a {child_lemma}"
    hypothesis = f"{child_lemma} is a kind of {parent_lemma}"
    return RelationPrompt(premise=premise, hypothesis=hypothesis, parent_id=parent.id, child_id=child.id)


def relation_probability(judgment: RelationJudgment, mode: Mode) -> float:
    """Adequacy probability of one relation: entailment (strong) or
    non-contradiction (weak)."""
    if mode == STRONG:
        return judgment.p_entails
    if mode == WEAK:
        return 1.0 - judgment.p_contradicts
    raise ValueError(f"unknown mode {mode!r} (expected 'strong' or 'weak')")


def classification_probability(probs: Sequence[float]) -> tuple[float, float]:
    """(joint, normalized) adequacy probability of one classification.

    The joint probability is the product of the per-edge probabilities; the
    normalized form is its k-th root. Accumulated in log space so deep
    paths do not underflow; an exact zero short-circuits to zero.
    """
    k = len(probs)
    if k == 0:
        raise EmptyClassificationError("classification has no scored edges")
    log_sum = 0.0
    for p in probs:
        if p < 0.0 or p > 1.0:
            raise ValueError(f"edge probability outside [0, 1]: {p!r}")
        if p == 0.0:
            return 0.0, 0.0
        log_sum += math.log(p)
    return math.exp(log_sum), math.exp(log_sum / k)


def perplexity(probs: Sequence[float]) -> float:
    """Reciprocal geometric mean of a probability sequence.

    Always >= 1; a zero probability yields the +inf sentinel (infinitely
    surprising sequence).
    """
    if not probs:
        raise EmptyClassificationError("perplexity of an empty sequence is undefined")
    log_sum = 0.0
    for p in probs:
        if p < 0.0 or p > 1.0:
            raise ValueError(f"probability outside [0, 1]: {p!r}")
        if p == 0.0:
            return math.inf
        log_sum += math.log(p)
    return math.exp(-log_sum / len(probs))


class JudgmentCache:
    """Append-only disk cache of per-edge NLI judgments.

    One line-delimited JSON record per (parent_id, child_id, provider
    fingerprint); the full probability triple is stored, so both the strong
    and the weak adequacy reading are served by one record. Safe for
    concurrent insert/read within a process.
    """

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self._table: dict[tuple[str, str, str], RelationJudgment] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                    key = (record["parent_id"], record["child_id"], record["provider_fingerprint"])
                    self._table[key] = RelationJudgment(
                        record["p_contradicts"], record["p_neutral"], record["p_entails"]
                    )
                except (json.JSONDecodeError, KeyError, TypeError, ValueError):
                    continue  # tolerate a torn final line from a killed run

    @classmethod
    def from_env(cls, filename: str = "nli_judgments.jsonl") -> "JudgmentCache":
        """Disk-backed cache under $TAXOMETER_CACHE_DIR, else memory-only."""
        cache_dir = os.environ.get(CACHE_DIR_ENV)
        if not cache_dir:
            return cls(None)
        directory = Path(cache_dir)
        directory.mkdir(parents=True, exist_ok=True)
        return cls(directory / filename)

    def __len__(self) -> int:
        return len(self._table)

    def get(self, parent_id: str, child_id: str, fingerprint: str) -> RelationJudgment | None:
        with self._lock:
            return self._table.get((parent_id, child_id, fingerprint))

    def put(self, parent_id: str, child_id: str, fingerprint: str, judgment: RelationJudgment) -> None:
        key = (parent_id, child_id, fingerprint)
        with self._lock:
            if key in self._table:
                return
            self._table[key] = judgment
            if self.path is not None:
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(
                        json.dumps(
                            {
                                "parent_id": parent_id,
                                "child_id": child_id,
                                "p_contradicts": judgment.p_contradicts,
                                "p_neutral": judgment.p_neutral,
                                "p_entails": judgment.p_entails,
                                "provider_fingerprint": fingerprint,
                            },
                            ensure_ascii=False,
                        )
                        + "\n"
                    )
                    fh.flush()


@dataclass(frozen=True)
class NlivResult:
    """Taxonomy-level adequacy score with scoring diagnostics."""

    score: float
    scored_concepts: int
    scored_edges: int
    cache_hits: int


def edge_judgments(
    taxonomy: Taxonomy,
    provider: NLIProvider,
    cache: JudgmentCache | None = None,
) -> tuple[dict[tuple[str, str], RelationJudgment], int]:
    """Judgment per natural edge, deduplicated; returns (judgments, cache hits)."""
    edges = taxonomy.natural_edges()
    judgments: dict[tuple[str, str], RelationJudgment] = {}
    misses: list[tuple[str, str]] = []
    hits = 0
    for parent_id, child_id in edges:
        cached = cache.get(parent_id, child_id, provider.fingerprint) if cache else None
        if cached is not None:
            judgments[(parent_id, child_id)] = cached
            hits += 1
        else:
            misses.append((parent_id, child_id))
    if misses:
        prompts = [
            relation_prompt(taxonomy.concepts[p], taxonomy.concepts[c]) for p, c in misses
        ]
        judged = provider.judge_batch([(pr.premise, pr.hypothesis) for pr in prompts])
        for (parent_id, child_id), judgment in zip(misses, judged):
            judgments[(parent_id, child_id)] = judgment
            if cache is not None:
                cache.put(parent_id, child_id, provider.fingerprint, judgment)
    return judgments, hits


def nliv(
    taxonomy: Taxonomy,
    provider: NLIProvider,
    mode: Mode,
    cache: JudgmentCache | None = None,
) -> NlivResult:
    """Mean normalized adequacy probability over scored concepts.

    One classification per root path; the pseudo-root's own edge carries no
    semantics and is stripped, so natural roots (whose stripped walk is
    empty) are excluded from the average. Concepts reachable over several
    root paths average their normalized probability across paths. Concepts
    are reduced in id order, so the score is independent of edge scoring
    order and of any provider-side parallelism.
    """
    judgments, cache_hits = edge_judgments(taxonomy, provider, cache)
    edge_probs = {
        edge: relation_probability(judgment, mode) for edge, judgment in judgments.items()
    }

    total = 0.0
    scored = 0
    for cid in taxonomy.concept_ids:
        path_scores = []
        for path in taxonomy.root_paths(cid):
            nodes = path.node_ids
            probs = [
                edge_probs[(nodes[i], nodes[i + 1])]
                for i in range(len(nodes) - 1)
                if nodes[i] != PSEUDO_ROOT_ID
            ]
            if probs:
                path_scores.append(classification_probability(probs)[1])
        if path_scores:
            total += sum(path_scores) / len(path_scores)
            scored += 1
    score = total / scored if scored else 0.0
    return NlivResult(
        score=score,
        scored_concepts=scored,
        scored_edges=len(judgments),
        cache_hits=cache_hits,
    )
