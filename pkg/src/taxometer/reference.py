"""Gold-standard comparison of two taxonomies via triplet precision/recall/F1.

A predicted placement counts only when both the parent and the child of the
query concept are correct; a correct parent with a wrong child therefore
produces one false positive (the predicted triplet) and one false negative
(the missed gold triplet).
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConceptSetMismatchError
from .taxonomy import Taxonomy


@dataclass(frozen=True)
class PRF:
    """Precision/recall/F1 with the underlying counts."""

    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int) -> "PRF":
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        return cls(precision=precision, recall=recall, f1=f1, tp=tp, fp=fp, fn=fn)


def triplet_prf(predicted: Taxonomy, gold: Taxonomy) -> PRF:
    """Triplet-level PRF of ``predicted`` against ``gold``.

    Both taxonomies must cover the same natural concept ids; pseudo nodes
    are shared canonical ids, so pseudo-parent/pseudo-child triplets compare
    across taxonomies without special-casing.
    """
    if predicted.concept_ids != gold.concept_ids:
        missing = set(gold.concept_ids) ^ set(predicted.concept_ids)
        raise ConceptSetMismatchError(
            f"taxonomies cover different concept sets ({len(missing)} ids differ, e.g. {sorted(missing)[:3]})"
        )
    predicted_triplets = predicted.triplets()
    gold_triplets = gold.triplets()
    tp = len(predicted_triplets & gold_triplets)
    fp = len(predicted_triplets - gold_triplets)
    fn = len(gold_triplets - predicted_triplets)
    return PRF.from_counts(tp=tp, fp=fp, fn=fn)
