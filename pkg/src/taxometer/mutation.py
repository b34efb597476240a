"""Seeded taxonomy degradation by random subtree relocation.

A mutation picks a mover and an unrelated new parent (neither may be an
ancestor of the other), removes all of the mover's current parents, and
attaches it under the new parent; descendants travel with it. Acyclicity is
preserved by the unrelatedness constraint, and pseudo edges are repaired
locally (a parent left childless gains the pseudo-leaf, a leaf that gains a
child loses it). Traces are fully determined by (taxonomy, kind, seed) and
replayable bit-for-bit.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

from .errors import NoEligiblePairError, ParseError
from .taxonomy import PSEUDO_LEAF_ID, PSEUDO_ROOT_ID, Taxonomy

KIND_LEAF = "leaf"
KIND_NON_LEAF = "non_leaf"
KIND_ANY = "any"
KINDS = (KIND_LEAF, KIND_NON_LEAF, KIND_ANY)

DEFAULT_SCHEDULE = (1, 8, 64, 512, 4096)

# Rejection-sampling budget per mutation, scaled by taxonomy size.
_ATTEMPTS_PER_CONCEPT = 10


@dataclass(frozen=True)
class MutationOp:
    """One applied relocation; ``kind`` records the mover's class (leaf or
    non-leaf) in the taxonomy it was applied to."""

    kind: str
    moved_id: str
    old_parent_ids: tuple[str, ...]
    new_parent_id: str


@dataclass
class DegradationTrace:
    """Replayable record of one cumulative degradation run."""

    seed: int
    kind: str
    schedule: tuple[int, ...]
    taxonomy_fingerprint: str
    ops: list[MutationOp] = field(default_factory=list)
    truncated: bool = False

    @property
    def checkpoints(self) -> tuple[int, ...]:
        """Schedule entries actually reached before any truncation."""
        return tuple(c for c in self.schedule if c <= len(self.ops))


def _eligible_movers(taxonomy: Taxonomy, kind: str) -> list[str]:
    if kind == KIND_ANY:
        return list(taxonomy.concept_ids)
    if kind == KIND_LEAF:
        return [cid for cid in taxonomy.concept_ids if taxonomy.is_leaf(cid)]
    if kind == KIND_NON_LEAF:
        return [cid for cid in taxonomy.concept_ids if not taxonomy.is_leaf(cid)]
    raise ValueError(f"unknown mutation kind {kind!r} (expected one of {KINDS})")


def sample_op(taxonomy: Taxonomy, kind: str, rng: random.Random) -> MutationOp:
    """Draw a (mover, new parent) pair by rejection sampling.

    Pairs are rejected when the two concepts are related (either is an
    ancestor of the other, which covers the mover's current parents) so the
    move always changes the graph and can never introduce a cycle.
    """
    movers = _eligible_movers(taxonomy, kind)
    targets = taxonomy.concept_ids
    if not movers or len(targets) < 2:
        raise NoEligiblePairError(f"no {kind!r} mutation is possible on this taxonomy")

    budget = _ATTEMPTS_PER_CONCEPT * max(len(targets), 1)
    for _ in range(budget):
        mover = movers[rng.randrange(len(movers))]
        target = targets[rng.randrange(len(targets))]
        if target == mover:
            continue
        if target in taxonomy.ancestor_closure(mover):
            continue
        if target in taxonomy.descendant_closure(mover):
            continue
        actual_kind = KIND_LEAF if taxonomy.is_leaf(mover) else KIND_NON_LEAF
        return MutationOp(
            kind=actual_kind,
            moved_id=mover,
            old_parent_ids=taxonomy.parents(mover),
            new_parent_id=target,
        )
    raise NoEligiblePairError(
        f"no eligible (mover, new-parent) pair found for kind {kind!r} after {budget} draws"
    )


def apply_op(taxonomy: Taxonomy, op: MutationOp) -> Taxonomy:
    """Apply a relocation, returning a new taxonomy; the input is untouched."""
    edges = set(taxonomy.edges)
    old_parents = taxonomy.parents(op.moved_id)
    for parent in old_parents:
        edges.discard((parent, op.moved_id))
    edges.add((op.new_parent_id, op.moved_id))

    # Pseudo repair: the new parent is no longer childless; old parents
    # that lost their only child become leaves.
    edges.discard((op.new_parent_id, PSEUDO_LEAF_ID))
    for parent in old_parents:
        if parent == PSEUDO_ROOT_ID:
            continue
        if all(child == op.moved_id for child in taxonomy.children(parent)):
            edges.add((parent, PSEUDO_LEAF_ID))
    return taxonomy.with_edges(edges)


def mutate(taxonomy: Taxonomy, kind: str, rng: random.Random) -> tuple[Taxonomy, MutationOp]:
    """Sample and apply one mutation."""
    op = sample_op(taxonomy, kind, rng)
    return apply_op(taxonomy, op), op


def replay(taxonomy: Taxonomy, ops: Sequence[MutationOp], count: int | None = None) -> Taxonomy:
    """Re-apply a trace prefix to the original taxonomy."""
    current = taxonomy
    for op in ops[: len(ops) if count is None else count]:
        current = apply_op(current, op)
    return current


class Degradation:
    """Cumulative degradation run with per-checkpoint snapshots.

    The trace grows as :meth:`checkpoints` is consumed and remains
    accessible even when the run truncates before the first checkpoint.
    Checkpoint taxonomies are yielded as they are reached; anything not
    kept by the caller can be rematerialized later with :func:`replay`.
    """

    def __init__(
        self,
        taxonomy: Taxonomy,
        schedule: Sequence[int] = DEFAULT_SCHEDULE,
        kind: str = KIND_ANY,
        seed: int = 0,
    ):
        schedule = tuple(schedule)
        if not schedule or any(c <= 0 for c in schedule) or list(schedule) != sorted(set(schedule)):
            raise ValueError(
                f"schedule must be strictly increasing positive integers, got {schedule!r}"
            )
        if kind not in KINDS:
            raise ValueError(f"unknown mutation kind {kind!r} (expected one of {KINDS})")
        self.original = taxonomy
        self.trace = DegradationTrace(
            seed=seed, kind=kind, schedule=schedule, taxonomy_fingerprint=taxonomy.fingerprint()
        )
        self._rng = random.Random(seed)

    def checkpoints(self) -> Iterator[tuple[int, Taxonomy]]:
        """Yield (mutation count, snapshot) at each schedule entry.

        On :class:`NoEligiblePairError` mid-run the trace is truncated at
        the last achievable mutation and iteration stops.
        """
        current = self.original
        targets = set(self.trace.schedule)
        for count in range(1, self.trace.schedule[-1] + 1):
            try:
                current, op = mutate(current, self.trace.kind, self._rng)
            except NoEligiblePairError:
                self.trace.truncated = True
                return
            self.trace.ops.append(op)
            if count in targets:
                yield count, current


@dataclass
class DegradationResult:
    trace: DegradationTrace
    snapshots: dict[int, Taxonomy]


def degrade(
    taxonomy: Taxonomy,
    schedule: Sequence[int] = DEFAULT_SCHEDULE,
    kind: str = KIND_ANY,
    seed: int = 0,
) -> DegradationResult:
    """Run a full degradation, materializing every checkpoint snapshot."""
    run = Degradation(taxonomy, schedule, kind, seed)
    snapshots = dict(run.checkpoints())
    return DegradationResult(trace=run.trace, snapshots=snapshots)


# -- trace files -----------------------------------------------------------


def write_trace(trace: DegradationTrace, target: str | Path) -> None:
    """Line-delimited JSON: a header line, then one op per line."""
    with open(target, "w", encoding="utf-8") as fh:
        fh.write(
            json.dumps(
                {
                    "seed": trace.seed,
                    "kind": trace.kind,
                    "schedule": list(trace.schedule),
                    "taxonomy_fingerprint": trace.taxonomy_fingerprint,
                    "truncated": trace.truncated,
                },
                ensure_ascii=False,
            )
            + "\n"
        )
        for op in trace.ops:
            fh.write(
                json.dumps(
                    {
                        "kind": op.kind,
                        "moved_id": op.moved_id,
                        "old_parent_ids": list(op.old_parent_ids),
                        "new_parent_id": op.new_parent_id,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


def read_trace(source: str | Path) -> DegradationTrace:
    lines = Path(source).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ParseError(f"{source}: empty trace file")
    try:
        header = json.loads(lines[0])
        trace = DegradationTrace(
            seed=header["seed"],
            kind=header["kind"],
            schedule=tuple(header["schedule"]),
            taxonomy_fingerprint=header["taxonomy_fingerprint"],
            truncated=header.get("truncated", False),
        )
        for line in lines[1:]:
            if not line.strip():
                continue
            record = json.loads(line)
            trace.ops.append(
                MutationOp(
                    kind=record["kind"],
                    moved_id=record["moved_id"],
                    old_parent_ids=tuple(record["old_parent_ids"]),
                    new_parent_id=record["new_parent_id"],
                )
            )
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ParseError(f"{source}: malformed trace ({exc})") from exc
    return trace
