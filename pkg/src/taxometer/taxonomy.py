"""Taxonomy graph model: loading, validation, pseudo augmentation, and path queries.

A taxonomy is a directed acyclic graph of concepts whose edges point from a
parent (hypernym) to a child (hyponym). Two synthetic nodes are grafted onto
every loaded graph: a pseudo-root above all natural roots and a pseudo-leaf
below all natural leaves, so that every natural concept has at least one
parent and one child. Instances are immutable after construction; all query
methods are read-only and safe for concurrent use from multiple threads.
"""

from __future__ import annotations

import hashlib
import json
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping

from .errors import (
    CycleError,
    DuplicateIdError,
    OrphanError,
    ParseError,
    PseudoConceptError,
    PseudoLeafError,
    UnknownConceptError,
)

PSEUDO_ROOT_ID = "__pseudo_root__"
PSEUDO_LEAF_ID = "__pseudo_leaf__"

_RESERVED_IDS = (PSEUDO_ROOT_ID, PSEUDO_LEAF_ID)

Edge = tuple[str, str]


@dataclass(frozen=True)
class Concept:
    """A single taxonomy node: opaque id, surface name, optional gloss."""

    id: str
    name: str
    description: str = ""
    is_pseudo: bool = False


@dataclass(frozen=True, order=True)
class Triplet:
    """Placement of a query concept between one parent and one child."""

    parent_id: str
    query_id: str
    child_id: str


@dataclass(frozen=True)
class RootPath:
    """A simple directed path from the pseudo-root to a target concept."""

    node_ids: tuple[str, ...]

    @property
    def length(self) -> int:
        """Number of nodes on the path (pseudo-root included)."""
        return len(self.node_ids)


@dataclass(frozen=True)
class TaxonomyStats:
    """Natural-graph statistics; pseudo nodes and pseudo edges are excluded."""

    concepts: int
    edges: int
    depth: int
    leaves: int
    leaf_ratio: float
    branching_factor: float
    duplicate_edges_dropped: int


_PSEUDO_ROOT = Concept(PSEUDO_ROOT_ID, "pseudo-root", "", is_pseudo=True)
_PSEUDO_LEAF = Concept(PSEUDO_LEAF_ID, "pseudo-leaf", "", is_pseudo=True)


class Taxonomy:
    """Immutable, validated, pseudo-augmented concept DAG.

    Construct through :meth:`build` (augments and validates) or
    :func:`load_taxonomy`. The raw constructor is used internally by the
    mutation machinery, which guarantees its own invariants and defers
    validation to checkpoints.
    """

    __slots__ = (
        "_concepts",
        "_edges",
        "_parents",
        "_children",
        "_depths",
        "_ancestors",
        "_descendants",
        "_triplets",
        "_fingerprint",
        "_concept_ids",
        "duplicate_edges_dropped",
    )

    def __init__(
        self,
        concepts: Mapping[str, Concept],
        edges: Iterable[Edge],
        *,
        validate: bool = True,
        duplicate_edges_dropped: int = 0,
    ):
        self._concepts = dict(concepts)
        self._edges = frozenset(edges)
        self.duplicate_edges_dropped = duplicate_edges_dropped

        parents: dict[str, list[str]] = {cid: [] for cid in self._concepts}
        children: dict[str, list[str]] = {cid: [] for cid in self._concepts}
        for parent, child in self._edges:
            if parent not in self._concepts or child not in self._concepts:
                raise UnknownConceptError(f"edge ({parent!r}, {child!r}) references an unknown concept")
            children[parent].append(child)
            parents[child].append(parent)
        self._parents = {cid: tuple(sorted(ps)) for cid, ps in parents.items()}
        self._children = {cid: tuple(sorted(cs)) for cid, cs in children.items()}

        self._concept_ids = tuple(sorted(cid for cid, c in self._concepts.items() if not c.is_pseudo))
        # Lazy caches. Races only recompute identical values, so no locking.
        self._depths: dict[str, int] | None = None
        self._ancestors: dict[str, dict[str, int]] = {}
        self._descendants: dict[str, frozenset[str]] = {}
        self._triplets: frozenset[Triplet] | None = None
        self._fingerprint: str | None = None

        if validate:
            self.validate()

    # -- construction -------------------------------------------------

    @classmethod
    def build(
        cls,
        concepts: Iterable[Concept],
        edges: Iterable[Edge],
        *,
        duplicate_edges_dropped: int = 0,
    ) -> "Taxonomy":
        """Augment with pseudo nodes, then validate.

        Augmentation is idempotent: building from an already-augmented
        concept/edge set changes nothing.
        """
        concept_map: dict[str, Concept] = {}
        for c in concepts:
            if c.id in concept_map:
                raise DuplicateIdError(f"duplicate concept id {c.id!r}")
            if c.id in _RESERVED_IDS and not c.is_pseudo:
                raise DuplicateIdError(f"concept id {c.id!r} is reserved for pseudo nodes")
            if c.is_pseudo and c.id not in _RESERVED_IDS:
                raise PseudoConceptError(f"only the pseudo-root and pseudo-leaf may set is_pseudo ({c.id!r})")
            concept_map[c.id] = c

        edge_set: set[Edge] = set()
        dropped = duplicate_edges_dropped
        for edge in edges:
            parent, child = edge
            if parent == child:
                raise CycleError(f"self-edge on {parent!r}")
            if parent not in concept_map or child not in concept_map:
                raise UnknownConceptError(f"edge ({parent!r}, {child!r}) references an unknown concept")
            if edge in edge_set:
                dropped += 1
            else:
                edge_set.add((parent, child))

        naturals = [cid for cid, c in concept_map.items() if not c.is_pseudo]
        if not naturals:
            raise ParseError("taxonomy contains no natural concepts")

        concept_map.setdefault(PSEUDO_ROOT_ID, _PSEUDO_ROOT)
        concept_map.setdefault(PSEUDO_LEAF_ID, _PSEUDO_LEAF)

        has_parent = {child for _, child in edge_set}
        has_child = {parent for parent, _ in edge_set}
        for cid in naturals:
            if cid not in has_parent:
                edge_set.add((PSEUDO_ROOT_ID, cid))
            if cid not in has_child:
                edge_set.add((cid, PSEUDO_LEAF_ID))

        return cls(concept_map, edge_set, validate=True, duplicate_edges_dropped=dropped)

    def with_edges(self, edges: Iterable[Edge]) -> "Taxonomy":
        """New taxonomy over the same concepts with a replaced edge set.

        Used by the mutation machinery; validation is deferred to the
        caller (checkpoints run :meth:`validate` explicitly).
        """
        return Taxonomy(
            self._concepts,
            edges,
            validate=False,
            duplicate_edges_dropped=self.duplicate_edges_dropped,
        )

    # -- validation ----------------------------------------------------

    def validate(self) -> None:
        """Check all structural invariants, raising on the first violation."""
        for cid, c in self._concepts.items():
            if c.is_pseudo and cid not in _RESERVED_IDS:
                raise PseudoConceptError(f"unexpected pseudo concept {cid!r}")
            if cid in _RESERVED_IDS and not c.is_pseudo:
                raise DuplicateIdError(f"concept id {cid!r} is reserved for pseudo nodes")
        if PSEUDO_ROOT_ID not in self._concepts or PSEUDO_LEAF_ID not in self._concepts:
            raise OrphanError("taxonomy is missing its pseudo nodes; use Taxonomy.build")

        for parent, child in self._edges:
            if parent == child:
                raise CycleError(f"self-edge on {parent!r}")
        if self._parents[PSEUDO_ROOT_ID]:
            raise CycleError("pseudo-root must not have parents")
        if self._children[PSEUDO_LEAF_ID]:
            raise CycleError("pseudo-leaf must not have children")

        # Kahn's algorithm: any residue after peeling means a directed cycle.
        indegree = {cid: len(self._parents[cid]) for cid in self._concepts}
        queue = deque(cid for cid, d in indegree.items() if d == 0)
        seen = 0
        while queue:
            node = queue.popleft()
            seen += 1
            for child in self._children[node]:
                indegree[child] -= 1
                if indegree[child] == 0:
                    queue.append(child)
        if seen != len(self._concepts):
            cyclic = sorted(cid for cid, d in indegree.items() if d > 0)
            raise CycleError(f"directed cycle involving {cyclic[:5]}")

        reachable = {PSEUDO_ROOT_ID}
        frontier = deque([PSEUDO_ROOT_ID])
        while frontier:
            node = frontier.popleft()
            for child in self._children[node]:
                if child not in reachable:
                    reachable.add(child)
                    frontier.append(child)
        orphans = [cid for cid in self._concepts if cid not in reachable and cid != PSEUDO_LEAF_ID]
        if orphans:
            raise OrphanError(f"concepts unreachable from the pseudo-root: {sorted(orphans)[:5]}")

        for cid in self._concept_ids:
            if not self._parents[cid]:
                raise OrphanError(f"concept {cid!r} has no parent after augmentation")
            if not self._children[cid]:
                raise OrphanError(f"concept {cid!r} has no child after augmentation")
            # Pseudo edges only ever bridge to otherwise parentless/childless concepts.
            if PSEUDO_ROOT_ID in self._parents[cid] and len(self._parents[cid]) > 1:
                raise OrphanError(f"concept {cid!r} mixes the pseudo-root with natural parents")
            if PSEUDO_LEAF_ID in self._children[cid] and len(self._children[cid]) > 1:
                raise OrphanError(f"concept {cid!r} mixes the pseudo-leaf with natural children")

    # -- basic accessors ------------------------------------------------

    @property
    def concepts(self) -> Mapping[str, Concept]:
        return MappingProxyType(self._concepts)

    @property
    def edges(self) -> frozenset[Edge]:
        return self._edges

    @property
    def root_id(self) -> str:
        return PSEUDO_ROOT_ID

    @property
    def leaf_id(self) -> str:
        return PSEUDO_LEAF_ID

    @property
    def concept_ids(self) -> tuple[str, ...]:
        """Sorted natural (non-pseudo) concept ids."""
        return self._concept_ids

    def _require(self, cid: str) -> None:
        if cid not in self._concepts:
            raise UnknownConceptError(f"unknown concept id {cid!r}")

    def parents(self, cid: str) -> tuple[str, ...]:
        self._require(cid)
        return self._parents[cid]

    def children(self, cid: str) -> tuple[str, ...]:
        self._require(cid)
        return self._children[cid]

    def is_leaf(self, cid: str) -> bool:
        """True when the concept has no natural children."""
        self._require(cid)
        return self._children[cid] == (PSEUDO_LEAF_ID,)

    @property
    def leaves(self) -> tuple[str, ...]:
        return tuple(cid for cid in self._concept_ids if self._children[cid] == (PSEUDO_LEAF_ID,))

    def natural_edges(self) -> tuple[Edge, ...]:
        """Sorted edges between natural concepts (pseudo edges excluded)."""
        return tuple(
            sorted(
                (p, c)
                for p, c in self._edges
                if p not in _RESERVED_IDS and c not in _RESERVED_IDS
            )
        )

    # -- path queries ----------------------------------------------------

    @property
    def depths(self) -> dict[str, int]:
        """Shortest root-path length in nodes per concept; pseudo-root is 1."""
        if self._depths is None:
            depths = {PSEUDO_ROOT_ID: 1}
            frontier = deque([PSEUDO_ROOT_ID])
            while frontier:
                node = frontier.popleft()
                for child in self._children[node]:
                    if child not in depths:
                        depths[child] = depths[node] + 1
                        frontier.append(child)
            self._depths = depths
        return self._depths

    def depth(self, cid: str) -> int:
        self._require(cid)
        try:
            return self.depths[cid]
        except KeyError:
            raise OrphanError(f"concept {cid!r} is unreachable from the pseudo-root") from None

    def root_paths(self, cid: str) -> tuple[RootPath, ...]:
        """All simple directed paths from the pseudo-root to ``cid``, sorted."""
        self._require(cid)
        paths: list[RootPath] = []
        stack: list[tuple[str, tuple[str, ...]]] = [(cid, (cid,))]
        while stack:
            node, suffix = stack.pop()
            if node == PSEUDO_ROOT_ID:
                paths.append(RootPath(suffix))
                continue
            for parent in self._parents[node]:
                stack.append((parent, (parent,) + suffix))
        paths.sort(key=lambda rp: rp.node_ids)
        return tuple(paths)

    def ancestor_distances(self, cid: str) -> dict[str, int]:
        """Shortest upward edge-distance to every ancestor (self included at 0)."""
        self._require(cid)
        cached = self._ancestors.get(cid)
        if cached is None:
            cached = {cid: 0}
            frontier = deque([cid])
            while frontier:
                node = frontier.popleft()
                for parent in self._parents[node]:
                    if parent not in cached:
                        cached[parent] = cached[node] + 1
                        frontier.append(parent)
            self._ancestors[cid] = cached
        return cached

    def ancestor_closure(self, cid: str) -> frozenset[str]:
        """The concept itself plus all its ancestors (pseudo-root included)."""
        return frozenset(self.ancestor_distances(cid))

    def descendant_closure(self, cid: str) -> frozenset[str]:
        """The concept itself plus all its descendants (pseudo-leaf included)."""
        self._require(cid)
        cached = self._descendants.get(cid)
        if cached is None:
            closure: set[str] = set()
            stack = [cid]
            while stack:
                node = stack.pop()
                if node in closure:
                    continue
                closure.add(node)
                stack.extend(self._children[node])
            cached = frozenset(closure)
            self._descendants[cid] = cached
        return cached

    def wu_palmer(self, a: str, b: str) -> float:
        """Wu-Palmer similarity: 2 * lca_depth / (depth(a) + depth(b)).

        On trees this is exactly the classic formula with the deepest common
        ancestor. On DAGs each node's depth toward a shared ancestor is
        measured through that ancestor (its depth plus the shortest
        downward distance to the node) and the best-scoring ancestor wins;
        a node counts as its own ancestor, so self-similarity is exactly 1,
        and the pseudo-root is a universal ancestor at depth 1, so the
        result lies in (0, 1]. The pseudo-leaf carries no semantics and is
        rejected.
        """
        self._require(a)
        self._require(b)
        if a == PSEUDO_LEAF_ID or b == PSEUDO_LEAF_ID:
            raise PseudoLeafError("the pseudo-leaf has no similarity semantics")
        up_a = self.ancestor_distances(a)
        up_b = self.ancestor_distances(b)
        if len(up_b) < len(up_a):
            up_a, up_b = up_b, up_a
        depths = self.depths
        best = 0.0
        for node, dist_a in up_a.items():
            dist_b = up_b.get(node)
            if dist_b is None:
                continue
            lca_depth = depths[node]
            candidate = 2.0 * lca_depth / (2.0 * lca_depth + dist_a + dist_b)
            if candidate > best:
                best = candidate
        return best

    def triplets(self) -> frozenset[Triplet]:
        """One (parent, query, child) triplet per parent x child combination.

        Every natural concept is a query; natural roots use the pseudo-root
        as parent and natural leaves use the pseudo-leaf as child.
        """
        if self._triplets is None:
            result: set[Triplet] = set()
            for q in self._concept_ids:
                for p in self._parents[q]:
                    for c in self._children[q]:
                        result.add(Triplet(p, q, c))
            self._triplets = frozenset(result)
        return self._triplets

    # -- reporting ---------------------------------------------------------

    def stats(self) -> TaxonomyStats:
        """Descriptive statistics over the natural graph."""
        n = len(self._concept_ids)
        natural_edges = self.natural_edges()
        leaves = self.leaves
        internal = n - len(leaves)

        # Depth of the taxonomy: concepts on the longest natural root chain.
        longest: dict[str, int] = {PSEUDO_ROOT_ID: 0}
        for node in self._topological_order():
            base = longest.get(node)
            if base is None:
                continue
            for child in self._children[node]:
                cand = base + 1
                if cand > longest.get(child, -1):
                    longest[child] = cand
        depth = max((longest[cid] for cid in self._concept_ids), default=0)

        return TaxonomyStats(
            concepts=n,
            edges=len(natural_edges),
            depth=depth,
            leaves=len(leaves),
            leaf_ratio=len(leaves) / n if n else 0.0,
            branching_factor=len(natural_edges) / internal if internal else 0.0,
            duplicate_edges_dropped=self.duplicate_edges_dropped,
        )

    def _topological_order(self) -> Iterator[str]:
        indegree = {cid: len(self._parents[cid]) for cid in self._concepts}
        queue = deque(sorted(cid for cid, d in indegree.items() if d == 0))
        while queue:
            node = queue.popleft()
            yield node
            for child in self._children[node]:
                indegree[child] -= 1
                if indegree[child] == 0:
                    queue.append(child)

    def fingerprint(self) -> str:
        """Stable content hash over concepts and edges."""
        if self._fingerprint is None:
            payload = json.dumps(
                {
                    "concepts": [
                        (c.id, c.name, c.description, c.is_pseudo)
                        for c in sorted(self._concepts.values(), key=lambda c: c.id)
                    ],
                    "edges": sorted(self._edges),
                },
                ensure_ascii=False,
                separators=(",", ":"),
            )
            self._fingerprint = hashlib.sha256(payload.encode("utf-8")).hexdigest()
        return self._fingerprint

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Taxonomy):
            return NotImplemented
        return self._concepts == other._concepts and self._edges == other._edges

    def __hash__(self) -> int:
        return hash((frozenset(self._concepts), self._edges))

    def __repr__(self) -> str:
        return f"Taxonomy(concepts={len(self._concept_ids)}, edges={len(self.natural_edges())})"


# -- file formats ------------------------------------------------------------


def load_taxonomy(
    source: str | Path,
    format: str = "json",
    *,
    glosses: str | Path | None = None,
) -> Taxonomy:
    """Load, augment, and validate a taxonomy file.

    Formats:

    * ``json`` -- one object ``{"concepts": [{"id", "name", "description",
      "parents": [...]}]}``; concepts with an empty parent list are natural
      roots.
    * ``tsv-edges`` -- one ``child<TAB>parent`` edge per line, with an
      optional companion gloss TSV (``id<TAB>name[<TAB>description]``)
      passed as ``glosses``. Gloss rows for ids absent from the edge file
      are ignored.

    Duplicate edges are dropped silently; the count is kept on the returned
    taxonomy (``duplicate_edges_dropped``).
    """
    path = Path(source)
    if not path.exists():
        raise ParseError(f"taxonomy file not found: {path}")
    if format == "json":
        return _load_json(path)
    if format == "tsv-edges":
        return _load_tsv_edges(path, Path(glosses) if glosses else None)
    raise ParseError(f"unknown taxonomy format {format!r} (expected 'json' or 'tsv-edges')")


def _load_json(path: Path) -> Taxonomy:
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: {exc}") from exc

    if not isinstance(document, dict) or not isinstance(document.get("concepts"), list):
        raise ParseError(f"{path}: expected a top-level object with a 'concepts' list")

    concepts: list[Concept] = []
    parent_lists: dict[str, list[str]] = {}
    for i, entry in enumerate(document["concepts"]):
        if not isinstance(entry, dict) or not isinstance(entry.get("id"), str):
            raise ParseError(f"{path}: concept #{i} is missing a string 'id'")
        cid = entry["id"]
        name = entry.get("name", cid)
        description = entry.get("description", "")
        parents = entry.get("parents", [])
        if not isinstance(name, str) or not isinstance(description, str) or not isinstance(parents, list):
            raise ParseError(f"{path}: concept {cid!r} has malformed fields")
        concepts.append(Concept(cid, name, description))
        parent_lists[cid] = [p for p in parents]

    known = {c.id for c in concepts}
    edges: list[Edge] = []
    for cid, parents in parent_lists.items():
        for p in parents:
            if not isinstance(p, str) or p not in known:
                raise ParseError(f"{path}: concept {cid!r} references unknown parent {p!r}")
            edges.append((p, cid))
    return Taxonomy.build(concepts, edges)


def _load_tsv_edges(path: Path, gloss_path: Path | None) -> Taxonomy:
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except (OSError, UnicodeDecodeError) as exc:
        raise ParseError(f"{path}: {exc}") from exc

    edges: list[Edge] = []
    ids: set[str] = set()
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 2:
            raise ParseError(f"{path}:{lineno}: expected 'child<TAB>parent', got {len(fields)} fields")
        child, parent = (f.strip() for f in fields)
        if not child or not parent:
            raise ParseError(f"{path}:{lineno}: empty concept id")
        edges.append((parent, child))
        ids.update((parent, child))

    names: dict[str, str] = {}
    descriptions: dict[str, str] = {}
    if gloss_path is not None:
        try:
            gloss_lines = gloss_path.read_text(encoding="utf-8").splitlines()
        except (OSError, UnicodeDecodeError) as exc:
            raise ParseError(f"{gloss_path}: {exc}") from exc
        for lineno, line in enumerate(gloss_lines, start=1):
            if not line.strip():
                continue
            fields = line.split("\t")
            if len(fields) not in (2, 3):
                raise ParseError(f"{gloss_path}:{lineno}: expected 'id<TAB>name[<TAB>description]'")
            gid = fields[0].strip()
            if gid not in ids:
                continue
            names[gid] = fields[1].strip()
            if len(fields) == 3:
                descriptions[gid] = fields[2].strip()

    concepts = [Concept(cid, names.get(cid, cid), descriptions.get(cid, "")) for cid in sorted(ids)]
    return Taxonomy.build(concepts, edges)


def save_taxonomy_json(taxonomy: Taxonomy, target: str | Path) -> None:
    """Write the natural graph back out in the JSON concepts format."""
    Path(target).write_text(dumps_taxonomy_json(taxonomy), encoding="utf-8")


def dumps_taxonomy_json(taxonomy: Taxonomy) -> str:
    entries = []
    for cid in taxonomy.concept_ids:
        concept = taxonomy.concepts[cid]
        parents = [p for p in taxonomy.parents(cid) if p != PSEUDO_ROOT_ID]
        entries.append(
            {
                "id": concept.id,
                "name": concept.name,
                "description": concept.description,
                "parents": parents,
            }
        )
    return json.dumps({"concepts": entries}, ensure_ascii=False, indent=2) + "\n"
