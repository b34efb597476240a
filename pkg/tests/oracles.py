"""Independent brute-force oracles the implementation is checked against.

Everything here works from raw edge sets with naive enumeration and stays
deliberately independent of the library's own graph machinery.
"""

from __future__ import annotations

import math
from collections import defaultdict

import numpy as np


def enumerate_root_paths(edges: set[tuple[str, str]], root: str, target: str) -> list[tuple[str, ...]]:
    """All simple directed paths from root to target, by plain DFS."""
    children = defaultdict(list)
    for parent, child in edges:
        children[parent].append(child)
    paths: list[tuple[str, ...]] = []

    def dfs(node: str, acc: list[str]) -> None:
        if node == target:
            paths.append(tuple(acc))
            return
        for child in sorted(children[node]):
            if child not in acc:
                dfs(child, acc + [child])

    dfs(root, [root])
    return paths


def brute_force_depth(edges: set[tuple[str, str]], root: str, target: str) -> int:
    """Shortest root-path node count via full path enumeration."""
    return min(len(p) for p in enumerate_root_paths(edges, root, target))


def brute_force_wu_palmer(edges: set[tuple[str, str]], root: str, a: str, b: str) -> float:
    """Wu-Palmer from enumerated root paths and enumerated common ancestors.

    In a pseudo-augmented DAG every ancestor of a node lies on at least one
    of its root paths, so the union of path nodes is exactly the ancestor
    set (self included), and the shortest downward distance from an
    ancestor equals the shortest suffix starting at it over the enumerated
    paths. Every common ancestor is tried; the best-scoring one wins.
    """
    paths_a = enumerate_root_paths(edges, root, a)
    paths_b = enumerate_root_paths(edges, root, b)

    def suffix_distances(paths) -> dict[str, int]:
        dist: dict[str, int] = {}
        for path in paths:
            for position, node in enumerate(path):
                remaining = len(path) - 1 - position
                if node not in dist or remaining < dist[node]:
                    dist[node] = remaining
        return dist

    def depth(node: str) -> int:
        return min(len(p) for p in enumerate_root_paths(edges, root, node))

    down_a = suffix_distances(paths_a)
    down_b = suffix_distances(paths_b)
    best = 0.0
    for node in set(down_a) & set(down_b):
        lca_depth = depth(node)
        candidate = 2.0 * lca_depth / (2.0 * lca_depth + down_a[node] + down_b[node])
        best = max(best, candidate)
    return best


def brute_force_tau_b(xs, ys) -> float:
    """Tau-b by O(n^2) concordant/discordant/tie pair counting."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    n = len(x)
    iu = np.triu_indices(n, k=1)
    dx = np.sign(x[:, None] - x[None, :])[iu]
    dy = np.sign(y[:, None] - y[None, :])[iu]
    product = dx * dy
    concordant = int(np.sum(product > 0))
    discordant = int(np.sum(product < 0))
    n0 = n * (n - 1) // 2
    n1 = int(np.sum(dx == 0))
    n2 = int(np.sum(dy == 0))
    return (concordant - discordant) / math.sqrt((n0 - n1) * (n0 - n2))


def brute_force_triplet_count(natural_edges: set[tuple[str, str]], concept_ids) -> int:
    """Sum over query concepts of parents x children in the augmented graph."""
    parents = defaultdict(set)
    children = defaultdict(set)
    for p, c in natural_edges:
        parents[c].add(p)
        children[p].add(c)
    total = 0
    for q in concept_ids:
        total += max(len(parents[q]), 1) * max(len(children[q]), 1)
    return total
