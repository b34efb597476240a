from __future__ import annotations

import pytest

from taxometer import Concept, Taxonomy


@pytest.fixture
def chain3() -> Taxonomy:
    """Natural chain r -> a -> b under the pseudo-root."""
    return Taxonomy.build(
        [
            Concept("r", "entity", "the most general thing"),
            Concept("a", "artifact", "a thing made by people"),
            Concept("b", "hammer", "a tool for driving nails"),
        ],
        [("r", "a"), ("a", "b")],
    )


@pytest.fixture
def star4() -> Taxonomy:
    """One natural root r with leaf children a, b, c."""
    return Taxonomy.build(
        [
            Concept("r", "food", "any nourishing substance"),
            Concept("a", "apple", "a crisp pome fruit"),
            Concept("b", "bread", "a baked staple of flour and water"),
            Concept("c", "cheese", "a solid food made from curdled milk"),
        ],
        [("r", "a"), ("r", "b"), ("r", "c")],
    )


@pytest.fixture
def sibling_tree() -> Taxonomy:
    """a -> {a1, a2} and a second natural root b (the hand-workable WPS tree)."""
    return Taxonomy.build(
        [
            Concept("a", "fruit", "the sweet product of a plant"),
            Concept("a1", "apple", "a crisp pome fruit"),
            Concept("a2", "pear", "a sweet fruit wider at the base"),
            Concept("b", "tool", "an implement for doing work"),
        ],
        [("a", "a1"), ("a", "a2")],
    )


@pytest.fixture
def diamond() -> Taxonomy:
    """Two natural roots a and b sharing the child x."""
    return Taxonomy.build(
        [
            Concept("a", "alpha", ""),
            Concept("b", "beta", ""),
            Concept("x", "target", "a concept with two parents"),
        ],
        [("a", "x"), ("b", "x")],
    )
