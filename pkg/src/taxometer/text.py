"""Concept text normalization shared by the NLI prompts and the fill-mask baseline."""

from __future__ import annotations

import re

_TRAILING_PARENTHETICAL = re.compile(r"\s*\([^()]*\)\s*$")


def lemma(name: str) -> str:
    """Normalize a concept name into a surface lemma.

    Lowercases, maps underscores and hyphens to spaces, strips a trailing
    parenthetical qualifier (e.g. ``"Java (island)"`` -> ``"java"``), and
    collapses runs of whitespace. No dictionary lemmatization is attempted;
    benchmark concept names are overwhelmingly nouns already in lemma form.
    """
    s = _TRAILING_PARENTHETICAL.sub("", name)
    s = s.replace("_", " ").replace("-", " ")
    return " ".join(s.split()).lower()


def representation_text(name: str, description: str) -> str:
    """Text embedded as a concept's semantic representation.

    The description is preferred; concepts without a gloss fall back to
    their name so every concept stays embeddable.
    """
    if description and description.strip():
        return description
    return name
