"""Exception types shared across the package."""


class TaxometerError(Exception):
    """Base class for every error raised by this package."""


class ParseError(TaxometerError):
    """Input file could not be parsed under the declared format."""


class DuplicateIdError(TaxometerError):
    """A concept id occurs twice, or collides with a reserved pseudo id."""


class CycleError(TaxometerError):
    """The edge set contains a directed cycle (self-edges included)."""


class OrphanError(TaxometerError):
    """A concept is unreachable from the pseudo-root after augmentation."""


class UnknownConceptError(TaxometerError):
    """A concept id was queried that does not exist in the taxonomy."""


class PseudoLeafError(TaxometerError):
    """The pseudo-leaf was passed to an operation that excludes it."""


class PseudoConceptError(TaxometerError):
    """A pseudo node was passed where only natural concepts are allowed."""


class ConceptSetMismatchError(TaxometerError):
    """Two taxonomies do not cover the same natural concept id set."""


class DegenerateInputError(TaxometerError):
    """Rank correlation is undefined (too short, or one side constant)."""


class MissingEmbeddingError(TaxometerError):
    """The file-backed embedding store has no vector for a text."""


class MissingJudgmentError(TaxometerError):
    """The file-backed NLI store has no judgment for a premise/hypothesis pair."""


class MissingPromptError(TaxometerError):
    """The file-backed fill-mask store has no candidates for a prompt."""


class EmptyClassificationError(TaxometerError):
    """A classification has no scorable edges (root-level concept)."""


class NoEligiblePairError(TaxometerError):
    """No (mover, new-parent) pair satisfies the mutation constraints."""


class AllNAError(TaxometerError):
    """Every record is NA; a correlation cannot be computed."""


class BackendUnavailableError(TaxometerError):
    """A model backend could not be reached or is not loaded."""


class MalformedResponseError(TaxometerError):
    """A backend returned a response violating the wire contract."""


class NoMaskError(TaxometerError):
    """A fill-mask prompt does not contain exactly one mask slot."""
