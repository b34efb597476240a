"""Reference-free taxonomy quality metrics and a degradation-study harness."""

from .adequacy import (
    JudgmentCache,
    NlivResult,
    RelationPrompt,
    classification_probability,
    nliv,
    perplexity,
    relation_probability,
    relation_prompt,
)
from .correlation import CorrelationResult, kendall_tau_b, significance_stars
from .errors import TaxometerError
from .mutation import Degradation, DegradationTrace, MutationOp, degrade, mutate, replay
from .providers import (
    FillMaskProvider,
    MockFillMaskProvider,
    MockNLIProvider,
    MockSimilarityProvider,
    NLIProvider,
    RelationJudgment,
    SimilarityProvider,
)
from .reference import PRF, triplet_prf
from .robustness import PairSample, SpResult, csc, semantic_proximity
from .study import (
    StudyConfig,
    StudyRecord,
    correlate,
    correlation_report,
    nli_verification,
    rate_score,
    run_study,
)
from .taxonomy import (
    PSEUDO_LEAF_ID,
    PSEUDO_ROOT_ID,
    Concept,
    RootPath,
    Taxonomy,
    Triplet,
    load_taxonomy,
    save_taxonomy_json,
)

__version__ = "0.1.0"

__all__ = [
    "Concept",
    "CorrelationResult",
    "Degradation",
    "DegradationTrace",
    "FillMaskProvider",
    "JudgmentCache",
    "MockFillMaskProvider",
    "MockNLIProvider",
    "MockSimilarityProvider",
    "MutationOp",
    "NLIProvider",
    "NlivResult",
    "PRF",
    "PSEUDO_LEAF_ID",
    "PSEUDO_ROOT_ID",
    "PairSample",
    "RelationJudgment",
    "RelationPrompt",
    "RootPath",
    "SimilarityProvider",
    "SpResult",
    "StudyConfig",
    "StudyRecord",
    "Taxonomy",
    "TaxometerError",
    "Triplet",
    "classification_probability",
    "correlate",
    "correlation_report",
    "csc",
    "degrade",
    "kendall_tau_b",
    "load_taxonomy",
    "mutate",
    "nli_verification",
    "nliv",
    "perplexity",
    "rate_score",
    "relation_probability",
    "relation_prompt",
    "replay",
    "run_study",
    "save_taxonomy_json",
    "semantic_proximity",
    "significance_stars",
    "triplet_prf",
    "__version__",
]
