"""Item-based collaborative filtering over linear-counting sketches."""

from sketchrec.corpus import (
    EventLogError,
    ItemUserSet,
    LoadReport,
    PurchaseEvent,
    PurchaseMatrix,
    UserProfile,
    load_events,
)
from sketchrec.scoring import (
    Recommendation,
    ScoringConfig,
    candidates,
    gamma,
    recommend_objective,
    recommend_subjective,
    rho,
    subjective_similarity,
)
from sketchrec.similarity import (
    NeighborPolicy,
    SimilarityModel,
    approx_jaccard,
    build_model,
    exact_jaccard,
    merge_similar_items,
    neighbors_plus,
)
from sketchrec.sketch import (
    CardinalityEstimate,
    LinearCountingSketch,
    auto_width,
    estimate_intersection,
    estimate_jaccard,
    fnv1a_64,
)

__all__ = [
    "CardinalityEstimate",
    "EventLogError",
    "ItemUserSet",
    "LinearCountingSketch",
    "LoadReport",
    "NeighborPolicy",
    "PurchaseEvent",
    "PurchaseMatrix",
    "Recommendation",
    "ScoringConfig",
    "SimilarityModel",
    "UserProfile",
    "approx_jaccard",
    "auto_width",
    "build_model",
    "candidates",
    "estimate_intersection",
    "estimate_jaccard",
    "exact_jaccard",
    "fnv1a_64",
    "gamma",
    "load_events",
    "merge_similar_items",
    "neighbors_plus",
    "recommend_objective",
    "recommend_subjective",
    "rho",
    "subjective_similarity",
]
