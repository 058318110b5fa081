"""Candidate generation, user preference and the two recommenders.

The objective recommender ranks a candidate ``c`` by ``max_p J(p, c)`` over
the user's purchased items ``p``. The subjective recommender weights each
term by the user's preference for ``p``::

    S_u(p, c) = gamma_u(p) * J(p, c)

where ``gamma`` at depth 0 is the (normalised or rank-capped) purchase
quantity and at depth ``t`` sums ``gamma`` at depth ``t - 1`` over ``p`` and
its neighbours, each weighted by its similarity to ``p``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

from sketchrec.corpus import PurchaseMatrix, UserProfile
from sketchrec.similarity import SimilarityModel

MAX_DEPTH = 2
CANDIDATE_POLICIES = ("neighbors", "complement")


@dataclass(frozen=True)
class ScoringConfig:
    depth_t: int = 1
    ranking_cap: float | None = None
    candidate_policy: str = "neighbors"
    top_n: int = 10

    def __post_init__(self) -> None:
        if not isinstance(self.depth_t, int) or not 0 <= self.depth_t <= MAX_DEPTH:
            raise ValueError(f"depth must be an integer in [0, {MAX_DEPTH}], got {self.depth_t!r}")
        if self.ranking_cap is not None and not self.ranking_cap > 0:
            raise ValueError(f"ranking cap must be positive, got {self.ranking_cap!r}")
        if self.candidate_policy not in CANDIDATE_POLICIES:
            raise ValueError(f"candidate policy must be one of {CANDIDATE_POLICIES}")
        if not isinstance(self.top_n, int) or self.top_n < 1:
            raise ValueError(f"top_n must be a positive integer, got {self.top_n!r}")


@dataclass(frozen=True)
class Recommendation:
    product_id: str
    score: float
    best_source_item: str


def candidates(model: SimilarityModel, profile: UserProfile, policy: str = "neighbors") -> set[str]:
    """Items eligible for ``profile``'s user; purchased items never are."""
    owned = profile.items
    if policy == "neighbors":
        pool: set[str] = set()
        for p in owned:
            if p in model:
                pool.update(q for q, _ in model.neighbors_of(p))
    elif policy == "complement":
        pool = model.items
    else:
        raise ValueError(f"candidate policy must be one of {CANDIDATE_POLICIES}")
    return pool - owned


def rho(quantity: int, ranking_cap: float | Fraction) -> Fraction:
    """``cap * (1/2 + 1/4 + ... + 1/2**quantity)`` as an exact fraction.

    Exact arithmetic keeps the result strictly below ``cap`` and strictly
    increasing for any quantity; float64 rounds both away past ~53 purchases.
    """
    if quantity < 0:
        raise ValueError(f"quantity must be non-negative, got {quantity}")
    return Fraction(ranking_cap) * (1 - Fraction(1, 1 << quantity))


class PreferenceTable:
    """Memoised ``gamma`` values for one user."""

    def __init__(
        self,
        matrix: PurchaseMatrix,
        model: SimilarityModel,
        user_id: str,
        config: ScoringConfig,
    ) -> None:
        self.matrix = matrix
        self.model = model
        self.user_id = user_id
        self.config = config
        self._memo: dict[tuple[str, int], float] = {}

    def base(self, p: str) -> float:
        if self.config.ranking_cap is None:
            return self.matrix.normalized_quantity(p, self.user_id)
        return float(rho(self.matrix.quantity(p, self.user_id), self.config.ranking_cap))

    def gamma(self, p: str, t: int) -> float:
        if p not in self.model:
            raise KeyError(f"unknown product {p!r}")
        key = (p, t)
        if key not in self._memo:
            if t == 0:
                value = self.base(p)
            else:
                value = self.gamma(p, t - 1)
                for q, j in self.model.neighbors_of(p):
                    value += self.gamma(q, t - 1) * j
            self._memo[key] = value
        return self._memo[key]


def gamma(
    matrix: PurchaseMatrix,
    model: SimilarityModel,
    user_id: str,
    p: str,
    t: int,
    config: ScoringConfig | None = None,
) -> float:
    config = config or ScoringConfig()
    if not 0 <= t <= MAX_DEPTH:
        raise ValueError(f"depth must lie in [0, {MAX_DEPTH}], got {t}")
    return PreferenceTable(matrix, model, user_id, config).gamma(p, t)


def subjective_similarity(
    matrix: PurchaseMatrix,
    model: SimilarityModel,
    user_id: str,
    p: str,
    c: str,
    config: ScoringConfig | None = None,
) -> float:
    config = config or ScoringConfig()
    if c not in model:
        raise KeyError(f"unknown product {c!r}")
    j = model.similarity(p, c)
    return PreferenceTable(matrix, model, user_id, config).gamma(p, config.depth_t) * j


def _rank(
    model: SimilarityModel,
    profile: UserProfile,
    config: ScoringConfig,
    weight: Callable[[str], float],
) -> list[Recommendation]:
    pool = candidates(model, profile, config.candidate_policy)
    best: dict[str, tuple[float, str]] = {}
    for p in sorted(profile.items):
        if p not in model:
            continue
        w = weight(p)
        for c, j in model.neighbors_of(p):
            if c not in pool:
                continue
            score = w * j
            # sources visited in ascending id order: keep the first on ties
            if c not in best or score > best[c][0]:
                best[c] = (score, p)
    ranked = sorted(
        (Recommendation(c, s, src) for c, (s, src) in best.items() if s > 0.0),
        key=lambda r: (-r.score, r.product_id),
    )
    return ranked[: config.top_n]


def recommend_objective(
    model: SimilarityModel, profile: UserProfile, config: ScoringConfig | None = None
) -> list[Recommendation]:
    return _rank(model, profile, config or ScoringConfig(), lambda p: 1.0)


def recommend_subjective(
    matrix: PurchaseMatrix,
    model: SimilarityModel,
    profile: UserProfile,
    config: ScoringConfig | None = None,
) -> list[Recommendation]:
    config = config or ScoringConfig()
    prefs = PreferenceTable(matrix, model, profile.user_id, config)
    return _rank(model, profile, config, lambda p: prefs.gamma(p, config.depth_t))
