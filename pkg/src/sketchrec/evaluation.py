"""Accuracy harness: sketch estimates against exact sets, exact vs sketch models."""

from __future__ import annotations

import statistics
from dataclasses import dataclass

import numpy as np

from sketchrec.corpus import PurchaseMatrix
from sketchrec.rng import SplitMix64
from sketchrec.scoring import (
    ScoringConfig,
    recommend_objective,
    recommend_subjective,
)
from sketchrec.similarity import NeighborPolicy, SimilarityModel, build_model
from sketchrec.sketch import LinearCountingSketch, estimate_jaccard, fnv1a_64_matrix

DEFAULT_NS = (0, 100, 512, 1024, 2048, 4096)
DEFAULT_MS = (256, 1024, 4096)
_HEX = np.frombuffer(b"0123456789abcdef", dtype=np.uint8)


def hex_ids(values: np.ndarray) -> np.ndarray:
    """Render uint64 values as 16-char lowercase hex ids, one row of bytes each."""
    values = np.asarray(values, dtype=np.uint64)
    shifts = np.arange(60, -4, -4, dtype=np.uint64)
    nibbles = (values[:, None] >> shifts[None, :]) & np.uint64(0xF)
    return _HEX[nibbles.astype(np.intp)]


def random_user_hashes(rng: SplitMix64, n: int) -> np.ndarray:
    """FNV-1a hashes of ``n`` distinct random hex user ids."""
    values = np.unique(rng.batch(n))
    while len(values) < n:
        values = np.unique(np.concatenate([values, rng.batch(n - len(values))]))
    order = rng.batch(len(values)).argsort(kind="stable")
    return fnv1a_64_matrix(hex_ids(values[order][:n]))


@dataclass(frozen=True)
class SketchErrorRow:
    n: int
    m: int
    trials: int
    median_rel_err_cardinality: float
    mae_jaccard: float

    def csv(self) -> str:
        return (
            f"{self.n},{self.m},{self.trials},"
            f"{self.median_rel_err_cardinality:.6f},{self.mae_jaccard:.6f}"
        )


SKETCH_ERROR_HEADER = "n,m,trials,median_rel_err_cardinality,mae_jaccard"


def cardinality_rel_error(estimate: float, n: int) -> float:
    if n == 0:
        return 0.0 if estimate == 0.0 else float("inf")
    return abs(estimate - n) / n


def sketch_error_row(rng: SplitMix64, n: int, m: int, trials: int) -> SketchErrorRow:
    """One grid cell.

    Cardinality: ``n`` distinct users per trial. Jaccard: two sets of ``n``
    users sharing ``n // 2`` of them.
    """
    rel_errs = []
    jac_errs = []
    shared = n // 2
    for _ in range(trials):
        hashes = random_user_hashes(rng, 2 * n - shared)
        a_h, b_h = hashes[:n], hashes[n - shared :]
        a = LinearCountingSketch.from_hashes(m, a_h)
        b = LinearCountingSketch.from_hashes(m, b_h)
        rel_errs.append(cardinality_rel_error(a.estimate().value, n))
        truth = shared / (2 * n - shared) if n else 0.0
        jac_errs.append(abs(estimate_jaccard(a, b) - truth))
    return SketchErrorRow(
        n, m, trials, statistics.median(rel_errs) if rel_errs else 0.0,
        statistics.fmean(jac_errs) if jac_errs else 0.0,
    )


def sketch_error_report(
    seed: int,
    ns: tuple[int, ...] = DEFAULT_NS,
    ms: tuple[int, ...] = DEFAULT_MS,
    trials: int = 100,
) -> list[SketchErrorRow]:
    root = SplitMix64(seed)
    rows = []
    for m in ms:
        for n in ns:
            rows.append(sketch_error_row(root.spawn(), n, m, trials))
    return rows


def _set_jaccard(a: set[str], b: set[str]) -> float:
    union = len(a | b)
    return len(a & b) / union if union else 1.0


@dataclass
class Comparison:
    neighbor_overlap: dict[str, float]
    users: int
    top1_agreement: float
    top1_agreement_strict: float
    sketch_m: int

    @property
    def mean_neighbor_overlap(self) -> float:
        vals = list(self.neighbor_overlap.values())
        return statistics.fmean(vals) if vals else 1.0

    def csv_lines(self) -> list[str]:
        lines = ["section,key,value"]
        for p in sorted(self.neighbor_overlap):
            lines.append(f"neighbor_overlap,{p},{self.neighbor_overlap[p]:.6f}")
        lines.append(f"summary,users,{self.users}")
        lines.append(f"summary,sketch_m,{self.sketch_m}")
        lines.append(f"summary,mean_neighbor_overlap,{self.mean_neighbor_overlap:.6f}")
        lines.append(f"summary,top1_agreement,{self.top1_agreement:.6f}")
        lines.append(f"summary,top1_agreement_strict,{self.top1_agreement_strict:.6f}")
        return lines


def _scores(
    matrix: PurchaseMatrix,
    model: SimilarityModel,
    user: str,
    config: ScoringConfig,
    objective: bool,
) -> dict[str, float]:
    """Score of every recommendable candidate under ``model`` (no top-n cut)."""
    uncut = ScoringConfig(config.depth_t, config.ranking_cap, config.candidate_policy, 1 << 30)
    profile = matrix.user_profile(user)
    if objective:
        recs = recommend_objective(model, profile, uncut)
    else:
        recs = recommend_subjective(matrix, model, profile, uncut)
    return {r.product_id: r.score for r in recs}


def compare_models(
    matrix: PurchaseMatrix,
    policy: NeighborPolicy,
    config: ScoringConfig,
    *,
    objective: bool = False,
    sketch_m: int | None = None,
) -> Comparison:
    """Build exact and sketch models over ``matrix`` and measure agreement.

    Top-1 agreement counts a user when the sketch model's first pick is also
    an argmax under the exact model (its exact score equals the exact best);
    exact ties are otherwise broken by id alone, which the sketch cannot see.
    The strict variant requires the identical item.
    """
    if not matrix.frozen:
        matrix.freeze(sketch_m)
    exact = build_model(matrix, policy, "exact")
    approx = build_model(matrix, policy, "sketch")
    overlap = {
        p: _set_jaccard({q for q, _ in exact.neighbors[p]}, {q for q, _ in approx.neighbors[p]})
        for p in sorted(exact.neighbors)
    }
    users = sorted(matrix.users)
    agree = strict = counted = 0
    for u in users:
        exact_scores = _scores(matrix, exact, u, config, objective)
        approx_scores = _scores(matrix, approx, u, config, objective)
        if not exact_scores and not approx_scores:
            continue
        counted += 1
        if not exact_scores or not approx_scores:
            continue
        best_exact = min(exact_scores.items(), key=lambda kv: (-kv[1], kv[0]))
        best_approx = min(approx_scores.items(), key=lambda kv: (-kv[1], kv[0]))
        if best_exact[0] == best_approx[0]:
            strict += 1
            agree += 1
        else:
            exact_of_pick = exact_scores.get(best_approx[0], 0.0)
            if abs(exact_of_pick - best_exact[1]) <= 1e-12 * max(1.0, best_exact[1]):
                agree += 1
    return Comparison(
        overlap,
        counted,
        agree / counted if counted else 1.0,
        strict / counted if counted else 1.0,
        matrix.sketch_m or 0,
    )

