"""Item-item Jaccard similarity and the precomputed neighbour model.

The model is built off-line over all product pairs. In exact mode only pairs
that share at least one buyer are visited (found through a user -> products
index). In sketch mode a pair whose sketches share no set bit is skipped too:
unless their union saturates, the inclusion-exclusion intersection estimate
of such a pair is never positive, so nothing is lost.
"""

from __future__ import annotations

import heapq
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from sketchrec.corpus import ItemUserSet, PurchaseMatrix, remap_products
from sketchrec.sketch import LinearCountingSketch, estimate_jaccard, jaccard_from_estimates

MODEL_MAGIC = "sketchrec-model"
MODEL_VERSION = "v1"
MODES = ("exact", "sketch")


@dataclass(frozen=True)
class NeighborPolicy:
    kind: str
    k: int | None = None
    tau: float | None = None

    def __post_init__(self) -> None:
        if self.kind == "knn":
            if self.tau is not None or not isinstance(self.k, int) or self.k < 1:
                raise ValueError(f"knn policy needs a positive integer k, got {self.k!r}")
        elif self.kind == "threshold":
            if self.k is not None or self.tau is None or not 0.0 < self.tau <= 1.0:
                raise ValueError(f"threshold must lie in (0, 1], got {self.tau!r}")
        else:
            raise ValueError(f"unknown neighbour policy {self.kind!r}")

    @classmethod
    def knn(cls, k: int = 20) -> "NeighborPolicy":
        return cls("knn", k=k)

    @classmethod
    def threshold(cls, tau: float) -> "NeighborPolicy":
        return cls("threshold", tau=float(tau))

    @classmethod
    def parse(cls, text: str) -> "NeighborPolicy":
        kind, _, value = text.partition(":")
        if kind == "knn":
            return cls.knn(int(value))
        if kind == "threshold":
            return cls.threshold(float(value))
        raise ValueError(f"cannot parse neighbour policy {text!r}")

    def __str__(self) -> str:
        return f"knn:{self.k}" if self.kind == "knn" else f"threshold:{self.tau!r}"

    def select(self, scored: Iterable[tuple[str, float]]) -> list[tuple[str, float]]:
        """Keep the neighbours this policy admits, best first."""
        key = _rank_key
        if self.kind == "knn":
            return heapq.nsmallest(self.k, scored, key=key)
        return sorted(((q, s) for q, s in scored if s >= self.tau), key=key)


def _rank_key(pair: tuple[str, float]) -> tuple[float, str]:
    return (-pair[1], pair[0])


@dataclass
class SimilarityModel:
    neighbors: dict[str, list[tuple[str, float]]]
    policy: NeighborPolicy
    mode: str
    sketches: dict[str, LinearCountingSketch] | None = None
    aliases: dict[str, str] = field(default_factory=dict)
    pair_evaluations: int = 0

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        self._lookup = {p: dict(lst) for p, lst in self.neighbors.items()}

    @property
    def items(self) -> set[str]:
        return set(self.neighbors)

    def __contains__(self, product_id: object) -> bool:
        return product_id in self.neighbors

    def neighbors_of(self, p: str) -> list[tuple[str, float]]:
        try:
            return self.neighbors[p]
        except KeyError:
            raise KeyError(f"unknown product {p!r}") from None

    def similarity(self, p: str, q: str) -> float:
        """Stored J(p, q) from p's neighbour list; 1 for p == q, 0 if not listed."""
        if p not in self._lookup:
            raise KeyError(f"unknown product {p!r}")
        if p == q:
            return 1.0
        return self._lookup[p].get(q, 0.0)

    def representative(self, product_id: str) -> str:
        return self.aliases.get(product_id, product_id)

    def to_text(self) -> str:
        lines = [f"{MODEL_MAGIC} {MODEL_VERSION} mode={self.mode} policy={self.policy}"]
        for p in sorted(self.neighbors):
            _check_id(p)
            cells = " ".join(f"{q}={s:.6f}" for q, s in self.neighbors[p])
            lines.append(f"item {p} : {cells}".rstrip())
        for original in sorted(self.aliases):
            _check_id(original)
            lines.append(f"alias {original} {self.aliases[original]}")
        if self.sketches is not None:
            for p in sorted(self.sketches):
                lines.append(f"sketch {p} {self.sketches[p].to_text()}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "SimilarityModel":
        lines = text.splitlines()
        if not lines:
            raise ValueError("empty model file")
        header = lines[0].split()
        if len(header) != 4 or header[0] != MODEL_MAGIC or header[1] != MODEL_VERSION:
            raise ValueError(f"not a {MODEL_MAGIC} {MODEL_VERSION} file")
        mode = _header_field(header[2], "mode")
        policy = NeighborPolicy.parse(_header_field(header[3], "policy"))
        neighbors: dict[str, list[tuple[str, float]]] = {}
        aliases: dict[str, str] = {}
        sketches: dict[str, LinearCountingSketch] | None = {} if mode == "sketch" else None
        for n, line in enumerate(lines[1:], start=2):
            parts = line.split()
            if not parts:
                continue
            tag = parts[0]
            if tag == "item" and len(parts) >= 3 and parts[2] == ":":
                cells = []
                for cell in parts[3:]:
                    q, _, s = cell.rpartition("=")
                    cells.append((q, float(s)))
                neighbors[parts[1]] = cells
            elif tag == "alias" and len(parts) == 3:
                aliases[parts[1]] = parts[2]
            elif tag == "sketch" and len(parts) == 4 and sketches is not None:
                sketches[parts[1]] = LinearCountingSketch.from_hex(int(parts[2]), parts[3])
            else:
                raise ValueError(f"line {n}: unrecognised model line")
        return cls(neighbors, policy, mode, sketches, aliases)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "SimilarityModel":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))


def _header_field(token: str, name: str) -> str:
    key, sep, value = token.partition("=")
    if key != name or not sep:
        raise ValueError(f"model header missing {name}=")
    return value


def _check_id(product_id: str) -> None:
    if not product_id or any(ch.isspace() for ch in product_id) or "=" in product_id:
        raise ValueError(f"product id {product_id!r} cannot be written to a model file")


def exact_jaccard(matrix: PurchaseMatrix, p: str, c: str) -> float:
    a = matrix.buyers(p)
    b = matrix.buyers(c)
    inter = len(a & b)
    union = len(a) + len(b) - inter
    return inter / union if union else 0.0


def approx_jaccard(a: ItemUserSet, b: ItemUserSet) -> float:
    return estimate_jaccard(a.sketch, b.sketch)


def _exact_pair_scores(matrix: PurchaseMatrix) -> tuple[dict[str, dict[str, float]], int]:
    sizes = {p: len(col) for p, col in matrix.iter_columns()}
    by_user: dict[str, list[str]] = defaultdict(list)
    for p, col in matrix.iter_columns():
        for u in col:
            by_user[u].append(p)
    shared: dict[tuple[str, str], int] = defaultdict(int)
    for items in by_user.values():
        items = sorted(items)
        for i, p in enumerate(items):
            for q in items[i + 1 :]:
                shared[(p, q)] += 1
    scores: dict[str, dict[str, float]] = {p: {} for p in sizes}
    for (p, q), inter in shared.items():
        j = inter / (sizes[p] + sizes[q] - inter)
        scores[p][q] = j
        scores[q][p] = j
    return scores, len(shared)


def _sketch_pair_scores(matrix: PurchaseMatrix) -> tuple[dict[str, dict[str, float]], int]:
    items = sorted(matrix.products)
    sketches = {p: matrix.sketch(p) for p in items}
    est = {p: s.estimate().value for p, s in sketches.items()}
    scores: dict[str, dict[str, float]] = {p: {} for p in items}
    evaluated = 0
    for i, p in enumerate(items):
        sp = sketches[p]
        for q in items[i + 1 :]:
            sq = sketches[q]
            union = sp | sq
            if not sp.overlaps(sq) and union.zero_count > 0:
                continue
            evaluated += 1
            j = jaccard_from_estimates(est[p], est[q], union.estimate().value)
            if j > 0.0:
                scores[p][q] = j
                scores[q][p] = j
    return scores, evaluated


def build_model(
    matrix: PurchaseMatrix,
    policy: NeighborPolicy | None = None,
    mode: str = "exact",
) -> SimilarityModel:
    """Precompute every item's neighbour list under ``policy``.

    Lists are ordered by similarity descending, then product id ascending.
    Zero similarities are never stored.
    """
    policy = policy or NeighborPolicy.knn(20)
    if mode == "exact":
        scores, evaluated = _exact_pair_scores(matrix)
        sketches = None
    elif mode == "sketch":
        if not matrix.frozen:
            matrix.freeze()
        scores, evaluated = _sketch_pair_scores(matrix)
        sketches = {p: matrix.sketch(p) for p in sorted(matrix.products)}
    else:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    neighbors = {p: policy.select(scores[p].items()) for p in sorted(scores)}
    return SimilarityModel(neighbors, policy, mode, sketches, pair_evaluations=evaluated)


def neighbors_plus(model: SimilarityModel, p: str) -> set[str]:
    return {q for q, _ in model.neighbors_of(p)} | {p}


class _DisjointSet:
    def __init__(self, items: Iterable[str]) -> None:
        self.parent = {x: x for x in items}

    def find(self, x: str) -> str:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: str, b: str) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            # smallest id stays the root so it becomes the representative
            lo, hi = sorted((ra, rb))
            self.parent[hi] = lo


def merge_similar_items(
    matrix: PurchaseMatrix, theta: float = 0.95
) -> tuple[PurchaseMatrix, dict[str, str]]:
    """Collapse near-duplicate items into one summed column.

    Items are joined by single linkage over pairs with exact Jaccard >=
    ``theta``; each cluster becomes its lexicographically smallest member,
    whose column is the element-wise sum of the members' columns. Merging
    repeats until no pair reaches ``theta`` so a second call is a no-op.
    Returns the merged matrix and a mapping from every original id to its
    representative.
    """
    if not 0.0 < theta <= 1.0:
        raise ValueError(f"merge threshold must lie in (0, 1], got {theta!r}")
    mapping = {p: p for p in matrix.products}
    current = matrix
    while True:
        scores, _ = _exact_pair_scores(current)
        ds = _DisjointSet(current.products)
        merged_any = False
        for p, row in scores.items():
            for q, j in row.items():
                if p < q and j >= theta:
                    ds.union(p, q)
                    merged_any = True
        if not merged_any:
            return current, mapping
        step = {p: ds.find(p) for p in current.products}
        mapping = {orig: step[rep] for orig, rep in mapping.items()}
        current = remap_products(current, step)
