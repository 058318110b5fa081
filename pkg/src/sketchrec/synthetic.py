"""Seeded synthetic purchase logs for the evaluation harness and tests."""

from __future__ import annotations

from datetime import datetime, timedelta, timezone

from sketchrec.corpus import PurchaseEvent, PurchaseMatrix
from sketchrec.rng import SplitMix64

_EPOCH = datetime(2024, 1, 1, tzinfo=timezone.utc)


def user_name(i: int) -> str:
    return f"u{i:05d}"


def item_name(i: int) -> str:
    return f"p{i:04d}"


def synthetic_events(
    n_users: int,
    n_items: int,
    seed: int,
    *,
    n_clusters: int | None = None,
    max_items_per_user: int = 6,
    affinity: float = 0.75,
    max_quantity: int = 5,
) -> list[PurchaseEvent]:
    """Clustered purchase log.

    Items are dealt round-robin into clusters and every user has a home
    cluster; each purchase comes from the home cluster with probability
    ``affinity`` and from the whole catalogue otherwise. Quantities are
    geometric-ish in ``[1, max_quantity]``.
    """
    if n_users < 1 or n_items < 1:
        raise ValueError("need at least one user and one item")
    rng = SplitMix64(seed)
    n_clusters = n_clusters or max(1, n_items // 5)
    clusters = [[i for i in range(n_items) if i % n_clusters == c] for c in range(n_clusters)]
    events = []
    tick = 0
    for u in range(n_users):
        home = clusters[rng.below(n_clusters)]
        for _ in range(1 + rng.below(max_items_per_user)):
            if rng.random() < affinity:
                item = home[rng.below(len(home))]
            else:
                item = rng.below(n_items)
            qty = 1
            while qty < max_quantity and rng.random() < 0.35:
                qty += 1
            events.append(
                PurchaseEvent(_EPOCH + timedelta(seconds=tick), user_name(u), item_name(item), qty)
            )
            tick += 1
    return events


def synthetic_matrix(n_users: int, n_items: int, seed: int, **kwargs) -> PurchaseMatrix:
    matrix = PurchaseMatrix()
    for e in synthetic_events(n_users, n_items, seed, **kwargs):
        matrix.record_event(e.user_id, e.product_id, e.quantity, e.timestamp)
    return matrix
