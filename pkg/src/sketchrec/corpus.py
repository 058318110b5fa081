"""Purchase matrix, user profiles and per-item buyer sets.

The matrix is sparse: only positive counts are stored. For every product we
keep both the exact set of buyers and a linear-counting sketch of it, so the
approximation error can always be measured against the truth.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Iterator

from sketchrec.sketch import LinearCountingSketch, auto_width

EVENT_HEADER = "timestamp,user_id,product_id,quantity"
_QUANTITY_RE = re.compile(r"[0-9]+")
_EPOCH_RE = re.compile(r"-?[0-9]+")


class EventLogError(ValueError):
    def __init__(self, line: int, message: str) -> None:
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.message = message


@dataclass(frozen=True)
class PurchaseEvent:
    timestamp: datetime | None
    user_id: str
    product_id: str
    quantity: int


@dataclass
class UserProfile:
    user_id: str
    purchased: dict[str, int] = field(default_factory=dict)

    @property
    def items(self) -> set[str]:
        return set(self.purchased)

    def __contains__(self, product_id: object) -> bool:
        return product_id in self.purchased

    def __len__(self) -> int:
        return len(self.purchased)


@dataclass(frozen=True)
class ItemUserSet:
    product_id: str
    exact_users: frozenset[str]
    sketch: LinearCountingSketch


class PurchaseMatrix:
    """Sparse product x user purchase counts.

    ``sketch_m=None`` defers the sketch width until :meth:`freeze`, which then
    picks the next power of two >= |U| / 10. With an explicit width the
    sketches are maintained on every event.
    """

    def __init__(self, sketch_m: int | None = None) -> None:
        if sketch_m is not None and sketch_m < 1:
            raise ValueError(f"sketch width must be positive, got {sketch_m}")
        self.sketch_m = sketch_m
        self.events: list[PurchaseEvent] = []
        self._columns: dict[str, dict[str, int]] = {}
        self._rows: dict[str, dict[str, int]] = {}
        self._sketches: dict[str, LinearCountingSketch] = {}
        self.frozen = False

    def record_event(
        self,
        user_id: str,
        product_id: str,
        quantity: int = 1,
        timestamp: datetime | None = None,
    ) -> None:
        if self.frozen:
            raise RuntimeError("purchase matrix is frozen")
        if not user_id or not product_id:
            raise ValueError("user and product ids must be non-empty")
        if isinstance(quantity, bool) or not isinstance(quantity, int) or quantity < 1:
            raise ValueError(f"quantity must be a positive integer, got {quantity!r}")
        column = self._columns.setdefault(product_id, {})
        first_purchase = user_id not in column
        column[user_id] = column.get(user_id, 0) + quantity
        row = self._rows.setdefault(user_id, {})
        row[product_id] = row.get(product_id, 0) + quantity
        if self.sketch_m is not None and first_purchase:
            sketch = self._sketches.get(product_id)
            if sketch is None:
                sketch = self._sketches[product_id] = LinearCountingSketch(self.sketch_m)
            sketch.insert(user_id)
        self.events.append(PurchaseEvent(timestamp, user_id, product_id, quantity))

    def freeze(self, sketch_m: int | None = None) -> "PurchaseMatrix":
        """Stop accepting events and make sure every item has a sketch."""
        if sketch_m is not None and self.sketch_m is not None and sketch_m != self.sketch_m:
            raise ValueError(f"matrix already sketched with m={self.sketch_m}")
        if self.sketch_m is None:
            self.sketch_m = sketch_m if sketch_m is not None else auto_width(len(self._rows))
            self._sketches = {
                p: LinearCountingSketch.from_users(self.sketch_m, sorted(col))
                for p, col in self._columns.items()
            }
        self.frozen = True
        return self

    @property
    def products(self) -> set[str]:
        return set(self._columns)

    @property
    def users(self) -> set[str]:
        return set(self._rows)

    @property
    def entries(self) -> dict[tuple[str, str], int]:
        return {(p, u): q for p, col in self._columns.items() for u, q in col.items()}

    def quantity(self, product_id: str, user_id: str) -> int:
        return self._columns.get(product_id, {}).get(user_id, 0)

    def column(self, product_id: str) -> dict[str, int]:
        return dict(self._columns.get(product_id, {}))

    def buyers(self, product_id: str) -> frozenset[str]:
        return frozenset(self._columns.get(product_id, ()))

    def user_profile(self, user_id: str) -> UserProfile:
        return UserProfile(user_id, dict(self._rows.get(user_id, {})))

    def sketch(self, product_id: str) -> LinearCountingSketch:
        if self.sketch_m is None:
            raise RuntimeError("sketch width not resolved yet; call freeze()")
        sketch = self._sketches.get(product_id)
        return sketch if sketch is not None else LinearCountingSketch(self.sketch_m)

    def item_users(self, product_id: str) -> ItemUserSet:
        return ItemUserSet(product_id, self.buyers(product_id), self.sketch(product_id))

    def normalized_quantity(self, product_id: str, user_id: str) -> float:
        """Quantity relative to the mean quantity among the item's buyers."""
        column = self._columns.get(product_id)
        if not column or user_id not in column:
            return 0.0
        return column[user_id] * len(column) / sum(column.values())

    def iter_columns(self) -> Iterator[tuple[str, dict[str, int]]]:
        for p in sorted(self._columns):
            yield p, self._columns[p]

    def __repr__(self) -> str:
        return (
            f"PurchaseMatrix(products={len(self._columns)}, users={len(self._rows)}, "
            f"events={len(self.events)}, sketch_m={self.sketch_m})"
        )


def parse_timestamp(text: str) -> datetime:
    if _EPOCH_RE.fullmatch(text):
        return datetime.fromtimestamp(int(text), tz=timezone.utc)
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    return datetime.fromisoformat(text)


def parse_event_row(line_no: int, line: str) -> PurchaseEvent:
    fields = line.split(",")
    if len(fields) != 4:
        raise EventLogError(line_no, f"expected 4 fields, got {len(fields)}")
    ts_text, user_id, product_id, qty_text = (f.strip() for f in fields)
    if not user_id or not product_id:
        raise EventLogError(line_no, "empty user or product id")
    try:
        timestamp = parse_timestamp(ts_text)
    except ValueError:
        raise EventLogError(line_no, f"bad timestamp {ts_text!r}") from None
    if not _QUANTITY_RE.fullmatch(qty_text) or int(qty_text) < 1:
        raise EventLogError(line_no, f"quantity must be a positive integer, got {qty_text!r}")
    return PurchaseEvent(timestamp, user_id, product_id, int(qty_text))


@dataclass
class LoadReport:
    applied: int = 0
    errors: list[EventLogError] = field(default_factory=list)

    @property
    def skipped(self) -> int:
        return len(self.errors)


def read_events(
    lines: Iterable[str], report: LoadReport, skip_malformed: bool = False
) -> Iterator[PurchaseEvent]:
    for line_no, raw in enumerate(lines, start=1):
        line = raw.rstrip("\r\n")
        if line_no == 1:
            if line.strip() != EVENT_HEADER:
                raise EventLogError(1, f"expected header {EVENT_HEADER!r}")
            continue
        if not line.strip():
            continue
        try:
            yield parse_event_row(line_no, line)
        except EventLogError as err:
            if not skip_malformed:
                raise
            report.errors.append(err)


def load_events(
    path: str | Path,
    matrix: PurchaseMatrix | None = None,
    *,
    skip_malformed: bool = False,
) -> tuple[PurchaseMatrix, LoadReport]:
    """Apply every row of an event log to ``matrix`` in file order.

    Malformed rows raise :class:`EventLogError` unless ``skip_malformed`` is
    set, in which case they are collected in the returned report.
    """
    matrix = PurchaseMatrix() if matrix is None else matrix
    report = LoadReport()
    with open(path, encoding="utf-8", newline="") as fh:
        for event in read_events(fh, report, skip_malformed):
            matrix.record_event(event.user_id, event.product_id, event.quantity, event.timestamp)
            report.applied += 1
    return matrix, report


def format_timestamp(ts: datetime | None) -> str:
    if ts is None:
        return "0"
    return ts.isoformat()


def write_events(path: str | Path, events: Iterable[PurchaseEvent]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(EVENT_HEADER + "\n")
        for e in events:
            fh.write(f"{format_timestamp(e.timestamp)},{e.user_id},{e.product_id},{e.quantity}\n")


def remap_products(matrix: PurchaseMatrix, mapping: dict[str, str]) -> PurchaseMatrix:
    """Replay ``matrix``'s events with product ids translated through ``mapping``.

    Columns mapped to the same id are summed element-wise.
    """
    out = PurchaseMatrix(matrix.sketch_m)
    for e in matrix.events:
        out.record_event(e.user_id, mapping.get(e.product_id, e.product_id), e.quantity, e.timestamp)
    if matrix.frozen:
        out.freeze()
    return out
