"""Command-line front end.

    sketchrec build       --events log.csv --model model.txt [--mode sketch --m auto]
    sketchrec recommend   --model model.txt --events log.csv --user u1 [--objective]
    sketchrec eval-sketch --seed 42
    sketchrec compare     --events log.csv --m 512

Settings can also come from a ``--config`` file of ``key=value`` lines using
the long flag names (``mode=sketch``, ``ranking-cap=10``); flags win.
Reports go to stdout as CSV, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path
from typing import Any, Sequence

from sketchrec.corpus import EventLogError, PurchaseMatrix, load_events, remap_products
from sketchrec.evaluation import (
    DEFAULT_MS,
    DEFAULT_NS,
    SKETCH_ERROR_HEADER,
    compare_models,
    sketch_error_report,
)
from sketchrec.scoring import ScoringConfig, recommend_objective, recommend_subjective
from sketchrec.similarity import NeighborPolicy, SimilarityModel, build_model, merge_similar_items
from sketchrec.sketch import auto_width

DEFAULTS: dict[str, Any] = {
    "mode": "exact",
    "m": "auto",
    "knn": None,
    "threshold": None,
    "depth": 1,
    "ranking_cap": None,
    "candidates": "neighbors",
    "top": 10,
    "merge": None,
    "seed": 0,
    "objective": False,
    "trials": 100,
    "grid_n": ",".join(map(str, DEFAULT_NS)),
    "grid_m": ",".join(map(str, DEFAULT_MS)),
    "skip_malformed": False,
}
_BOOL_KEYS = {"objective", "skip_malformed"}


class CliError(Exception):
    pass


def read_config(path: str | Path) -> dict[str, str]:
    values = {}
    for n, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise CliError(f"{path}:{n}: expected key=value")
        key = key.strip().replace("-", "_")
        if key not in DEFAULTS:
            raise CliError(f"{path}:{n}: unknown setting {key!r}")
        values[key] = value.strip()
    return values


def resolve(args: argparse.Namespace) -> dict[str, Any]:
    """Defaults, then the config file, then explicit flags."""
    settings = dict(DEFAULTS)
    if args.config:
        for key, value in read_config(args.config).items():
            settings[key] = value.lower() in ("1", "true", "yes") if key in _BOOL_KEYS else value
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None and value is not False:
            settings[key] = value
    if args.knn is not None:
        settings["threshold"] = None
    elif args.threshold is not None:
        settings["knn"] = None
    return settings


def neighbor_policy(settings: dict[str, Any]) -> NeighborPolicy:
    if settings["knn"] is not None and settings["threshold"] is not None:
        raise CliError("--knn and --threshold are mutually exclusive")
    if settings["threshold"] is not None:
        return NeighborPolicy.threshold(float(settings["threshold"]))
    return NeighborPolicy.knn(int(settings["knn"]) if settings["knn"] is not None else 20)


def scoring_config(settings: dict[str, Any]) -> ScoringConfig:
    cap = settings["ranking_cap"]
    return ScoringConfig(
        depth_t=int(settings["depth"]),
        ranking_cap=float(cap) if cap is not None else None,
        candidate_policy=settings["candidates"],
        top_n=int(settings["top"]),
    )


def sketch_width(settings: dict[str, Any], n_users: int) -> int:
    m = str(settings["m"])
    if m == "auto":
        return auto_width(n_users)
    if not m.isdigit() or int(m) < 1:
        raise CliError(f"--m must be a positive integer or 'auto', got {m!r}")
    return int(m)


def _load(settings: dict[str, Any], events: str) -> PurchaseMatrix:
    matrix, report = load_events(events, skip_malformed=bool(settings["skip_malformed"]))
    for err in report.errors:
        print(f"{events}: skipped {err}", file=sys.stderr)
    return matrix


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in str(text).split(",") if x.strip())


def cmd_build(settings: dict[str, Any], events: str, model_path: str) -> int:
    policy = neighbor_policy(settings)
    mode = settings["mode"]
    matrix = _load(settings, events)
    n_events = len(matrix.events)
    start = time.perf_counter()
    aliases: dict[str, str] = {}
    if settings["merge"] is not None:
        matrix, mapping = merge_similar_items(matrix, float(settings["merge"]))
        aliases = {orig: rep for orig, rep in mapping.items() if orig != rep}
    m = sketch_width(settings, len(matrix.users))
    matrix.freeze(m if mode == "sketch" else None)
    model = build_model(matrix, policy, mode)
    model.aliases = aliases
    elapsed = time.perf_counter() - start
    model.save(model_path)
    print("products,users,events,mode,policy,m,merged_items,pair_evaluations,build_seconds")
    print(
        f"{len(matrix.products)},{len(matrix.users)},{n_events},{mode},{policy},"
        f"{m if mode == 'sketch' else ''},{len(aliases)},{model.pair_evaluations},{elapsed:.6f}"
    )
    return 0


def cmd_recommend(settings: dict[str, Any], model_path: str, events: str, user: str) -> int:
    model = SimilarityModel.load(model_path)
    config = scoring_config(settings)
    matrix = _load(settings, events)
    if model.aliases:
        matrix = remap_products(matrix, model.aliases)
    profile = matrix.user_profile(user)
    if settings["objective"]:
        recs = recommend_objective(model, profile, config)
    else:
        recs = recommend_subjective(matrix, model, profile, config)
    for rank, r in enumerate(recs, start=1):
        print(f"{rank} {r.product_id} {r.score:.6f} {r.best_source_item}")
    return 0


def cmd_eval_sketch(settings: dict[str, Any]) -> int:
    rows = sketch_error_report(
        int(settings["seed"]),
        ns=_ints(settings["grid_n"]),
        ms=_ints(settings["grid_m"]),
        trials=int(settings["trials"]),
    )
    print(SKETCH_ERROR_HEADER)
    for row in rows:
        print(row.csv())
    return 0


def cmd_compare(settings: dict[str, Any], events: str) -> int:
    matrix = _load(settings, events)
    if settings["merge"] is not None:
        matrix, _ = merge_similar_items(matrix, float(settings["merge"]))
    m = sketch_width(settings, len(matrix.users))
    result = compare_models(
        matrix,
        neighbor_policy(settings),
        scoring_config(settings),
        objective=bool(settings["objective"]),
        sketch_m=m,
    )
    print("\n".join(result.csv_lines()))
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value settings file")
    common.add_argument("--events", help="purchase event log (CSV)")
    common.add_argument("--model", help="model file path")
    common.add_argument("--user", help="user id to recommend for")
    common.add_argument("--mode", choices=["exact", "sketch"])
    common.add_argument("--m", help="sketch width in bits, or 'auto' (|U|/10 rounded up to 2^k)")
    group = common.add_mutually_exclusive_group()
    group.add_argument("--knn", type=int, help="keep the k most similar items")
    group.add_argument("--threshold", type=float, help="keep items with similarity >= tau")
    common.add_argument("--depth", type=int, help="preference recursion depth (0-2)")
    common.add_argument("--ranking-cap", dest="ranking_cap", type=float)
    common.add_argument("--candidates", choices=["neighbors", "complement"])
    common.add_argument("--top", type=int)
    common.add_argument("--merge", type=float, help="merge items with Jaccard >= theta")
    common.add_argument("--seed", type=int)
    common.add_argument("--objective", action="store_true", help="rank by similarity alone")
    common.add_argument("--trials", type=int)
    common.add_argument("--grid-n", dest="grid_n")
    common.add_argument("--grid-m", dest="grid_m")
    common.add_argument("--skip-malformed", dest="skip_malformed", action="store_true")

    parser = argparse.ArgumentParser(prog="sketchrec", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("build", parents=[common], help="build and save a similarity model")
    sub.add_parser("recommend", parents=[common], help="print ranked recommendations")
    sub.add_parser("eval-sketch", parents=[common], help="sketch accuracy report")
    sub.add_parser("compare", parents=[common], help="exact vs sketch model agreement")
    return parser


def _require(value: str | None, flag: str) -> str:
    if not value:
        raise CliError(f"{flag} is required")
    return value


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = resolve(args)
        if args.command == "build":
            return cmd_build(settings, _require(args.events, "--events"), _require(args.model, "--model"))
        if args.command == "recommend":
            return cmd_recommend(
                settings,
                _require(args.model, "--model"),
                _require(args.events, "--events"),
                _require(args.user, "--user"),
            )
        if args.command == "eval-sketch":
            return cmd_eval_sketch(settings)
        return cmd_compare(settings, _require(args.events, "--events"))
    except (CliError, EventLogError, ValueError, KeyError, OSError) as err:
        print(f"sketchrec {args.command}: error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
