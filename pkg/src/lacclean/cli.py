"""Command-line pipeline: synth | clean | score | report.

Subcommands compose through files only; there is no hidden state between
invocations. Every flag can also be supplied via a JSON config file
(--config), with explicit flags taking precedence; environment variables
are never consulted. All outputs are written atomically (temp file +
rename) so an interrupted run cannot leave a corrupt artifact.

Exit codes: 0 success, 1 malformed configuration, 2 missing or unreadable
input file, 3 input format error (reported with file and line). Errors go
to stderr, never into data outputs.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
import time
from pathlib import Path

from . import __version__
from .cluster import ClusterParams, Linkage, clean_dataset
from .errors import LacCleanError, MalformedRow, WorldMismatch
from .geo import Metric
from .ingest import extract_unique_cells, parse_trace
from .models import CellSet
from .report import (
    clean_result_from_rows,
    coverage_series,
    coverage_to_dict,
    export_csv,
    export_geojson,
    parse_export_csv,
    render_cells_scatter,
    render_scatter,
    retention_stats,
    retention_to_dict,
)
from .resolver import MatchPolicy, load_cell_db, resolve_all
from .synth import (
    BoundingBox,
    OutlierSpec,
    export_trace_csv,
    export_world_db,
    generate_topology,
    generate_trace,
    inject_outliers,
    score_detection,
    world_from_dict,
    world_to_dict,
)

METRIC_NAMES = {
    "equirect": Metric.EQUIRECT_M,
    "haversine": Metric.HAVERSINE_M,
    "degrees": Metric.DEGREES_EUCLID,
}
POLICY_NAMES = {
    "exact": MatchPolicy.EXACT_ONLY,
    "wildcard": MatchPolicy.ALLOW_WILDCARD,
}


class ConfigError(Exception):
    pass


class FormatError(Exception):
    def __init__(self, path: str, line_no: int, reason: str):
        super().__init__(f"{path}:{line_no}: {reason}")


class _Parser(argparse.ArgumentParser):
    """Raises instead of exiting so main() controls exit codes."""

    def error(self, message):
        raise ConfigError(message)


CLEAN_DEFAULTS = {
    "trace": None,
    "cell_db": None,
    "out": None,
    "linkage": "centroid",
    "metric": "equirect",
    "cutoff": 35000.0,
    "min_size": 10,
    "policy": "wildcard",
    "lenient": False,
    "coverage_window": 100,
}

SYNTH_DEFAULTS = {
    "out": None,
    "lacs": 14,
    "cells_per_lac": 22,
    "cell_radius": 150.0,
    "region": [40.0, 48.0, -80.0, -70.0],
    "outlier_rate": 0.1,
    "displacement_min": 50000.0,
    "displacement_max": 60000.0,
    "events": 5000,
    "seed": 42,
}

SCORE_DEFAULTS = {"cleaned": None, "world": None, "out": None}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lacclean", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"lacclean {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("synth", parents=[], help="generate a synthetic GSM world")
    ps.add_argument("--config", help="JSON config file; flags override it")
    ps.add_argument("--out", help="output directory")
    ps.add_argument("--lacs", type=int)
    ps.add_argument("--cells-per-lac", type=int, dest="cells_per_lac")
    ps.add_argument("--cell-radius", type=float, dest="cell_radius", help="meters")
    ps.add_argument("--region", type=float, nargs=4,
                    metavar=("LATMIN", "LATMAX", "LONMIN", "LONMAX"))
    ps.add_argument("--outlier-rate", type=float, dest="outlier_rate")
    ps.add_argument("--displacement-min", type=float, dest="displacement_min")
    ps.add_argument("--displacement-max", type=float, dest="displacement_max")
    ps.add_argument("--events", type=int, help="trace length")
    ps.add_argument("--seed", type=int)
    ps.set_defaults(func=cmd_synth)

    pc = sub.add_parser("clean", help="resolve, cluster and clean a trace")
    pc.add_argument("--config", help="JSON config file; flags override it")
    pc.add_argument("--trace", help="trace CSV")
    pc.add_argument("--cell-db", dest="cell_db", help="cell database CSV")
    pc.add_argument("--out", help="output directory")
    pc.add_argument("--linkage", choices=sorted(l.value for l in Linkage))
    pc.add_argument("--metric", choices=sorted(METRIC_NAMES))
    pc.add_argument("--cutoff", type=float, help="in the active metric's units")
    pc.add_argument("--min-size", type=int, dest="min_size")
    pc.add_argument("--policy", choices=sorted(POLICY_NAMES))
    pc.add_argument("--lenient", action=argparse.BooleanOptionalAction, default=None,
                    help="skip malformed trace rows instead of aborting")
    pc.add_argument("--coverage-window", type=int, dest="coverage_window")
    pc.set_defaults(func=cmd_clean)

    pr = sub.add_parser("score", help="score a cleaned run against a world manifest")
    pr.add_argument("--config", help="JSON config file; flags override it")
    pr.add_argument("--cleaned", help="cleaned.csv from a clean run")
    pr.add_argument("--world", help="world.json manifest")
    pr.add_argument("--out", help="score JSON path (default: stdout)")
    pr.set_defaults(func=cmd_score)

    pt = sub.add_parser("report", help="standalone retention arithmetic")
    pt.add_argument("--retention", type=int, nargs=3, required=True,
                    metavar=("TOTAL", "RESOLVED", "RETAINED"))
    pt.add_argument("--claimed-retained-pct", type=float, dest="claimed_retained_pct")
    pt.set_defaults(func=cmd_report)

    return parser


def _merge_config(args, defaults: dict) -> dict:
    cfg = dict(defaults)
    config_path = getattr(args, "config", None)
    if config_path:
        try:
            raw = _read_input(config_path)
        except FileNotFoundError:
            # a named-but-missing config is a configuration problem
            raise ConfigError(f"config file not found: {config_path}") from None
        try:
            loaded = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if not isinstance(loaded, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(loaded) - set(defaults)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(loaded)
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


def _require(cfg: dict, *keys: str):
    missing = [k for k in keys if cfg.get(k) in (None, "")]
    if missing:
        raise ConfigError(f"missing required settings: {', '.join(missing)}")


def _read_input(path: str) -> bytes:
    with open(path, "rb") as f:
        return f.read()


def _write_atomic(path: Path, data: bytes):
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _json_bytes(obj) -> bytes:
    return (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode("utf-8")


def cmd_synth(args) -> int:
    cfg = _merge_config(args, SYNTH_DEFAULTS)
    _require(cfg, "out")
    try:
        region = BoundingBox(*cfg["region"])
        spec = OutlierSpec(cfg["outlier_rate"], cfg["displacement_min"],
                           cfg["displacement_max"])
        world = generate_topology(
            cfg["lacs"], cfg["cells_per_lac"], cfg["cell_radius"],
            region, cfg["seed"],
        )
        world = inject_outliers(world, spec, cfg["seed"] + 1)
        events = generate_trace(world, cfg["events"], cfg["seed"] + 2)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None

    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    _write_atomic(out / "cells.csv", export_world_db(world))
    _write_atomic(out / "trace.csv", export_trace_csv(events))
    # config echo omits the output path so identical worlds written to
    # different directories stay byte-identical
    echo = {k: v for k, v in cfg.items() if k != "out"}
    manifest = {"config": echo, "world": world_to_dict(world)}
    _write_atomic(out / "world.json", _json_bytes(manifest))
    print(
        f"world: {len(world.lacs)} LACs, {sum(len(l.cells) for l in world.lacs)} cells, "
        f"{sum(1 for c in world.all_cells() if c.label == 'outlier')} injected outliers",
        file=sys.stderr,
    )
    return 0


def cmd_clean(args) -> int:
    cfg = _merge_config(args, CLEAN_DEFAULTS)
    _require(cfg, "trace", "cell_db", "out")
    try:
        params = ClusterParams(
            linkage=Linkage(cfg["linkage"]),
            cutoff=float(cfg["cutoff"]),
            min_size=int(cfg["min_size"]),
            metric=METRIC_NAMES[cfg["metric"]],
        )
        policy = POLICY_NAMES[cfg["policy"]]
        window = int(cfg["coverage_window"])
        if window < 1:
            raise ValueError("coverage_window must be >= 1")
    except (KeyError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    if cfg["metric"] == "degrees" and getattr(args, "cutoff", None) is None and "cutoff" not in _loaded_keys(args):
        print(
            "warning: degrees metric with the default 35000 cutoff merges "
            "everything; pass --cutoff in degree units",
            file=sys.stderr,
        )

    timings: dict[str, float] = {}
    t0 = time.perf_counter()
    trace_bytes = _read_input(cfg["trace"])
    try:
        parsed = parse_trace(trace_bytes, lenient=bool(cfg["lenient"]))
    except MalformedRow as exc:
        raise FormatError(cfg["trace"], exc.line_no, exc.reason) from None
    cells = extract_unique_cells(parsed.events)
    timings["parse"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    db_bytes = _read_input(cfg["cell_db"])
    try:
        db = load_cell_db(db_bytes)
    except MalformedRow as exc:
        raise FormatError(cfg["cell_db"], exc.line_no, exc.reason) from None
    resolved, unresolved, rstats = resolve_all(db, cells, policy)
    timings["resolve"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    result = clean_dataset(resolved, params)
    timings["clean"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    retention = retention_stats(rstats.total, rstats.resolved, result.stats.retained)
    retained_cells = CellSet.from_iterable(
        rc.cell for lr in result.per_lac for rc in lr.representative
    )
    coverage = coverage_series(
        parsed.events, [rc.cell for rc in resolved], retained_cells, window
    )
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    _write_atomic(out / "cleaned.geojson", export_geojson(result))
    _write_atomic(out / "cleaned.csv", export_csv(result))
    retention_doc = {
        "retention": retention_to_dict(retention),
        "resolution": {
            "total": rstats.total,
            "resolved": rstats.resolved,
            "unresolved": rstats.unresolved,
            "wildcard_ambiguous": rstats.wildcard_ambiguous,
        },
        "cleaning": {
            "retained": result.stats.retained,
            "outliers": result.stats.outliers,
            "insufficient": result.stats.insufficient,
            "lacs": result.stats.lacs,
            "lacs_ok": result.stats.lacs_ok,
            "lacs_insufficient": result.stats.lacs_insufficient,
        },
        # dense clusters thrown away by the single-representative rule;
        # listed so the loss is observable
        "discarded_dense": [
            {"lac": lr.lac, "size": len(cl)}
            for lr in result.per_lac
            for cl in lr.discarded_dense
        ],
        "skipped_trace_rows": len(parsed.skipped),
    }
    _write_atomic(out / "retention.json", _json_bytes(retention_doc))
    _write_atomic(out / "coverage.json", _json_bytes(coverage_to_dict(coverage)))
    _write_atomic(out / "scatter_before.svg", render_cells_scatter(resolved))
    _write_atomic(out / "scatter_after.svg", render_scatter(result))
    timings["report"] = time.perf_counter() - t0

    manifest = {
        "tool": "lacclean",
        "version": __version__,
        "subcommand": "clean",
        "config": cfg,
        "outputs": [
            "cleaned.geojson", "cleaned.csv", "retention.json",
            "coverage.json", "scatter_before.svg", "scatter_after.svg",
        ],
        "timings_s": {k: round(v, 6) for k, v in timings.items()},
    }
    _write_atomic(out / "manifest.json", _json_bytes(manifest))
    print(
        f"cleaned: {rstats.total} cells -> {rstats.resolved} resolved -> "
        f"{result.stats.retained} retained "
        f"({result.stats.outliers} outliers, {result.stats.insufficient} insufficient)",
        file=sys.stderr,
    )
    return 0


def _loaded_keys(args) -> set:
    config_path = getattr(args, "config", None)
    if not config_path:
        return set()
    try:
        loaded = json.loads(_read_input(config_path))
        return set(loaded) if isinstance(loaded, dict) else set()
    except (OSError, json.JSONDecodeError):
        return set()


def cmd_score(args) -> int:
    cfg = _merge_config(args, SCORE_DEFAULTS)
    _require(cfg, "cleaned", "world")
    cleaned_bytes = _read_input(cfg["cleaned"])
    try:
        rows = parse_export_csv(cleaned_bytes)
    except MalformedRow as exc:
        raise FormatError(cfg["cleaned"], exc.line_no, exc.reason) from None
    world_bytes = _read_input(cfg["world"])
    try:
        data = json.loads(world_bytes)
        world = world_from_dict(data.get("world", data))
    except json.JSONDecodeError as exc:
        raise FormatError(cfg["world"], exc.lineno, exc.msg) from None
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(cfg["world"], 0, f"bad world manifest: {exc}") from None
    result = clean_result_from_rows(rows)
    precision, recall = score_detection(result, world)
    doc = {
        "precision": precision,
        "recall": recall,
        "flagged": result.stats.outliers,
        "true_outliers": sum(
            1 for label in world.truth().values() if label == "outlier"
        ),
    }
    payload = _json_bytes(doc)
    if cfg.get("out"):
        _write_atomic(Path(cfg["out"]), payload)
    else:
        sys.stdout.write(payload.decode("utf-8"))
    return 0


def cmd_report(args) -> int:
    total, resolved, retained = args.retention
    table = retention_stats(total, resolved, retained, args.claimed_retained_pct)
    sys.stdout.write(_json_bytes(retention_to_dict(table)).decode("utf-8"))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"lacclean: configuration error: {exc}", file=sys.stderr)
        return 1
    except FormatError as exc:
        print(f"lacclean: format error: {exc}", file=sys.stderr)
        return 3
    except WorldMismatch as exc:
        print(f"lacclean: WorldMismatch: {exc}", file=sys.stderr)
        return 3
    except LacCleanError as exc:
        print(f"lacclean: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"lacclean: cannot read or write file: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
