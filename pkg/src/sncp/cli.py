"""Command-line front end: detect, critval, simulate, benchmark.

Output documents are JSON with sorted keys so identical runs produce
byte-identical files.  Exit code 0 covers every successful run including
"no change-points found"; argument errors exit 2, operational failures 1.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import warnings

import numpy as np

from .core import TimeSeries, relative_changepoints
from .critical_values import (
    CACHE_ENV_VAR,
    CriticalValueTable,
    ThresholdNotFound,
    builtin_table,
    cache_path_from_env,
    load_table,
    lookup,
    save_table,
    simulate_threshold,
    table_key,
)
from .dgp import get_preset, list_presets, run_experiment, generate
from .functionals import parse_functional
from .refinement import RefinementConfig, attribute_features, refine
from .segmentation import DetectionConfig, detect

_FAMILY_BY_METHOD = {
    # sncp/snwbs/snsbs maximize over many windows and share the nested
    # thresholds; classical binary segmentation tests one full-interval
    # statistic per segment (single_cp family), and the pure local-window
    # method has its own limit family.
    "sncp": "nested",
    "snbs": "single_cp",
    "snwbs": "nested",
    "snsbs": "nested",
    "snlocal": "local",
}


class CliError(Exception):
    """Operational failure with a user-facing message (exit code 1)."""


def _read_csv(path: str, header: bool) -> np.ndarray:
    rows: list[list[float]] = []
    width = None
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if header and lineno == 1:
                continue
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            try:
                vals = [float(cell) for cell in row]
            except ValueError as exc:
                raise CliError(f"{path}:{lineno}: {exc}") from exc
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise CliError(f"{path}:{lineno}: expected {width} columns, got {len(vals)}")
            rows.append(vals)
    if not rows:
        raise CliError(f"{path}: no data rows")
    return np.asarray(rows)


def _write_csv(path: str, data: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in np.atleast_2d(data):
            writer.writerow([repr(float(x)) for x in row])


def _write_doc(doc: dict, path: str | None) -> None:
    payload = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    if path:
        with open(path, "w") as fh:
            fh.write(payload)
    else:
        sys.stdout.write(payload)


def _load_cache(path: str | None) -> CriticalValueTable:
    table = builtin_table()
    cache = path or cache_path_from_env()
    if cache and os.path.exists(cache):
        try:
            table = table.merged_with(load_table(cache))
        except ValueError as exc:
            raise CliError(str(exc)) from exc
    return table


def _resolve_threshold(args, table: CriticalValueTable, d: int, method: str) -> tuple[float, str]:
    if args.threshold is not None:
        return float(args.threshold), "explicit"
    family = _FAMILY_BY_METHOD[method]
    try:
        return lookup(table, args.epsilon, d, args.level, family), family
    except ThresholdNotFound as exc:
        raise CliError(
            f"{exc}  (hint: run `sncp critval simulate --family {family} "
            f"--epsilon {args.epsilon} --d {d} --level {args.level} --save`, "
            f"or pass --threshold explicitly)"
        ) from exc


def _cmd_detect(args) -> int:
    data = _read_csv(args.input, args.header)
    series = TimeSeries(data)
    spec = parse_functional(args.functional)
    table = _load_cache(args.cache)
    d = spec.output_dim(series.p)
    threshold, family = _resolve_threshold(args, table, d, args.method)
    config = DetectionConfig(
        functional=spec,
        threshold=threshold,
        epsilon=args.epsilon,
        method=args.method,
        intervals=args.intervals,
        decay=args.decay,
        seed=args.seed,
    )
    notes: list[str] = []
    h = config.window_size(series.n)
    if series.n < 2 * h:
        notes.append(f"series shorter than 2h = {2 * h}; detection stops immediately")
    result = detect(series, config)
    doc = {
        "command": "detect",
        "config": {
            "input": args.input,
            "functional": spec.encode(),
            "epsilon": args.epsilon,
            "level": args.level,
            "threshold": threshold,
            "threshold_source": family,
            "method": args.method,
            "seed": args.seed,
            "jobs": args.jobs,
            "header": bool(args.header),
            "rng": "numpy PCG64 via SeedSequence",
        },
        "n": series.n,
        "p": series.p,
        "window_size": h,
        "changepoints": list(result.changepoints.points),
        "relative": relative_changepoints(result.changepoints),
        "records": [
            {
                "k": r.k,
                "stat": r.stat,
                "window": [r.window.t1, r.window.t2] if r.window else None,
                "segment": [r.segment.t1, r.segment.t2],
            }
            for r in result.records
        ],
        "notes": notes,
    }
    if args.refine:
        rconf = RefinementConfig(functional=spec, epsilon=args.epsilon, trim=args.trim)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            refined = refine(series, result.changepoints, rconf)
        doc["refined"] = list(refined.points)
        doc["refine_warnings"] = sorted(str(w.message) for w in caught)
        doc["trim"] = rconf.resolve_trim(series.n)
        points_for_attr = refined
    else:
        points_for_attr = result.changepoints
    if args.attribute:
        comps = spec.components if spec.kind == "multi" else (spec,)
        try:
            flags = attribute_features(
                series, points_for_attr, comps, table, epsilon=args.epsilon,
                level=args.level, trim=args.trim,
            )
        except ThresholdNotFound as exc:
            raise CliError(
                f"{exc}  (hint: simulate single_cp thresholds first: `sncp critval "
                f"simulate --family single_cp --epsilon {args.epsilon} --d <dim> "
                f"--level {args.level} --save`)"
            ) from exc
        doc["attribution"] = [
            {
                "k": k,
                "components": [
                    {
                        "functional": f.functional.encode(),
                        "stat": f.stat,
                        "threshold": f.threshold,
                        "flagged": f.flagged,
                    }
                    for f in row
                ],
            }
            for k, row in zip(points_for_attr.points, flags)
        ]
    _write_doc(doc, args.output)
    return 0


def _cmd_critval(args) -> int:
    cache_file = args.cache or cache_path_from_env()
    table = _load_cache(args.cache)
    if args.action == "lookup":
        try:
            thr = lookup(table, args.epsilon, args.d, args.level, args.family)
        except ThresholdNotFound as exc:
            raise CliError(str(exc)) from exc
        doc = {
            "command": "critval-lookup",
            "key": table_key(args.epsilon, args.d, args.level, args.family),
            "threshold": thr,
        }
        _write_doc(doc, args.output)
        return 0
    if args.action == "simulate":
        thr = simulate_threshold(
            args.epsilon, args.d, args.level, args.family,
            n_sim=args.n_sim, reps=args.reps, seed=args.seed, jobs=args.jobs,
        )
        provenance = {
            "n_sim": args.n_sim,
            "reps": args.reps,
            "seed": args.seed,
            "rng": "numpy PCG64 via SeedSequence(seed, spawn_key=(rep,))",
        }
        doc = {
            "command": "critval-simulate",
            "key": table_key(args.epsilon, args.d, args.level, args.family),
            "threshold": thr,
            "provenance": provenance,
        }
        if args.save:
            if not cache_file:
                raise CliError(
                    f"--save needs a cache path (--cache or ${CACHE_ENV_VAR})"
                )
            stored = CriticalValueTable()
            if os.path.exists(cache_file):
                stored = load_table(cache_file)
            stored.add(args.epsilon, args.d, args.level, args.family, thr, provenance)
            save_table(stored, cache_file)
            doc["saved_to"] = cache_file
        _write_doc(doc, args.output)
        return 0
    # export
    if not args.output:
        raise CliError("export needs --output")
    save_table(table, args.output)
    sys.stdout.write(f"wrote {len(table.entries)} entries to {args.output}\n")
    return 0


def _parse_params(pairs) -> dict:
    out = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise CliError(f"--param expects key=value, got {pair!r}")
        key, val = pair.split("=", 1)
        try:
            parsed = int(val)
        except ValueError:
            try:
                parsed = float(val)
            except ValueError:
                parsed = val
        out[key] = parsed
    return out


def _cmd_simulate(args) -> int:
    try:
        preset = get_preset(args.preset, **_parse_params(args.param))
    except (ValueError, TypeError) as exc:
        raise CliError(str(exc)) from exc
    series, cps = generate(preset, args.seed)
    _write_csv(args.output, series.data)
    sidecar = {
        "command": "simulate",
        "preset": preset.name,
        "params": {k: v for k, v in preset.params.items()},
        "n": preset.n,
        "p": preset.p,
        "seed": args.seed,
        "true_changepoints": list(cps.points),
        "csv": args.output,
        "rng": "numpy PCG64 via SeedSequence",
    }
    _write_doc(_jsonable_doc(sidecar), args.output + ".json")
    return 0


def _jsonable_doc(obj):
    if isinstance(obj, dict):
        return {k: _jsonable_doc(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable_doc(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def _cmd_benchmark(args) -> int:
    if args.reps < 1:
        raise CliError(f"--reps must be >= 1, got {args.reps}")
    try:
        preset = get_preset(args.preset, **_parse_params(args.param))
    except (ValueError, TypeError) as exc:
        raise CliError(str(exc)) from exc
    spec = parse_functional(args.functional)
    table = _load_cache(args.cache)
    d = spec.output_dim(preset.p)
    methods = {}
    for method in args.methods.split(","):
        method = method.strip()
        if not method:
            continue
        threshold, _ = _resolve_threshold(args, table, d, method)
        methods[method] = DetectionConfig(
            functional=spec,
            threshold=threshold,
            epsilon=args.epsilon,
            method=method,
            intervals=args.intervals,
            decay=args.decay,
            seed=args.seed,
        )
    if not methods:
        raise CliError("no methods given")
    refinement = None
    if args.refine:
        refinement = RefinementConfig(functional=spec, epsilon=args.epsilon, trim=args.trim)
    result = run_experiment(
        preset, methods, reps=args.reps, base_seed=args.seed,
        refinement=refinement, jobs=args.jobs,
    )
    doc = result.to_json_dict()
    doc["command"] = "benchmark"
    doc["config"] = {
        "functional": spec.encode(),
        "epsilon": args.epsilon,
        "level": args.level,
        "threshold": args.threshold,
        "methods": sorted(methods),
        "reps": args.reps,
        "seed": args.seed,
        "jobs": args.jobs,
        "refine": bool(args.refine),
        "rng": "numpy PCG64 via SeedSequence(seed, spawn_key=(rep,))",
    }
    _write_doc(_jsonable_doc(doc), args.output)
    if args.output:
        with open(os.path.splitext(args.output)[0] + ".csv", "w", newline="") as fh:
            csv.writer(fh).writerows(result.to_csv_rows())
    return 0


def _add_common_detection_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--functional", default="mean", help="functional spec, e.g. mean, variance, quantile:1,0.9")
    p.add_argument("--epsilon", type=float, default=0.05, help="window fraction (default 0.05)")
    p.add_argument("--level", type=float, default=0.90, help="critical-value level (default 0.90)")
    p.add_argument("--threshold", type=float, default=None, help="explicit threshold, bypasses the table")
    p.add_argument("--intervals", type=int, default=1000, help="random interval count for snwbs")
    p.add_argument("--decay", type=float, default=0.5 ** 0.25, help="seeded-interval decay for snsbs")
    p.add_argument("--cache", default=None, help=f"critical-value cache file (default ${CACHE_ENV_VAR})")
    p.add_argument("--trim", type=int, default=None, help="refinement trim (default ceil(eps*n/log n))")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sncp",
        description="Self-normalized multiple change-point estimation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="detect change-points in a CSV series")
    p.add_argument("--input", required=True, help="CSV file, rows = time, columns = dimensions")
    p.add_argument("--header", action="store_true", help="skip the first CSV row")
    p.add_argument("--method", default="sncp", choices=["sncp", "snbs", "snlocal", "snwbs", "snsbs"])
    _add_common_detection_flags(p)
    p.add_argument("--refine", action="store_true", help="apply CUSUM local refinement")
    p.add_argument("--attribute", action="store_true", help="per-component attribution at each point")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.add_argument("--output", default=None, help="write the JSON document here (default stdout)")
    p.set_defaults(fn=_cmd_detect)

    p = sub.add_parser("critval", help="critical-value table operations")
    p.add_argument("action", choices=["lookup", "simulate", "export"])
    p.add_argument("--family", default="nested", choices=["nested", "single_cp", "local"])
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--level", type=float, default=0.90)
    p.add_argument("--n-sim", type=int, default=2000)
    p.add_argument("--reps", type=int, default=5000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.add_argument("--save", action="store_true", help="store the simulated value in the cache")
    p.add_argument("--cache", default=None, help=f"cache file (default ${CACHE_ENV_VAR})")
    p.add_argument("--output", default=None)
    p.set_defaults(fn=_cmd_critval)

    p = sub.add_parser("simulate", help="draw one series from a named preset")
    p.add_argument("--preset", required=True, help=f"one of: {', '.join(list_presets())}")
    p.add_argument("--param", action="append", help="preset parameter key=value (repeatable)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True, help="CSV path; a .json sidecar is written too")
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("benchmark", help="replicated detection on a preset")
    p.add_argument("--preset", required=True)
    p.add_argument("--param", action="append", help="preset parameter key=value (repeatable)")
    p.add_argument("--methods", default="sncp", help="comma-separated method list")
    _add_common_detection_flags(p)
    p.add_argument("--refine", action="store_true")
    p.add_argument("--reps", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.add_argument("--output", default=None, help="JSON path; a sibling .csv table is written too")
    p.set_defaults(fn=_cmd_benchmark)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except CliError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except ValueError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
