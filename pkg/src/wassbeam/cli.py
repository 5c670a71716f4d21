"""Batch command-line interface.

Subcommands: ``design``, ``sweep``, ``verify``, ``beampattern``.
Exit codes: 0 success, 1 verification failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .experiment import CSV_HEADER, ConfigError, load_config, run_design, run_sweep
from .scenario import ArrayGeometry, beampattern, steering_vector
from .svg import line_plot
from .verify import LEVELS, run_suite

log = logging.getLogger("wassbeam")

EXIT_OK, EXIT_VERIFY_FAILED, EXIT_USAGE = 0, 1, 2


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _load_experiment(args):
    config = load_config(args.config)
    if args.seed is not None:
        config = replace(config, seed=args.seed, scenario=replace(config.scenario, seed=args.seed))
    if args.out is not None:
        config = replace(config, output_dir=Path(args.out))
    return config


def cmd_design(args) -> int:
    config = _load_experiment(args)
    result = run_design(config)
    config.output_dir.mkdir(parents=True, exist_ok=True)
    path = config.output_dir / "design.json"
    path.write_text(_dump_json(result))
    for entry in result["methods"]:
        log.info("%s: %s", entry["label"], entry["status"])
    print(path)
    return EXIT_OK


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def cmd_sweep(args) -> int:
    config = _load_experiment(args)
    rows = run_sweep(config, workers=args.workers)
    config.output_dir.mkdir(parents=True, exist_ok=True)
    path = config.output_dir / "sweep.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    if args.svg:
        series = {}
        for axis, label, mean_db, *_ in rows:
            xs, ys = series.setdefault(label, ([], []))
            xs.append(float(axis))
            ys.append(mean_db)
        svg = line_plot(series, "Mean output SINR", config.sweep.variable, "SINR (dB)")
        (config.output_dir / "sweep.svg").write_text(svg)
    print(path)
    return EXIT_OK


def cmd_verify(args) -> int:
    verdicts = run_suite(args.level, seed=args.seed or 0)
    lines = [v.to_json() for v in verdicts]
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "verdicts.jsonl").write_text("\n".join(lines) + "\n")
    for line in lines:
        print(line)
    failed = [v for v in verdicts if not v.passed]
    log.info("%d verdicts, %d failed", len(verdicts), len(failed))
    return EXIT_VERIFY_FAILED if failed else EXIT_OK


def parse_grid(spec: str) -> np.ndarray:
    """``start:stop:step`` (inclusive of stop) or a comma-separated list."""
    try:
        if ":" in spec:
            start, stop, step = (float(p) for p in spec.split(":"))
            if step <= 0:
                raise ValueError("step must be positive")
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            grid = start + step * np.arange(max(count, 0))
        else:
            grid = np.array([float(p) for p in spec.split(",") if p.strip()])
    except ValueError as exc:
        raise ConfigError(f"bad grid spec {spec!r}: {exc}") from exc
    if grid.size == 0:
        raise ConfigError("beampattern grid is empty")
    if np.any(np.abs(grid) >= 90):
        raise ConfigError("grid angles must lie strictly inside (-90, 90)")
    return grid


def cmd_beampattern(args) -> int:
    path = Path(args.design)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read design file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed design file: {exc}") from exc
    grid = parse_grid(args.grid)
    geometry = ArrayGeometry(doc["scenario"]["n_sensors"], doc["scenario"]["spacing_wavelengths"])
    entries = [m for m in doc["methods"] if "weights" in m]
    if args.method is not None:
        entries = [m for m in entries if m["label"] == args.method]
    if not entries:
        raise ConfigError("no usable design in file")
    out = Path(args.out) if args.out else path.parent
    out.mkdir(parents=True, exist_ok=True)
    series = {}
    for entry in entries:
        w = np.array(entry["weights"]["re"]) + 1j * np.array(entry["weights"]["im"])
        angles, power_db = beampattern(w, geometry, grid)
        csv_path = out / f"beampattern_{entry['label']}.csv"
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["angle_deg", "power_db"])
            for a, p in zip(angles, power_db):
                writer.writerow([repr(float(a)), repr(float(p))])
        series[entry["label"]] = (list(angles), list(power_db))
        print(csv_path)
    if args.svg:
        (out / "beampattern.svg").write_text(line_plot(series, "Beampattern", "angle (deg)", "power (dB)"))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wassbeam", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, func in (("design", cmd_design), ("sweep", cmd_sweep)):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="TOML experiment config")
        p.add_argument("--out", help="output directory (overrides output_dir)")
        p.add_argument("--seed", type=int, help="unsigned seed (overrides config)")
        if name == "sweep":
            p.add_argument("--svg", action="store_true", help="also write sweep.svg")
            p.add_argument("--workers", type=int, default=1)
        p.set_defaults(func=func)

    p = sub.add_parser("verify")
    p.add_argument("--level", choices=LEVELS, default="fast")
    p.add_argument("--out", help="also write verdicts.jsonl here")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("beampattern")
    p.add_argument("--design", required=True, help="design.json from the design command")
    p.add_argument("--grid", default="-89.5:89.5:0.5", help="start:stop:step or comma list (degrees)")
    p.add_argument("--method", help="only this method label")
    p.add_argument("--out", help="output directory (default: next to the design file)")
    p.add_argument("--svg", action="store_true")
    p.set_defaults(func=cmd_beampattern)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if getattr(args, "seed", None) is not None and args.seed < 0:
        parser.error("--seed must be unsigned")
    try:
        return args.func(args)
    except (ConfigError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
